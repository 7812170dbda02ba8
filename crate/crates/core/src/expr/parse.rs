use num_traits::{CheckedMul, Zero};

use super::{Expr, ExprError, Func, Rational, SymbolKind, Unknown, Workspace};

/// Parse an expression against the identifiers declared in `ws`.
///
/// Bare names of declared unknown functions (`a`, `a'`) resolve to instances
/// at the function's declared argument.
pub fn parse_expr(text: &str, ws: &Workspace) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, ws };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ws: &'a Workspace,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = acc.mul(&self.factor()?);
            } else if self.eat(b'/') {
                acc = acc.div(&self.factor()?);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.base()?;
        if self.eat(b'^') {
            let r = self.rational()?;
            Ok(Expr::pow(base, r))
        } else {
            Ok(base)
        }
    }

    fn integer(&mut self) -> Result<i64, ExprError> {
        self.skip_ws();
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: i64 = s.parse().map_err(|_| {
            ExprError::Syntax { offset: start, message: "integer out of range".into() }
        })?;
        Ok(if neg { -v } else { v })
    }

    fn rational(&mut self) -> Result<Rational, ExprError> {
        if self.eat(b'(') {
            let n = self.integer()?;
            let d = if self.eat(b'/') { self.integer()? } else { 1 };
            if d == 0 {
                return Err(self.error("zero denominator in exponent"));
            }
            self.expect(b')')?;
            Ok(Rational::new(n, d))
        } else {
            Ok(Rational::from_integer(self.integer()?))
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let mut value = Rational::zero();
        let ten = Rational::from_integer(10);
        let overflow = |pos| ExprError::Syntax { offset: pos, message: "number out of range".into() };
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            let digit = Rational::from_integer(i64::from(self.src[self.pos] - b'0'));
            value = value.checked_mul(&ten).ok_or_else(|| overflow(start))? + digit;
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let mut scale = Rational::from_integer(1);
            let frac_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                scale = scale.checked_mul(&Rational::new(1, 10)).ok_or_else(|| overflow(start))?;
                let digit = Rational::from_integer(i64::from(self.src[self.pos] - b'0'));
                value += digit.checked_mul(&scale).ok_or_else(|| overflow(start))?;
                self.pos += 1;
            }
            if frac_start == self.pos {
                return Err(ExprError::Syntax { offset: self.pos, message: "expected digits after `.`".into() });
            }
        }
        Ok(Expr::constant(value))
    }

    fn ident(&mut self) -> Option<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src;
        if start < bytes.len() && (bytes[start].is_ascii_alphabetic() || bytes[start] == b'_') {
            let mut end = start + 1;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            Some((start, std::str::from_utf8(&bytes[start..end]).unwrap()))
        } else {
            None
        }
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(self.base()?.neg())
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => {
                let Some((_, name)) = self.ident() else {
                    return Err(self.error("unexpected character"));
                };
                let mut order = 0u32;
                while self.pos < self.src.len() && self.src[self.pos] == b'\'' {
                    order += 1;
                    self.pos += 1;
                }
                if order == 0 {
                    if let Some(f) = Func::from_name(name) {
                        if self.peek() == Some(b'(') && self.ws.symbol(name).is_none() {
                            self.pos += 1;
                            let arg = self.expr()?;
                            self.expect(b')')?;
                            return Ok(Expr::func(f, arg));
                        }
                    }
                }
                if let Some(arg) = self.ws.function_arg(name) {
                    let save = self.pos;
                    if self.eat(b'(') {
                        if let Some((_, a)) = self.ident() {
                            if self.eat(b')') {
                                return match self.ws.symbol(a) {
                                    Some(s) if s.kind == SymbolKind::BaseCoordinate => {
                                        Ok(Expr::unknown(Unknown::new(name, a, order)))
                                    }
                                    Some(_) => Err(ExprError::NotBaseCoordinate(a.to_string())),
                                    None => Err(ExprError::Undeclared(a.to_string())),
                                };
                            }
                        }
                        // `a (x + 1)` is not an instance; treat as a bare name
                        self.pos = save;
                    }
                    return Ok(Expr::unknown(Unknown::new(name, arg, order)));
                }
                if order > 0 {
                    return Err(ExprError::Undeclared(name.to_string()));
                }
                match self.ws.symbol(name) {
                    Some(_) => Ok(Expr::symbol(name)),
                    None => Err(ExprError::Undeclared(name.to_string())),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{EvalBinding, Node};

    fn ws() -> Workspace {
        let mut ws = Workspace::with_coordinates(&["x", "y"]);
        ws.declare_parameter("b");
        ws.declare_function("a", "x").unwrap();
        ws.declare_function("A", "x").unwrap();
        ws.declare_function("Ahat", "x").unwrap();
        ws
    }

    #[test]
    fn frame_coefficient_evaluates() {
        let e = parse_expr("(1/2)*b^(3/4)*sech(y)", &ws()).unwrap();
        let v = e.eval(&EvalBinding::new().sym("b", 1.0).sym("y", 0.0)).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn primes_give_derivative_order() {
        let e = parse_expr("a'(x)", &ws()).unwrap();
        assert_eq!(*e.node(), Node::Unknown(Unknown::new("a", "x", 1)));
        let bare = parse_expr("a''", &ws()).unwrap();
        assert_eq!(*bare.node(), Node::Unknown(Unknown::new("a", "x", 2)));
    }

    #[test]
    fn bare_function_names_resolve() {
        let e = parse_expr("1 - Ahat^2/(4*A^2)", &ws()).unwrap();
        let b = EvalBinding::new().unknown_key("A", 0, 1.0).unknown_key("Ahat", 0, 2.0);
        assert!((e.eval(&b).unwrap() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_offsets_and_names() {
        match parse_expr("x + * y", &ws()) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_expr("x + z", &ws()), Err(ExprError::Undeclared("z".into())));
        assert!(parse_expr("x)", &ws()).is_err());
    }

    #[test]
    fn decimals_are_exact() {
        let e = parse_expr("0.25", &ws()).unwrap();
        assert_eq!(e.as_rational(), Some(Rational::new(1, 4)));
    }
}
