use std::collections::HashMap;

use super::{Expr, ExprError, Node, Unknown};

impl Expr {
    /// Simultaneous replacement of unknown-function instances.
    pub fn substitute(&self, map: &HashMap<Unknown, Expr>) -> Result<Expr, ExprError> {
        for (k, v) in map {
            if let Some(u) = v.unknowns().into_iter().find(|u| map.contains_key(u)) {
                let name = if &u == k { k.to_string() } else { format!("{k} -> {u}") };
                return Err(ExprError::CyclicSubstitution(name));
            }
        }
        if map.is_empty() {
            return Ok(self.clone());
        }
        Ok(self.map_leaves(&|n| match n {
            Node::Unknown(u) => map.get(u).cloned(),
            _ => None,
        }))
    }

    /// Replace symbols by expressions (no cycle check; one pass).
    pub fn substitute_symbols(&self, map: &HashMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        self.map_leaves(&|n| match n {
            Node::Symbol(s) => map.get(&**s).cloned(),
            _ => None,
        })
    }

    /// Rebuild the tree through the smart constructors, replacing leaves for
    /// which `f` returns a value.
    pub(crate) fn map_leaves(&self, f: &dyn Fn(&Node) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Symbol(_) | Node::Unknown(_) => f(self.node()).unwrap_or_else(|| self.clone()),
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.map_leaves(f))),
            Node::Product(fs) => Expr::product(fs.iter().map(|t| t.map_leaves(f))),
            Node::Pow(b, r) => Expr::pow(b.map_leaves(f), *r),
            Node::Quot(n, d) => n.map_leaves(f).div(&d.map_leaves(f)),
            Node::Apply(func, a) => Expr::func(*func, a.map_leaves(f)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Workspace};

    fn ws() -> Workspace {
        let mut ws = Workspace::with_coordinates(&["x"]);
        ws.declare_function("f", "x").unwrap();
        ws.declare_function("g", "x").unwrap();
        ws
    }

    #[test]
    fn empty_map_is_identity() {
        let e = parse_expr("f(x)*g'(x) + x", &ws()).unwrap();
        assert_eq!(e.substitute(&HashMap::new()).unwrap(), e);
    }

    #[test]
    fn zero_substitution_kills_product() {
        let e = parse_expr("f'(x)*g(x)", &ws()).unwrap();
        let map = HashMap::from([(Unknown::new("f", "x", 1), Expr::zero())]);
        assert!(e.substitute(&map).unwrap().is_zero());
    }

    #[test]
    fn simultaneous_not_sequential() {
        let w = ws();
        let e = parse_expr("f'(x) + g'(x)", &w).unwrap();
        let map = HashMap::from([
            (Unknown::new("f", "x", 1), parse_expr("g(x)", &w).unwrap()),
            (Unknown::new("g", "x", 1), parse_expr("f(x)", &w).unwrap()),
        ]);
        assert_eq!(e.substitute(&map).unwrap(), parse_expr("g(x) + f(x)", &w).unwrap());
    }

    #[test]
    fn cycles_are_rejected() {
        let w = ws();
        let map = HashMap::from([(Unknown::new("f", "x", 1), parse_expr("2*f'(x)", &w).unwrap())]);
        assert!(matches!(Expr::one().substitute(&map), Err(ExprError::CyclicSubstitution(_))));
    }
}
