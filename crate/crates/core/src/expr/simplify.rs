use super::{Expr, Node, Rational};

/// Expansion stops multiplying out once a product would exceed this many terms.
const EXPAND_LIMIT: usize = 20_000;

impl Expr {
    /// Multiplies out products of sums, expands small positive integer powers
    /// and splits quotients whose denominator is a single monomial. Factors
    /// are put in a canonical order so that like terms merge.
    pub fn expand(&self) -> Expr {
        Expr::sum(expand_terms(self))
    }

    /// True if the expression has no sums outside function arguments and
    /// power bases with fractional exponents.
    pub fn is_monomial(&self) -> bool {
        match self.node() {
            Node::Sum(_) | Node::Quot(..) => false,
            Node::Product(fs) => fs.iter().all(Expr::is_monomial),
            _ => true,
        }
    }
}

fn factor_key(e: &Expr) -> (u8, String) {
    let rank = match e.node() {
        Node::Const(_) => 0,
        Node::Symbol(_) => 1,
        Node::Unknown(_) => 2,
        Node::Pow(b, _) => match b.node() {
            Node::Symbol(_) => 1,
            Node::Unknown(_) => 2,
            _ => 4,
        },
        Node::Apply(..) => 3,
        _ => 5,
    };
    let base = match e.node() {
        Node::Pow(b, _) => b.to_string(),
        _ => e.to_string(),
    };
    (rank, base)
}

fn canonical_product(factors: Vec<Expr>) -> Expr {
    let p = Expr::product(factors);
    match p.node() {
        Node::Product(fs) => {
            let (consts, mut rest): (Vec<Expr>, Vec<Expr>) =
                fs.iter().cloned().partition(|f| matches!(f.node(), Node::Const(_)));
            rest.sort_by_cached_key(factor_key);
            let mut all = consts;
            all.extend(rest);
            Expr::raw(Node::Product(all))
        }
        _ => p,
    }
}

fn multiply_out(lists: &[Vec<Expr>]) -> Option<Vec<Expr>> {
    let total = lists.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len().max(1)))?;
    if total > EXPAND_LIMIT {
        return None;
    }
    let mut acc: Vec<Vec<Expr>> = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::with_capacity(acc.len() * l.len());
        for prefix in &acc {
            for t in l {
                let mut v = prefix.clone();
                v.push(t.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    Some(acc.into_iter().map(canonical_product).collect())
}

fn expand_terms(e: &Expr) -> Vec<Expr> {
    match e.node() {
        Node::Const(_) | Node::Symbol(_) | Node::Unknown(_) => vec![e.clone()],
        Node::Apply(f, a) => vec![Expr::func(*f, a.expand())],
        Node::Sum(ts) => ts.iter().flat_map(expand_terms).collect(),
        Node::Product(fs) => {
            let lists: Vec<Vec<Expr>> = fs.iter().map(expand_terms).collect();
            multiply_out(&lists).unwrap_or_else(|| vec![e.clone()])
        }
        Node::Pow(b, r) => {
            let base = expand_terms(b);
            if base.len() == 1 {
                let p = Expr::pow(base[0].clone(), *r);
                return vec![canonical_product(vec![p])];
            }
            if r.is_integer() && *r.numer() > 1 && *r.numer() <= 6 {
                let lists = vec![base.clone(); *r.numer() as usize];
                if let Some(v) = multiply_out(&lists) {
                    return v;
                }
            }
            vec![Expr::pow(Expr::sum(base), *r)]
        }
        Node::Quot(n, d) => {
            let den = expand_terms(d);
            let num = expand_terms(n);
            if den.len() == 1 && den[0].is_monomial() {
                let inv = Expr::pow(den[0].clone(), Rational::from_integer(-1));
                if inv.is_monomial() {
                    return num.into_iter().map(|t| canonical_product(vec![t, inv.clone()])).collect();
                }
            }
            vec![Expr::sum(num).div(&Expr::sum(den))]
        }
    }
}
