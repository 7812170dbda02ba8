//! Line-oriented ansatz documents and closure files.
//!
//! ```text
//! [frames]
//! theta = su2 1          # block name, kind, scale
//! t = abelian 2
//! base = x, y            # base coordinates; generators dx, dy
//! [unknowns]
//! A = x                  # A is a function of x
//! [coframe]
//! e1 = A * theta1 + dx
//! [structure]
//! kind = g2
//! [domain]
//! A = 0.5, 2
//! [options]
//! points = 100
//! seed = 42
//! tol = 1e-8
//! lambda = auto
//! embedding = paired     # identity | paired | signed list such as 1 2 -5 4 3 6 -7
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::expr::zero::Domain;
use crate::expr::{parse_expr, Expr, Rational, Workspace};
use crate::flows::FlowSystem;
use crate::frames::{AnsatzFrame, CoframeSpec, Embedding, FiberBlock};
use crate::structures::{paired_embedding, StructureKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocError {
    /// 1-based line, 0 for document-level problems.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for DocError {}

fn err(line: usize, message: impl Into<String>) -> DocError {
    DocError { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Frames,
    Unknowns,
    Coframe,
    Structure,
    Domain,
    Options,
}

impl Section {
    fn parse(name: &str) -> Option<Section> {
        Some(match name {
            "frames" => Section::Frames,
            "unknowns" => Section::Unknowns,
            "coframe" => Section::Coframe,
            "structure" => Section::Structure,
            "domain" => Section::Domain,
            "options" => Section::Options,
            _ => return None,
        })
    }
}

/// Values from `[options]`; absent entries fall back to command-line flags
/// or built-in defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocOptions {
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub lambda: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AnsatzDocument {
    pub blocks: Vec<FiberBlock>,
    pub base: Vec<String>,
    /// Function name and the coordinate it depends on, in declaration order.
    pub unknowns: Vec<(String, String)>,
    /// `(line, element index, right-hand side)`.
    pub coframe: Vec<(usize, usize, String)>,
    pub structure: Option<StructureKind>,
    pub domain: Vec<(String, f64, f64)>,
    pub embedding: Option<String>,
    pub options: DocOptions,
}

fn split_assignment(line: &str, n: usize) -> Result<(&str, &str), DocError> {
    let (k, v) = line.split_once('=').ok_or_else(|| err(n, format!("expected `name = value`, found `{line}`")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(err(n, "empty name before `=`"));
    }
    Ok((k, v.trim()))
}

fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|f| f.is_ascii_alphabetic() || f == '_') && c.all(|x| x.is_ascii_alphanumeric() || x == '_')
}

fn parse_rational(text: &str, n: usize) -> Result<Rational, DocError> {
    text.trim().parse::<Rational>().map_err(|_| err(n, format!("`{text}` is not a rational number")))
}

fn parse_value<T: std::str::FromStr>(text: &str, n: usize, what: &str) -> Result<T, DocError> {
    text.parse().map_err(|_| err(n, format!("`{text}` is not a valid {what}")))
}

impl AnsatzDocument {
    pub fn parse(text: &str) -> Result<Self, DocError> {
        let mut doc = AnsatzDocument {
            blocks: Vec::new(),
            base: Vec::new(),
            unknowns: Vec::new(),
            coframe: Vec::new(),
            structure: None,
            domain: Vec::new(),
            embedding: None,
            options: DocOptions::default(),
        };
        let mut section: Option<Section> = None;
        let mut base_line = None;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err(n, "unterminated section header"))?.trim();
                section = Some(Section::parse(name).ok_or_else(|| err(n, format!("unknown section `[{name}]`")))?);
                continue;
            }
            let Some(sec) = section else {
                return Err(err(n, "content before the first section header"));
            };
            match sec {
                Section::Frames => {
                    let (k, v) = split_assignment(line, n)?;
                    if k == "base" {
                        if base_line.replace(n).is_some() {
                            return Err(err(n, "`base` given twice"));
                        }
                        for c in v.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                            if !is_identifier(c) {
                                return Err(err(n, format!("`{c}` is not a valid coordinate name")));
                            }
                            doc.base.push(c.to_string());
                        }
                        continue;
                    }
                    if !is_identifier(k) {
                        return Err(err(n, format!("`{k}` is not a valid block name")));
                    }
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    let block = match parts.as_slice() {
                        ["su2"] => FiberBlock::su2(k, Rational::from_integer(1)),
                        ["su2", l] => FiberBlock::su2(k, parse_rational(l, n)?),
                        ["abelian", d] => {
                            let d: usize = parse_value(d, n, "block dimension")?;
                            if d == 0 {
                                return Err(err(n, "abelian block of dimension 0"));
                            }
                            FiberBlock::abelian(k, d)
                        }
                        _ => return Err(err(n, format!("expected `su2 [scale]` or `abelian <dim>`, found `{v}`"))),
                    };
                    doc.blocks.push(block);
                }
                Section::Unknowns => {
                    let (k, v) = split_assignment(line, n)?;
                    if !is_identifier(k) || !is_identifier(v) {
                        return Err(err(n, format!("expected `function = coordinate`, found `{line}`")));
                    }
                    if doc.unknowns.iter().any(|(u, _)| u == k) {
                        return Err(err(n, format!("unknown `{k}` declared twice")));
                    }
                    doc.unknowns.push((k.to_string(), v.to_string()));
                }
                Section::Coframe => {
                    let (k, v) = split_assignment(line, n)?;
                    let idx: usize = k
                        .strip_prefix('e')
                        .and_then(|d| d.parse().ok())
                        .filter(|d| *d > 0)
                        .ok_or_else(|| err(n, format!("frame element must be written e<k>, found `{k}`")))?;
                    if doc.coframe.iter().any(|(_, j, _)| *j == idx) {
                        return Err(err(n, format!("e{idx} defined twice")));
                    }
                    doc.coframe.push((n, idx, v.to_string()));
                }
                Section::Structure => {
                    let value = match line.split_once('=') {
                        Some((k, v)) if k.trim() == "kind" => v.trim(),
                        Some((k, _)) => return Err(err(n, format!("unknown structure key `{}`", k.trim()))),
                        None => line,
                    };
                    doc.structure = Some(value.parse().map_err(|e: String| err(n, e))?);
                }
                Section::Domain => {
                    let (k, v) = split_assignment(line, n)?;
                    let v = v.trim_start_matches('[').trim_end_matches(']');
                    let (lo, hi) = v.split_once(',').ok_or_else(|| err(n, "domain entries are `name = lo, hi`"))?;
                    let lo: f64 = parse_value(lo.trim(), n, "number")?;
                    let hi: f64 = parse_value(hi.trim(), n, "number")?;
                    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(err(n, format!("empty or non-finite interval [{lo}, {hi}]")));
                    }
                    doc.domain.push((k.to_string(), lo, hi));
                }
                Section::Options => {
                    let (k, v) = split_assignment(line, n)?;
                    match k {
                        "points" => doc.options.points = Some(parse_value(v, n, "point count")?),
                        "seed" => doc.options.seed = Some(parse_value(v, n, "seed")?),
                        "tol" => doc.options.tol = Some(parse_value(v, n, "tolerance")?),
                        "lambda" => doc.options.lambda = Some(v.to_string()),
                        "embedding" => doc.embedding = Some(v.to_string()),
                        other => return Err(err(n, format!("unknown option `{other}`"))),
                    }
                }
            }
        }
        Ok(doc)
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum::<usize>() + self.base.len()
    }

    /// Builds the frame, checking declarations, element count and
    /// linearity in the generators.
    pub fn to_frame(&self) -> Result<AnsatzFrame, DocError> {
        if self.blocks.is_empty() && self.base.is_empty() {
            return Err(err(0, "the [frames] section declares no generators"));
        }
        let cf = CoframeSpec::new(self.blocks.clone(), self.base.clone()).map_err(|e| err(0, e.to_string()))?;
        let n = cf.dim();
        if let Some(kind) = self.structure {
            if kind.dim() != n {
                return Err(err(0, format!("structure {kind} needs {} frame elements, the frames give {n}", kind.dim())));
            }
        }
        let coords: Vec<&str> = self.base.iter().map(String::as_str).collect();
        let mut ws = Workspace::with_coordinates(&coords);
        for (u, arg) in &self.unknowns {
            if cf.generator_names().contains(u) {
                return Err(err(0, format!("unknown `{u}` shadows a generator")));
            }
            ws.declare_function(u, arg).map_err(|e| err(0, format!("unknown `{u}`: {e}")))?;
        }
        let mut gen_ws = ws.clone();
        for g in cf.generator_names() {
            if ws.is_declared(g) {
                return Err(err(0, format!("generator `{g}` clashes with a declared name")));
            }
            gen_ws.declare_parameter(g);
        }
        let zero_gens: HashMap<String, Expr> =
            cf.generator_names().iter().map(|g| (g.clone(), Expr::zero())).collect();
        let mut rows = vec![vec![Expr::zero(); n]; n];
        let mut seen = vec![false; n];
        for (line, idx, text) in &self.coframe {
            if *idx > n {
                return Err(err(*line, format!("e{idx} exceeds the frame dimension {n}")));
            }
            seen[idx - 1] = true;
            let e = parse_expr(text, &gen_ws).map_err(|e| err(*line, e.to_string()))?;
            for (g, name) in cf.generator_names().iter().enumerate() {
                let c = e.partial_symbol(name).rational_simplify();
                if cf.generator_names().iter().any(|h| c.contains_symbol(h)) {
                    return Err(err(*line, format!("e{idx} is not linear in the generators")));
                }
                rows[idx - 1][g] = c;
            }
            let rest = e.substitute_symbols(&zero_gens).rational_simplify();
            if !rest.is_zero() {
                return Err(err(*line, format!("e{idx} has a term without a generator: {}", rest.bare())));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(err(0, format!("frame has {n} generators but e{} is not defined", missing + 1)));
        }
        let mut domain = Domain::new();
        for (k, lo, hi) in &self.domain {
            domain.set(k, *lo, *hi);
        }
        let mut frame = AnsatzFrame::new(cf, ws, rows).map_err(|e| err(0, e.to_string()))?.with_domain(domain);
        if let Some(text) = &self.embedding {
            let emb = match text.as_str() {
                "identity" => Embedding::identity(n),
                "paired" if n == 7 || n == 8 => paired_embedding(n),
                "paired" => return Err(err(0, "the paired embedding needs 7 or 8 generators")),
                other => Embedding::parse(other).map_err(|e| err(0, e.to_string()))?,
            };
            frame = frame.with_embedding(emb).map_err(|e| err(0, e.to_string()))?;
        }
        Ok(frame)
    }
}

/// Parses `du/dt = rhs` lines (or `u' = rhs`) into a flow system for
/// `frame`. Unknowns must match the frame's.
pub fn parse_closure(text: &str, frame: &AnsatzFrame) -> Result<FlowSystem, DocError> {
    let variable = frame
        .flow_coordinate()
        .ok_or_else(|| err(0, "the ansatz unknowns do not share a single flow coordinate"))?;
    let unknowns = frame.unknowns();
    let mut eqs: BTreeMap<String, (usize, Expr)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) = split_assignment(line, n)?;
        let name = match lhs.strip_suffix('\'') {
            Some(u) => u.trim().to_string(),
            None => {
                let (top, bottom) = lhs
                    .split_once('/')
                    .ok_or_else(|| err(n, format!("left side must be `du/d{variable}` or `u'`, found `{lhs}`")))?;
                if bottom.trim() != format!("d{variable}") {
                    return Err(err(n, format!("derivative must be taken in `{variable}`")));
                }
                top.trim()
                    .strip_prefix('d')
                    .ok_or_else(|| err(n, format!("left side must be `du/d{variable}`, found `{lhs}`")))?
                    .to_string()
            }
        };
        if !unknowns.contains(&name) {
            return Err(err(n, format!("`{name}` is not an unknown of the ansatz")));
        }
        let e = parse_expr(rhs, frame.workspace()).map_err(|e| err(n, e.to_string()))?;
        if e.unknowns().iter().any(|u| u.order > 0) {
            return Err(err(n, "right-hand sides may not contain derivatives"));
        }
        if eqs.insert(name.clone(), (n, e)).is_some() {
            return Err(err(n, format!("second equation for `{name}`")));
        }
    }
    let mut out = Vec::with_capacity(unknowns.len());
    for u in &unknowns {
        let (_, e) = eqs.remove(u).ok_or_else(|| err(0, format!("closure has no equation for `{u}`")))?;
        out.push((u.clone(), e));
    }
    Ok(FlowSystem::new(&variable, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "
[frames]
base = x1, x2, x3, x4, x5, x6, x7
[coframe]
e1 = dx1
e2 = dx2
e3 = dx3
e4 = dx4
e5 = dx5
e6 = dx6
e7 = dx7
[structure]
g2
";

    #[test]
    fn flat_document_builds() {
        let doc = AnsatzDocument::parse(FLAT).unwrap();
        assert_eq!(doc.dim(), 7);
        assert_eq!(doc.structure, Some(StructureKind::G2));
        let f = doc.to_frame().unwrap();
        assert!(f.rows()[3][3].is_one());
    }

    #[test]
    fn coframe_coefficients_are_extracted() {
        let text = "
[frames]
theta = su2 -1/2
base = x
[unknowns]
A = x
[coframe]
e1 = A*(theta1 - theta2)
e2 = theta2
e3 = 2*theta3 + A^2*dx
e4 = dx
";
        let doc = AnsatzDocument::parse(text).unwrap();
        assert_eq!(doc.blocks[0].lambda, Rational::new(-1, 2));
        let f = doc.to_frame().unwrap();
        assert_eq!(f.rows()[0][1].bare().to_string(), "-A");
        assert_eq!(f.rows()[2][3].bare().to_string(), "A^2");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = AnsatzDocument::parse("[frames]\nbase = x\n[bogus]\n").unwrap_err();
        assert_eq!(e.line, 3);
        let head = "[frames]\nbase = x, y\n[coframe]\ne2 = dy\n";
        let e = AnsatzDocument::parse(&format!("{head}e1 = dx + 1\n")).unwrap().to_frame().unwrap_err();
        assert_eq!(e.line, 5);
        let e = AnsatzDocument::parse(&format!("{head}e1 = dx*dy\n")).unwrap().to_frame().unwrap_err();
        assert!(e.message.contains("linear"));
        let e = AnsatzDocument::parse(&format!("{head}e1 = B*dx\n")).unwrap().to_frame().unwrap_err();
        assert_eq!(e.line, 5);
    }

    #[test]
    fn missing_element_and_dimension_mismatch() {
        let text = "[frames]\nbase = x, y\n[coframe]\ne1 = dx\n";
        assert!(AnsatzDocument::parse(text).unwrap().to_frame().unwrap_err().message.contains("e2"));
        let text = "[frames]\nbase = x, y\n[coframe]\ne1 = dx\ne2 = dy\n[structure]\nspin7\n";
        assert!(AnsatzDocument::parse(text).unwrap().to_frame().unwrap_err().message.contains("spin7"));
    }

    #[test]
    fn closure_file_round_trip() {
        let text = "[frames]\nbase = x, y\n[unknowns]\nA = x\n[coframe]\ne1 = A*dx\ne2 = dy\n";
        let frame = AnsatzDocument::parse(text).unwrap().to_frame().unwrap();
        let flow = parse_closure("dA/dx = A^2  # comment\n", &frame).unwrap();
        assert_eq!(flow.unknowns, vec!["A".to_string()]);
        assert_eq!(flow.rhs[0].bare().to_string(), "A^2");
        assert!(parse_closure("A' = 1\nA' = 2\n", &frame).is_err());
        assert_eq!(parse_closure("dB/dx = 1\n", &frame).unwrap_err().line, 1);
    }
}
