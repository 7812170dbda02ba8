use std::collections::BTreeMap;

use super::{CoframeSpec, FrameError};
use crate::exterior::{Blade, Coefficient, Form};

/// Partition of generator indices into fiber 1, fiber 2 and base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriGradeSplit {
    fiber1: Blade,
    fiber2: Blade,
    base: Blade,
    dim: usize,
}

pub type Grade = (usize, usize, usize);

impl TriGradeSplit {
    pub fn new(dim: usize, fiber1: &[usize], fiber2: &[usize], base: &[usize]) -> Result<Self, FrameError> {
        let mask = |idx: &[usize]| -> Result<Blade, FrameError> {
            let mut b = Blade::EMPTY;
            for &i in idx {
                if i == 0 || i > dim || b.contains(i) {
                    return Err(FrameError::Invalid(format!("bad grading index {i}")));
                }
                b = b.union(Blade::single(i));
            }
            Ok(b)
        };
        let (f1, f2, b) = (mask(fiber1)?, mask(fiber2)?, mask(base)?);
        if f1.intersects(f2) || f1.intersects(b) || f2.intersects(b) {
            return Err(FrameError::Invalid("grading classes overlap".into()));
        }
        if f1.union(f2).union(b) != Blade::volume(dim) {
            return Err(FrameError::Invalid("grading classes do not cover the dimension".into()));
        }
        Ok(TriGradeSplit { fiber1: f1, fiber2: f2, base: b, dim })
    }

    /// First fiber block, second fiber block (or nothing), then the base.
    pub fn from_coframe(cf: &CoframeSpec) -> Result<Self, FrameError> {
        let blocks = cf.blocks();
        let d1 = blocks.first().map_or(0, |b| b.dim);
        let d2 = blocks.get(1).map_or(0, |b| b.dim);
        let fiber_total: usize = blocks.iter().map(|b| b.dim).sum();
        if d1 + d2 != fiber_total {
            return Err(FrameError::Invalid("tri-grading needs at most two fiber blocks".into()));
        }
        let f1: Vec<usize> = (1..=d1).collect();
        let f2: Vec<usize> = (d1 + 1..=d1 + d2).collect();
        let base: Vec<usize> = (d1 + d2 + 1..=cf.dim()).collect();
        TriGradeSplit::new(cf.dim(), &f1, &f2, &base)
    }

    pub fn grade(&self, b: Blade) -> Grade {
        let count = |m: Blade| (b.bits() & m.bits()).count_ones() as usize;
        (count(self.fiber1), count(self.fiber2), count(self.base))
    }

    pub fn sizes(&self) -> Grade {
        (self.fiber1.degree(), self.fiber2.degree(), self.base.degree())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Routes each blade of `form` by its grade.
    pub fn decompose<C: Coefficient>(&self, form: &Form<C>) -> BTreeMap<Grade, Form<C>> {
        let mut out: BTreeMap<Grade, Form<C>> = BTreeMap::new();
        let mut grades: Vec<Grade> = form.blades().map(|b| self.grade(b)).collect();
        grades.sort();
        grades.dedup();
        for g in grades {
            out.insert(g, form.filter(|b| self.grade(b) == g));
        }
        out
    }

    /// All blades of the given grade.
    pub fn blades_of_grade(&self, g: Grade) -> Vec<Blade> {
        Blade::all(self.dim, g.0 + g.1 + g.2).into_iter().filter(|b| self.grade(*b) == g).collect()
    }
}
