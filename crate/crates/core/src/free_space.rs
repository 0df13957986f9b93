//! The isometric embedding `eta` of `R` into `L^1(R)` and the barycenter
//! `rho` of formal linear combinations of functions.

use alloc::vec;
use alloc::vec::Vec;

use crate::function_space::GridFunction;
use crate::{Error, Result};

/// Finite sum of `value * 1_[lo, hi)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepFunction {
    pieces: Vec<(f64, f64, f64)>,
}

impl StepFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn indicator(lo: f64, hi: f64, value: f64) -> Self {
        if lo < hi && value != 0.0 {
            Self { pieces: vec![(lo, hi, value)] }
        } else {
            Self::zero()
        }
    }

    pub fn pieces(&self) -> &[(f64, f64, f64)] {
        &self.pieces
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces.iter().filter(|(l, h, _)| *l <= x && x < *h).map(|p| p.2).sum()
    }

    pub fn linear_combination(&self, alpha: f64, other: &StepFunction, beta: f64) -> StepFunction {
        let a = self.pieces.iter().map(|(l, h, v)| (*l, *h, alpha * v));
        let b = other.pieces.iter().map(|(l, h, v)| (*l, *h, beta * v));
        StepFunction { pieces: a.chain(b).collect() }
    }

    /// Exact `int |s|` over the merged breakpoints.
    pub fn l1_norm(&self) -> f64 {
        let mut cuts: Vec<f64> = self.pieces.iter().flat_map(|(l, h, _)| [*l, *h]).collect();
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        cuts.windows(2).map(|w| (w[1] - w[0]) * self.eval(w[0]).abs()).sum()
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let s = self.clone();
        GridFunction::scalar(move |x| s.eval(x))
    }
}

/// `1_[0, r)` for `r > 0`, `-1_[r, 0)` for `r < 0`, zero for `r = 0`.
pub fn eta(r: f64) -> StepFunction {
    if r >= 0.0 {
        StepFunction::indicator(0.0, r, 1.0)
    } else {
        StepFunction::indicator(r, 0.0, -1.0)
    }
}

/// `|| eta(r) - eta(s) ||_1`.
pub fn eta_distance(r: f64, s: f64) -> f64 {
    eta(r).linear_combination(1.0, &eta(s), -1.0).l1_norm()
}

/// `sum alpha_i delta_{f_i}`.
#[derive(Debug, Clone)]
pub struct FormalCombination {
    dim_in: usize,
    dim_out: usize,
    atoms: Vec<(f64, GridFunction)>,
}

impl FormalCombination {
    pub fn empty(dim_in: usize, dim_out: usize) -> Self {
        Self { dim_in, dim_out, atoms: Vec::new() }
    }

    /// `delta_f`.
    pub fn single(f: GridFunction) -> Self {
        Self { dim_in: f.dim_in(), dim_out: f.dim_out(), atoms: vec![(1.0, f)] }
    }

    pub fn push(&mut self, alpha: f64, f: GridFunction) -> Result<()> {
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        if f.dim_in() != self.dim_in || f.dim_out() != self.dim_out {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: f.dim_in() });
        }
        self.atoms.push((alpha, f));
        Ok(())
    }

    pub fn from_atoms(atoms: Vec<(f64, GridFunction)>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::param("atoms", "need at least one atom; use `empty`"))?;
        let mut c = Self::empty(first.1.dim_in(), first.1.dim_out());
        for (a, f) in atoms {
            c.push(a, f)?;
        }
        Ok(c)
    }

    pub fn atoms(&self) -> &[(f64, GridFunction)] {
        &self.atoms
    }

    /// `alpha * self + beta * other` as a formal combination.
    pub fn combine(&self, alpha: f64, other: &FormalCombination, beta: f64) -> Result<FormalCombination> {
        let mut out = Self::empty(self.dim_in, self.dim_out);
        for (a, f) in &self.atoms {
            out.push(alpha * a, f.clone())?;
        }
        for (a, f) in &other.atoms {
            out.push(beta * a, f.clone())?;
        }
        Ok(out)
    }
}

/// Barycenter `rho(sum alpha_i delta_{f_i}) = sum alpha_i f_i`.
pub fn rho(c: &FormalCombination) -> GridFunction {
    let atoms = c.atoms.clone();
    let n = c.dim_out;
    GridFunction::new(c.dim_in, n, move |x, y| {
        y.fill(0.0);
        let mut tmp = vec![0.0; n];
        for (a, f) in &atoms {
            f.eval_into(x, &mut tmp);
            for (o, v) in y.iter_mut().zip(&tmp) {
                *o += a * v;
            }
        }
    })
}
