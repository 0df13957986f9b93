//! Grid-sampled functions `R^m -> R^n` and the metrics used throughout:
//! the `d_ucc` metric of uniform convergence on compacts, `L^p_mu` norms,
//! sup norms on balls and weighted sup norms.
//!
//! Every sup computed here is a maximum over finitely many grid points and
//! is therefore a lower bound on the true supremum.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math::{self, sqrt};
use crate::{Error, Result};

/// Uniform tensor grid on `[-radius, radius]^dim_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim_in: usize,
    pub dim_out: usize,
    pub points_per_axis: usize,
    pub radius: f64,
}

impl GridSpec {
    pub fn new(dim_in: usize, dim_out: usize, points_per_axis: usize, radius: f64) -> Result<Self> {
        let g = Self { dim_in, dim_out, points_per_axis, radius };
        g.validate()?;
        Ok(g)
    }

    /// Scalar grid (`m = n = 1`).
    pub fn line(points_per_axis: usize, radius: f64) -> Result<Self> {
        Self::new(1, 1, points_per_axis, radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_in == 0 {
            return Err(Error::param("dim_in", "must be positive"));
        }
        if self.dim_out == 0 {
            return Err(Error::param("dim_out", "must be positive"));
        }
        if self.points_per_axis < 2 {
            return Err(Error::param("points_per_axis", "must be at least 2"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::param("radius", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_points(mut self, points_per_axis: usize) -> Self {
        self.points_per_axis = points_per_axis;
        self
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.points_per_axis - 1) as f64
    }

    /// Visits every grid point of the cube.
    pub fn for_each_point(&self, f: impl FnMut(&[f64])) {
        let lo = vec![-self.radius; self.dim_in];
        let hi = vec![self.radius; self.dim_in];
        for_each_box_point(&lo, &hi, self.points_per_axis, f);
    }
}

/// Visits a uniform tensor grid on the box `[lo, hi]` with `points` samples
/// per axis (endpoints included).
pub fn for_each_box_point(lo: &[f64], hi: &[f64], points: usize, mut f: impl FnMut(&[f64])) {
    let dim = lo.len();
    debug_assert_eq!(dim, hi.len());
    let points = points.max(2);
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let coord = |i: usize, k: usize| {
        if k + 1 == points {
            hi[i]
        } else {
            lo[i] + (hi[i] - lo[i]) * (k as f64) / ((points - 1) as f64)
        }
    };
    loop {
        for i in 0..dim {
            x[i] = coord(i, idx[i]);
        }
        f(&x);
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < points {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

pub type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A function `R^m -> R^n` given by an evaluation closure.
#[derive(Clone)]
pub struct GridFunction {
    eval: Arc<EvalFn>,
    dim_in: usize,
    dim_out: usize,
    unbounded: bool,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("unbounded", &self.unbounded)
            .finish_non_exhaustive()
    }
}

impl GridFunction {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), dim_in, dim_out, unbounded: false }
    }

    /// Scalar function `R -> R`.
    pub fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, 1, move |x, y| y[0] = f(x[0]))
    }

    pub fn constant(dim_in: usize, value: Vec<f64>) -> Self {
        let dim_out = value.len();
        Self::new(dim_in, dim_out, move |_, y| y.copy_from_slice(&value))
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Self::new(dim_in, dim_out, |_, y| y.fill(0.0))
    }

    /// Identity on `R^m`.
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, dim, |x, y| y.copy_from_slice(x))
    }

    /// Flags the function as unbounded, which exempts it from finiteness
    /// expectations of bounded-function checks.
    pub fn flagged_unbounded(mut self) -> Self {
        self.unbounded = true;
        self
    }

    pub fn is_flagged_unbounded(&self) -> bool {
        self.unbounded
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out];
        (self.eval)(x, &mut out);
        out
    }

    /// First output coordinate at a scalar input.
    pub fn eval_scalar(&self, x: f64) -> f64 {
        let mut out = vec![0.0; self.dim_out];
        (self.eval)(&[x], &mut out);
        out[0]
    }

    pub fn check_same_dims(&self, other: &GridFunction) -> Result<()> {
        if self.dim_in != other.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: other.dim_in });
        }
        if self.dim_out != other.dim_out {
            return Err(Error::DimensionMismatch { expected: self.dim_out, found: other.dim_out });
        }
        Ok(())
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        self.check_same_dims(other)?;
        let (f, g) = (self.clone(), other.clone());
        let n = self.dim_out;
        Ok(GridFunction::new(self.dim_in, n, move |x, y| {
            let mut tmp = vec![0.0; n];
            f.eval_into(x, y);
            g.eval_into(x, &mut tmp);
            for (a, b) in y.iter_mut().zip(&tmp) {
                *a = alpha * *a + beta * b;
            }
        }))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        let f = self.clone();
        let mut out = GridFunction::new(self.dim_in, self.dim_out, move |x, y| {
            f.eval_into(x, y);
            y.iter_mut().for_each(|v| *v *= c);
        });
        out.unbounded = self.unbounded;
        out
    }

    /// `x -> self(map(x))` where `map: R^k -> R^m`.
    pub fn precompose(&self, dim_in: usize, map: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> GridFunction {
        let f = self.clone();
        let m = self.dim_in;
        GridFunction::new(dim_in, self.dim_out, move |x, y| {
            let mut z = vec![0.0; m];
            map(x, &mut z);
            f.eval_into(&z, y);
        })
    }
}

#[inline]
pub fn euclidean_norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

#[inline]
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Truncated `d_ucc` value together with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ucc {
    pub distance: f64,
    /// Upper bound on the omitted tail, `2^-K`.
    pub tail_bound: f64,
    pub terms: usize,
}

/// `d_ucc(f, g) = sum_k 2^-k s_k / (1 + s_k)`, `s_k = sup_{[-k,k]^m} |f - g|`,
/// truncated after `terms` summands.
///
/// One tensor grid over `[-terms, terms]^m` with `grid.points_per_axis`
/// samples per axis is shared by all cubes; `grid.radius` is not used.
/// Pick `points_per_axis - 1` divisible by `2 * terms` so the cube faces
/// lie on the grid.
pub fn d_ucc(f: &GridFunction, g: &GridFunction, terms: usize, grid: &GridSpec) -> Result<Ucc> {
    f.check_same_dims(g)?;
    if grid.dim_in != f.dim_in {
        return Err(Error::DimensionMismatch { expected: f.dim_in, found: grid.dim_in });
    }
    if terms == 0 {
        return Err(Error::param("terms", "must be at least 1"));
    }
    if grid.points_per_axis < 2 {
        return Err(Error::param("points_per_axis", "must be at least 2"));
    }
    let k_max = terms as f64;
    let mut level_sup = vec![0.0f64; terms];
    let mut fx = vec![0.0; f.dim_out];
    let mut gx = vec![0.0; g.dim_out];
    let mut bad: Option<Vec<f64>> = None;
    let lo = vec![-k_max; f.dim_in];
    let hi = vec![k_max; f.dim_in];
    for_each_box_point(&lo, &hi, grid.points_per_axis, |x| {
        if bad.is_some() {
            return;
        }
        f.eval_into(x, &mut fx);
        g.eval_into(x, &mut gx);
        let mut d2 = 0.0;
        for (a, b) in fx.iter().zip(&gx) {
            let d = a - b;
            d2 += d * d;
        }
        let d = sqrt(d2);
        if !d.is_finite() {
            bad = Some(x.to_vec());
            return;
        }
        let r = max_norm(x);
        let level = (math::ceil(r - 1e-9).max(1.0) as usize).min(terms);
        if d > level_sup[level - 1] {
            level_sup[level - 1] = d;
        }
    });
    if let Some(point) = bad {
        return Err(Error::NonFinite { point });
    }
    let mut running = 0.0f64;
    let mut total = 0.0;
    let mut weight = 1.0;
    for s in level_sup {
        running = running.max(s);
        weight *= 0.5;
        total += weight * running / (1.0 + running);
    }
    Ok(Ucc { distance: total, tail_bound: weight, terms })
}

/// Sup of `|f|` over the closed Euclidean ball of the given radius, sampled
/// on `grid.points_per_axis` points per axis (`grid.radius` is ignored).
pub fn sup_norm_on_ball(f: &GridFunction, radius: f64, grid: &GridSpec) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::param("radius", "must be positive"));
    }
    let mut y = vec![0.0; f.dim_out];
    let mut sup = 0.0f64;
    let mut bad: Option<Vec<f64>> = None;
    let lo = vec![-radius; f.dim_in];
    let hi = vec![radius; f.dim_in];
    let r2 = radius * radius * (1.0 + 1e-12);
    for_each_box_point(&lo, &hi, grid.points_per_axis, |x| {
        if bad.is_some() || x.iter().map(|v| v * v).sum::<f64>() > r2 {
            return;
        }
        f.eval_into(x, &mut y);
        let v = euclidean_norm(&y);
        if !v.is_finite() {
            bad = Some(x.to_vec());
        }
        sup = sup.max(v);
    });
    match bad {
        Some(point) => Err(Error::NonFinite { point }),
        None => Ok(sup),
    }
}

/// Growth weight `omega: [0, inf) -> [0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `omega(t) = 1`
    Unit,
    /// `omega(t) = t^i`
    Power { i: f64 },
    /// `omega(t) = max(t, t^i)`
    MaxTPower { i: f64 },
    /// `omega(t) = exp(-k t)`
    ExpDecay { k: f64 },
    /// `omega(t) = 0`
    Zero,
}

impl Weight {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Weight::Unit => 1.0,
            Weight::Power { i } => math::powf(t, i),
            Weight::MaxTPower { i } => t.max(math::powf(t, i)),
            Weight::ExpDecay { k } => math::exp(-k * t),
            Weight::Zero => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Weight::Unit => "unit".into(),
            Weight::Power { i } => format!("power({i})"),
            Weight::MaxTPower { i } => format!("max_t_power({i})"),
            Weight::ExpDecay { k } => format!("exp_decay({k})"),
            Weight::Zero => "zero".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Weight::Power { i } | Weight::MaxTPower { i } if !(i > 0.0) || !i.is_finite() => {
                Err(Error::param("weight", "exponent must be positive"))
            }
            Weight::ExpDecay { k } if !(k >= 0.0) || !k.is_finite() => {
                Err(Error::param("weight", "decay rate must be >= 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Finite family of growth weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Weight>", into = "Vec<Weight>")]
pub struct WeightFamily {
    weights: Vec<Weight>,
    contains_unit: bool,
}

impl WeightFamily {
    pub fn new(weights: Vec<Weight>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("weights", "family must be nonempty"));
        }
        for w in &weights {
            w.validate()?;
        }
        let contains_unit = weights.iter().any(|w| matches!(w, Weight::Unit) || matches!(w, Weight::ExpDecay { k } if *k == 0.0));
        Ok(Self { weights, contains_unit })
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn contains_unit(&self) -> bool {
        self.contains_unit
    }
}

impl TryFrom<Vec<Weight>> for WeightFamily {
    type Error = Error;
    fn try_from(v: Vec<Weight>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightFamily> for Vec<Weight> {
    fn from(f: WeightFamily) -> Self {
        f.weights
    }
}

/// Options for the expanding-ball weighted sup search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightedSupOptions {
    pub start_radius: f64,
    pub max_radius: f64,
    pub growth: f64,
    /// Relative change below which the running sup counts as stable.
    pub rel_tol: f64,
}

impl Default for WeightedSupOptions {
    fn default() -> Self {
        Self { start_radius: 1.0, max_radius: 1_048_576.0, growth: 2.0, rel_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSup {
    /// Running sup at the last radius examined.
    pub value: f64,
    /// False when the running sup kept growing up to `max_radius` (the
    /// function is numerically outside `C_omega`).
    pub stabilized: bool,
    pub radius: f64,
}

/// Sup of `|f(x)| / (omega(|x|) + 1)` over one ball.
pub fn weighted_sup_on_ball(f: &GridFunction, omega: &Weight, radius: f64, grid: &GridSpec) -> f64 {
    let weighted = weighted_view(f, omega);
    let mut y = vec![0.0; f.dim_out];
    let mut sup = 0.0f64;
    let lo = vec![-radius; f.dim_in];
    let hi = vec![radius; f.dim_in];
    let r2 = radius * radius * (1.0 + 1e-12);
    for_each_box_point(&lo, &hi, grid.points_per_axis, |x| {
        if x.iter().map(|v| v * v).sum::<f64>() > r2 {
            return;
        }
        weighted.eval_into(x, &mut y);
        let v = euclidean_norm(&y);
        sup = if v.is_nan() { f64::INFINITY } else { sup.max(v) };
    });
    sup
}

fn weighted_view(f: &GridFunction, omega: &Weight) -> GridFunction {
    let f = f.clone();
    let omega = *omega;
    GridFunction::new(f.dim_in, f.dim_out, move |x, y| {
        f.eval_into(x, y);
        let w = omega.eval(euclidean_norm(x)) + 1.0;
        y.iter_mut().for_each(|v| *v /= w);
    })
}

/// `||f||_{omega,inf} = sup |f(x)| / (omega(|x|) + 1)`, estimated over an
/// expanding sequence of balls until the running sup stabilizes.
pub fn weighted_sup_norm(f: &GridFunction, omega: &Weight, grid: &GridSpec, opts: &WeightedSupOptions) -> WeightedSup {
    let mut radius = opts.start_radius;
    let mut running = weighted_sup_on_ball(f, omega, radius, grid);
    loop {
        if !running.is_finite() {
            return WeightedSup { value: f64::INFINITY, stabilized: false, radius };
        }
        let next_radius = radius * opts.growth;
        if next_radius > opts.max_radius {
            return WeightedSup { value: running, stabilized: false, radius };
        }
        let next = running.max(weighted_sup_on_ball(f, omega, next_radius, grid));
        let change = next - running;
        radius = next_radius;
        if change <= opts.rel_tol * next.max(f64::MIN_POSITIVE) || next == 0.0 {
            return WeightedSup { value: next, stabilized: true, radius };
        }
        running = next;
    }
}

/// Finite Borel measure on `R` with a Lebesgue density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density_kind", content = "params", rename_all = "snake_case")]
pub enum Measure1D {
    /// `mass * N(mean, std^2)`.
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// Constant density `height` on `[lo, hi]`, zero elsewhere.
    UniformWindow {
        lo: f64,
        hi: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// Piecewise-linear density through `(xs[i], densities[i])`, zero
    /// outside `[xs[0], xs[last]]`.
    CustomTable { xs: Vec<f64>, densities: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Measure1D {
    pub fn standard_gaussian() -> Self {
        Measure1D::Gaussian { mean: 0.0, std: 1.0, mass: 1.0 }
    }

    /// Lebesgue measure restricted to `[lo, hi]`.
    pub fn lebesgue_window(lo: f64, hi: f64) -> Self {
        Measure1D::UniformWindow { lo, hi, height: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measure1D::Gaussian { mean, std, mass } => {
                if !mean.is_finite() {
                    return Err(Error::param("mean", "must be finite"));
                }
                if !(*std > 0.0) || !std.is_finite() {
                    return Err(Error::param("std", "must be positive"));
                }
                if !(*mass > 0.0) || !mass.is_finite() {
                    return Err(Error::param("mass", "must be positive"));
                }
            }
            Measure1D::UniformWindow { lo, hi, height } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::param("window", "need finite lo < hi"));
                }
                if !(*height > 0.0) {
                    return Err(Error::param("height", "must be positive"));
                }
            }
            Measure1D::CustomTable { xs, densities } => {
                if xs.len() < 2 || xs.len() != densities.len() {
                    return Err(Error::param("xs", "need >= 2 knots matching densities"));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::param("xs", "must be strictly increasing"));
                }
                if densities.iter().any(|d| !(*d >= 0.0)) || self.total_mass() <= 0.0 {
                    return Err(Error::param("densities", "must be >= 0 with positive mass"));
                }
            }
        }
        Ok(())
    }

    /// Whether the density is positive everywhere, i.e. the measure is
    /// equivalent to Lebesgue measure.
    pub fn is_lebesgue_equivalent(&self) -> bool {
        matches!(self, Measure1D::Gaussian { .. })
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Measure1D::Gaussian { mean, std, mass } => mass * math::normal_pdf((x - mean) / std) / std,
            Measure1D::UniformWindow { lo, hi, height } => {
                if x >= lo && x <= hi {
                    height
                } else {
                    0.0
                }
            }
            Measure1D::CustomTable { ref xs, ref densities } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let i = match xs.partition_point(|k| *k <= x) {
                    0 => 0,
                    i if i >= xs.len() => xs.len() - 2,
                    i => i - 1,
                };
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                densities[i] + t * (densities[i + 1] - densities[i])
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        match *self {
            Measure1D::Gaussian { mass, .. } => mass,
            Measure1D::UniformWindow { lo, hi, height } => (hi - lo) * height,
            Measure1D::CustomTable { ref xs, ref densities } => xs
                .windows(2)
                .zip(densities.windows(2))
                .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
                .sum(),
        }
    }

    /// Mass of `(-inf, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Measure1D::Gaussian { mean, std, mass } => mass * math::normal_cdf((x - mean) / std),
            Measure1D::UniformWindow { lo, hi, height } => height * (x.clamp(lo, hi) - lo),
            Measure1D::CustomTable { ref xs, ref densities } => {
                let mut acc = 0.0;
                for i in 0..xs.len() - 1 {
                    let (a, b) = (xs[i], xs[i + 1]);
                    if x <= a {
                        break;
                    }
                    let top = x.min(b);
                    let slope = (densities[i + 1] - densities[i]) / (b - a);
                    let dt = top - a;
                    acc += densities[i] * dt + 0.5 * slope * dt * dt;
                }
                acc
            }
        }
    }

    /// Generalized inverse of the normalized distribution function.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Measure1D::Gaussian { mean, std, .. } => mean + std * math::normal_quantile(p),
            Measure1D::UniformWindow { lo, hi, .. } => lo + p * (hi - lo),
            Measure1D::CustomTable { ref xs, .. } => {
                let target = p * self.total_mass();
                let (mut a, mut b) = (xs[0], xs[xs.len() - 1]);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid == a || mid == b {
                        break;
                    }
                    if self.cdf(mid) < target {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    /// Equal-mass quadrature: nodes at the quantiles `(i + 1/2) / count`,
    /// each carrying `total_mass / count`.
    pub fn quadrature(&self, count: usize) -> (Vec<f64>, f64) {
        let nodes = (0..count).map(|i| self.quantile((i as f64 + 0.5) / count as f64)).collect();
        (nodes, self.total_mass() / count as f64)
    }
}

/// Quadrature nodes and weights of a product measure (`m <= 2`).
pub fn product_quadrature(mu: &[Measure1D], nodes_per_axis: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if mu.is_empty() || mu.len() > 2 {
        return Err(Error::param("mu", "product measures are supported for 1 <= m <= 2"));
    }
    if nodes_per_axis == 0 {
        return Err(Error::param("quad_nodes", "must be positive"));
    }
    for m in mu {
        m.validate()?;
    }
    let axes: Vec<(Vec<f64>, f64)> = mu.iter().map(|m| m.quadrature(nodes_per_axis)).collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if axes.len() == 1 {
        for x in &axes[0].0 {
            points.push(vec![*x]);
            weights.push(axes[0].1);
        }
    } else {
        for x in &axes[0].0 {
            for y in &axes[1].0 {
                points.push(vec![*x, *y]);
                weights.push(axes[0].1 * axes[1].1);
            }
        }
    }
    Ok((points, weights))
}

/// `||f||_{p,mu} = (int |f|^p dmu)^(1/p)` by equal-mass product quadrature.
pub fn lp_norm(f: &GridFunction, mu: &[Measure1D], p: f64, quad_nodes: usize) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param("p", "must be finite and >= 1"));
    }
    if mu.len() != f.dim_in {
        return Err(Error::DimensionMismatch { expected: f.dim_in, found: mu.len() });
    }
    let (points, weights) = product_quadrature(mu, quad_nodes)?;
    let mut y = vec![0.0; f.dim_out];
    let mut acc = 0.0;
    for (x, w) in points.iter().zip(&weights) {
        f.eval_into(x, &mut y);
        let v = euclidean_norm(&y);
        let term = if p == 1.0 { v } else { math::powf(v, p) };
        if !term.is_finite() {
            return Err(Error::NonFinite { point: x.clone() });
        }
        acc += w * term;
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite { point: Vec::new() });
    }
    Ok(if p == 1.0 { acc } else { math::powf(acc, 1.0 / p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: usize, radius: f64) -> GridSpec {
        GridSpec::line(points, radius).unwrap()
    }

    /// Independent brute-force oracle: per-cube sup on its own grid.
    fn ducc_oracle(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, terms: usize, per_unit: usize) -> f64 {
        let mut total = 0.0;
        for k in 1..=terms {
            let n = 2 * k * per_unit + 1;
            let mut s = 0.0f64;
            for i in 0..n {
                let x = -(k as f64) + i as f64 / per_unit as f64;
                s = s.max((f(x) - g(x)).abs());
            }
            total += s / (1.0 + s) / (1u64 << k) as f64;
        }
        total
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 1, 1, 1.0).is_err());
        assert!(GridSpec::new(1, 1, 3, 0.0).is_err());
        assert!(GridSpec::new(0, 1, 3, 1.0).is_err());
        let mut pts = Vec::new();
        line(5, 2.0).for_each_point(|x| pts.push(x[0]));
        assert_eq!(pts, [-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn ducc_identity_and_constants() {
        let f = GridFunction::scalar(math::sin);
        let g = line(801, 1.0);
        assert_eq!(d_ucc(&f, &f, 20, &g).unwrap().distance, 0.0);

        let zero = GridFunction::zero(1, 1);
        let one = GridFunction::constant(1, vec![1.0]);
        let d3 = d_ucc(&zero, &one, 3, &line(61, 1.0)).unwrap();
        assert!((d3.distance - 0.4375).abs() < 1e-15);
        assert_eq!(d3.tail_bound, 0.125);
        let d20 = d_ucc(&zero, &one, 20, &line(401, 1.0)).unwrap();
        assert!((d20.distance - 0.5).abs() <= d20.tail_bound);
    }

    #[test]
    fn ducc_matches_oracle() {
        let f = |x: f64| x * x * 0.1;
        let g = |x: f64| math::sin(x);
        let ff = GridFunction::scalar(f);
        let gg = GridFunction::scalar(g);
        let d = d_ucc(&ff, &gg, 8, &line(2 * 8 * 50 + 1, 1.0)).unwrap();
        let oracle = ducc_oracle(&f, &g, 8, 50);
        assert!((d.distance - oracle).abs() < 1e-12, "{} vs {}", d.distance, oracle);
    }

    #[test]
    fn ducc_errors() {
        let f = GridFunction::scalar(|x| 1.0 / x);
        let z = GridFunction::zero(1, 1);
        match d_ucc(&f, &z, 2, &line(5, 1.0)) {
            Err(Error::NonFinite { point }) => assert_eq!(point, [0.0]),
            other => panic!("{other:?}"),
        }
        let h = GridFunction::zero(2, 1);
        assert!(matches!(d_ucc(&z, &h, 2, &line(5, 1.0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lp_norms() {
        let mu = [Measure1D::standard_gaussian()];
        let zero = GridFunction::zero(1, 1);
        assert_eq!(lp_norm(&zero, &mu, 1.0, 1000).unwrap(), 0.0);
        let one = GridFunction::constant(1, vec![1.0]);
        assert!((lp_norm(&one, &mu, 1.0, 1000).unwrap() - 1.0).abs() < 1e-12);
        let ind = GridFunction::scalar(|x| if (0.0..2.0).contains(&x) { 1.0 } else { 0.0 });
        let window = [Measure1D::lebesgue_window(-10.0, 10.0)];
        assert!((lp_norm(&ind, &window, 1.0, 10_000).unwrap() - 2.0).abs() < 1e-9);
        assert!(lp_norm(&one, &mu, 0.5, 10).is_err());
    }

    #[test]
    fn lp_norm_2d_product() {
        let mu = [Measure1D::lebesgue_window(0.0, 1.0), Measure1D::lebesgue_window(0.0, 2.0)];
        let f = GridFunction::new(2, 1, |x, y| y[0] = x[0] + x[1]);
        // int_0^1 int_0^2 (x + y) dy dx = 1 + 2 = 3
        assert!((lp_norm(&f, &mu, 1.0, 400).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn sup_norms() {
        let g = line(601, 1.0);
        assert_eq!(sup_norm_on_ball(&GridFunction::zero(1, 1), 1.0, &g).unwrap(), 0.0);
        let id = GridFunction::identity(1);
        assert_eq!(sup_norm_on_ball(&id, 3.0, &g).unwrap(), 3.0);
        let bump = GridFunction::scalar(|x: f64| math::exp(-x.abs()));
        assert_eq!(sup_norm_on_ball(&bump, 5.0, &g).unwrap(), 1.0);
    }

    #[test]
    fn weighted_sup() {
        let g = line(2001, 1.0);
        let opts = WeightedSupOptions::default();
        let t = Weight::Power { i: 1.0 };
        let z = weighted_sup_norm(&GridFunction::zero(1, 1), &t, &g, &opts);
        assert!(z.stabilized && z.value == 0.0);
        let x = weighted_sup_norm(&GridFunction::identity(1), &t, &g, &opts);
        assert!(x.stabilized && x.value < 1.0 && x.value > 0.99, "{x:?}");
        let sq = weighted_sup_norm(&GridFunction::scalar(|x| x * x), &t, &g, &opts);
        assert!(!sq.stabilized);
        let gauss = GridFunction::scalar(|x| math::exp(-x * x));
        let half = weighted_sup_norm(&gauss, &Weight::Unit, &g, &opts);
        assert!((half.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn measures() {
        let g = Measure1D::standard_gaussian();
        assert!((g.quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        let table = Measure1D::CustomTable { xs: vec![0.0, 1.0, 2.0], densities: vec![0.0, 1.0, 0.0] };
        table.validate().unwrap();
        assert!((table.total_mass() - 1.0).abs() < 1e-15);
        assert!((table.quantile(0.5) - 1.0).abs() < 1e-12);
        assert!(!table.is_lebesgue_equivalent());
        let bad = Measure1D::Gaussian { mean: 0.0, std: -1.0, mass: 1.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn weight_family() {
        let fam = WeightFamily::new(vec![Weight::Unit, Weight::Power { i: 1.0 }]).unwrap();
        assert!(fam.contains_unit());
        let fam = WeightFamily::new(vec![Weight::Power { i: 2.0 }]).unwrap();
        assert!(!fam.contains_unit());
        assert!(WeightFamily::new(vec![]).is_err());
        assert_eq!(Weight::MaxTPower { i: 2.0 }.eval(0.5), 0.5);
        assert_eq!(Weight::MaxTPower { i: 2.0 }.eval(3.0), 9.0);
    }
}
