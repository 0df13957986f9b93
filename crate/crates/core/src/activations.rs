//! Piecewise-analytic activation functions.
//!
//! An [`ActivationSpec`] is a continuous function assembled from branches
//! on consecutive intervals. Each branch is affine, a signed power plus an
//! affine part, or a linear-interpolation table plus an affine part. On each
//! branch the derivative of `sigma(x) - c x` changes sign at most at a few
//! known points, so injectivity, fixed points and inverses are decided
//! exactly (up to bisection tolerance) rather than by sampling.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::function_space::GridSpec;
use crate::math::{powf, sign0, spow};
use crate::{Error, Result};

/// Scalar map used on one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BranchMap {
    /// `a x + b`
    Affine { a: f64, b: f64 },
    /// `scale * sign(x) |x|^p + a x + b`
    Power {
        p: f64,
        scale: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    /// Linear interpolation through `(x[i], y[i])`, extended linearly past
    /// the end knots, plus `a x + b`.
    Table {
        x: Vec<f64>,
        y: Vec<f64>,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
}

/// Which one-sided derivative to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl BranchMap {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &'static str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        match self {
            BranchMap::Affine { a, b } => {
                finite(*a, "a")?;
                finite(*b, "b")
            }
            BranchMap::Power { p, scale, a, b } => {
                if !(*p > 0.0) || !p.is_finite() {
                    return Err(Error::param("p", "power exponent must be positive"));
                }
                finite(*scale, "scale")?;
                finite(*a, "a")?;
                finite(*b, "b")
            }
            BranchMap::Table { x, y, a, b } => {
                if x.len() < 2 || x.len() != y.len() {
                    return Err(Error::param("table", "need >= 2 knots with matching values"));
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::param("table", "knots must be strictly increasing"));
                }
                if x.iter().chain(y).any(|v| !v.is_finite()) {
                    return Err(Error::param("table", "knots must be finite"));
                }
                finite(*a, "a")?;
                finite(*b, "b")
            }
        }
    }

    fn table_segment(x: &[f64], t: f64) -> usize {
        match x.partition_point(|k| *k <= t) {
            0 => 0,
            i if i >= x.len() => x.len() - 2,
            i => i - 1,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            BranchMap::Affine { a, b } => a * t + b,
            BranchMap::Power { p, scale, a, b } => scale * spow(t, *p) + a * t + b,
            BranchMap::Table { x, y, a, b } => {
                let i = Self::table_segment(x, t);
                let slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
                y[i] + slope * (t - x[i]) + a * t + b
            }
        }
    }

    pub fn derivative(&self, t: f64, side: Side) -> f64 {
        match self {
            BranchMap::Affine { a, .. } => *a,
            BranchMap::Power { p, scale, a, .. } => {
                if *scale == 0.0 {
                    *a
                } else if t == 0.0 {
                    if *p < 1.0 {
                        f64::INFINITY.copysign(*scale)
                    } else if *p == 1.0 {
                        scale + a
                    } else {
                        *a
                    }
                } else {
                    scale * p * powf(t.abs(), p - 1.0) + a
                }
            }
            BranchMap::Table { x, y, a, .. } => {
                let mut i = Self::table_segment(x, t);
                if side == Side::Left && i > 0 && t == x[i] {
                    i -= 1;
                }
                (y[i + 1] - y[i]) / (x[i + 1] - x[i]) + a
            }
        }
    }

    /// Limit of the derivative as `|x| -> infinity`.
    fn derivative_at_infinity(&self) -> f64 {
        match self {
            BranchMap::Affine { a, .. } => *a,
            BranchMap::Power { p, scale, a, .. } => {
                if *scale == 0.0 || *p < 1.0 {
                    *a
                } else if *p == 1.0 {
                    scale + a
                } else {
                    f64::INFINITY
                }
            }
            // both extrapolation slopes are attained on the unbounded pieces
            BranchMap::Table { .. } => f64::INFINITY,
        }
    }

    /// Returns the map plus `slope * x + intercept`.
    pub fn add_affine(&self, slope: f64, intercept: f64) -> BranchMap {
        match self.clone() {
            BranchMap::Affine { a, b } => BranchMap::Affine { a: a + slope, b: b + intercept },
            BranchMap::Power { p, scale, a, b } => BranchMap::Power { p, scale, a: a + slope, b: b + intercept },
            BranchMap::Table { x, y, a, b } => BranchMap::Table { x, y, a: a + slope, b: b + intercept },
        }
    }

    /// Points where the derivative of `map(x) - shift * x` may vanish or
    /// jump. Between consecutive points the difference is monotone.
    fn split_points(&self, shift: f64) -> Vec<f64> {
        match self {
            BranchMap::Affine { .. } => Vec::new(),
            BranchMap::Power { p, scale, a, .. } => {
                let mut pts = vec![0.0];
                if *scale != 0.0 && *p != 1.0 {
                    let q = -(a - shift) / (scale * p);
                    if q > 0.0 {
                        let xc = powf(q, 1.0 / (p - 1.0));
                        if xc.is_finite() && xc > 0.0 {
                            pts.push(-xc);
                            pts.push(xc);
                        }
                    }
                }
                pts
            }
            BranchMap::Table { x, .. } => x.clone(),
        }
    }

    /// `Some((slope, intercept))` when the map is affine on `(l, r)`.
    fn affine_on(&self, l: f64, r: f64) -> Option<(f64, f64)> {
        match self {
            BranchMap::Affine { a, b } => Some((*a, *b)),
            BranchMap::Power { p, scale, a, b } => {
                if *scale == 0.0 {
                    Some((*a, *b))
                } else if *p == 1.0 {
                    // sign(x)|x| = x
                    Some((scale + a, *b))
                } else {
                    None
                }
            }
            BranchMap::Table { x, y, a, b } => {
                let t = interior_point(l, r);
                let i = Self::table_segment(x, t);
                let slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
                Some((slope + a, y[i] - slope * x[i] + b))
            }
        }
    }

    /// Sign of `map(x) - shift * x` as `x -> dir * infinity`.
    fn limit_sign(&self, dir: i8, shift: f64) -> i8 {
        let d = dir as f64;
        match self {
            BranchMap::Affine { a, b } => {
                let k = a - shift;
                if k != 0.0 {
                    sign0(k * d)
                } else {
                    sign0(*b)
                }
            }
            BranchMap::Power { p, scale, a, b } => {
                let lin = a - shift;
                let lead = if *p > 1.0 {
                    [*scale, lin]
                } else if *p < 1.0 {
                    [lin, *scale]
                } else {
                    [scale + lin, 0.0]
                };
                for c in lead {
                    if c != 0.0 {
                        return sign0(c * d);
                    }
                }
                sign0(*b)
            }
            BranchMap::Table { x, .. } => {
                let t = if dir > 0 { x[x.len() - 1] + 1.0 } else { x[0] - 1.0 };
                let (k, c) = self.affine_on(t - 0.5, t + 0.5).expect("tables are piecewise affine");
                let k = k - shift;
                if k != 0.0 {
                    sign0(k * d)
                } else {
                    sign0(c)
                }
            }
        }
    }

    fn is_constant_on(&self, l: f64, r: f64) -> bool {
        matches!(self.affine_on(l, r), Some((k, _)) if k == 0.0)
    }
}

/// A point strictly inside `(l, r)`, which may be unbounded.
fn interior_point(l: f64, r: f64) -> f64 {
    match (l.is_finite(), r.is_finite()) {
        (true, true) => 0.5 * (l + r),
        (true, false) => l + 1.0,
        (false, true) => r - 1.0,
        (false, false) => 0.0,
    }
}

mod lower_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod upper_bound {
    use serde::{Deserialize, Deserializer};

    pub use super::lower_bound::serialize;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One branch: `map` on `[lo, hi]`. `null` bounds in JSON mean infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    #[serde(with = "lower_bound", default = "neg_inf")]
    pub lo: f64,
    #[serde(with = "upper_bound", default = "pos_inf")]
    pub hi: f64,
    pub kind: BranchMap,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl Branch {
    pub fn new(lo: f64, hi: f64, kind: BranchMap) -> Self {
        Self { lo, hi, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawSpec {
    name: String,
    branches: Vec<Branch>,
}

/// Continuous piecewise-analytic activation `R -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ActivationSpec {
    name: String,
    branches: Vec<Branch>,
    monotone: Option<Monotonicity>,
}

impl TryFrom<RawSpec> for ActivationSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        ActivationSpec::new(raw.name, raw.branches)
    }
}

impl From<ActivationSpec> for RawSpec {
    fn from(s: ActivationSpec) -> Self {
        RawSpec { name: s.name, branches: s.branches }
    }
}

const CONTINUITY_TOL: f64 = 1e-9;

impl ActivationSpec {
    /// Validates that the branches tile `R` in order and agree at every
    /// breakpoint.
    pub fn new(name: impl Into<String>, branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::param("branches", "need at least one branch"));
        }
        if branches[0].lo != f64::NEG_INFINITY || branches[branches.len() - 1].hi != f64::INFINITY {
            return Err(Error::param("branches", "must cover the whole real line"));
        }
        for br in &branches {
            br.kind.validate()?;
            if !(br.lo < br.hi) {
                return Err(Error::param("branches", format!("empty interval [{}, {}]", br.lo, br.hi)));
            }
        }
        for w in branches.windows(2) {
            if w[0].hi != w[1].lo || !w[0].hi.is_finite() {
                return Err(Error::param("branches", "intervals must be contiguous"));
            }
            let t = w[0].hi;
            let (l, r) = (w[0].kind.value(t), w[1].kind.value(t));
            if (l - r).abs() > CONTINUITY_TOL * l.abs().max(r.abs()).max(1.0) {
                return Err(Error::param("branches", format!("discontinuous at {t}: {l} vs {r}")));
            }
        }
        let mut spec = Self { name: name.into(), branches, monotone: None };
        spec.monotone = spec.compute_monotonicity();
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.branches.iter().skip(1).map(|b| b.lo).collect()
    }

    /// Strict global monotonicity, if any.
    pub fn monotonicity(&self) -> Option<Monotonicity> {
        self.monotone
    }

    pub fn is_injective(&self) -> bool {
        self.monotone.is_some()
    }

    fn branch_index(&self, x: f64) -> usize {
        // branch i owns [lo_i, hi_i); the last branch also owns its end
        let i = self.branches.partition_point(|b| b.lo <= x);
        i.saturating_sub(1)
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].kind.value(x)
    }

    /// Right derivative.
    pub fn derivative(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].kind.derivative(x, Side::Right)
    }

    pub fn derivative_left(&self, x: f64) -> f64 {
        let i = self.branch_index(x);
        let i = if i > 0 && self.branches[i].lo == x { i - 1 } else { i };
        self.branches[i].kind.derivative(x, Side::Left)
    }

    /// Monotone pieces of `sigma(x) - shift * x` on every branch.
    fn pieces(&self, shift: f64) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for (i, br) in self.branches.iter().enumerate() {
            let mut cuts: Vec<f64> =
                br.kind.split_points(shift).into_iter().filter(|t| *t > br.lo && *t < br.hi).collect();
            cuts.sort_by(|a, b| a.total_cmp(b));
            cuts.dedup();
            let mut l = br.lo;
            for c in cuts {
                out.push((i, l, c));
                l = c;
            }
            out.push((i, l, br.hi));
        }
        out
    }

    fn compute_monotonicity(&self) -> Option<Monotonicity> {
        let mut dir = 0i8;
        for (i, l, r) in self.pieces(0.0) {
            let kind = &self.branches[i].kind;
            if kind.is_constant_on(l, r) {
                return None;
            }
            let s = sign0(kind.derivative(interior_point(l, r), Side::Right));
            if s == 0 || (dir != 0 && s != dir) {
                return None;
            }
            dir = s;
        }
        Some(if dir > 0 { Monotonicity::Increasing } else { Monotonicity::Decreasing })
    }

    /// Monotone in the weak sense (flat pieces allowed).
    pub fn is_weakly_monotone(&self) -> bool {
        let signs: Vec<i8> = self
            .pieces(0.0)
            .into_iter()
            .map(|(i, l, r)| sign0(self.branches[i].kind.derivative(interior_point(l, r), Side::Right)))
            .collect();
        !(signs.contains(&1) && signs.contains(&-1))
    }

    /// Infimum of `|sigma'|` over `R` together with the monotone piece on
    /// which it is attained.
    pub fn min_abs_derivative(&self) -> (f64, (f64, f64)) {
        let mut best = (f64::INFINITY, (f64::NEG_INFINITY, f64::INFINITY));
        for (i, l, r) in self.pieces(0.0) {
            let kind = &self.branches[i].kind;
            let mut cands = Vec::with_capacity(3);
            if l.is_finite() {
                cands.push(kind.derivative(l, Side::Right));
            }
            if r.is_finite() {
                cands.push(kind.derivative(r, Side::Left));
            }
            cands.push(kind.derivative(interior_point(l, r), Side::Right));
            if !l.is_finite() || !r.is_finite() {
                cands.push(kind.derivative_at_infinity());
            }
            let v = cands.into_iter().map(f64::abs).fold(f64::INFINITY, f64::min);
            if v < best.0 {
                best = (v, (l, r));
            }
        }
        best
    }

    /// `x` with `sigma(x) = y`, for injective `sigma`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let dir = match self.monotone {
            Some(Monotonicity::Increasing) => 1.0,
            Some(Monotonicity::Decreasing) => -1.0,
            None => return Err(Error::pre(format!("activation `{}` is not injective", self.name))),
        };
        if !y.is_finite() {
            return Err(Error::OutOfRange { y });
        }
        // locate the branch by monotone comparison against breakpoint values
        let idx = self.branches[1..].partition_point(|b| dir * self.apply(b.lo) <= dir * y);
        let br = &self.branches[idx];
        for (i, l, r) in self.pieces(0.0) {
            if i != idx {
                continue;
            }
            let vl = if l.is_finite() { br.kind.value(l) } else { f64::NEG_INFINITY * dir };
            let vr = if r.is_finite() { br.kind.value(r) } else { f64::INFINITY * dir };
            let (lo_v, hi_v) = if dir > 0.0 { (vl, vr) } else { (vr, vl) };
            if y < lo_v || y > hi_v {
                continue;
            }
            if let Some((k, c)) = br.kind.affine_on(l, r) {
                return Ok((y - c) / k);
            }
            let g = |t: f64| dir * (br.kind.value(t) - y);
            return bisect_increasing(g, l, r).ok_or(Error::OutOfRange { y });
        }
        Err(Error::OutOfRange { y })
    }
}

/// Root of an increasing function on `[l, r]` (ends may be infinite).
fn bisect_increasing(g: impl Fn(f64) -> f64, l: f64, r: f64) -> Option<f64> {
    let (mut a, mut b) = (l, r);
    if !a.is_finite() {
        let mut step = 1.0;
        a = if b.is_finite() { b - step } else { -step };
        while g(a) > 0.0 {
            step *= 2.0;
            a = if b.is_finite() { b - step } else { -step };
            if !a.is_finite() {
                return None;
            }
        }
    }
    if !b.is_finite() {
        let mut step = 1.0;
        b = a + step;
        while g(b) < 0.0 {
            step *= 2.0;
            b = a + step;
            if !b.is_finite() {
                return None;
            }
        }
    }
    let (ga, gb) = (g(a), g(b));
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    if ga > 0.0 || gb < 0.0 {
        return None;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(if g(a).abs() <= g(b).abs() { a } else { b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitivityKind {
    Transitive,
    LpTransitiveOnly,
    NotTransitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    /// `sigma(x) > x` (almost everywhere for the `L^p` verdict).
    Above,
    /// `sigma(x) < x`.
    Below,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    FixedPoint { x: f64 },
    /// Distinct points with equal images.
    NonInjective { x1: f64, x2: f64 },
    /// Point where the derivative changes sign.
    TurningPoint { x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitivityVerdict {
    pub kind: TransitivityKind,
    pub witness: Option<Witness>,
    pub dominance: Dominance,
    pub injective: bool,
    /// Isolated solutions of `sigma(x) = x`.
    pub fixed_points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    /// Scale of the bracket search for roots on unbounded pieces.
    pub search_radius: f64,
    /// Grid used to cross-check the analytic verdict by sampling.
    pub check_grid: Option<GridSpec>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { search_radius: 1e6, check_grid: GridSpec::line(20_001, 100.0).ok() }
    }
}

const ZERO_TOL: f64 = 1e-12;

enum FixedSet {
    Point(f64),
    Interval(f64, f64),
}

/// Decides whether `sigma` is transitive (injective without fixed points),
/// only `L^p`-transitive (injective with `sigma(x) > x` off a finite set),
/// or neither.
pub fn classify(sigma: &ActivationSpec, opts: &ClassifyOptions) -> Result<TransitivityVerdict> {
    let mut zeros: Vec<FixedSet> = Vec::new();
    for (i, l, r) in sigma.pieces(1.0) {
        let kind = &sigma.branches[i].kind;
        if let Some((k, c)) = kind.affine_on(l, r) {
            if k == 1.0 {
                if c == 0.0 {
                    zeros.push(FixedSet::Interval(l, r));
                }
                continue;
            }
            let x = -c / (k - 1.0);
            if x >= l && x <= r {
                zeros.push(FixedSet::Point(x));
            }
            continue;
        }
        let h = |t: f64| kind.value(t) - t;
        let end_sign = |t: f64, dir: i8| -> Result<i8> {
            if t.is_finite() {
                let v = h(t);
                if v != 0.0 && v.abs() <= ZERO_TOL * (1.0 + t.abs()) {
                    return Err(Error::Inconclusive { lo: l, hi: r });
                }
                Ok(sign0(v))
            } else {
                Ok(kind.limit_sign(dir, 1.0))
            }
        };
        let (sl, sr) = (end_sign(l, -1)?, end_sign(r, 1)?);
        if sl == 0 {
            zeros.push(FixedSet::Point(l));
        }
        if sr == 0 {
            zeros.push(FixedSet::Point(r));
        }
        if sl * sr < 0 {
            let dir = sr as f64;
            let scaled = |t: f64| dir * h(t);
            let (a, b) = (
                if l.is_finite() { l } else { -opts.search_radius.max(1.0) },
                if r.is_finite() { r } else { opts.search_radius.max(1.0) },
            );
            let a = if l.is_finite() || scaled(a) < 0.0 { a } else { l };
            let b = if r.is_finite() || scaled(b) > 0.0 { b } else { r };
            let root = bisect_increasing(scaled, a, b).ok_or(Error::Inconclusive { lo: l, hi: r })?;
            zeros.push(FixedSet::Point(root));
        }
    }

    let interval_witness = zeros.iter().find_map(|z| match z {
        FixedSet::Interval(l, r) => Some(interior_point(*l, *r)),
        FixedSet::Point(_) => None,
    });
    let mut points: Vec<f64> = zeros
        .iter()
        .filter_map(|z| match z {
            FixedSet::Point(x) => Some(*x),
            FixedSet::Interval(..) => None,
        })
        .collect();
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));

    let injective = sigma.is_injective();
    let non_injective_witness = if injective { None } else { Some(injectivity_witness(sigma)) };

    // sign of sigma(x) - x on each gap between isolated fixed points
    let mut signs = Vec::with_capacity(points.len() + 1);
    let mut prev = f64::NEG_INFINITY;
    for &z in points.iter().chain(core::iter::once(&f64::INFINITY)) {
        let t = interior_point(prev, z);
        signs.push(sign0(sigma.apply(t) - t));
        prev = z;
    }
    let all_pos = signs.iter().all(|s| *s > 0);
    let all_neg = signs.iter().all(|s| *s < 0);
    let dominance = if interval_witness.is_some() {
        Dominance::Mixed
    } else if all_pos {
        Dominance::Above
    } else if all_neg {
        Dominance::Below
    } else {
        Dominance::Mixed
    };

    // -0.0 and 0.0 compare equal but print differently
    let points: Vec<f64> = points.into_iter().map(|x| x + 0.0).collect();
    let interval_witness = interval_witness.map(|x| x + 0.0);
    let verdict = if let Some(x) = interval_witness {
        TransitivityVerdict {
            kind: TransitivityKind::NotTransitive,
            witness: Some(Witness::FixedPoint { x }),
            dominance,
            injective,
            fixed_points: points,
        }
    } else if !injective {
        let witness = points.first().map(|x| Witness::FixedPoint { x: *x }).or(non_injective_witness);
        TransitivityVerdict { kind: TransitivityKind::NotTransitive, witness, dominance, injective, fixed_points: points }
    } else if points.is_empty() && dominance != Dominance::Mixed {
        TransitivityVerdict { kind: TransitivityKind::Transitive, witness: None, dominance, injective, fixed_points: points }
    } else if dominance == Dominance::Above {
        // injective and continuous, hence bi-measurable; {sigma <= x} is finite
        TransitivityVerdict {
            kind: TransitivityKind::LpTransitiveOnly,
            witness: Some(Witness::FixedPoint { x: points[0] }),
            dominance,
            injective,
            fixed_points: points,
        }
    } else {
        let witness = points.first().map(|x| Witness::FixedPoint { x: *x });
        TransitivityVerdict { kind: TransitivityKind::NotTransitive, witness, dominance, injective, fixed_points: points }
    };

    if let Some(grid) = &opts.check_grid {
        cross_check(sigma, &verdict, grid)?;
    }
    Ok(verdict)
}

fn injectivity_witness(sigma: &ActivationSpec) -> Witness {
    for (i, l, r) in sigma.pieces(0.0) {
        let kind = &sigma.branches[i].kind;
        if kind.is_constant_on(l, r) {
            let c = interior_point(l, r);
            let half = if l.is_finite() && r.is_finite() { 0.25 * (r - l) } else { 0.5 };
            return Witness::NonInjective { x1: c - half, x2: c + half };
        }
    }
    // direction flips at some piece boundary
    let pieces = sigma.pieces(0.0);
    let mut prev = 0i8;
    for (i, l, r) in pieces {
        let s = sign0(sigma.branches[i].kind.derivative(interior_point(l, r), Side::Right));
        if prev != 0 && s != prev {
            return Witness::TurningPoint { x: l };
        }
        prev = s;
    }
    Witness::TurningPoint { x: 0.0 }
}

fn cross_check(sigma: &ActivationSpec, verdict: &TransitivityVerdict, grid: &GridSpec) -> Result<()> {
    let mut prev: Option<(f64, f64)> = None;
    let mut failure = None;
    grid.for_each_point(|x| {
        if failure.is_some() {
            return;
        }
        let x = x[0];
        let v = sigma.apply(x);
        let h = v - x;
        let bad_sign = match (verdict.kind, verdict.dominance) {
            (TransitivityKind::Transitive, Dominance::Above) => h <= 0.0,
            (TransitivityKind::Transitive, Dominance::Below) => h >= 0.0,
            (TransitivityKind::LpTransitiveOnly, _) => h < 0.0,
            _ => false,
        };
        let bad_order = match (sigma.monotonicity(), prev) {
            (Some(Monotonicity::Increasing), Some((_, pv))) => v <= pv,
            (Some(Monotonicity::Decreasing), Some((_, pv))) => v >= pv,
            _ => false,
        };
        if bad_sign || bad_order {
            failure = Some((prev.map(|p| p.0).unwrap_or(x), x));
        }
        prev = Some((x, v));
    });
    match failure {
        Some((lo, hi)) => Err(Error::Inconclusive { lo, hi }),
        None => Ok(()),
    }
}

/// Builds `sigma(x) = sigma_tilde(x) + x + alpha2` for `x >= 0` and
/// `alpha1 x + alpha2` for `x < 0`, which has no fixed points and is
/// strictly increasing.
pub fn construct_transitive(sigma_tilde: &ActivationSpec, alpha1: f64, alpha2: f64) -> Result<ActivationSpec> {
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(Error::param("alpha1", "must lie in (0, 1)"));
    }
    if !(alpha2 > 0.0) || !alpha2.is_finite() {
        return Err(Error::param("alpha2", "must be positive"));
    }
    check_base(sigma_tilde)?;
    let d0 = sigma_tilde.derivative(0.0);
    if !d0.is_finite() {
        return Err(Error::pre("sigma_tilde has no finite derivative at 0"));
    }
    if (alpha2 - (d0 - 1.0)).abs() <= 1e-12 {
        return Err(Error::pre(format!("alpha2 = {alpha2} equals sigma_tilde'(0) - 1")));
    }
    let mut branches = vec![Branch::new(f64::NEG_INFINITY, 0.0, BranchMap::Affine { a: alpha1, b: alpha2 })];
    branches.extend(positive_half(sigma_tilde).map(|(l, r, k)| Branch::new(l, r, k.add_affine(1.0, alpha2))));
    ActivationSpec::new(format!("transitive[{}; {alpha1}, {alpha2}]", sigma_tilde.name()), branches)
}

/// Builds `sigma(x) = sigma_tilde(x) + x` for `x >= 0` and `alpha x` for
/// `x < 0`; its only fixed point is 0.
pub fn construct_lp_transitive(sigma_tilde: &ActivationSpec, alpha: f64) -> Result<ActivationSpec> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    check_base(sigma_tilde)?;
    let mut branches = vec![Branch::new(f64::NEG_INFINITY, 0.0, BranchMap::Affine { a: alpha, b: 0.0 })];
    branches.extend(positive_half(sigma_tilde).map(|(l, r, k)| Branch::new(l, r, k.add_affine(1.0, 0.0))));
    ActivationSpec::new(format!("lp_transitive[{}; {alpha}]", sigma_tilde.name()), branches)
}

fn check_base(sigma_tilde: &ActivationSpec) -> Result<()> {
    if sigma_tilde.monotonicity() != Some(Monotonicity::Increasing) {
        return Err(Error::pre("sigma_tilde must be strictly increasing"));
    }
    if sigma_tilde.apply(0.0).abs() > 1e-12 {
        return Err(Error::pre("sigma_tilde(0) must be 0"));
    }
    Ok(())
}

fn positive_half(spec: &ActivationSpec) -> impl Iterator<Item = (f64, f64, &BranchMap)> {
    spec.branches.iter().filter(|b| b.hi > 0.0).map(|b| (b.lo.max(0.0), b.hi, &b.kind))
}

fn two_piece(name: &str, left: (f64, f64), right: (f64, f64)) -> ActivationSpec {
    ActivationSpec::new(
        name,
        vec![
            Branch::new(f64::NEG_INFINITY, 0.0, BranchMap::Affine { a: left.0, b: left.1 }),
            Branch::new(0.0, f64::INFINITY, BranchMap::Affine { a: right.0, b: right.1 }),
        ],
    )
    .expect("built-in activations are valid")
}

pub fn relu() -> ActivationSpec {
    two_piece("relu", (0.0, 0.0), (1.0, 0.0))
}

/// `1.1 x + 0.1` for `x >= 0`, `0.1 x + 0.1` for `x < 0`: transitive.
pub fn leaky_shifted() -> ActivationSpec {
    two_piece("leaky_shifted_paper", (0.1, 0.1), (1.1, 0.1))
}

/// `1.1 x` for `x >= 0`, `0.1 x` for `x < 0`: fixed point at 0 only.
pub fn leaky_rescaled() -> ActivationSpec {
    two_piece("leaky_rescaled_paper", (0.1, 0.0), (1.1, 0.0))
}

pub fn identity() -> ActivationSpec {
    ActivationSpec::new("identity", vec![Branch::new(f64::NEG_INFINITY, f64::INFINITY, BranchMap::Affine { a: 1.0, b: 0.0 })])
        .expect("identity is valid")
}

pub const BUILTIN_NAMES: [&str; 4] = ["relu", "leaky_shifted_paper", "leaky_rescaled_paper", "identity"];

pub fn builtin(name: &str) -> Option<ActivationSpec> {
    match name {
        "relu" => Some(relu()),
        "leaky_shifted_paper" => Some(leaky_shifted()),
        "leaky_rescaled_paper" => Some(leaky_rescaled()),
        "identity" => Some(identity()),
        _ => None,
    }
}

impl ActivationSpec {
    /// Name under which a built-in equal to `self` is registered.
    pub fn builtin_name(&self) -> Option<&'static str> {
        BUILTIN_NAMES
            .iter()
            .copied()
            .find(|n| *n == self.name && builtin(n).as_ref() == Some(self))
    }

    pub fn describe(&self) -> String {
        self.builtin_name().map(ToString::to_string).unwrap_or_else(|| self.name.clone())
    }
}

/// `sigma - x` sampled check used by property tests and the CLI: minimum of
/// `sigma(x) - x` over the given points.
pub fn min_excess(sigma: &ActivationSpec, xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().map(|x| sigma.apply(x) - x).fold(f64::INFINITY, f64::min)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<ActivationSpec>();
}
