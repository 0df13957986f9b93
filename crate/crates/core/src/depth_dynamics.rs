//! The composition operator `f -> f o S`, `S(x) = s.(A x + b)`, its
//! iterates, escape times of cubes under `S`, and the blend-and-escape
//! construction producing `g~` close to `g` with `f o S^-N` planted on the
//! escaped image of a cube.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activations::{classify, ActivationSpec, ClassifyOptions, Monotonicity, TransitivityKind};
use crate::function_space::{d_ucc, lp_norm, sup_norm_on_ball, GridFunction, GridSpec, Measure1D};
use crate::network::{fit_shallow_knotted, ActivationRef, Knot, AffineLayer, FeedForwardNet, FitRegion, ShallowFitConfig};
use crate::rate_bounds::pushforward_density_norm;
use crate::{math, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    activation: ActivationRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
    b: Vec<f64>,
}

/// `Phi_{A,b}: f -> f o S` with `S(x) = s.(A x + b)` acting componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperator", into = "RawOperator")]
pub struct CompositionOperator {
    activation: ActivationSpec,
    /// `None` is the identity.
    matrix: Option<Vec<Vec<f64>>>,
    shift: Vec<f64>,
}

impl TryFrom<RawOperator> for CompositionOperator {
    type Error = Error;
    fn try_from(raw: RawOperator) -> Result<Self> {
        let act = raw.activation.resolve()?;
        match raw.matrix {
            None => Self::new(act, raw.b),
            Some(m) => Self::with_matrix(act, m, raw.b),
        }
    }
}

impl From<CompositionOperator> for RawOperator {
    fn from(op: CompositionOperator) -> Self {
        RawOperator { activation: ActivationRef::of(&op.activation), matrix: op.matrix, b: op.shift }
    }
}

impl CompositionOperator {
    /// `A = I`; every `b_i` must be positive.
    pub fn new(activation: ActivationSpec, shift: Vec<f64>) -> Result<Self> {
        if shift.is_empty() {
            return Err(Error::param("b", "must be non-empty"));
        }
        if shift.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::param("b", "entries must be positive when A is the identity"));
        }
        Ok(Self { activation, matrix: None, shift })
    }

    /// General full-rank `A`.
    pub fn with_matrix(activation: ActivationSpec, matrix: Vec<Vec<f64>>, shift: Vec<f64>) -> Result<Self> {
        let m = shift.len();
        if m == 0 || matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::param("matrix", "must be square with the size of b"));
        }
        if matrix.iter().flatten().chain(&shift).any(|v| !v.is_finite()) {
            return Err(Error::param("matrix", "entries must be finite"));
        }
        if !full_rank(&matrix) {
            return Err(Error::param("matrix", "must have full rank"));
        }
        let identity = matrix.iter().enumerate().all(|(i, r)| r.iter().enumerate().all(|(j, v)| *v == if i == j { 1.0 } else { 0.0 }));
        if identity {
            return Self::new(activation, shift);
        }
        Ok(Self { activation, matrix: Some(matrix), shift })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn activation(&self) -> &ActivationSpec {
        &self.activation
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn is_identity_matrix(&self) -> bool {
        self.matrix.is_none()
    }

    pub fn matrix_rows(&self) -> Vec<Vec<f64>> {
        match &self.matrix {
            Some(m) => m.clone(),
            None => AffineLayer::identity(self.dim()).matrix,
        }
    }

    /// `S(x)`.
    pub fn step_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.matrix {
            None => {
                for ((o, xi), bi) in out.iter_mut().zip(x).zip(&self.shift) {
                    *o = self.activation.apply(1.0 * xi + bi);
                }
            }
            Some(a) => {
                for ((o, row), bi) in out.iter_mut().zip(a).zip(&self.shift) {
                    let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bi;
                    *o = self.activation.apply(z);
                }
            }
        }
    }

    /// `S^n(x)`.
    pub fn iterate(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..n {
            self.step_into(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// `Phi^n(f) = f o S^n`.
    pub fn apply(&self, f: &GridFunction, n: usize) -> GridFunction {
        if n == 0 {
            return f.clone();
        }
        let op = Arc::new(self.clone());
        f.precompose(self.dim(), move |x, z| z.copy_from_slice(&op.iterate(x, n)))
    }

    pub fn apply_checked(&self, f: &GridFunction, n: usize) -> Result<GridFunction> {
        if f.dim_in() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: f.dim_in() });
        }
        Ok(self.apply(f, n))
    }

    /// `S^-1(y) = s^-1(y) - b` (identity `A` only).
    pub fn inverse_step(&self, y: &[f64]) -> Result<Vec<f64>> {
        if self.matrix.is_some() {
            return Err(Error::pre("inverse steps are implemented for A = I only"));
        }
        y.iter().zip(&self.shift).map(|(v, b)| Ok(self.activation.invert(*v)? - b)).collect()
    }

    pub fn inverse_iterate(&self, y: &[f64], n: usize) -> Result<Vec<f64>> {
        let mut cur = y.to_vec();
        for _ in 0..n {
            cur = self.inverse_step(&cur)?;
        }
        Ok(cur)
    }

    /// `n` copies of `(A, b)` each followed by the activation.
    pub fn frozen_layers(&self, n: usize) -> Vec<(AffineLayer, bool)> {
        let layer = AffineLayer { matrix: self.matrix_rows(), bias: self.shift.clone() };
        vec![(layer, true); n]
    }

    /// Box enclosure of `S(box)`; exact when `A` is the identity.
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rows = self.matrix_rows();
        let increasing = self.activation.monotonicity() != Some(Monotonicity::Decreasing);
        let mut out_lo = Vec::with_capacity(lo.len());
        let mut out_hi = Vec::with_capacity(lo.len());
        for (row, b) in rows.iter().zip(&self.shift) {
            let (mut zl, mut zh) = (*b, *b);
            for ((w, l), h) in row.iter().zip(lo).zip(hi) {
                if *w >= 0.0 {
                    zl += w * l;
                    zh += w * h;
                } else {
                    zl += w * h;
                    zh += w * l;
                }
            }
            let (a, c) = (self.activation.apply(zl), self.activation.apply(zh));
            if increasing {
                out_lo.push(a);
                out_hi.push(c);
            } else {
                out_lo.push(c);
                out_hi.push(a);
            }
        }
        (out_lo, out_hi)
    }
}

fn full_rank(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| m[*i][col].abs().total_cmp(&m[*j][col].abs())).unwrap_or(col);
        if m[piv][col].abs() <= 1e-12 * scale {
            return false;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    true
}

/// Escaped image of a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub n: usize,
    /// Per-axis `[lo, hi]` of the box enclosing `S^n([-K, K]^m)`.
    pub image: Vec<[f64; 2]>,
}

/// Smallest `N <= max_n` with `S^N([-K, K]^m)` disjoint from
/// `[-guard, guard]^m`. Requires a transitive activation.
pub fn escape_time(op: &CompositionOperator, k_radius: f64, guard_radius: f64, max_n: usize) -> Result<usize> {
    require_transitive(op.activation())?;
    Ok(escape(op, k_radius, guard_radius, max_n)?.n)
}

/// [`escape_time`] without the transitivity gate, returning the image box.
pub fn escape(op: &CompositionOperator, k_radius: f64, guard_radius: f64, max_n: usize) -> Result<Escape> {
    if !(k_radius > 0.0) || !k_radius.is_finite() {
        return Err(Error::param("K_radius", "must be positive"));
    }
    if !(guard_radius >= k_radius) || !guard_radius.is_finite() {
        return Err(Error::param("guard_radius", "must be at least K_radius"));
    }
    if !op.activation().is_weakly_monotone() {
        return Err(Error::pre("escape analysis needs a monotone activation"));
    }
    let m = op.dim();
    let mut lo = vec![-k_radius; m];
    let mut hi = vec![k_radius; m];
    for n in 1..=max_n {
        let (l, h) = op.image_box(&lo, &hi);
        lo = l;
        hi = h;
        let disjoint = lo.iter().zip(&hi).any(|(l, h)| *l > guard_radius || *h < -guard_radius);
        if disjoint {
            return Ok(Escape { n, image: lo.iter().zip(&hi).map(|(l, h)| [*l, *h]).collect() });
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::NoEscape { max_n })
}

fn require_transitive(sigma: &ActivationSpec) -> Result<()> {
    let v = classify(sigma, &ClassifyOptions::default())?;
    if v.kind != TransitivityKind::Transitive {
        return Err(Error::pre(format!("activation `{}` is not transitive ({:?})", sigma.describe(), v.kind)));
    }
    Ok(())
}

/// Smallest `k0 >= 1` with `2^-k0 < min(eps, delta) / 2`.
pub fn tail_cutoff(eps: f64, delta: f64) -> u32 {
    let t = eps.min(delta) / 2.0;
    let mut k = 1u32;
    while math::powf(2.0, -(k as f64)) >= t && k < 1000 {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitivityOptions {
    /// Width of the shell over which `g~` blends back into `g`.
    pub blend_margin: f64,
    pub max_n: usize,
    /// Terms of `d_ucc` used for verification.
    pub ucc_terms: usize,
    /// Verification grid resolution; `None` picks 100 points per unit for
    /// `m = 1` and 10 for `m = 2`.
    pub verify_points_per_axis: Option<usize>,
    /// Quadrature nodes per axis for `L^1_mu` verification.
    pub quad_nodes: usize,
    /// Re-express `g~` as a one-hidden-layer network.
    pub refit: Option<ShallowFitConfig>,
}

impl Default for TransitivityOptions {
    fn default() -> Self {
        Self { blend_margin: 1.0, max_n: 10_000, ucc_terms: 20, verify_points_per_axis: None, quad_nodes: 20_000, refit: None }
    }
}

impl TransitivityOptions {
    pub fn verify_grid(&self, m: usize) -> GridSpec {
        let per_unit = if m <= 1 { 100 } else { 10 };
        let points = self.verify_points_per_axis.unwrap_or(2 * self.ucc_terms * per_unit + 1);
        GridSpec { dim_in: m, dim_out: 1, points_per_axis: points, radius: self.ucc_terms as f64 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.blend_margin > 0.0) || !self.blend_margin.is_finite() {
            return Err(Error::param("blend_margin", "must be positive"));
        }
        if self.ucc_terms == 0 {
            return Err(Error::param("ucc_terms", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ucc,
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitSummary {
    pub width: usize,
    pub residual: f64,
}

/// Serializable part of a [`TransitivityCertificate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub k0: u32,
    pub blend_margin: f64,
    pub metric: Metric,
    /// Distance between `g` and `g~`.
    pub d_seed: f64,
    /// Distance between `f` and `Phi^N(g~)`.
    pub d_target: f64,
    pub eps: f64,
    pub delta: f64,
    pub activation: String,
    pub b: Vec<f64>,
    pub escaped_box: Vec<[f64; 2]>,
    pub refit: Option<RefitSummary>,
}

#[derive(Debug, Clone)]
pub struct TransitivityCertificate {
    pub summary: CertificateSummary,
    pub g_tilde: GridFunction,
    pub g_tilde_net: Option<FeedForwardNet>,
}

/// `g~ = g` away from `image`, `f o S^-N` on `image`, and a linear blend in
/// the sup-distance shell of width `margin` around it.
pub fn blend(op: &CompositionOperator, seed: &GridFunction, target: &GridFunction, escape: &Escape, margin: f64) -> GridFunction {
    if escape.n == 0 {
        return seed.clone();
    }
    let op = op.clone();
    let (seed, target) = (seed.clone(), target.clone());
    let image = escape.image.clone();
    let n = escape.n;
    let m = seed.dim_in();
    let out_dim = seed.dim_out();
    GridFunction::new(m, out_dim, move |x, y| {
        let mut dist = 0.0f64;
        let mut clamped = Vec::with_capacity(m);
        for (xi, [l, h]) in x.iter().zip(&image) {
            dist = dist.max(l - xi).max(xi - h);
            clamped.push(xi.clamp(*l, *h));
        }
        if dist >= margin {
            seed.eval_into(x, y);
            return;
        }
        match op.inverse_iterate(&clamped, n) {
            Ok(pre) => target.eval_into(&pre, y),
            Err(_) => y.fill(f64::NAN),
        }
        if dist > 0.0 {
            let lambda = 1.0 - dist / margin;
            let mut s = vec![0.0; out_dim];
            seed.eval_into(x, &mut s);
            for (a, b) in y.iter_mut().zip(&s) {
                *a = lambda * *a + (1.0 - lambda) * b;
            }
        }
    })
}

/// Axis positions where [`blend`] has corners when `A = I` and `sigma` is
/// piecewise affine: the shell faces, and the images under `S^N` of the
/// points where some `S^i` crosses a breakpoint of `sigma`.
pub fn blend_knots(op: &CompositionOperator, escape: &Escape, margin: f64) -> Vec<Knot> {
    let mut knots = Vec::new();
    if escape.n == 0 {
        return knots;
    }
    let breaks = op.activation().breakpoints();
    for (axis, [lo, hi]) in escape.image.iter().enumerate() {
        for at in [lo - margin, *lo, *hi, hi + margin] {
            knots.push(Knot { axis, at });
        }
        let b = op.shift()[axis];
        for beta in &breaks {
            let mut z = beta - b;
            for _ in 0..escape.n {
                z = op.activation().apply(z + b);
                if z > lo - margin && z < hi + margin {
                    knots.push(Knot { axis, at: z });
                }
            }
        }
    }
    knots
}

fn check_pair(op: &CompositionOperator, g: &GridFunction, f: &GridFunction, eps: f64, delta: f64) -> Result<()> {
    g.check_same_dims(f)?;
    if f.dim_in() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: f.dim_in() });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be positive"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::param("delta", "must be positive"));
    }
    if !op.is_identity_matrix() {
        return Err(Error::pre("the blend construction inverts S and needs A = I"));
    }
    Ok(())
}

/// Builds `g~` and `N` with `d_ucc(g, g~) < delta` and
/// `d_ucc(f, Phi^N(g~)) < eps`, both measured.
pub fn construct_transitive_approximant(
    op: &CompositionOperator,
    g: &GridFunction,
    f: &GridFunction,
    eps: f64,
    delta: f64,
    opts: &TransitivityOptions,
) -> Result<TransitivityCertificate> {
    check_pair(op, g, f, eps, delta)?;
    opts.validate()?;
    require_transitive(op.activation())?;
    let m = op.dim();
    let grid = opts.verify_grid(m);
    let k0 = tail_cutoff(eps, delta);
    let summary = |n, d_seed, d_target, escaped_box, refit| CertificateSummary {
        n,
        k0,
        blend_margin: opts.blend_margin,
        metric: Metric::Ucc,
        d_seed,
        d_target,
        eps,
        delta,
        activation: op.activation().describe(),
        b: op.shift().to_vec(),
        escaped_box,
        refit,
    };

    let direct = d_ucc(f, g, opts.ucc_terms, &grid)?.distance;
    if direct < 0.5 * eps {
        return Ok(TransitivityCertificate {
            summary: summary(0, 0.0, direct, Vec::new(), None),
            g_tilde: g.clone(),
            g_tilde_net: None,
        });
    }

    let k = k0 as f64;
    let esc = escape(op, k, k + opts.blend_margin, opts.max_n)?;
    let mut g_tilde = blend(op, g, f, &esc, opts.blend_margin);
    let mut net = None;
    let mut refit = None;
    if let Some(cfg) = &opts.refit {
        let top = esc.image.iter().map(|[_, h]| *h).fold(k, f64::max) + opts.blend_margin;
        let region = FitRegion::covering(m, -k - opts.blend_margin, top);
        let fit = fit_shallow_knotted(&g_tilde, op.activation(), &region, cfg, None, &blend_knots(op, &esc, opts.blend_margin))?;
        refit = Some(RefitSummary { width: cfg.width, residual: fit.residual });
        g_tilde = fit.net.to_grid_function();
        net = Some(fit.net);
    }

    let d_seed = d_ucc(g, &g_tilde, opts.ucc_terms, &grid)?.distance;
    let d_target = d_ucc(f, &op.apply(&g_tilde, esc.n), opts.ucc_terms, &grid)?.distance;
    if !(d_seed < delta) {
        return Err(Error::Verification { what: "d_seed".into(), measured: d_seed, bound: delta });
    }
    if !(d_target < eps) {
        return Err(Error::Verification { what: "d_target".into(), measured: d_target, bound: eps });
    }
    Ok(TransitivityCertificate { summary: summary(esc.n, d_seed, d_target, esc.image, refit), g_tilde, g_tilde_net: net })
}

/// `L^1_mu` version: `mu` is a product of one-dimensional measures, one per
/// input axis, and `s` may be merely `L^p`-transitive.
pub fn l1_transitive_approximant(
    op: &CompositionOperator,
    g: &GridFunction,
    f: &GridFunction,
    mu: &[Measure1D],
    eps: f64,
    delta: f64,
    opts: &TransitivityOptions,
) -> Result<TransitivityCertificate> {
    check_pair(op, g, f, eps, delta)?;
    opts.validate()?;
    let m = op.dim();
    if mu.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: mu.len() });
    }
    let verdict = classify(op.activation(), &ClassifyOptions::default())?;
    if verdict.kind == TransitivityKind::NotTransitive {
        return Err(Error::pre(format!("activation `{}` is neither transitive nor L^p-transitive", op.activation().describe())));
    }
    let norm_grid = GridSpec::line(20_001, 10.0)?;
    for (mu_i, b_i) in mu.iter().zip(op.shift()) {
        let report = pushforward_density_norm(op.activation(), *b_i, mu_i, &norm_grid)?;
        if !report.well_defined {
            return Err(Error::pre("pushforward density of S is unbounded; Phi is not defined on L^1_mu"));
        }
    }
    let summary = |n, k0, d_seed, d_target, escaped_box| CertificateSummary {
        n,
        k0,
        blend_margin: opts.blend_margin,
        metric: Metric::L1,
        d_seed,
        d_target,
        eps,
        delta,
        activation: op.activation().describe(),
        b: op.shift().to_vec(),
        escaped_box,
        refit: None,
    };

    let direct = lp_norm(&f.sub(g)?, mu, 1.0, opts.quad_nodes)?;
    if direct < 0.5 * eps {
        return Ok(TransitivityCertificate { summary: summary(0, 0, 0.0, direct, Vec::new()), g_tilde: g.clone(), g_tilde_net: None });
    }

    // outside [-K, K]^m both errors are at most (sup|f| + sup|g|) mu(outside)
    let probe = GridSpec { dim_in: m, dim_out: 1, points_per_axis: if m == 1 { 20_001 } else { 401 }, radius: 50.0 };
    let bound = 1.0 + sup_norm_on_ball(f, 50.0, &probe)? + sup_norm_on_ball(g, 50.0, &probe)?;
    let budget = eps.min(delta) / (4.0 * bound);
    let total: f64 = mu.iter().map(Measure1D::total_mass).product();
    let mut k0 = 1u32;
    loop {
        let k = k0 as f64;
        let inside: f64 = mu.iter().map(|mi| mi.cdf(k) - mi.cdf(-k)).product();
        if total - inside <= budget {
            break;
        }
        k0 += 1;
        if k0 > 1_000_000 {
            return Err(Error::TailSearch { threshold: budget, max_radius: 1e6 });
        }
    }
    let k = k0 as f64;
    let esc = escape(op, k, k + opts.blend_margin, opts.max_n)?;
    let g_tilde = blend(op, g, f, &esc, opts.blend_margin);
    let d_seed = lp_norm(&g.sub(&g_tilde)?, mu, 1.0, opts.quad_nodes)?;
    let d_target = lp_norm(&f.sub(&op.apply(&g_tilde, esc.n))?, mu, 1.0, opts.quad_nodes)?;
    if !(d_seed < delta) {
        return Err(Error::Verification { what: "d_seed".into(), measured: d_seed, bound: delta });
    }
    if !(d_target < eps) {
        return Err(Error::Verification { what: "d_target".into(), measured: d_target, bound: eps });
    }
    Ok(TransitivityCertificate { summary: summary(esc.n, k0, d_seed, d_target, esc.image), g_tilde, g_tilde_net: None })
}
