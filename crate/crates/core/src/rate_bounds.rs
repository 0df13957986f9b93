//! Convex-hull fitting and the quantities entering the depth-dependent
//! approximation bounds: the pushforward density norm of `x -> s(x + b)`,
//! its powers, and residual-vs-`n` sweeps.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::depth_dynamics::CompositionOperator;
use crate::function_space::{euclidean_norm, product_quadrature, GridFunction, GridSpec, Measure1D};
use crate::math::{ln, powf, sqrt};
use crate::network::{TreeFunction, TreeTerm};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    /// `sup_y d(S_# mu)/dy`, `S(x) = s(x + b)`; infinite when not well defined.
    pub norm_value: f64,
    pub well_defined: bool,
    /// `norm_value > 1`.
    pub kappa_check: bool,
    /// Point `x` (before the map) where the sup was attained.
    pub argmax: Option<f64>,
    /// `inf |S'|`.
    pub min_derivative: f64,
    /// Interval of `x` on which `S'` attains the infimum when it is zero.
    pub witness_interval: Option<(f64, f64)>,
}

/// Sup over `x` of `density(x) / S'(x)`, i.e. the sup of the density of the
/// pushforward of `mu` under `S(x) = s(x + b)`. Sampled on `grid` and at the
/// shifted breakpoints with both one-sided derivatives.
pub fn pushforward_density_norm(sigma: &ActivationSpec, b: f64, mu: &Measure1D, grid: &GridSpec) -> Result<PushforwardReport> {
    mu.validate()?;
    grid.validate()?;
    if !b.is_finite() {
        return Err(Error::param("b", "must be finite"));
    }
    if !sigma.is_weakly_monotone() {
        return Err(Error::pre("pushforward density requires a monotone activation"));
    }
    let (min_d, (l, r)) = sigma.min_abs_derivative();
    if !(min_d > 0.0) {
        return Ok(PushforwardReport {
            norm_value: f64::INFINITY,
            well_defined: false,
            kappa_check: false,
            argmax: None,
            min_derivative: min_d,
            witness_interval: Some((l - b, r - b)),
        });
    }
    let mut best = (0.0f64, None);
    let mut consider = |x: f64, d: f64| {
        let v = mu.density(x) / d.abs();
        if v > best.0 {
            best = (v, Some(x));
        }
    };
    grid.for_each_point(|x| consider(x[0], sigma.derivative(x[0] + b)));
    for t in sigma.breakpoints() {
        consider(t - b, sigma.derivative(t));
        consider(t - b, sigma.derivative_left(t));
    }
    Ok(PushforwardReport {
        norm_value: best.0,
        well_defined: true,
        kappa_check: best.0 > 1.0,
        argmax: best.1,
        min_derivative: min_d,
        witness_interval: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub n: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTable {
    pub norm_value: f64,
    pub rows: Vec<KappaRow>,
    pub strictly_increasing: bool,
}

/// Tabulates `norm^N`; fails unless the norm exceeds 1.
pub fn kappa_growth_check(report: &PushforwardReport, n_values: &[u32]) -> Result<KappaTable> {
    if !report.well_defined || !(report.norm_value > 1.0) {
        return Err(Error::NoGrowth { norm: report.norm_value });
    }
    let mut sorted = n_values.to_vec();
    sorted.sort_unstable();
    let rows: Vec<KappaRow> =
        sorted.iter().map(|&n| KappaRow { n, value: powf(report.norm_value, n as f64) }).collect();
    let strictly_increasing = rows.windows(2).all(|w| w[0].n == w[1].n || w[1].value > w[0].value);
    Ok(KappaTable { norm_value: report.norm_value, rows, strictly_increasing })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplexFitOptions {
    pub max_iter: usize,
    /// Quadrature nodes per axis.
    pub quad_nodes: usize,
}

impl Default for SimplexFitOptions {
    fn default() -> Self {
        Self { max_iter: 2000, quad_nodes: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexFit {
    pub coefficients: Vec<f64>,
    pub basis_ids: Vec<usize>,
    /// `int |sum a_i f_i - f| dmu` at the returned coefficients.
    pub residual: f64,
    pub iterations: usize,
    /// Best residual after each iteration (index 0 is the starting vertex).
    pub history: Vec<f64>,
}

struct Sampled {
    /// per basis function, values at all nodes (node-major, then output)
    basis: Vec<Vec<f64>>,
    target: Vec<f64>,
    weights: Vec<f64>,
    dim_out: usize,
}

impl Sampled {
    fn new(basis: &[GridFunction], target: &GridFunction, mu: &[Measure1D], quad_nodes: usize) -> Result<Self> {
        if mu.len() != target.dim_in() {
            return Err(Error::DimensionMismatch { expected: target.dim_in(), found: mu.len() });
        }
        let (points, weights) = product_quadrature(mu, quad_nodes)?;
        let d = target.dim_out();
        let sample = |f: &GridFunction| -> Result<Vec<f64>> {
            f.check_same_dims(target)?;
            let mut out = vec![0.0; points.len() * d];
            for (x, chunk) in points.iter().zip(out.chunks_mut(d)) {
                f.eval_into(x, chunk);
                if chunk.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { point: x.clone() });
                }
            }
            Ok(out)
        };
        let target_values = sample(target)?;
        let basis = basis.iter().map(sample).collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, target: target_values, weights, dim_out: d })
    }

    fn l1(&self, residual: &[f64]) -> f64 {
        residual.chunks(self.dim_out).zip(&self.weights).map(|(r, w)| w * euclidean_norm(r)).sum()
    }

    fn l1_along(&self, r: &[f64], u: &[f64], gamma: f64, buf: &mut [f64]) -> f64 {
        for ((b, x), y) in buf.iter_mut().zip(r).zip(u) {
            *b = x + gamma * y;
        }
        self.l1(buf)
    }

    fn smooth_along(&self, r: &[f64], u: &[f64], gamma: f64, tau: f64) -> f64 {
        let d = self.dim_out;
        r.chunks(d)
            .zip(u.chunks(d))
            .zip(&self.weights)
            .map(|((rj, uj), w)| {
                let s: f64 = rj.iter().zip(uj).map(|(a, b)| (a + gamma * b) * (a + gamma * b)).sum();
                w * sqrt(s + tau * tau)
            })
            .sum()
    }

    /// Exact minimizer on `[0, 1]` of the convex piecewise-linear
    /// `sum w_j |r_j + gamma u_j|` (scalar outputs).
    fn exact_l1_step(&self, r: &[f64], u: &[f64]) -> f64 {
        let mut slope = 0.0;
        let mut kinks: Vec<(f64, f64)> = Vec::new();
        for ((rj, uj), w) in r.iter().zip(u).zip(&self.weights) {
            if *uj == 0.0 {
                continue;
            }
            let s = if *rj != 0.0 { rj.signum() } else { uj.signum() };
            slope += w * uj * s;
            let g = -rj / uj;
            if g > 0.0 && g < 1.0 {
                kinks.push((g, 2.0 * w * uj.abs()));
            }
        }
        if slope >= 0.0 {
            return 0.0;
        }
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (g, jump) in kinks {
            slope += jump;
            if slope >= 0.0 {
                return g;
            }
        }
        1.0
    }
}

/// Golden-section minimizer of a convex function on `[0, 1]`.
fn golden(f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [0.0, mid, 1.0].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap_or(mid)
}

/// Minimizes `int |sum a_i f_i - f| dmu` over the unit simplex by
/// Frank-Wolfe.
///
/// The vertex is chosen from the gradient of the smoothed objective
/// `sum w_j sqrt(r_j^2 + tau^2)`, which tends to the subgradient with the
/// zero choice at ties as `tau -> 0`. Each step takes the better of the
/// classical `2/(k+2)` step and an exact line search of the true objective.
/// When neither decreases the objective, a line search of the smoothed
/// objective is taken instead and `tau` is halved. The best iterate is
/// returned, so `history` is non-increasing.
pub fn simplex_fit(basis: &[GridFunction], target: &GridFunction, mu: &[Measure1D], opts: &SimplexFitOptions) -> Result<SimplexFit> {
    if basis.is_empty() {
        return Err(Error::param("basis", "must be non-empty"));
    }
    let data = Sampled::new(basis, target, mu, opts.quad_nodes)?;
    Ok(frank_wolfe(&data, opts.max_iter))
}

fn frank_wolfe(data: &Sampled, max_iter: usize) -> SimplexFit {
    let n = data.basis.len();
    let len = data.target.len();
    let residual_of = |i: usize| -> Vec<f64> { data.basis[i].iter().zip(&data.target).map(|(a, t)| a - t).collect() };

    // best single vertex
    let (start, start_res) = (0..n)
        .map(|i| (i, data.l1(&residual_of(i))))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let mut alpha = vec![0.0; n];
    alpha[start] = 1.0;
    let mut combo: Vec<f64> = data.basis[start].clone();
    let mut r = residual_of(start);
    let mut value = start_res;
    let mut best = (alpha.clone(), value);
    let mut history = vec![value];

    let mass: f64 = data.weights.iter().sum();
    let mut tau = if mass > 0.0 { 0.1 * value / mass } else { 0.0 };
    let tau_floor = tau * 1e-9;
    let mut grad_w = vec![0.0; len];
    let mut u = vec![0.0; len];
    let mut buf = vec![0.0; len];
    let mut iterations = 0;
    let d = data.dim_out;

    for k in 0..max_iter {
        if value == 0.0 || tau <= tau_floor {
            break;
        }
        iterations = k + 1;
        for ((g, rj), w) in grad_w.chunks_mut(d).zip(r.chunks(d)).zip(&data.weights) {
            let norm = euclidean_norm(rj);
            let scale = if norm == 0.0 { 0.0 } else { w / sqrt(norm * norm + tau * tau) };
            g.iter_mut().zip(rj).for_each(|(gi, ri)| *gi = scale * ri);
        }
        let grads: Vec<f64> = data.basis.iter().map(|fi| fi.iter().zip(&grad_w).map(|(a, b)| a * b).sum()).collect();
        let s = (0..n).fold(0, |acc, i| if grads[i] < grads[acc] { i } else { acc });
        for ((ui, fs), c) in u.iter_mut().zip(&data.basis[s]).zip(&combo) {
            *ui = fs - c;
        }

        let classic = 2.0 / (k as f64 + 2.0);
        let exact = if d == 1 { data.exact_l1_step(&r, &u) } else { golden(|g| data.l1_along(&r, &u, g, &mut buf.clone())) };
        let v_classic = data.l1_along(&r, &u, classic, &mut buf);
        let v_exact = data.l1_along(&r, &u, exact, &mut buf);
        let (mut gamma, mut new_value) = if v_exact <= v_classic { (exact, v_exact) } else { (classic, v_classic) };
        if !(new_value < value) {
            gamma = golden(|g| data.smooth_along(&r, &u, g, tau));
            new_value = data.l1_along(&r, &u, gamma, &mut buf);
            tau *= 0.5;
        }
        if gamma > 0.0 {
            alpha.iter_mut().for_each(|a| *a *= 1.0 - gamma);
            alpha[s] += gamma;
            for ((c, ri), ui) in combo.iter_mut().zip(r.iter_mut()).zip(&u) {
                *c += gamma * ui;
                *ri += gamma * ui;
            }
            value = new_value;
        }
        if value < best.1 {
            best = (alpha.clone(), value);
        }
        history.push(best.1);
    }

    let (mut coefficients, _) = best;
    // renormalize away rounding drift
    let sum: f64 = coefficients.iter().sum();
    coefficients.iter_mut().for_each(|a| *a = (*a / sum).clamp(0.0, 1.0));
    let final_combo: Vec<f64> = (0..len)
        .map(|j| coefficients.iter().zip(&data.basis).map(|(a, f)| a * f[j]).sum::<f64>() - data.target[j])
        .collect();
    SimplexFit {
        residual: data.l1(&final_combo),
        basis_ids: (0..n).collect(),
        coefficients,
        iterations,
        history,
    }
}

/// Random dictionaries for [`rate_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisFamily {
    /// `1_{(b, c)}` with both endpoints uniform on `[lo, hi]`.
    Trees {
        #[serde(default = "default_tree_lo")]
        lo: f64,
        #[serde(default = "default_tree_hi")]
        hi: f64,
    },
    /// `s(w x + c)` with `w ~ U[-scale, scale]`, `c ~ U[-scale, scale]`.
    ShallowNets {
        #[serde(default = "default_net_scale")]
        scale: f64,
    },
}

fn default_tree_lo() -> f64 {
    -0.5
}

fn default_tree_hi() -> f64 {
    1.5
}

fn default_net_scale() -> f64 {
    3.0
}

impl Default for BasisFamily {
    fn default() -> Self {
        BasisFamily::Trees { lo: default_tree_lo(), hi: default_tree_hi() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSweepOptions {
    pub seed: u64,
    pub fit: SimplexFitOptions,
    /// Grid for the pushforward norm.
    pub norm_grid: GridSpec,
}

impl Default for RateSweepOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            fit: SimplexFitOptions::default(),
            norm_grid: GridSpec { dim_in: 1, dim_out: 1, points_per_axis: 20_001, radius: 10.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub depth: u32,
    pub residual: f64,
    /// `(1 + sqrt(2 mu(R))) norm^N / sqrt(n)`.
    pub bound_reference: f64,
    /// `(1 + sqrt(2 mu(R))) norm^(N/2) / sqrt(n)`.
    pub bound_displayed: f64,
    /// `(1 + sqrt(2 mu(R))) / sqrt(n)`.
    pub bound_proof_chain: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln residual` against `ln n`.
    pub slope_estimate: f64,
    pub norm_value: f64,
    pub mass: f64,
}

/// Dictionary drawn once for the largest `n`; every row uses a prefix.
pub struct RatePlan {
    data: Sampled,
    depth: u32,
    norm_value: f64,
    mass: f64,
    max_iter: usize,
}

pub fn prepare_rate_sweep(
    family: &BasisFamily,
    target: &GridFunction,
    mu: &Measure1D,
    max_n: usize,
    depth: u32,
    op: &CompositionOperator,
    opts: &RateSweepOptions,
) -> Result<RatePlan> {
    if max_n == 0 {
        return Err(Error::param("n_values", "must contain a positive n"));
    }
    if target.dim_in() != 1 || op.dim() != 1 {
        return Err(Error::param("target", "rate sweeps are one-dimensional"));
    }
    let report = pushforward_density_norm(op.activation(), op.shift()[0], mu, &opts.norm_grid)?;
    if depth > 0 && !report.well_defined {
        return Err(Error::pre("composition operator is not well defined on L^1_mu (pushforward density unbounded)"));
    }
    if depth > 0 && !op.is_identity_matrix() {
        return Err(Error::pre("rate sweeps use the identity matrix"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Vec::with_capacity(max_n);
    for _ in 0..max_n {
        let f = match *family {
            BasisFamily::Trees { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::param("basis_family", "need lo < hi"));
                }
                let (u, v): (f64, f64) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
                TreeFunction::new(vec![TreeTerm { a: 1.0, b: u.min(v), c: u.max(v) }])?.to_grid_function()
            }
            BasisFamily::ShallowNets { scale } => {
                let (w, c): (f64, f64) = (rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale));
                let s = op.activation().clone();
                GridFunction::scalar(move |x| s.apply(w * x + c))
            }
        };
        basis.push(op.apply(&f, depth as usize));
    }
    let data = Sampled::new(&basis, target, core::slice::from_ref(mu), opts.fit.quad_nodes)?;
    let norm_value = if depth == 0 { report.norm_value.max(0.0) } else { report.norm_value };
    Ok(RatePlan { data, depth, norm_value, mass: mu.total_mass(), max_iter: opts.fit.max_iter })
}

impl RatePlan {
    pub fn max_n(&self) -> usize {
        self.data.basis.len()
    }

    /// Fits the first `n` dictionary elements.
    pub fn row(&self, n: usize) -> Result<RateRow> {
        if n == 0 || n > self.max_n() {
            return Err(Error::param("n", "must lie in 1..=max_n"));
        }
        let sub = Sampled {
            basis: self.data.basis[..n].to_vec(),
            target: self.data.target.clone(),
            weights: self.data.weights.clone(),
            dim_out: self.data.dim_out,
        };
        let fit = frank_wolfe(&sub, self.max_iter);
        let c = (1.0 + sqrt(2.0 * self.mass)) / sqrt(n as f64);
        let nd = self.depth as f64;
        let norm_pow = |p: f64| if self.depth == 0 { 1.0 } else { powf(self.norm_value, p) };
        Ok(RateRow {
            n,
            depth: self.depth,
            residual: fit.residual,
            bound_reference: c * norm_pow(nd),
            bound_displayed: c * norm_pow(nd / 2.0),
            bound_proof_chain: c,
            iterations: fit.iterations,
        })
    }

    pub fn finish(&self, mut rows: Vec<RateRow>) -> RateTable {
        rows.sort_by_key(|r| r.n);
        RateTable { slope_estimate: loglog_slope(&rows), rows, norm_value: self.norm_value, mass: self.mass }
    }
}

fn loglog_slope(rows: &[RateRow]) -> f64 {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.residual > 0.0).map(|r| (ln(r.n as f64), ln(r.residual))).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Sequential sweep over `n_values`.
pub fn rate_sweep(
    family: &BasisFamily,
    target: &GridFunction,
    mu: &Measure1D,
    n_values: &[usize],
    depth: u32,
    op: &CompositionOperator,
    opts: &RateSweepOptions,
) -> Result<RateTable> {
    let max_n = n_values.iter().copied().max().unwrap_or(0);
    let plan = prepare_rate_sweep(family, target, mu, max_n, depth, op, opts)?;
    let rows = n_values.iter().map(|&n| plan.row(n)).collect::<Result<Vec<_>>>()?;
    Ok(plan.finish(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{leaky_rescaled, relu, Branch, BranchMap};
    use crate::math::normal_pdf;

    fn grid() -> GridSpec {
        GridSpec::line(20_001, 10.0).unwrap()
    }

    #[test]
    fn rescaled_leaky_norm() {
        let r = pushforward_density_norm(&leaky_rescaled(), 1.0, &Measure1D::standard_gaussian(), &grid()).unwrap();
        let want = normal_pdf(-1.0) / 0.1;
        assert!((r.norm_value - want).abs() < 1e-12, "{}", r.norm_value);
        assert!(r.well_defined && r.kappa_check);
        assert_eq!(r.argmax, Some(-1.0));
    }

    #[test]
    fn shift_invariance_for_slope_one() {
        let id = crate::activations::identity();
        let r = pushforward_density_norm(&id, 2.5, &Measure1D::standard_gaussian(), &grid()).unwrap();
        assert!((r.norm_value - normal_pdf(0.0)).abs() < 1e-12);
        assert!(!r.kappa_check);
        let slope = ActivationSpec::new("s", vec![Branch::new(f64::NEG_INFINITY, f64::INFINITY, BranchMap::Affine { a: 0.5, b: 3.0 })]).unwrap();
        let r = pushforward_density_norm(&slope, -1.0, &Measure1D::standard_gaussian(), &grid()).unwrap();
        assert!((r.norm_value / (normal_pdf(0.0) / 0.5) - 1.0).abs() < 0.01);
    }

    #[test]
    fn relu_not_well_defined() {
        let r = pushforward_density_norm(&relu(), 1.0, &Measure1D::standard_gaussian(), &grid()).unwrap();
        assert!(!r.well_defined && !r.kappa_check);
        assert!(r.norm_value.is_infinite());
        assert_eq!(r.witness_interval, Some((f64::NEG_INFINITY, -1.0)));
    }

    #[test]
    fn kappa_table() {
        let r = pushforward_density_norm(&leaky_rescaled(), 1.0, &Measure1D::standard_gaussian(), &grid()).unwrap();
        let t = kappa_growth_check(&r, &(0..=10).collect::<Vec<_>>()).unwrap();
        assert_eq!(t.rows[0].value, 1.0);
        assert!(t.strictly_increasing);
        let small = PushforwardReport { norm_value: 0.4, well_defined: true, kappa_check: false, argmax: None, min_derivative: 1.0, witness_interval: None };
        assert!(matches!(kappa_growth_check(&small, &[1]), Err(Error::NoGrowth { .. })));
    }

    #[test]
    fn simplex_examples() {
        let mu = [Measure1D::standard_gaussian()];
        let opts = SimplexFitOptions { max_iter: 500, quad_nodes: 400 };
        let sin = GridFunction::scalar(crate::math::sin);
        let fit = simplex_fit(core::slice::from_ref(&sin), &sin, &mu, &opts).unwrap();
        assert_eq!(fit.coefficients, [1.0]);
        assert_eq!(fit.residual, 0.0);

        let basis = [GridFunction::constant(1, vec![0.0]), GridFunction::constant(1, vec![1.0])];
        let fit = simplex_fit(&basis, &GridFunction::constant(1, vec![0.3]), &mu, &opts).unwrap();
        assert!((fit.coefficients[1] - 0.3).abs() < 1e-9, "{:?}", fit.coefficients);
        assert!(fit.residual < 1e-9);

        let fit = simplex_fit(&basis, &GridFunction::constant(1, vec![2.0]), &mu, &opts).unwrap();
        assert_eq!(fit.coefficients, [0.0, 1.0]);
        assert!((fit.residual - 1.0).abs() < 1e-12);
    }
}
