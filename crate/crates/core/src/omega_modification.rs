//! Weighted approximation on all of `R^m`: the bump-and-decay transform
//! that turns compact-uniform fits into uniform fits of functions vanishing
//! at infinity, the scalings `Phi_omega` / `Psi_omega`, and the best
//! constant approximation of `exp(-|x|)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::function_space::{
    euclidean_norm, for_each_box_point, max_norm, weighted_sup_norm, GridFunction, Weight, WeightFamily, WeightedSupOptions,
};
use crate::math::{exp, sqrt};
use crate::network::{fit_shallow_weighted, ActivationRef, FitRegion, ShallowFitConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaTransformParams {
    pub a: f64,
    pub b: f64,
    pub omega: Weight,
}

impl OmegaTransformParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::param("a", "must be positive"));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::param("b", "must be positive"));
        }
        self.omega.validate()
    }
}

/// `g(x) exp(-b / (b - |x|^2)) + a` for `|x|^2 < b` and
/// `a exp(-|g(x)| (|x| - sqrt b))` (componentwise `|g|`) outside. Both
/// branches tend to `a` at `|x|^2 = b`.
pub fn bump_transform(g: &GridFunction, a: f64, b: f64) -> Result<GridFunction> {
    OmegaTransformParams { a, b, omega: Weight::Zero }.validate()?;
    let g = g.clone();
    let root_b = sqrt(b);
    Ok(GridFunction::new(g.dim_in(), g.dim_out(), move |x, y| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        g.eval_into(x, y);
        if r2 < b {
            let bump = exp(-b / (b - r2));
            y.iter_mut().for_each(|v| *v = *v * bump + a);
        } else {
            let dist = sqrt(r2) - root_b;
            y.iter_mut().for_each(|v| *v = a * exp(-v.abs() * dist));
        }
    }))
}

/// `(omega(|x|) + 1) f(x)`.
pub fn phi_omega(f: &GridFunction, omega: &Weight) -> GridFunction {
    scale_by_weight(f, *omega, false)
}

/// `f(x) / (omega(|x|) + 1)`.
pub fn psi_omega(f: &GridFunction, omega: &Weight) -> GridFunction {
    scale_by_weight(f, *omega, true)
}

fn scale_by_weight(f: &GridFunction, omega: Weight, divide: bool) -> GridFunction {
    let f = f.clone();
    GridFunction::new(f.dim_in(), f.dim_out(), move |x, y| {
        f.eval_into(x, y);
        let w = omega.eval(euclidean_norm(x)) + 1.0;
        let s = if divide { 1.0 / w } else { w };
        y.iter_mut().for_each(|v| *v *= s);
    })
}

/// `Phi_omega(bump_transform(g, a, b))`.
pub fn omega_transform(g: &GridFunction, params: &OmegaTransformParams) -> Result<GridFunction> {
    params.validate()?;
    Ok(phi_omega(&bump_transform(g, params.a, params.b)?, &params.omega))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VanishingOptions {
    pub fit: ShallowFitConfig,
    pub max_width: usize,
    pub activation: ActivationRef,
    /// The tail radius `R` is the first with `sup_{R <= |x| <= 2R} |f|`
    /// below `tail_fraction * eps`.
    pub tail_fraction: f64,
    pub start_radius: f64,
    pub max_radius: f64,
    /// The fit covers the ball of radius `rho sqrt(b)`, and `sqrt(b) = R / rho`.
    pub rho: f64,
    /// Error is measured on the ball of radius `verify_factor * sqrt(b)`.
    pub verify_factor: f64,
    pub verify_points_per_axis: usize,
    /// In one dimension the verification grid is refined to at most this
    /// spacing.
    pub verify_spacing: f64,
}

impl Default for VanishingOptions {
    fn default() -> Self {
        Self {
            fit: ShallowFitConfig { width: 256, ridge: 1e-10, points_per_axis: 8001, seed: 0, scale_octaves: 6.0 },
            max_width: 1024,
            activation: ActivationRef::Name("leaky_shifted_paper".into()),
            tail_fraction: 0.25,
            start_radius: 1.0,
            max_radius: 65_536.0,
            rho: 0.9,
            verify_factor: 3.0,
            verify_points_per_axis: 8001,
            verify_spacing: 0.005,
        }
    }
}

impl VanishingOptions {
    fn points_for(&self, m: usize, radius: f64) -> usize {
        if m == 1 {
            self.verify_points_per_axis.max(crate::math::ceil(2.0 * radius / self.verify_spacing) as usize + 1)
        } else {
            self.verify_points_per_axis
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::param("tail_fraction", "must lie in (0, 1)"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param("rho", "must lie in (0, 1)"));
        }
        if !(self.start_radius > 0.0) || !(self.max_radius >= self.start_radius) {
            return Err(Error::param("start_radius", "need 0 < start_radius <= max_radius"));
        }
        if !(self.verify_factor >= 1.0) {
            return Err(Error::param("verify_factor", "must be at least 1"));
        }
        if !(self.verify_spacing > 0.0) {
            return Err(Error::param("verify_spacing", "must be positive"));
        }
        if self.verify_points_per_axis < 2 {
            return Err(Error::param("verify_points_per_axis", "must be at least 2"));
        }
        self.fit.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub tail_radius: f64,
    pub fit_radius: f64,
    pub fit_width: usize,
    /// Weighted least-squares residual on the training grid, as a sup.
    pub fit_residual: f64,
    pub sup_error: f64,
    pub verify_radius: f64,
}

/// Sup of `|f|` over the shell `r <= |x| <= 2r`.
fn shell_sup(f: &GridFunction, r: f64, points: usize) -> f64 {
    let m = f.dim_in();
    let mut y = vec![0.0; f.dim_out()];
    let mut sup = 0.0f64;
    let (lo, hi) = (vec![-2.0 * r; m], vec![2.0 * r; m]);
    for_each_box_point(&lo, &hi, points, |x| {
        let n = euclidean_norm(x);
        if n < r || n > 2.0 * r * (1.0 + 1e-12) {
            return;
        }
        f.eval_into(x, &mut y);
        let v = euclidean_norm(&y);
        sup = if v.is_nan() { f64::INFINITY } else { sup.max(v) };
    });
    sup
}

/// First `R = start * 2^j <= max` whose shell sup is below `threshold`.
fn tail_radius(f: &GridFunction, threshold: f64, opts: &VanishingOptions) -> Option<f64> {
    let mut r = opts.start_radius;
    while r <= opts.max_radius {
        if shell_sup(f, r, opts.points_for(f.dim_in(), 2.0 * r)) <= threshold {
            return Some(r);
        }
        r *= 2.0;
    }
    None
}

fn sup_distance_on_ball(f: &GridFunction, g: &GridFunction, radius: f64, points: usize) -> f64 {
    let m = f.dim_in();
    let mut a = vec![0.0; f.dim_out()];
    let mut b = vec![0.0; f.dim_out()];
    let mut sup = 0.0f64;
    let (lo, hi) = (vec![-radius; m], vec![radius; m]);
    for_each_box_point(&lo, &hi, points, |x| {
        if euclidean_norm(x) > radius * (1.0 + 1e-12) {
            return;
        }
        f.eval_into(x, &mut a);
        g.eval_into(x, &mut b);
        let d = sqrt(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
        sup = if d.is_nan() { f64::INFINITY } else { sup.max(d) };
    });
    sup
}

/// Uniform approximation of a function vanishing at infinity by
/// `bump_transform(g, eps/2, b)` with `g` a one-hidden-layer network.
///
/// `g` minimizes `sum (bump(x) g(x) - (f(x) - a))^2` over the fit ball,
/// i.e. a least-squares fit of `(f - a) exp(b / (b - |x|^2))` weighted by
/// `bump^2`.
pub fn approximate_vanishing(f: &GridFunction, eps: f64, opts: &VanishingOptions) -> Result<(GridFunction, VanishingReport)> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be positive"));
    }
    opts.validate()?;
    let activation = opts.activation.resolve()?;
    let threshold = opts.tail_fraction * eps;
    let r = tail_radius(f, threshold, opts).ok_or(Error::TailSearch { threshold, max_radius: opts.max_radius })?;
    let root_b = r / opts.rho;
    let b = root_b * root_b;
    let a = 0.5 * eps;
    let m = f.dim_in();

    let target = {
        let f = f.clone();
        GridFunction::new(m, f.dim_out(), move |x, y| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            f.eval_into(x, y);
            if r2 < b {
                let lift = exp(b / (b - r2));
                y.iter_mut().for_each(|v| *v = (*v - a) * lift);
            } else {
                y.fill(0.0);
            }
        })
    };
    let weight = move |x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < b {
            exp(-2.0 * b / (b - r2))
        } else {
            0.0
        }
    };
    let region = FitRegion::centered(m, r);
    let verify_radius = opts.verify_factor * root_b;

    let mut width = opts.fit.width;
    let mut best: Option<(GridFunction, VanishingReport)> = None;
    while width <= opts.max_width.max(opts.fit.width) {
        let cfg = ShallowFitConfig { width, ..opts.fit };
        let fit = fit_shallow_weighted(&target, &activation, &region, &cfg, Some(&weight))?;
        let g = fit.net.to_grid_function();
        let f_eps = bump_transform(&g, a, b)?;
        let sup_error = sup_distance_on_ball(f, &f_eps, verify_radius, opts.points_for(m, verify_radius));
        let fit_residual = sup_distance_on_ball(f, &f_eps, r, cfg.points_per_axis);
        let report = VanishingReport { eps, a, b, tail_radius: r, fit_radius: r, fit_width: width, fit_residual, sup_error, verify_radius };
        let done = sup_error < eps;
        if best.as_ref().is_none_or(|(_, rep)| sup_error < rep.sup_error) {
            best = Some((f_eps, report));
        }
        if done {
            break;
        }
        width *= 2;
    }
    match best {
        Some((f_eps, report)) if report.sup_error < eps => Ok((f_eps, report)),
        Some((_, report)) => Err(Error::FitBudget { residual: report.sup_error, budget: eps }),
        None => Err(Error::param("max_width", "no fit attempted")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthOptions {
    pub vanishing: VanishingOptions,
    pub weighted_sup: WeightedSupOptions,
    /// Points per axis for the weighted-sup probes.
    pub probe_points: usize,
    /// The weighted error is also measured on `[-r, r]^m` for this `r`.
    pub measure_radius: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self { vanishing: VanishingOptions::default(), weighted_sup: WeightedSupOptions::default(), probe_points: 2001, measure_radius: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCheck {
    pub label: String,
    pub weighted_sup: f64,
    pub stabilized: bool,
    /// `Psi_omega f` falls below the tail threshold at some radius.
    pub vanishes: bool,
    pub controls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub selected: Weight,
    pub checks: Vec<WeightCheck>,
    pub vanishing: Option<VanishingReport>,
    /// `sup |f - approx| / (omega + 1)` on the vanishing verification ball.
    pub weighted_error: f64,
    /// Same quantity on `[-measure_radius, measure_radius]^m`.
    pub weighted_error_on_measure_box: f64,
    pub measure_radius: f64,
}

/// Uniform approximation in `C_omega` for the best controlling `omega` of
/// the family: the one with the smallest weighted norm among those for
/// which `Psi_omega f` vanishes at infinity (ties go to the earliest).
pub fn approximate_growth(f: &GridFunction, family: &WeightFamily, eps: f64, opts: &GrowthOptions) -> Result<(GridFunction, GrowthReport)> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", "must be positive"));
    }
    opts.vanishing.validate()?;
    let probe = crate::function_space::GridSpec { dim_in: f.dim_in(), dim_out: f.dim_out(), points_per_axis: opts.probe_points, radius: 1.0 };
    let threshold = opts.vanishing.tail_fraction * eps;
    let mut checks = Vec::new();
    let mut chosen: Option<(usize, f64)> = None;
    for (idx, w) in family.weights().iter().enumerate() {
        let ws = weighted_sup_norm(f, w, &probe, &opts.weighted_sup);
        let vanishes = ws.stabilized && tail_radius(&psi_omega(f, w), threshold, &opts.vanishing).is_some();
        let controls = ws.stabilized && vanishes;
        if controls && chosen.is_none_or(|(_, v)| ws.value < v) {
            chosen = Some((idx, ws.value));
        }
        checks.push(WeightCheck { label: w.label(), weighted_sup: ws.value, stabilized: ws.stabilized, vanishes, controls });
    }
    let Some((idx, norm)) = chosen else {
        return Err(Error::NoControllingWeight { flags: checks.into_iter().map(|c| (c.label, c.controls)).collect() });
    };
    let omega = family.weights()[idx];

    if norm == 0.0 {
        let zero = GridFunction::zero(f.dim_in(), f.dim_out());
        let report = GrowthReport {
            selected: omega,
            checks,
            vanishing: None,
            weighted_error: 0.0,
            weighted_error_on_measure_box: 0.0,
            measure_radius: opts.measure_radius,
        };
        return Ok((zero, report));
    }

    let g = psi_omega(f, &omega);
    let (g_eps, vanishing) = approximate_vanishing(&g, eps, &opts.vanishing)?;
    let approx = phi_omega(&g_eps, &omega);
    let weighted_error_on_measure_box = weighted_box_error(f, &approx, &omega, opts.measure_radius, opts.vanishing.points_for(f.dim_in(), opts.measure_radius));
    let report = GrowthReport {
        selected: omega,
        checks,
        weighted_error: vanishing.sup_error,
        vanishing: Some(vanishing),
        weighted_error_on_measure_box,
        measure_radius: opts.measure_radius,
    };
    Ok((approx, report))
}

/// `sup_{[-r, r]^m} |f - g| / (omega(|x|) + 1)`.
pub fn weighted_box_error(f: &GridFunction, g: &GridFunction, omega: &Weight, radius: f64, points: usize) -> f64 {
    let m = f.dim_in();
    let mut a = vec![0.0; f.dim_out()];
    let mut b = vec![0.0; f.dim_out()];
    let mut sup = 0.0f64;
    for_each_box_point(&vec![-radius; m], &vec![radius; m], points, |x| {
        f.eval_into(x, &mut a);
        g.eval_into(x, &mut b);
        let d = sqrt(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()) / (omega.eval(euclidean_norm(x)) + 1.0);
        sup = if d.is_nan() { f64::INFINITY } else { sup.max(d) };
    });
    sup
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitationOptions {
    pub radius: f64,
    pub points: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub c_count: usize,
    /// Samples whose sup on the grid exceeds this count as unbounded.
    pub unbounded_threshold: f64,
}

impl Default for LimitationOptions {
    fn default() -> Self {
        Self { radius: 50.0, points: 10_001, c_min: -2.0, c_max: 2.0, c_count: 4001, unbounded_threshold: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub unbounded: bool,
    /// Infinite for unbounded samples.
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitationReport {
    pub best_c: f64,
    pub best_constant_error: f64,
    pub samples: Vec<SampleError>,
    /// Smallest error over the constant grid and all samples.
    pub min_error: f64,
    pub separated: bool,
}

/// Sup-distance from `exp(-|x|)` on `R` (replicated over outputs) to each
/// constant in a grid and to each sample. Constants never get closer than
/// `1/2`; unbounded samples are infinitely far. Samples are assumed to be
/// constant or unbounded, so one that varies on the grid counts as unbounded.
pub fn demonstrate_limitation(samples: &[GridFunction], opts: &LimitationOptions) -> Result<LimitationReport> {
    if opts.points < 2 || opts.c_count < 2 || !(opts.c_min < opts.c_max) || !(opts.radius > 0.0) {
        return Err(Error::param("limitation", "need points >= 2, c_count >= 2, c_min < c_max, radius > 0"));
    }
    let xs: Vec<f64> = (0..opts.points).map(|i| -opts.radius + 2.0 * opts.radius * i as f64 / (opts.points - 1) as f64).collect();
    let target: Vec<f64> = xs.iter().map(|x| exp(-x.abs())).collect();
    let (t_min, t_max) = target.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));

    let mut best = (opts.c_min, f64::INFINITY);
    for i in 0..opts.c_count {
        let c = opts.c_min + (opts.c_max - opts.c_min) * i as f64 / (opts.c_count - 1) as f64;
        let err = (t_max - c).abs().max((c - t_min).abs());
        if err < best.1 {
            best = (c, err);
        }
    }

    let mut sample_errors = Vec::with_capacity(samples.len());
    for s in samples {
        if s.dim_in() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: s.dim_in() });
        }
        let mut y = vec![0.0; s.dim_out()];
        let mut sup = 0.0f64;
        let mut unbounded = s.is_flagged_unbounded();
        let mut first: Option<Vec<f64>> = None;
        for (x, t) in xs.iter().zip(&target) {
            s.eval_into(&[*x], &mut y);
            match &first {
                None => first = Some(y.clone()),
                Some(y0) => {
                    if y0.iter().zip(&y).any(|(p, q)| (p - q).abs() > 1e-12 * (1.0 + p.abs())) {
                        unbounded = true;
                    }
                }
            }
            if !y.iter().all(|v| v.is_finite()) || max_norm(&y) > opts.unbounded_threshold {
                unbounded = true;
            }
            let d = y.iter().map(|v| (v - t).abs()).fold(0.0, f64::max);
            sup = sup.max(d);
        }
        sample_errors.push(SampleError { unbounded, sup_error: if unbounded { f64::INFINITY } else { sup } });
    }
    let min_error = sample_errors.iter().map(|s| s.sup_error).fold(best.1, f64::min);
    Ok(LimitationReport {
        best_c: best.0,
        best_constant_error: best.1,
        separated: min_error >= 0.5 - 1e-9,
        samples: sample_errors,
        min_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> GridFunction {
        GridFunction::scalar(|x| exp(-x * x))
    }

    #[test]
    fn bump_examples() {
        let z = bump_transform(&GridFunction::zero(1, 1), 0.5, 1.0).unwrap();
        assert_eq!(z.eval_scalar(0.0), 0.5);
        assert_eq!(z.eval_scalar(3.0), 0.5);
        let g = bump_transform(&GridFunction::scalar(|x| 10.0 + x), 0.3, 4.0).unwrap();
        for h in [1e-3, 1e-5, 1e-7] {
            assert!((g.eval_scalar(2.0 - h) - 0.3).abs() < 1e-6);
            assert!((g.eval_scalar(2.0 + h) - 0.3).abs() < 1e-1 * h.max(1e-6) * 200.0);
        }
        assert_eq!(g.eval_scalar(2.0), 0.3);
    }

    #[test]
    fn phi_psi() {
        let w = Weight::Power { i: 1.0 };
        let one = GridFunction::constant(1, vec![1.0]);
        assert_eq!(phi_omega(&one, &w).eval_scalar(3.0), 4.0);
        assert_eq!(phi_omega(&one, &Weight::Zero).eval_scalar(3.0), 1.0);
        let f = GridFunction::scalar(crate::math::sin);
        let back = psi_omega(&phi_omega(&f, &w), &w);
        for i in 0..100 {
            let x = -7.0 + 0.13 * i as f64;
            assert!((back.eval_scalar(x) - crate::math::sin(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn vanishing_gaussian() {
        let (f_eps, rep) = approximate_vanishing(&gauss(), 0.2, &VanishingOptions::default()).unwrap();
        assert!(rep.sup_error < 0.2, "{rep:?}");
        for i in 0..=300 {
            let x = -15.0 + 0.1 * i as f64;
            assert!((f_eps.eval_scalar(x) - exp(-x * x)).abs() < 0.2);
        }
    }

    #[test]
    fn vanishing_zero() {
        let (_, rep) = approximate_vanishing(&GridFunction::zero(1, 1), 0.1, &VanishingOptions::default()).unwrap();
        assert!(rep.sup_error <= 0.05 + 1e-12, "{rep:?}");
    }

    #[test]
    fn tail_failure() {
        let opts = VanishingOptions { max_radius: 64.0, ..VanishingOptions::default() };
        let r = approximate_vanishing(&GridFunction::constant(1, vec![1.0]), 0.1, &opts);
        assert!(matches!(r, Err(Error::TailSearch { .. })));
    }

    #[test]
    fn limitation_constants() {
        let samples = [GridFunction::constant(1, vec![0.3]), GridFunction::identity(1)];
        let rep = demonstrate_limitation(&samples, &LimitationOptions::default()).unwrap();
        assert!((rep.best_c - 0.5).abs() < 1e-12);
        assert!((rep.best_constant_error - 0.5).abs() < 1e-12);
        assert!((rep.samples[0].sup_error - 0.7).abs() < 1e-12);
        assert!(rep.samples[1].unbounded && rep.samples[1].sup_error.is_infinite());
        assert!(rep.separated);
    }

    #[test]
    fn growth_no_control() {
        let fam = WeightFamily::new(vec![Weight::Unit, Weight::Power { i: 2.0 }]).unwrap();
        let f = GridFunction::scalar(|x| exp(x * x));
        let opts = GrowthOptions { weighted_sup: WeightedSupOptions { max_radius: 64.0, ..Default::default() }, ..Default::default() };
        let r = approximate_growth(&f, &fam, 0.1, &opts);
        assert!(matches!(r, Err(Error::NoControllingWeight { ref flags }) if flags.iter().all(|(_, c)| !c)), "{r:?}");
    }

    #[test]
    fn growth_zero() {
        let fam = WeightFamily::new(vec![Weight::Unit]).unwrap();
        let (g, rep) = approximate_growth(&GridFunction::zero(1, 1), &fam, 0.1, &GrowthOptions::default()).unwrap();
        assert_eq!(rep.weighted_error, 0.0);
        assert_eq!(g.eval_scalar(2.0), 0.0);
    }
}
