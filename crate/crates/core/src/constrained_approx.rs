//! Deep networks `h o S^N` whose final segment `h` stays close to a
//! prescribed map (or inside open constraint sets) while the whole network
//! approximates a target. The first `N` layers are frozen copies of
//! `s.(x + b)`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::activations::{classify, ClassifyOptions, TransitivityKind};
use crate::depth_dynamics::{blend, blend_knots, escape, tail_cutoff, CompositionOperator, Escape};
use crate::function_space::{d_ucc, euclidean_norm, for_each_box_point, sup_norm_on_ball, GridFunction, GridSpec};
use crate::network::{fit_shallow_knotted, FeedForwardNet, FitRegion, ShallowFitConfig};
use crate::{math, Error, Result};

type FunctionalFn = dyn Fn(&GridFunction) -> f64 + Send + Sync;

/// `F: C(R^m, R^n) -> [0, inf)` with the open constraint `F(h) < threshold`.
#[derive(Clone)]
pub struct ConstraintFunctional {
    eval: Arc<FunctionalFn>,
    pub threshold: f64,
    pub label: String,
}

impl fmt::Debug for ConstraintFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintFunctional").field("label", &self.label).field("threshold", &self.threshold).finish()
    }
}

impl ConstraintFunctional {
    pub fn new(label: impl Into<String>, threshold: f64, eval: impl Fn(&GridFunction) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::param("threshold", "must be positive"));
        }
        Ok(Self { eval: Arc::new(eval), threshold, label: label.into() })
    }

    pub fn evaluate(&self, f: &GridFunction) -> f64 {
        (self.eval)(f)
    }

    /// `sup_{|x| <= radius} |h(x)|`, sampled with `points` per axis.
    pub fn sup_on_ball(radius: f64, points: usize, threshold: f64) -> Result<Self> {
        Self::new(format!("sup_ball(r={radius})"), threshold, move |h| {
            let grid = GridSpec { dim_in: h.dim_in(), dim_out: h.dim_out(), points_per_axis: points, radius };
            sup_norm_on_ball(h, radius, &grid).unwrap_or(f64::INFINITY)
        })
    }

    /// `|h(x0)|`.
    pub fn norm_at(x0: Vec<f64>, threshold: f64) -> Result<Self> {
        Self::new(format!("norm_at({x0:?})"), threshold, move |h| euclidean_norm(&h.eval(&x0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleOptions {
    /// Starting configuration of the final-segment fit; the width doubles
    /// on failure up to `max_width`.
    pub fit: ShallowFitConfig,
    pub max_width: usize,
    pub blend_margin: f64,
    pub max_n: usize,
    pub ucc_terms: usize,
    pub verify_points_per_axis: Option<usize>,
    /// Relative guard band below each constraint threshold.
    pub guard_band: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            fit: ShallowFitConfig { width: 128, ridge: 1e-10, points_per_axis: 2001, seed: 0, scale_octaves: 0.0 },
            max_width: 1024,
            blend_margin: 1.0,
            max_n: 10_000,
            ucc_terms: 20,
            verify_points_per_axis: None,
            guard_band: 0.01,
        }
    }
}

impl AssembleOptions {
    fn grid(&self, m: usize) -> GridSpec {
        let per_unit = if m <= 1 { 100 } else { 10 };
        let points = self.verify_points_per_axis.unwrap_or(2 * self.ucc_terms * per_unit + 1);
        GridSpec { dim_in: m, dim_out: 1, points_per_axis: points, radius: self.ucc_terms as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedNetReport {
    pub full_net: FeedForwardNet,
    /// Index of the first layer of the final segment.
    pub split_index: usize,
    #[serde(rename = "N_frozen")]
    pub n_frozen: usize,
    pub k0: u32,
    /// `d_ucc(prescribed, final segment)`.
    pub d_prescribed: f64,
    /// `d_ucc(target, full net)`.
    pub d_target: f64,
    pub sparsity_per_frozen_layer: Vec<usize>,
    pub widths: Vec<usize>,
    pub fit_width: usize,
    /// Sup error of the final segment on the cube and its escaped image.
    pub fit_residual: f64,
    pub fit_budget: f64,
    /// `m + n + 2`.
    pub width_bound: usize,
    /// Whether every final-segment hidden width is within `width_bound`.
    pub width_bound_satisfied: bool,
}

impl ConstrainedNetReport {
    /// The layers after `split_index`.
    pub fn final_segment(&self) -> Result<FeedForwardNet> {
        let layers = self.full_net.layers()[self.split_index..].to_vec();
        let flags = self.full_net.activation_flags()[self.split_index..].to_vec();
        FeedForwardNet::new(layers, flags, self.full_net.activation().clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValue {
    pub label: String,
    pub threshold: f64,
    pub witness_value: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedReport {
    pub report: ConstrainedNetReport,
    pub constraints: Vec<ConstraintValue>,
}

/// Largest sup-error `e` of the final segment on the fit region that keeps
/// both distances below `tol`: `e/(1+e) (1 - 2^-k0) + 2^-k0 < tol`.
fn fit_budget(tol: f64, k0: u32) -> f64 {
    let t = math::powf(2.0, -(k0 as f64));
    let q = ((tol - t) / (1.0 - t)).min(0.999_999);
    q / (1.0 - q)
}

enum Rejection {
    Fit(f64),
    Distance(&'static str, f64, f64),
    Constraint(String, f64, f64),
}

fn assemble_core(
    seed: &GridFunction,
    f: &GridFunction,
    eps: f64,
    delta: f64,
    op: &CompositionOperator,
    opts: &AssembleOptions,
    accept: &dyn Fn(&GridFunction) -> core::result::Result<(), (String, f64, f64)>,
) -> Result<ConstrainedNetReport> {
    seed.check_same_dims(f)?;
    if f.dim_in() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: f.dim_in() });
    }
    for (name, v) in [("eps", eps), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::param(name, "must lie in (0, 1)"));
        }
    }
    if !op.is_identity_matrix() {
        return Err(Error::pre("frozen layers use A = I"));
    }
    let verdict = classify(op.activation(), &ClassifyOptions::default())?;
    if verdict.kind != TransitivityKind::Transitive {
        return Err(Error::pre(format!("activation `{}` is not transitive", op.activation().describe())));
    }
    let m = op.dim();
    let n_out = f.dim_out();
    let grid = opts.grid(m);
    let tol = eps.min(delta);
    let k0 = tail_cutoff(eps, delta);
    let k = k0 as f64;
    let budget = fit_budget(tol, k0);

    let direct = d_ucc(seed, f, opts.ucc_terms, &grid)?.distance;
    let (esc, h) = if direct < 0.5 * tol {
        (Escape { n: 0, image: Vec::new() }, seed.clone())
    } else {
        let esc = escape(op, k, k + opts.blend_margin, opts.max_n)?;
        let h = blend(op, seed, f, &esc, opts.blend_margin);
        (esc, h)
    };
    let top = esc.image.iter().map(|[_, hi]| *hi).fold(k, f64::max) + opts.blend_margin;
    let region = FitRegion::covering(m, -k - opts.blend_margin, top);
    let frozen = op.frozen_layers(esc.n);
    let knots = blend_knots(op, &esc, opts.blend_margin);

    let mut width = opts.fit.width.max(1);
    let mut last = Rejection::Fit(f64::INFINITY);
    while width <= opts.max_width.max(opts.fit.width) {
        let cfg = ShallowFitConfig { width, ..opts.fit };
        let fit = fit_shallow_knotted(&h, op.activation(), &region, &cfg, None, &knots)?;
        width *= 2;
        let residual = residual_on_cube_and_image(&fit.net, &h, k, &esc, cfg.points_per_axis)?;
        if !(residual < budget) {
            last = Rejection::Fit(residual);
            continue;
        }
        let segment = fit.net.to_grid_function();
        let full_net = fit.net.stack(&frozen)?;
        let d_prescribed = d_ucc(seed, &segment, opts.ucc_terms, &grid)?.distance;
        let d_target = d_ucc(f, &full_net.to_grid_function(), opts.ucc_terms, &grid)?.distance;
        if !(d_prescribed < delta) {
            last = Rejection::Distance("d_prescribed", d_prescribed, delta);
            continue;
        }
        if !(d_target < eps) {
            last = Rejection::Distance("d_target", d_target, eps);
            continue;
        }
        if let Err((label, value, threshold)) = accept(&segment) {
            last = Rejection::Constraint(label, value, threshold);
            continue;
        }
        let width_bound = m + n_out + 2;
        let hidden = fit.net.widths();
        let width_bound_satisfied = hidden[1..hidden.len() - 1].iter().all(|w| *w <= width_bound);
        return Ok(ConstrainedNetReport {
            split_index: esc.n,
            n_frozen: esc.n,
            k0,
            d_prescribed,
            d_target,
            sparsity_per_frozen_layer: full_net.layers()[..esc.n].iter().map(|l| l.sparsity().0).collect(),
            widths: full_net.widths(),
            fit_width: cfg.width,
            fit_residual: residual,
            fit_budget: budget,
            width_bound,
            width_bound_satisfied,
            full_net,
        });
    }
    Err(match last {
        Rejection::Fit(residual) => Error::FitBudget { residual, budget },
        Rejection::Distance(what, measured, bound) => Error::Verification { what: what.into(), measured, bound },
        Rejection::Constraint(label, value, threshold) => Error::Constraint { label, value, threshold },
    })
}

/// Sup of `|net - h|` over the two sets the distance bounds depend on: the
/// cube `[-k, k]^m` and the escaped image. The blend shell in between only
/// enters the `d_ucc` tail.
fn residual_on_cube_and_image(net: &FeedForwardNet, h: &GridFunction, k: f64, esc: &Escape, points: usize) -> Result<f64> {
    let m = h.dim_in();
    let mut boxes = alloc::vec![(alloc::vec![-k; m], alloc::vec![k; m])];
    if esc.n > 0 {
        boxes.push((esc.image.iter().map(|b| b[0]).collect(), esc.image.iter().map(|b| b[1]).collect()));
    }
    let mut sup = 0.0f64;
    let mut a = alloc::vec![0.0; h.dim_out()];
    let mut b = alloc::vec![0.0; h.dim_out()];
    let mut diff = alloc::vec![0.0; h.dim_out()];
    let mut failure = None;
    for (lo, hi) in &boxes {
        for_each_box_point(lo, hi, points, |x| {
            if let Err(e) = net.eval_into(x, &mut a) {
                failure = Some(e);
                return;
            }
            h.eval_into(x, &mut b);
            for ((d, p), q) in diff.iter_mut().zip(&a).zip(&b) {
                *d = p - q;
            }
            sup = sup.max(euclidean_norm(&diff));
        });
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(sup),
    }
}

/// Net `h o S^N` with `d_ucc(f_hat, h) < delta` and `d_ucc(f, h o S^N) < eps`.
pub fn assemble_prescribed(
    f_hat: &GridFunction,
    f: &GridFunction,
    eps: f64,
    delta: f64,
    op: &CompositionOperator,
    opts: &AssembleOptions,
) -> Result<ConstrainedNetReport> {
    assemble_core(f_hat, f, eps, delta, op, opts, &|_| Ok(()))
}

/// Net `f2 o f1` approximating `f` within `eps`, where `f1` is the frozen
/// block and `f2` satisfies every constraint. The witness `f0` must satisfy
/// them all; it seeds the blend.
pub fn assemble_constrained(
    constraints: &[ConstraintFunctional],
    f0: &GridFunction,
    f: &GridFunction,
    eps: f64,
    op: &CompositionOperator,
    opts: &AssembleOptions,
) -> Result<ConstrainedReport> {
    let mut witness_values = Vec::with_capacity(constraints.len());
    for c in constraints {
        let v = c.evaluate(f0);
        if !(v < c.threshold) {
            return Err(Error::pre(format!(
                "witness violates constraint `{}`: {v} is not below {}",
                c.label, c.threshold
            )));
        }
        witness_values.push(v);
    }
    let guard = 1.0 - opts.guard_band;
    let accept = |h: &GridFunction| {
        for c in constraints {
            let v = c.evaluate(h);
            if !(v < guard * c.threshold) {
                return Err((c.label.clone(), v, c.threshold));
            }
        }
        Ok(())
    };
    let report = assemble_core(f0, f, eps, eps, op, opts, &accept)?;
    let segment = report.final_segment()?.to_grid_function();
    let constraints = constraints
        .iter()
        .zip(witness_values)
        .map(|(c, witness_value)| ConstraintValue {
            label: c.label.clone(),
            threshold: c.threshold,
            witness_value,
            value: c.evaluate(&segment),
        })
        .collect();
    Ok(ConstrainedReport { report, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::leaky_shifted;
    use crate::math::{cos, sin};

    fn op() -> CompositionOperator {
        CompositionOperator::new(leaky_shifted(), alloc::vec![1.0]).unwrap()
    }

    #[test]
    fn budget_is_consistent() {
        let e = fit_budget(0.1, 5);
        let t = 1.0 / 32.0;
        assert!(((e / (1.0 + e)) * (1.0 - t) + t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn prescribed_identity_target_cos() {
        let r = assemble_prescribed(&GridFunction::identity(1), &GridFunction::scalar(cos), 0.1, 0.1, &op(), &AssembleOptions::default()).unwrap();
        assert!(r.n_frozen >= 5);
        assert!(r.d_prescribed < 0.1 && r.d_target < 0.1);
        assert!(r.sparsity_per_frozen_layer.iter().all(|s| *s == 1));
        assert!(r.full_net.layers()[..r.n_frozen].iter().all(|l| l.is_identity_matrix()));
        assert!(r.widths[..=r.n_frozen].iter().all(|w| *w == 1));
    }

    #[test]
    fn degenerate_when_equal() {
        let f = GridFunction::scalar(sin);
        let r = assemble_prescribed(&f, &f, 0.2, 0.2, &op(), &AssembleOptions::default()).unwrap();
        assert_eq!(r.n_frozen, 0);
    }

    #[test]
    fn witness_must_satisfy_constraints() {
        let c = ConstraintFunctional::norm_at(alloc::vec![0.0], 0.5).unwrap();
        let f0 = GridFunction::constant(1, alloc::vec![0.7]);
        let r = assemble_constrained(&[c], &f0, &GridFunction::scalar(sin), 0.2, &op(), &AssembleOptions::default());
        assert!(matches!(r, Err(Error::Precondition(msg)) if msg.contains("norm_at")));
    }

    #[test]
    fn constrained_sin() {
        let c = ConstraintFunctional::sup_on_ball(1.0, 201, 1.0).unwrap();
        let r = assemble_constrained(&[c], &GridFunction::zero(1, 1), &GridFunction::scalar(sin), 0.2, &op(), &AssembleOptions::default()).unwrap();
        assert!(r.constraints[0].value < 1.0);
        assert!(r.report.d_target < 0.2);
    }
}
