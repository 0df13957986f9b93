//! Feed-forward networks, tree functions and random-feature fitting.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{builtin, ActivationSpec};
use crate::function_space::{euclidean_norm, for_each_box_point, GridFunction};
use crate::math;
use crate::linalg::{ridge_least_squares, ColMatrix};
use crate::{Error, Result};

/// `x -> matrix x + bias`; `matrix` is stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    pub matrix: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(matrix: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let layer = Self { matrix, bias };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.is_empty() || self.matrix[0].is_empty() {
            return Err(Error::param("matrix", "must be non-empty"));
        }
        let cols = self.matrix[0].len();
        if let Some(row) = self.matrix.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
        }
        if self.bias.len() != self.matrix.len() {
            return Err(Error::DimensionMismatch { expected: self.matrix.len(), found: self.bias.len() });
        }
        if self.matrix.iter().flatten().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::param("matrix", "entries must be finite"));
        }
        Ok(())
    }

    pub fn identity(dim: usize) -> Self {
        Self::shift(vec![0.0; dim])
    }

    /// `x -> x + b`.
    pub fn shift(b: Vec<f64>) -> Self {
        let dim = b.len();
        let matrix = (0..dim)
            .map(|i| {
                let mut row = vec![0.0; dim];
                row[i] = 1.0;
                row
            })
            .collect();
        Self { matrix, bias: b }
    }

    pub fn in_dim(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out.iter_mut().zip(&self.matrix).zip(&self.bias) {
            *o = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
        }
    }

    /// Nonzero counts of the matrix and of the bias.
    pub fn sparsity(&self) -> (usize, usize) {
        let nnz = |v: &f64| *v != 0.0;
        (self.matrix.iter().flatten().filter(|v| nnz(v)).count(), self.bias.iter().filter(|v| nnz(v)).count())
    }

    pub fn is_identity_matrix(&self) -> bool {
        self.matrix.len() == self.in_dim()
            && self.matrix.iter().enumerate().all(|(i, row)| row.iter().enumerate().all(|(j, v)| *v == if i == j { 1.0 } else { 0.0 }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationRef {
    Name(String),
    Spec(ActivationSpec),
}

impl ActivationRef {
    pub fn resolve(&self) -> Result<ActivationSpec> {
        match self {
            ActivationRef::Name(n) => builtin(n).ok_or_else(|| Error::param("activation", format!("unknown activation `{n}`"))),
            ActivationRef::Spec(s) => Ok(s.clone()),
        }
    }

    pub fn of(spec: &ActivationSpec) -> Self {
        match spec.builtin_name() {
            Some(n) => ActivationRef::Name(n.into()),
            None => ActivationRef::Spec(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    matrix: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation_after: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    layers: Vec<RawLayer>,
    activation: ActivationRef,
}

/// `W_J o s o W_{J-1} o ... o s o W_1`, where `s` is applied after a layer
/// only when its flag is set. The last layer never carries `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct FeedForwardNet {
    layers: Vec<AffineLayer>,
    activate: Vec<bool>,
    activation: ActivationSpec,
}

impl TryFrom<RawNet> for FeedForwardNet {
    type Error = Error;
    fn try_from(raw: RawNet) -> Result<Self> {
        let activation = raw.activation.resolve()?;
        let (layers, activate) = raw
            .layers
            .into_iter()
            .map(|l| (AffineLayer { matrix: l.matrix, bias: l.bias }, l.activation_after))
            .unzip();
        FeedForwardNet::new(layers, activate, activation)
    }
}

impl From<FeedForwardNet> for RawNet {
    fn from(net: FeedForwardNet) -> Self {
        RawNet {
            activation: ActivationRef::of(&net.activation),
            layers: net
                .layers
                .into_iter()
                .zip(net.activate)
                .map(|(l, a)| RawLayer { matrix: l.matrix, bias: l.bias, activation_after: a })
                .collect(),
        }
    }
}

impl FeedForwardNet {
    pub fn new(layers: Vec<AffineLayer>, activate: Vec<bool>, activation: ActivationSpec) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("layers", "must be non-empty"));
        }
        if activate.len() != layers.len() {
            return Err(Error::DimensionMismatch { expected: layers.len(), found: activate.len() });
        }
        if activate[activate.len() - 1] {
            return Err(Error::param("layers", "the final layer carries no activation"));
        }
        for l in &layers {
            l.validate()?;
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::DimensionMismatch { expected: w[0].out_dim(), found: w[1].in_dim() });
            }
        }
        Ok(Self { layers, activate, activation })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn activation_flags(&self) -> &[bool] {
        &self.activate
    }

    pub fn activation(&self) -> &ActivationSpec {
        &self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Input width followed by every layer's output width.
    pub fn widths(&self) -> Vec<usize> {
        core::iter::once(self.in_dim()).chain(self.layers.iter().map(AffineLayer::out_dim)).collect()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch { expected: self.in_dim(), found: x.len() });
        }
        if out.len() != self.out_dim() {
            return Err(Error::DimensionMismatch { expected: self.out_dim(), found: out.len() });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (layer, act) in self.layers.iter().zip(&self.activate) {
            next.clear();
            next.resize(layer.out_dim(), 0.0);
            layer.apply(&cur, &mut next);
            if *act {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            core::mem::swap(&mut cur, &mut next);
        }
        out.copy_from_slice(&cur);
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.out_dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let net = Arc::new(self.clone());
        GridFunction::new(self.in_dim(), self.out_dim(), move |x, y| {
            net.eval_into(x, y).expect("dimensions fixed at construction")
        })
    }

    /// `self o L_k o ... o L_1` where `front = [L_1, ..., L_k]` in the order
    /// they are applied; `(layer, true)` stands for `s o layer`.
    pub fn stack(&self, front: &[(AffineLayer, bool)]) -> Result<FeedForwardNet> {
        let mut layers: Vec<AffineLayer> = front.iter().map(|(l, _)| l.clone()).collect();
        let mut activate: Vec<bool> = front.iter().map(|(_, a)| *a).collect();
        layers.extend(self.layers.iter().cloned());
        activate.extend(self.activate.iter().copied());
        FeedForwardNet::new(layers, activate, self.activation.clone())
    }
}

/// Settings for [`fit_shallow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShallowFitConfig {
    pub width: usize,
    pub ridge: f64,
    /// Training grid resolution per input axis.
    pub points_per_axis: usize,
    pub seed: u64,
    /// Hidden slopes are multiplied by `2^u`, `u ~ U[0, scale_octaves]`,
    /// which concentrates kinks near the region center. Zero disables it.
    pub scale_octaves: f64,
}

impl Default for ShallowFitConfig {
    fn default() -> Self {
        Self { width: 64, ridge: 1e-8, points_per_axis: 801, seed: 0, scale_octaves: 0.0 }
    }
}

impl ShallowFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::param("width", "must be at least 1"));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::param("ridge", "must be finite and non-negative"));
        }
        if !(self.scale_octaves >= 0.0) || !self.scale_octaves.is_finite() {
            return Err(Error::param("scale_octaves", "must be finite and non-negative"));
        }
        if self.points_per_axis < 2 {
            return Err(Error::param("points_per_axis", "must be at least 2"));
        }
        Ok(())
    }
}

/// Axis-aligned box `center +- radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRegion {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl FitRegion {
    pub fn centered(dim: usize, radius: f64) -> Self {
        Self { center: vec![0.0; dim], radius }
    }

    /// Smallest region containing `[lo, hi]^dim`.
    pub fn covering(dim: usize, lo: f64, hi: f64) -> Self {
        Self { center: vec![0.5 * (lo + hi); dim], radius: 0.5 * (hi - lo) }
    }
}

#[derive(Debug, Clone)]
pub struct ShallowFit {
    pub net: FeedForwardNet,
    /// Max Euclidean residual over the training grid.
    pub residual: f64,
}

/// One-hidden-layer random-feature fit: hidden weights and biases are drawn
/// from `seed`, the output layer solves a ridge least-squares problem on a
/// grid over `region`.
pub fn fit_shallow(
    target: &GridFunction,
    activation: &ActivationSpec,
    region: &FitRegion,
    cfg: &ShallowFitConfig,
) -> Result<ShallowFit> {
    fit_shallow_weighted(target, activation, region, cfg, None)
}

/// [`fit_shallow`] with per-point least-squares weights `w(x) >= 0`.
pub fn fit_shallow_weighted(
    target: &GridFunction,
    activation: &ActivationSpec,
    region: &FitRegion,
    cfg: &ShallowFitConfig,
    weight: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<ShallowFit> {
    fit_shallow_knotted(target, activation, region, cfg, weight, &[])
}

/// Hidden unit `sigma(x[axis] - at)`, placed where the target is known to
/// have a corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub axis: usize,
    pub at: f64,
}

/// [`fit_shallow_weighted`] with one extra hidden unit per knot, appended
/// after the `cfg.width` random units.
pub fn fit_shallow_knotted(
    target: &GridFunction,
    activation: &ActivationSpec,
    region: &FitRegion,
    cfg: &ShallowFitConfig,
    weight: Option<&dyn Fn(&[f64]) -> f64>,
    knots: &[Knot],
) -> Result<ShallowFit> {
    cfg.validate()?;
    let m = target.dim_in();
    let n = target.dim_out();
    if region.center.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: region.center.len() });
    }
    if !(region.radius > 0.0) || !region.radius.is_finite() {
        return Err(Error::param("fit_region", "radius must be positive"));
    }
    let mut hidden = sample_hidden_layer(m, cfg.width, region, cfg.seed, cfg.scale_octaves);
    for k in knots {
        if k.axis >= m || !k.at.is_finite() {
            return Err(Error::param("knots", "axis out of range or position not finite"));
        }
        let mut row = vec![0.0; m];
        row[k.axis] = 1.0;
        hidden.matrix.push(row);
        hidden.bias.push(-k.at);
    }

    let lo: Vec<f64> = region.center.iter().map(|c| c - region.radius).collect();
    let hi: Vec<f64> = region.center.iter().map(|c| c + region.radius).collect();
    let mut points = Vec::new();
    for_each_box_point(&lo, &hi, cfg.points_per_axis, |x| points.push(x.to_vec()));

    let width = hidden.out_dim();
    let mut a = ColMatrix::zeros(points.len(), width + 1);
    let mut b = ColMatrix::zeros(points.len(), n);
    let mut h = vec![0.0; width];
    let mut y = vec![0.0; n];
    for (r, x) in points.iter().enumerate() {
        target.eval_into(x, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: x.clone() });
        }
        let w = weight.map_or(1.0, |f| crate::math::sqrt(f(x).max(0.0)));
        hidden.apply(x, &mut h);
        for (c, v) in h.iter().enumerate() {
            a.set(r, c, w * activation.apply(*v));
        }
        a.set(r, width, w);
        for (c, v) in y.iter().enumerate() {
            b.set(r, c, w * v);
        }
    }
    let sol = match ridge_least_squares(&a, &b, cfg.ridge) {
        Err(Error::Singular) if cfg.ridge == 0.0 => {
            return Err(Error::pre("normal equations are singular at ridge = 0; use ridge > 0"))
        }
        other => other?,
    };
    let out = AffineLayer {
        matrix: (0..n).map(|o| sol.col(o)[..width].to_vec()).collect(),
        bias: (0..n).map(|o| sol.get(width, o)).collect(),
    };
    let net = FeedForwardNet::new(vec![hidden, out], vec![true, false], activation.clone())?;

    let mut residual = 0.0f64;
    let mut pred = vec![0.0; n];
    let mut diff = vec![0.0; n];
    for x in &points {
        target.eval_into(x, &mut y);
        net.eval_into(x, &mut pred)?;
        for ((d, p), t) in diff.iter_mut().zip(&pred).zip(&y) {
            *d = p - t;
        }
        residual = residual.max(euclidean_norm(&diff));
    }
    Ok(ShallowFit { net, residual })
}

/// Hidden units `w . (x - center) + c`, `w ~ U[-3/r, 3/r]^m`, `c ~ U[-3, 3]`.
/// Unit `i` depends only on `seed` and `i`, so narrower layers are prefixes
/// of wider ones.
fn sample_hidden_layer(m: usize, width: usize, region: &FitRegion, seed: u64, octaves: f64) -> AffineLayer {
    let s = 3.0 / region.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = Vec::with_capacity(width);
    let mut bias = Vec::with_capacity(width);
    for _ in 0..width {
        let mut w: Vec<f64> = (0..m).map(|_| rng.gen_range(-s..=s)).collect();
        let c: f64 = rng.gen_range(-3.0..=3.0);
        if octaves > 0.0 {
            let k = math::powf(2.0, rng.gen_range(0.0..=octaves));
            w.iter_mut().for_each(|v| *v *= k);
        }
        let shift: f64 = w.iter().zip(&region.center).map(|(a, b)| a * b).sum();
        bias.push(c - shift);
        matrix.push(w);
    }
    AffineLayer { matrix, bias }
}

/// `a * 1_{(b, c)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `sum_j a_j 1_{(b_j, c_j)}` on `R`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TreeTerm>", into = "Vec<TreeTerm>")]
pub struct TreeFunction {
    terms: Vec<TreeTerm>,
}

impl TryFrom<Vec<TreeTerm>> for TreeFunction {
    type Error = Error;
    fn try_from(terms: Vec<TreeTerm>) -> Result<Self> {
        TreeFunction::new(terms)
    }
}

impl From<TreeFunction> for Vec<TreeTerm> {
    fn from(t: TreeFunction) -> Self {
        t.terms
    }
}

impl TreeFunction {
    pub fn new(terms: Vec<TreeTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.b <= t.c) || !t.a.is_finite() {
                return Err(Error::param("terms", format!("invalid term a={} on ({}, {})", t.a, t.b, t.c)));
            }
        }
        Ok(Self { terms })
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![TreeTerm { a: 1.0, b: lo, c: hi }])
    }

    pub fn terms(&self) -> &[TreeTerm] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().filter(|t| t.b < x && x < t.c).map(|t| t.a).sum()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.terms.iter().flat_map(|t| [t.b, t.c]).collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        pts
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let t = self.clone();
        GridFunction::scalar(move |x| t.eval(x))
    }
}

pub fn tree_eval(t: &TreeFunction, x: f64) -> f64 {
    t.eval(x)
}
