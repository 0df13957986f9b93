//! Randomized identity checks for the linear-structure maps: `eta`, `rho`,
//! `Phi_omega` and the composition operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use uaplab_core::activations::leaky_shifted;
use uaplab_core::depth_dynamics::CompositionOperator;
use uaplab_core::free_space::{eta, eta_distance, rho, FormalCombination};
use uaplab_core::function_space::{weighted_sup_on_ball, GridFunction, GridSpec, Weight};
use uaplab_core::omega_modification::phi_omega;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    pub eta_pairs: usize,
    pub eta_range: f64,
    pub rho_trials: usize,
    pub omega_pairs: usize,
    pub omega_radius: f64,
    pub omega_points: usize,
    pub linearity_trials: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            eta_pairs: 1000,
            eta_range: 50.0,
            rho_trials: 1000,
            omega_pairs: 100,
            omega_radius: 20.0,
            omega_points: 2001,
            linearity_trials: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub trials: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, trials: usize, max_deviation: f64, tolerance: f64) -> Self {
        Self { name: name.into(), trials, max_deviation, tolerance, pass: max_deviation < tolerance }
    }
}

pub const SHIPPED_WEIGHTS: [Weight; 4] =
    [Weight::Unit, Weight::Power { i: 1.0 }, Weight::MaxTPower { i: 2.0 }, Weight::ExpDecay { k: 1.0 }];

/// `| ||eta(r) - eta(s)||_1 - |r - s| |` over random pairs; both the
/// closed form and the step-function norm are checked.
pub fn eta_isometry(opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..opts.eta_pairs {
        let r = rng.gen_range(-opts.eta_range..=opts.eta_range);
        let s = rng.gen_range(-opts.eta_range..=opts.eta_range);
        let exact = (r - s).abs();
        let step = eta(r).linear_combination(1.0, &eta(s), -1.0).l1_norm();
        worst = worst.max((eta_distance(r, s) - exact).abs()).max((step - exact).abs());
    }
    Check::new("eta_isometry", opts.eta_pairs, worst, 1e-9)
}

fn atoms(rng: &mut ChaCha8Rng) -> FormalCombination {
    let basis = [GridFunction::scalar(f64::sin), GridFunction::scalar(f64::cos), GridFunction::scalar(|x| x), GridFunction::scalar(|x| x * x)];
    let picked = (0..rng.gen_range(1..=4)).map(|_| (rng.gen_range(-2.0..=2.0), basis[rng.gen_range(0..4)].clone())).collect();
    FormalCombination::from_atoms(picked).expect("atoms share dimensions")
}

/// `rho(alpha c1 + beta c2) = alpha rho(c1) + beta rho(c2)` and
/// `rho(delta_f) = f` at random points.
pub fn rho_checks(opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> [Check; 2] {
    let mut lin = 0.0f64;
    let mut ident = 0.0f64;
    let f = GridFunction::scalar(|x| x.sin() * x);
    let single = rho(&FormalCombination::single(f.clone()));
    for _ in 0..opts.rho_trials {
        let (c1, c2) = (atoms(rng), atoms(rng));
        let (a, b) = (rng.gen_range(-3.0..=3.0), rng.gen_range(-3.0..=3.0));
        let x: f64 = rng.gen_range(-5.0..=5.0);
        let combined = rho(&c1.combine(a, &c2, b).expect("same dimensions")).eval_scalar(x);
        let split = a * rho(&c1).eval_scalar(x) + b * rho(&c2).eval_scalar(x);
        lin = lin.max((combined - split).abs() / (1.0 + split.abs()));
        ident = ident.max((single.eval_scalar(x) - f.eval_scalar(x)).abs());
    }
    [Check::new("rho_linearity", opts.rho_trials, lin, 1e-12), Check::new("rho_single_atom", opts.rho_trials, ident, 1e-15)]
}

fn bounded(rng: &mut ChaCha8Rng) -> GridFunction {
    let (a, w, c) = (rng.gen_range(-2.0..=2.0), rng.gen_range(-3.0..=3.0), rng.gen_range(-2.0..=2.0));
    GridFunction::scalar(move |x: f64| a * (w * x).sin() + c / (1.0 + x * x))
}

/// `||Phi_omega f - Phi_omega g||_omega` against `sup |f - g|` on one grid.
pub fn phi_omega_isometry(opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let grid = GridSpec { dim_in: 1, dim_out: 1, points_per_axis: opts.omega_points, radius: opts.omega_radius };
    SHIPPED_WEIGHTS
        .iter()
        .map(|omega| {
            let mut worst = 0.0f64;
            for _ in 0..opts.omega_pairs {
                let (f, g) = (bounded(rng), bounded(rng));
                let lifted = phi_omega(&f, omega).sub(&phi_omega(&g, omega)).expect("same dimensions");
                let lhs = weighted_sup_on_ball(&lifted, omega, opts.omega_radius, &grid);
                let rhs = weighted_sup_on_ball(&f.sub(&g).expect("same dimensions"), &Weight::Zero, opts.omega_radius, &grid);
                worst = worst.max((lhs - rhs).abs());
            }
            Check::new(format!("phi_omega_isometry[{}]", omega.label()), opts.omega_pairs, worst, 1e-9)
        })
        .collect()
}

/// `Phi^n(alpha f + beta g) = alpha Phi^n f + beta Phi^n g` pointwise.
pub fn composition_linearity(opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> Check {
    let f = GridFunction::scalar(f64::sin);
    let g = GridFunction::scalar(|x| x * x - 3.0 * x);
    let mut worst = 0.0f64;
    for _ in 0..opts.linearity_trials {
        let b = rng.gen_range(0.1..=2.0);
        let op = CompositionOperator::new(leaky_shifted(), vec![b]).expect("positive shift");
        let (alpha, beta) = (rng.gen_range(-3.0..=3.0), rng.gen_range(-3.0..=3.0));
        let n = rng.gen_range(0..=6);
        let x: f64 = rng.gen_range(-20.0..=20.0);
        let lhs = op.apply(&f.linear_combination(alpha, &g, beta).expect("same dimensions"), n).eval_scalar(x);
        let rhs = alpha * op.apply(&f, n).eval_scalar(x) + beta * op.apply(&g, n).eval_scalar(x);
        worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    Check::new("composition_linearity", opts.linearity_trials, worst, 1e-12)
}

/// Every suite in a fixed order from one seed.
pub fn run_all(opts: &SuiteOptions, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![eta_isometry(opts, &mut rng)];
    out.extend(rho_checks(opts, &mut rng));
    out.extend(phi_omega_isometry(opts, &mut rng));
    out.push(composition_linearity(opts, &mut rng));
    out
}
