//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uaplab::suites::{run_all, SuiteOptions};
use uaplab_core::activations::{
    classify, construct_lp_transitive, construct_transitive, leaky_rescaled, leaky_shifted, relu, ActivationSpec,
    Branch, BranchMap, ClassifyOptions, Dominance, TransitivityKind, Witness,
};
use uaplab_core::constrained_approx::{assemble_prescribed, AssembleOptions};
use uaplab_core::depth_dynamics::{construct_transitive_approximant, escape, CompositionOperator, TransitivityOptions};
use uaplab_core::function_space::{d_ucc, GridFunction, GridSpec, Measure1D, Weight, WeightFamily};
use uaplab_core::math::normal_pdf;
use uaplab_core::omega_modification::{approximate_growth, demonstrate_limitation, GrowthOptions, LimitationOptions};
use uaplab_core::rate_bounds::{kappa_growth_check, pushforward_density_norm, rate_sweep, BasisFamily, RateSweepOptions};

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn shifted_op() -> CompositionOperator {
    CompositionOperator::new(leaky_shifted(), vec![1.0]).unwrap()
}

fn two_slope(left: f64, right: f64) -> ActivationSpec {
    ActivationSpec::new(
        "two_slope",
        vec![
            Branch::new(f64::NEG_INFINITY, 0.0, BranchMap::Affine { a: left, b: 0.0 }),
            Branch::new(0.0, f64::INFINITY, BranchMap::Affine { a: right, b: 0.0 }),
        ],
    )
    .unwrap()
}

fn random_tilde(rng: &mut ChaCha8Rng) -> ActivationSpec {
    match rng.gen_range(0..3) {
        0 => two_slope(rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)),
        1 => ActivationSpec::new(
            "cubic",
            vec![Branch::new(
                f64::NEG_INFINITY,
                f64::INFINITY,
                BranchMap::Power { p: 3.0, scale: rng.gen_range(0.1..2.0), a: rng.gen_range(0.1..2.0), b: 0.0 },
            )],
        )
        .unwrap(),
        _ => {
            let x = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
            let mut y = vec![0.0; 5];
            for i in (0..2).rev() {
                y[i] = y[i + 1] - rng.gen_range(0.1..2.0);
            }
            for i in 3..5 {
                y[i] = y[i - 1] + rng.gen_range(0.1..2.0);
            }
            ActivationSpec::new("table", vec![Branch::new(f64::NEG_INFINITY, f64::INFINITY, BranchMap::Table { x, y, a: 0.0, b: 0.0 })])
                .unwrap()
        }
    }
}

fn classification() -> Outcome {
    let opts = ClassifyOptions::default();
    let r = classify(&relu(), &opts).unwrap();
    let s = classify(&leaky_shifted(), &opts).unwrap();
    let l = classify(&leaky_rescaled(), &opts).unwrap();
    let relu_ok = r.kind == TransitivityKind::NotTransitive && matches!(r.witness, Some(Witness::FixedPoint { .. }));
    let shifted_ok = s.kind == TransitivityKind::Transitive && s.dominance == Dominance::Above;
    let rescaled_ok = l.kind == TransitivityKind::LpTransitiveOnly && l.fixed_points == [0.0];
    outcome(
        relu_ok && shifted_ok && rescaled_ok,
        format!("relu {:?} {:?}; shifted {:?}/{:?}; rescaled {:?} fixed {:?}", r.kind, r.witness, s.kind, s.dominance, l.kind, l.fixed_points),
    )
}

fn constructions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let opts = ClassifyOptions::default();
    let samples: Vec<f64> = (0..100_000).map(|i| -50.0 + 100.0 * (i as f64 + 0.5) / 100_000.0).collect();
    let mut failures = Vec::new();
    let mut done = 0;
    while done < 50 {
        let tilde = random_tilde(&mut rng);
        let alpha1 = rng.gen_range(0.05..0.95);
        let alpha2 = rng.gen_range(0.05..3.0);
        if (alpha2 - (tilde.derivative(0.0) - 1.0)).abs() < 1e-6 {
            continue;
        }
        done += 1;
        let t = construct_transitive(&tilde, alpha1, alpha2).unwrap();
        let v = classify(&t, &opts).unwrap();
        if v.kind != TransitivityKind::Transitive {
            failures.push(format!("{}: {:?}", t.name(), v.kind));
        }
        let lp = construct_lp_transitive(&tilde, alpha1).unwrap();
        let v = classify(&lp, &opts).unwrap();
        let kind_ok = matches!(v.kind, TransitivityKind::LpTransitiveOnly | TransitivityKind::Transitive);
        let above = samples.iter().filter(|x| **x != 0.0).all(|&x| lp.apply(x) > x);
        if !kind_ok || !above {
            failures.push(format!("{}: {:?} above={above}", lp.name(), v.kind));
        }
    }
    outcome(failures.is_empty(), format!("50 triples, {} failures {:?}", failures.len(), failures))
}

/// Exact image of `[-k, k]` under the increasing map `x -> s(x + 1)`.
fn corner_escape(k: f64) -> usize {
    let s = leaky_shifted();
    let mut lo = -k;
    let mut n = 0;
    while lo <= k {
        lo = s.apply(lo + 1.0);
        n += 1;
    }
    n
}

fn escape_times() -> Outcome {
    let op = shifted_op();
    let n2 = escape(&op, 2.0, 2.0, 1000).unwrap().n;
    let n5 = escape(&op, 5.0, 5.0, 1000).unwrap().n;
    let (c2, c5) = (corner_escape(2.0), corner_escape(5.0));
    outcome(
        n2 == 4 && n5 == 5 && n2 == c2 && n5 == c5,
        format!("K=2: N={n2} (expected 4, corner iteration {c2}); K=5: N={n5} (expected 5, corner iteration {c5})"),
    )
}

fn transitivity_certificate() -> Outcome {
    let op = shifted_op();
    let g = GridFunction::identity(1);
    let f = GridFunction::scalar(f64::sin);
    let opts = TransitivityOptions::default();
    let cert = construct_transitive_approximant(&op, &g, &f, 0.1, 0.1, &opts).unwrap();
    let n = cert.summary.n;
    let g_tilde = match &cert.g_tilde_net {
        Some(net) => net.to_grid_function(),
        None => cert.g_tilde.clone(),
    };
    let coarse = opts.verify_grid(1);
    let fine = coarse.with_points(2 * (coarse.points_per_axis - 1) + 1);
    let d_seed = d_ucc(&g, &g_tilde, 20, &fine).unwrap().distance;
    let d_target = d_ucc(&f, &op.apply(&g_tilde, n), 20, &fine).unwrap().distance;
    outcome(
        d_seed < 0.1 && d_target < 0.1,
        format!(
            "N={n}, re-measured on {} points: d_seed={d_seed:.4}, d_target={d_target:.4} (reported {:.4}, {:.4})",
            fine.points_per_axis, cert.summary.d_seed, cert.summary.d_target
        ),
    )
}

fn constrained_assembly() -> Outcome {
    let op = shifted_op();
    let f_hat = GridFunction::identity(1);
    let f = GridFunction::scalar(f64::cos);
    let opts = AssembleOptions::default();
    let rep = assemble_prescribed(&f_hat, &f, 0.1, 0.1, &op, &opts).unwrap();
    let full = &rep.full_net;
    let segment = rep.final_segment().unwrap();
    let frozen = &full.layers()[..rep.split_index];
    let frozen_ok = frozen.len() == rep.n_frozen
        && frozen.iter().all(|l| l.matrix == [vec![1.0]] && l.sparsity().0 == 1 && l.out_dim() == 1)
        && full.activation_flags()[..rep.split_index].iter().all(|a| *a);

    let grid = GridSpec::line(4001, 20.0).unwrap();
    let full_fn = full.to_grid_function();
    let d_prescribed = d_ucc(&f_hat, &segment.to_grid_function(), 20, &grid).unwrap().distance;
    let d_target = d_ucc(&f, &full_fn, 20, &grid).unwrap().distance;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = [rng.gen_range(-20.0..20.0)];
        let lhs = full.eval(&x).unwrap()[0];
        let rhs = segment.eval(&op.iterate(&x, rep.n_frozen)).unwrap()[0];
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    outcome(
        frozen_ok && d_prescribed < 0.1 && d_target < 0.1 && worst <= 1e-12,
        format!(
            "N={}, frozen identity/sparsity 1/width 1: {frozen_ok}; d_prescribed={d_prescribed:.4}, d_target={d_target:.4}; decomposition error {worst:.1e}",
            rep.n_frozen
        ),
    )
}

fn omega_modification() -> Outcome {
    let f = GridFunction::scalar(|x| x * (-x * x).exp() + x);
    let family = WeightFamily::new(vec![Weight::Unit, Weight::Power { i: 1.0 }, Weight::MaxTPower { i: 2.0 }]).unwrap();
    let (approx, rep) = approximate_growth(&f, &family, 0.1, &GrowthOptions::default()).unwrap();
    let weighted = |w: Weight| {
        (0..=60_000)
            .map(|i| -30.0 + i as f64 * 0.001)
            .map(|x| (f.eval_scalar(x) - approx.eval_scalar(x)).abs() / (w.eval(x.abs()) + 1.0))
            .fold(0.0f64, f64::max)
    };
    let err = weighted(rep.selected);
    let err_t = weighted(Weight::Power { i: 1.0 });
    outcome(
        err < 0.1,
        format!("selected {}: weighted error on [-30,30] = {err:.4}; under omega=t it is {err_t:.4}", rep.selected.label()),
    )
}

fn limitation() -> Outcome {
    let target = |x: f64| (-x.abs()).exp();
    let xs: Vec<f64> = (0..=10_000).map(|i| -50.0 + i as f64 * 0.01).collect();
    let best = (0..=4000)
        .map(|i| -2.0 + i as f64 * 0.001)
        .map(|c| xs.iter().map(|&x| (target(x) - c).abs()).fold(0.0f64, f64::max))
        .fold(f64::INFINITY, f64::min);
    let samples = vec![GridFunction::constant(1, vec![0.3]), GridFunction::identity(1)];
    let rep = demonstrate_limitation(&samples, &LimitationOptions::default()).unwrap();
    outcome(
        (best - 0.5).abs() <= 0.01 && (rep.best_constant_error - 0.5).abs() <= 0.01 && rep.separated,
        format!("grid search {best:.4}, library {:.4} at c={:.3}, separated={}", rep.best_constant_error, rep.best_c, rep.separated),
    )
}

fn pushforward() -> Outcome {
    let mu = Measure1D::standard_gaussian();
    let grid = GridSpec::line(20_001, 10.0).unwrap();
    let rep = pushforward_density_norm(&leaky_rescaled(), 1.0, &mu, &grid).unwrap();
    // Density over slope on each branch of x -> s(x + 1), maximized.
    let analytic = (normal_pdf(-1.0) / 0.1).max(normal_pdf(0.0) / 1.1);
    let relu_rep = pushforward_density_norm(&relu(), 1.0, &mu, &grid).unwrap();
    let n: Vec<u32> = (0..=10).collect();
    let table = kappa_growth_check(&rep, &n).unwrap();
    let increasing = table.rows.len() == 11 && table.rows.windows(2).all(|w| w[1].value > w[0].value);
    let close = (rep.norm_value - 2.420).abs() <= 0.02 * 2.420 && (rep.norm_value - analytic).abs() <= 0.02 * analytic;
    outcome(
        close && rep.well_defined && !relu_rep.well_defined && increasing,
        format!(
            "norm {:.5} (analytic {analytic:.5}), well_defined {}; relu well_defined {}; kappa increasing {increasing}",
            rep.norm_value, rep.well_defined, relu_rep.well_defined
        ),
    )
}

fn rates() -> Outcome {
    let mu = Measure1D::standard_gaussian();
    let target = GridFunction::scalar(|x| if x > 0.0 && x < 1.0 { 1.0 } else { 0.0 });
    let op = CompositionOperator::new(leaky_rescaled(), vec![1.0]).unwrap();
    let n_values = [4usize, 8, 16, 32, 64, 128, 256];
    let table = rate_sweep(&BasisFamily::default(), &target, &mu, &n_values, 0, &op, &RateSweepOptions::default()).unwrap();
    let r: Vec<f64> = table.rows.iter().map(|row| row.residual).collect();
    let monotone = r.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let (lx, ly): (Vec<f64>, Vec<f64>) = n_values.iter().zip(&r).map(|(n, r)| ((*n as f64).ln(), r.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let mass = mu.total_mass();
    let below = n_values.iter().zip(&r).all(|(n, r)| *r < (1.0 + (2.0 * mass).sqrt()) / (*n as f64).sqrt());
    let shown: Vec<String> = r.iter().map(|v| format!("{v:.4}")).collect();
    outcome(
        monotone && slope <= -0.3 && below,
        format!("residuals [{}], slope {slope:.3}, non-increasing {monotone}, below reference {below}", shown.join(", ")),
    )
}

fn isometries() -> Outcome {
    let checks = run_all(&SuiteOptions::default(), 0);
    let tolerances_ok = checks.iter().all(|c| match c.name.as_str() {
        "eta_isometry" => c.tolerance <= 1e-9 && c.trials >= 1000,
        "composition_linearity" => c.tolerance <= 1e-12,
        n if n.starts_with("phi_omega") => c.trials >= 100,
        _ => true,
    });
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let worst: Vec<String> = checks.iter().map(|c| format!("{} {:.1e}", c.name, c.max_deviation)).collect();
    outcome(failed.is_empty() && tolerances_ok, format!("{} checks, failed {failed:?}; {}", checks.len(), worst.join(", ")))
}

fn snapshot(dir: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let mut text = std::fs::read_to_string(&path).unwrap();
        if path.to_string_lossy().ends_with(".result.json") {
            text = text.lines().filter(|l| !l.trim_start().starts_with("\"wall_time_ms\"")).collect::<Vec<_>>().join("\n");
        }
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), text);
    }
    files
}

fn reproducibility() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&configs).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    let mut lines = Vec::new();
    let mut pass = true;
    for cfg in names {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let command = uaplab::Command::ALL.iter().map(|c| c.name()).filter(|c| stem.starts_with(c)).max_by_key(|c| c.len()).unwrap();
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let t = Instant::now();
            let status = Command::new(env!("CARGO_BIN_EXE_uaplab"))
                .args([command, "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(dir.path())
                .output()
                .unwrap()
                .status;
            pass &= status.success();
            runs.push((snapshot(dir.path()), t.elapsed()));
        }
        let same = runs[0].0 == runs[1].0 && !runs[0].0.is_empty();
        pass &= same;
        lines.push(format!("{stem} {}({:.1}s)", if same { "" } else { "DIFFERS " }, runs[0].1.as_secs_f64()));
    }
    outcome(pass, lines.join(", "))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "activation classification", Some(Duration::from_secs(1)), classification),
        (2, "constructed activations", Some(Duration::from_secs(30)), constructions),
        (3, "escape times", Some(Duration::from_secs(1)), escape_times),
        (4, "transitivity certificate", Some(Duration::from_secs(60)), transitivity_certificate),
        (5, "constrained assembly", Some(Duration::from_secs(120)), constrained_assembly),
        (6, "omega modification", Some(Duration::from_secs(120)), omega_modification),
        (7, "constant-or-unbounded limitation", Some(Duration::from_secs(5)), limitation),
        (8, "pushforward norm", Some(Duration::from_secs(5)), pushforward),
        (9, "rate sweep", Some(Duration::from_secs(300)), rates),
        (10, "isometry suites", Some(Duration::from_secs(30)), isometries),
        (11, "reproducibility", None, reproducibility),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = run();
        let elapsed = t.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{} criterion {id} ({name}): {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
