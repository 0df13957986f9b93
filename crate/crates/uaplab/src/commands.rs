//! One function per subcommand: parse params, run the pipeline, collect
//! outputs and tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use uaplab_core::activations::{classify, ActivationSpec, ClassifyOptions, Monotonicity};
use uaplab_core::constrained_approx::{assemble_constrained, assemble_prescribed, AssembleOptions, ConstraintFunctional};
use uaplab_core::depth_dynamics::{
    construct_transitive_approximant, escape, escape_time, l1_transitive_approximant, CompositionOperator, Metric,
    TransitivityOptions,
};
use uaplab_core::function_space::{d_ucc, lp_norm, GridFunction, GridSpec, Measure1D, Weight, WeightFamily};
use uaplab_core::network::{ActivationRef, FeedForwardNet};
use uaplab_core::omega_modification::{approximate_growth, demonstrate_limitation, GrowthOptions, LimitationOptions};
use uaplab_core::rate_bounds::{
    kappa_growth_check, prepare_rate_sweep, pushforward_density_norm, BasisFamily, RateRow, RateSweepOptions,
};

use crate::config::Fields;
use crate::error::{CliError, Result};
use crate::output::{Outcome, Table};
use crate::suites::{self, SuiteOptions};
use crate::{targets, Command};

pub fn run(command: Command, params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    match command {
        Command::CheckActivation => check_activation(params),
        Command::Escape => escape_cmd(params),
        Command::TransitivityDemo => transitivity_demo(params, seed),
        Command::ConstrainedFit => constrained_fit(params, seed),
        Command::OmegaApprox => omega_approx(params, seed),
        Command::RateSweep => rate_sweep(params, seed),
        Command::LimitationDemo => limitation_demo(params, seed),
        Command::FreeSpaceTests => free_space_tests(params, seed),
    }
}

fn to_json(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Worker cap from `UAPLAB_THREADS`, else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var("UAPLAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `f` over `items` on up to `workers` scoped threads; output order follows
/// `items`.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                s.spawn(move || items.iter().enumerate().skip(w).step_by(workers).map(|(i, t)| (i, f(t))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn activation(p: &mut Fields, default: Option<&str>) -> Option<ActivationSpec> {
    let r: Option<ActivationRef> = p.alias(&["activation", "name"]).or_else(|| default.map(|d| ActivationRef::Name(d.into())));
    let Some(r) = r else {
        p.error("activation", "required field is missing (or give `name`)");
        return None;
    };
    match r.resolve() {
        Ok(s) => Some(s),
        Err(e) => {
            p.error("activation", e.to_string());
            None
        }
    }
}

fn shift(p: &mut Fields, default: Option<f64>) -> Option<Vec<f64>> {
    match p.raw("b") {
        None => match default {
            Some(b) => Some(vec![b]),
            None => {
                p.error("b", "required field is missing");
                None
            }
        },
        Some(Value::Number(n)) => n.as_f64().map(|b| vec![b]),
        Some(v) => match serde_json::from_value::<Vec<f64>>(v.clone()) {
            Ok(b) => Some(b),
            Err(_) => {
                p.error("b", "must be a number or an array of numbers");
                None
            }
        },
    }
}

fn operator(p: &mut Fields, default_activation: &str, default_b: Option<f64>) -> Option<CompositionOperator> {
    let act = activation(p, Some(default_activation));
    let b = shift(p, default_b);
    let matrix: Option<Vec<Vec<f64>>> = p.opt("matrix");
    let (act, b) = (act?, b?);
    let built = match matrix {
        None => CompositionOperator::new(act, b),
        Some(m) => CompositionOperator::with_matrix(act, m, b),
    };
    match built {
        Ok(op) => Some(op),
        Err(e) => {
            p.error("b", e.to_string());
            None
        }
    }
}

fn target(p: &mut Fields, key: &str, default: Option<&str>) -> Option<GridFunction> {
    let v = match (p.raw(key), default) {
        (Some(v), _) => v.clone(),
        (None, Some(d)) => Value::String(d.into()),
        (None, None) => {
            p.error(key, "required field is missing");
            return None;
        }
    };
    match targets::parse(&v) {
        Ok(f) => Some(f),
        Err(e) => {
            p.error(key, e);
            None
        }
    }
}

fn measures(p: &mut Fields, m: usize) -> Option<Vec<Measure1D>> {
    let list = match p.raw("measure") {
        None => vec![Measure1D::standard_gaussian(); m],
        Some(Value::Array(_)) => p.opt::<Vec<Measure1D>>("measure")?,
        Some(_) => vec![p.opt::<Measure1D>("measure")?; m],
    };
    if list.len() != m {
        p.error("measure", format!("need {m} factor measure(s), got {}", list.len()));
        return None;
    }
    Some(list)
}

fn check_activation(params: &Map<String, Value>) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let sigma = activation(&mut p, None);
    let mut opts = ClassifyOptions::default();
    if let Some(r) = p.opt::<f64>("search_radius") {
        opts.search_radius = r;
    }
    if let Some(g) = p.opt::<GridSpec>("check_grid") {
        opts.check_grid = Some(g);
    }
    let push = p.opt::<Map<String, Value>>("pushforward");
    let mut push_cfg = None;
    if let Some(m) = &push {
        let mut q = Fields::new(m, "params.pushforward");
        let b: Option<f64> = q.req("b");
        let mu: Measure1D = q.or("measure", Measure1D::standard_gaussian());
        let grid: GridSpec = q.or("grid", GridSpec { dim_in: 1, dim_out: 1, points_per_axis: 20_001, radius: 10.0 });
        let kappa_max: u32 = q.or("kappa_n_max", 10);
        push_cfg = b.map(|b| (b, mu, grid, kappa_max));
        p.absorb(q);
    }
    p.finish()?;
    let sigma = sigma.expect("validated");

    let verdict = classify(&sigma, &opts)?;
    let mut outputs = json!({
        "activation": sigma.describe(),
        "builtin": sigma.builtin_name(),
        "breakpoints": sigma.breakpoints(),
        "monotonicity": match sigma.monotonicity() {
            Some(Monotonicity::Increasing) => "increasing",
            Some(Monotonicity::Decreasing) => "decreasing",
            None => "none",
        },
        "verdict": to_json(&verdict),
    });
    let mut tables = Vec::new();
    if let Some((b, mu, grid, kappa_max)) = push_cfg {
        let report = pushforward_density_norm(&sigma, b, &mu, &grid)?;
        let ns: Vec<u32> = (0..=kappa_max).collect();
        let kappa = if report.well_defined { kappa_growth_check(&report, &ns).ok() } else { None };
        if let Some(k) = &kappa {
            let mut t = Table::new("kappa", &["N", "kappa"]);
            k.rows.iter().for_each(|r| t.push(vec![r.n.into(), r.value.into()]));
            tables.push(t);
        }
        outputs["pushforward"] = json!({ "b": b, "measure": to_json(&mu), "report": to_json(&report), "kappa": to_json(&kappa) });
    }
    Ok(Outcome { outputs, tables, artifacts: Vec::new() })
}

fn escape_cmd(params: &Map<String, Value>) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let op = operator(&mut p, "leaky_shifted_paper", None);
    let k: Option<f64> = p.alias(&["K_radius", "k_radius"]);
    if k.is_none() {
        p.error("K_radius", "required field is missing");
    }
    let guard: Option<f64> = p.opt("guard_radius");
    let max_n: usize = p.or("max_n", 10_000);
    let gate: bool = p.or("require_transitive", true);
    p.finish()?;
    let (op, k) = (op.expect("validated"), k.expect("validated"));
    let guard = guard.unwrap_or(k);

    let n = if gate { escape_time(&op, k, guard, max_n)? } else { escape(&op, k, guard, max_n)?.n };
    let esc = escape(&op, k, guard, max_n)?;
    let mut tables = Vec::new();
    if op.dim() == 1 && op.is_identity_matrix() && op.activation().monotonicity() == Some(Monotonicity::Increasing) {
        let mut t = Table::new("orbit", &["n", "lo", "hi"]);
        for i in 0..=n {
            t.push(vec![i.into(), op.iterate(&[-k], i)[0].into(), op.iterate(&[k], i)[0].into()]);
        }
        tables.push(t);
    }
    let outputs = json!({
        "N": n,
        "image": esc.image,
        "K_radius": k,
        "guard_radius": guard,
        "activation": op.activation().describe(),
        "b": op.shift(),
    });
    Ok(Outcome { outputs, tables, artifacts: Vec::new() })
}

fn transitivity_demo(params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let op = operator(&mut p, "leaky_shifted_paper", Some(1.0));
    let g = target(&mut p, "g", None);
    let f = target(&mut p, "f", None);
    let eps: Option<f64> = p.req("eps");
    let delta: Option<f64> = p.req("delta");
    p.check_open("eps", eps, 0.0, f64::INFINITY);
    p.check_open("delta", delta, 0.0, f64::INFINITY);
    let metric: Metric = p.or("metric", Metric::Ucc);
    let mut opts: TransitivityOptions = p.or("options", TransitivityOptions::default());
    let refine: usize = p.or("remeasure_factor", 2);
    p.check("remeasure_factor", refine >= 1, "must be at least 1");
    let m = op.as_ref().map_or(1, |o| o.dim());
    let mu = if metric == Metric::L1 || params.contains_key("measure") { measures(&mut p, m) } else { Some(Vec::new()) };
    p.finish()?;
    let (op, g, f, eps, delta, mu) = (op.unwrap(), g.unwrap(), f.unwrap(), eps.unwrap(), delta.unwrap(), mu.unwrap());
    if let Some(r) = opts.refit.as_mut() {
        r.seed = seed;
    }

    let cert = match metric {
        Metric::Ucc => construct_transitive_approximant(&op, &g, &f, eps, delta, &opts)?,
        Metric::L1 => l1_transitive_approximant(&op, &g, &f, &mu, eps, delta, &opts)?,
    };
    let pushed = op.apply(&cert.g_tilde, cert.summary.n);
    let remeasured = match metric {
        Metric::Ucc => {
            let base = opts.verify_grid(m);
            let grid = GridSpec { points_per_axis: refine * (base.points_per_axis - 1) + 1, ..base };
            let d_seed = d_ucc(&g, &cert.g_tilde, opts.ucc_terms, &grid)?;
            let d_target = d_ucc(&f, &pushed, opts.ucc_terms, &grid)?;
            json!({ "points_per_axis": grid.points_per_axis, "terms": opts.ucc_terms,
                    "d_seed": d_seed.distance, "d_target": d_target.distance, "tail_bound": d_seed.tail_bound })
        }
        Metric::L1 => {
            let nodes = refine * opts.quad_nodes;
            let d_seed = lp_norm(&g.sub(&cert.g_tilde)?, &mu, 1.0, nodes)?;
            let d_target = lp_norm(&f.sub(&pushed)?, &mu, 1.0, nodes)?;
            json!({ "quad_nodes": nodes, "d_seed": d_seed, "d_target": d_target })
        }
    };
    let within = remeasured["d_seed"].as_f64().is_some_and(|d| d < delta) && remeasured["d_target"].as_f64().is_some_and(|d| d < eps);
    let outputs = json!({ "certificate": to_json(&cert.summary), "remeasured": remeasured, "remeasured_within_tolerance": within });
    let artifacts = cert.g_tilde_net.as_ref().map(|n| vec![("g_tilde_net".to_string(), to_json(n))]).unwrap_or_default();
    Ok(Outcome { outputs, tables: Vec::new(), artifacts })
}

fn constraint(v: &Value) -> std::result::Result<ConstraintFunctional, String> {
    let obj = v.as_object().ok_or("constraint must be an object")?;
    let kind = obj.get("kind").and_then(Value::as_str).ok_or("constraint needs a string `kind`")?;
    let threshold = obj.get("threshold").and_then(Value::as_f64).ok_or("constraint needs a numeric `threshold`")?;
    let allowed: &[&str] = match kind {
        "sup_on_ball" => &["kind", "threshold", "radius", "points"],
        "norm_at" => &["kind", "threshold", "x0"],
        other => return Err(format!("unknown constraint kind `{other}` (sup_on_ball, norm_at)")),
    };
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(format!("unknown field `{k}` for constraint `{kind}`"));
    }
    let built = match kind {
        "sup_on_ball" => {
            let radius = obj.get("radius").and_then(Value::as_f64).ok_or("`radius` must be a number")?;
            let points = obj.get("points").map_or(Some(201), Value::as_u64).ok_or("`points` must be an integer")? as usize;
            ConstraintFunctional::sup_on_ball(radius, points, threshold)
        }
        _ => {
            let x0: Vec<f64> = serde_json::from_value(obj.get("x0").cloned().unwrap_or(Value::Null)).map_err(|_| "`x0` must be an array of numbers")?;
            ConstraintFunctional::norm_at(x0, threshold)
        }
    };
    built.map_err(|e| e.to_string())
}

fn constrained_fit(params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let op = operator(&mut p, "leaky_shifted_paper", Some(1.0));
    let mode: String = p.or("mode", "prescribed".to_string());
    let f = target(&mut p, "f", None);
    let eps: Option<f64> = p.req("eps");
    p.check_open("eps", eps, 0.0, 1.0);
    let mut opts: AssembleOptions = p.or("options", AssembleOptions::default());
    opts.fit.seed = seed;
    let check_points: usize = p.or("decomposition_points", 1000);
    let check_radius: f64 = p.or("decomposition_radius", 20.0);
    let (mut seed_fn, mut delta, mut constraints) = (None, None, Vec::new());
    match mode.as_str() {
        "prescribed" => {
            seed_fn = target(&mut p, "f_hat", None);
            delta = p.req::<f64>("delta");
            p.check_open("delta", delta, 0.0, 1.0);
        }
        "constrained" => {
            seed_fn = target(&mut p, "witness", None);
            match p.req::<Vec<Value>>("constraints") {
                Some(list) if !list.is_empty() => {
                    for (i, c) in list.iter().enumerate() {
                        match constraint(c) {
                            Ok(c) => constraints.push(c),
                            Err(e) => p.error(&format!("constraints[{i}]"), e),
                        }
                    }
                }
                Some(_) => p.error("constraints", "need at least one constraint"),
                None => {}
            }
        }
        other => p.error("mode", format!("unknown mode `{other}` (prescribed, constrained)")),
    }
    p.finish()?;
    let (op, f, eps, seed_fn) = (op.unwrap(), f.unwrap(), eps.unwrap(), seed_fn.unwrap());

    let (report, constraint_values) = if mode == "prescribed" {
        (assemble_prescribed(&seed_fn, &f, eps, delta.unwrap(), &op, &opts)?, None)
    } else {
        let r = assemble_constrained(&constraints, &seed_fn, &f, eps, &op, &opts)?;
        (r.report, Some(r.constraints))
    };

    let segment = report.final_segment()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..check_points {
        let x: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-check_radius..=check_radius)).collect();
        let full = report.full_net.eval(&x)?;
        let split = segment.eval(&op.iterate(&x, report.n_frozen))?;
        for (a, b) in full.iter().zip(&split) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    // Constraint values recomputed from the serialized segment.
    let reloaded: FeedForwardNet = serde_json::from_value(to_json(&segment)).expect("network JSON round-trips");
    let reevaluated: Vec<f64> = constraints.iter().map(|c| c.evaluate(&reloaded.to_grid_function())).collect();
    let frozen_identity = report.full_net.layers()[..report.n_frozen].iter().all(|l| l.is_identity_matrix());
    let outputs = json!({
        "mode": mode,
        "report": to_json(&report),
        "constraints": to_json(&constraint_values),
        "constraints_reevaluated": reevaluated,
        "frozen_layers_identity": frozen_identity,
        "decomposition_max_rel_error": worst,
        "decomposition_points": check_points,
    });
    Ok(Outcome { outputs, tables: Vec::new(), artifacts: vec![("net".to_string(), to_json(&report.full_net))] })
}

fn omega_approx(params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let f = target(&mut p, "f", None);
    let family: Option<Vec<Weight>> = p.req("family");
    let eps: Option<f64> = p.req("eps");
    p.check_open("eps", eps, 0.0, f64::INFINITY);
    let mut opts: GrowthOptions = p.or("options", GrowthOptions::default());
    let table_points: usize = p.or("table_points", 2001);
    let family = family.and_then(|w| match WeightFamily::new(w) {
        Ok(fam) => Some(fam),
        Err(e) => {
            p.error("family", e.to_string());
            None
        }
    });
    p.finish()?;
    let (f, family, eps) = (f.unwrap(), family.unwrap(), eps.unwrap());
    opts.vanishing.fit.seed = seed;

    let (approx, report) = approximate_growth(&f, &family, eps, &opts)?;
    let mut tables = Vec::new();
    if f.dim_in() == 1 && f.dim_out() == 1 && table_points >= 2 {
        let r = opts.measure_radius;
        let mut t = Table::new("profile", &["x", "f", "approx", "weighted_error"]);
        for i in 0..table_points {
            let x = -r + 2.0 * r * i as f64 / (table_points - 1) as f64;
            let (a, b) = (f.eval_scalar(x), approx.eval_scalar(x));
            t.push(vec![x.into(), a.into(), b.into(), ((a - b).abs() / (report.selected.eval(x.abs()) + 1.0)).into()]);
        }
        tables.push(t);
    }
    let outputs = json!({
        "eps": eps,
        "selected": to_json(&report.selected),
        "selected_label": report.selected.label(),
        "report": to_json(&report),
        "within_tolerance": report.weighted_error < eps && report.weighted_error_on_measure_box < eps,
    });
    Ok(Outcome { outputs, tables, artifacts: Vec::new() })
}

fn rate_sweep(params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let op = operator(&mut p, "leaky_rescaled_paper", Some(1.0));
    let family: BasisFamily = p.or("basis_family", BasisFamily::default());
    let target_fn = target(&mut p, "target", Some("indicator_0_1"));
    let mu: Measure1D = p.or("measure", Measure1D::standard_gaussian());
    let n_values: Vec<usize> = p.or("n_values", vec![4, 8, 16, 32, 64, 128, 256]);
    p.check("n_values", !n_values.is_empty() && n_values.iter().all(|n| *n >= 1), "need positive integers");
    let depth: u32 = p.alias(&["N", "depth"]).unwrap_or(0);
    let mut opts: RateSweepOptions = p.or("options", RateSweepOptions::default());
    p.finish()?;
    let (op, target_fn) = (op.unwrap(), target_fn.unwrap());
    opts.seed = seed;

    let max_n = n_values.iter().copied().max().unwrap_or(1);
    let plan = prepare_rate_sweep(&family, &target_fn, &mu, max_n, depth, &op, &opts)?;
    let rows = parallel_map(&n_values, worker_count(), |&n| plan.row(n));
    let rows: Vec<RateRow> = rows.into_iter().collect::<uaplab_core::Result<_>>()?;
    let table = plan.finish(rows);

    let mut t = Table::new(
        "rates",
        &["n", "N", "residual", "bound_reference", "slope_estimate", "bound_displayed", "bound_proof_chain", "iterations"],
    );
    for r in &table.rows {
        t.push(vec![
            r.n.into(),
            r.depth.into(),
            r.residual.into(),
            r.bound_reference.into(),
            table.slope_estimate.into(),
            r.bound_displayed.into(),
            r.bound_proof_chain.into(),
            r.iterations.into(),
        ]);
    }
    let outputs = json!({
        "table": to_json(&table),
        "below_proof_chain_bound": table.rows.iter().all(|r| r.residual < r.bound_proof_chain),
    });
    Ok(Outcome { outputs, tables: vec![t], artifacts: Vec::new() })
}

/// Seeded draws from the constant-or-unbounded class: even draws are
/// constants in `[-2, 2]`, odd draws are lines with nonzero slope.
pub fn sample_constant_or_unbounded(count: usize, seed: u64) -> Vec<(Value, GridFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                let c: f64 = rng.gen_range(-2.0..=2.0);
                (json!({"kind": "constant", "value": c}), GridFunction::constant(1, vec![c]))
            } else {
                let s: f64 = rng.gen_range(0.01..=2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let c: f64 = rng.gen_range(-2.0..=2.0);
                let f = GridFunction::scalar(move |x| s * x + c).flagged_unbounded();
                (json!({"kind": "affine", "slope": s, "intercept": c}), f)
            }
        })
        .collect()
}

fn limitation_demo(params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    let mut p = Fields::new(params, "params");
    let count: usize = p.or("sample_count", 16);
    let opts: LimitationOptions = p.or("options", LimitationOptions::default());
    let explicit: Vec<Value> = p.or("samples", Vec::new());
    let mut samples = Vec::new();
    for (i, v) in explicit.iter().enumerate() {
        match targets::parse(v) {
            Ok(f) => samples.push((v.clone(), f)),
            Err(e) => p.error(&format!("samples[{i}]"), e),
        }
    }
    p.finish()?;
    samples.extend(sample_constant_or_unbounded(count, seed));
    let fns: Vec<GridFunction> = samples.iter().map(|s| s.1.clone()).collect();
    let report = demonstrate_limitation(&fns, &opts)?;

    let mut t = Table::new("constants", &["c", "sup_error"]);
    for i in 0..opts.c_count {
        let c = opts.c_min + (opts.c_max - opts.c_min) * i as f64 / (opts.c_count - 1) as f64;
        t.push(vec![c.into(), (1.0 - c).abs().max(c.abs()).into()]);
    }
    let described: Vec<Value> = samples
        .iter()
        .zip(&report.samples)
        .map(|((spec, _), e)| json!({ "sample": spec, "unbounded": e.unbounded, "sup_error": e.sup_error }))
        .collect();
    let outputs = json!({
        "best_c": report.best_c,
        "best_constant_error": report.best_constant_error,
        "min_error": report.min_error,
        "separated": report.separated,
        "samples": described,
        "options": to_json(&opts),
    });
    Ok(Outcome { outputs, tables: vec![t], artifacts: Vec::new() })
}

fn free_space_tests(params: &Map<String, Value>, seed: u64) -> Result<Outcome> {
    let opts: SuiteOptions = serde_json::from_value(Value::Object(params.clone())).map_err(|e| CliError::field("params", e.to_string()))?;
    let checks = suites::run_all(&opts, seed);
    let outputs = json!({ "all_pass": checks.iter().all(|c| c.pass), "checks": to_json(&checks) });
    Ok(Outcome { outputs, tables: Vec::new(), artifacts: Vec::new() })
}
