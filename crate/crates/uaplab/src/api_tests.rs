use serde_json::json;

use crate::commands::{parallel_map, sample_constant_or_unbounded};
use crate::config::Fields;
use crate::output::{Cell, Table};
use crate::{execute, CliError, Command, ExperimentConfig};

fn config(command: Command, v: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_value(v, command, None).unwrap()
}

#[test]
fn parallel_map_keeps_order() {
    let items: Vec<usize> = (0..37).collect();
    for w in [1, 2, 5, 64] {
        assert_eq!(parallel_map(&items, w, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}

#[test]
fn hash_ignores_key_order_and_tracks_seed() {
    let a = config(Command::Escape, json!({"params": {"b": 1, "K_radius": 2}}));
    let b = config(Command::Escape, json!({"params": {"K_radius": 2, "b": 1}}));
    let c = config(Command::Escape, json!({"seed": 3, "params": {"K_radius": 2, "b": 1}}));
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn csv_floats_round_trip() {
    let mut t = Table::new("t", &["n", "x"]);
    let x = 0.1f64 + 0.2;
    t.push(vec![Cell::Int(3), Cell::Float(x)]);
    let csv = t.to_csv();
    let back: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(back, x);
}

#[test]
fn fields_collects_everything() {
    let m = json!({"a": "x", "c": 1}).as_object().unwrap().clone();
    let mut f = Fields::new(&m, "params");
    let _: Option<f64> = f.opt("a");
    let _: Option<f64> = f.req("b");
    match f.finish() {
        Err(CliError::Config(errs)) => {
            let names: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
            assert_eq!(names, ["params.a", "params.b", "params.c"]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn sampler_is_constant_or_unbounded() {
    for (spec, f) in sample_constant_or_unbounded(10, 4) {
        match spec["kind"].as_str().unwrap() {
            "constant" => assert_eq!(f.eval_scalar(-3.0), f.eval_scalar(8.0)),
            _ => assert!(f.is_flagged_unbounded()),
        }
    }
}

#[test]
fn pushforward_block_in_check_activation() {
    let cfg = config(Command::CheckActivation, json!({"params": {"name": "relu", "pushforward": {"b": 1.0}}}));
    let out = execute(&cfg).unwrap();
    assert_eq!(out.outputs["pushforward"]["report"]["well_defined"], false);
    assert!(out.outputs["pushforward"]["kappa"].is_null());
}

#[test]
fn constrained_mode_with_constraints() {
    let cfg = config(
        Command::ConstrainedFit,
        json!({"params": {"mode": "constrained", "witness": "zero", "f": "sin", "eps": 0.2,
               "constraints": [{"kind": "sup_on_ball", "radius": 1.0, "threshold": 1.0}]}}),
    );
    let out = execute(&cfg).unwrap();
    let reported = out.outputs["constraints"][0]["value"].as_f64().unwrap();
    let again = out.outputs["constraints_reevaluated"][0].as_f64().unwrap();
    assert!(reported < 1.0 && (reported - again).abs() < 1e-9);
}

#[test]
fn bad_constraint_is_reported_by_index() {
    let cfg = config(
        Command::ConstrainedFit,
        json!({"params": {"mode": "constrained", "witness": "zero", "f": "sin", "eps": 0.2,
               "constraints": [{"kind": "sup_on_ball", "radius": 1.0, "threshold": 1.0}, {"kind": "weird", "threshold": 1}]}}),
    );
    match execute(&cfg) {
        Err(CliError::Config(errs)) => assert_eq!(errs[0].field, "params.constraints[1]"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn l1_transitivity_demo() {
    let cfg = config(
        Command::TransitivityDemo,
        json!({"params": {"activation": "leaky_rescaled_paper", "g": "zero", "f": "gaussian", "eps": 0.1, "delta": 0.1, "metric": "l1"}}),
    );
    let out = execute(&cfg).unwrap();
    assert_eq!(out.outputs["remeasured_within_tolerance"], true, "{}", out.outputs);
}
