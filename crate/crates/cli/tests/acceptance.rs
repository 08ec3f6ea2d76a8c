//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, then a
//! nonzero exit if anything failed. Runs without the libtest harness so the
//! lines always reach the output.

use std::time::{Duration, Instant};

use pmfix::comparison::DEFAULT_T_MAX;
use pmfix::{
    check_axioms, check_induced_metric, compute_mx, crosscheck_implications,
    linear_control_equivalence, orbit_diagnostics, picard_orbit, verify_orbit_bound, CarrierSpec,
    ComparisonFunction, Completeness, Distance, Error, PartialMetricSpace, SampleSet, Termination,
    Tolerances,
};
use pmfix_cli::{load_scenario, run, Output};
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn cli(args: &[&str]) -> (Output, Value) {
    let mut argv = vec!["pmfix"];
    argv.extend_from_slice(args);
    let out = run(argv);
    let json = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    (out, json)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn example2_repaired_condition() -> Outcome {
    let t0 = Instant::now();
    let (out, json) = cli(&[
        "contraction",
        "example2-repaired",
        "--condition",
        "eq8",
        "--grid-step",
        "0.03125",
    ]);
    let elapsed = t0.elapsed();
    ensure!(out.code == 0, "exit {} ({})", out.code, out.stderr);
    let r = &json["reports"][0];
    ensure!(r["pass"] == true, "condition failed: {r}");
    let worst = num(&r["worst_margin"]);
    ensure!(worst <= 1e-9, "worst margin {worst}");
    // grid 1/32 over [0,2] ∪ [3,4] alone is 97 points; the orbit closure adds more
    let n = r["sample_points"].as_u64().unwrap_or(0);
    ensure!(n >= 97, "sample has {n} points");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "worst margin {worst:e} over {n} points in {elapsed:.2?}"
    ))
}

fn usual_metric_failure() -> Outcome {
    let (out, json) = cli(&["contraction", "usual-metric-example2", "--condition", "eq8"]);
    ensure!(out.code == 1, "exit {} ({})", out.code, out.stderr);
    let r = &json["reports"][0];
    ensure!(r["pass"] == false, "condition unexpectedly passed");
    let found = r["witnesses"]
        .as_array()
        .into_iter()
        .chain(r["probes"].as_array())
        .flatten()
        .find(|w| w["points"] == serde_json::json!([1.0, 3.0]))
        .cloned();
    let Some(w) = found else {
        return Err("no witness at (1, 3)".into());
    };
    let (lhs, rhs, margin) = (num(&w["lhs"]), num(&w["rhs"]), num(&w["margin"]));
    ensure!((margin - 7.0 / 30.0).abs() <= 1e-12, "margin {margin}");
    ensure!(
        (lhs - 0.9).abs() <= 1e-12 && (rhs - 2.0 / 3.0).abs() <= 1e-12,
        "lhs {lhs} rhs {rhs}"
    );
    ensure!(
        margin > num(&json["options"]["tolerances"]["eps_num"]),
        "margin within tolerance"
    );
    Ok(format!(
        "(1, 3): lhs {lhs} rhs {rhs:.12} margin {margin:.12}"
    ))
}

fn repaired_fixed_point() -> Outcome {
    let (out, json) = cli(&["solve", "example2-repaired", "--all-starts"]);
    ensure!(out.code == 0, "exit {} ({})", out.code, out.stderr);
    let r = &json["result"];
    let starts: Vec<f64> = json["options"]["starts"]
        .as_array()
        .unwrap()
        .iter()
        .map(num)
        .collect();
    ensure!(starts == [0.37, 1.0, 2.0, 3.0, 4.0], "starts {starts:?}");
    let z = num(&r["candidate"]);
    ensure!(r["converged"] == true, "not converged");
    ensure!(z.abs() <= 1e-8, "candidate {z}");
    ensure!(
        num(&r["ps_residual"]) <= 1e-8,
        "residual {}",
        r["ps_residual"]
    );
    ensure!(num(&r["rho_p"]) == 0.0, "rho_p {}", r["rho_p"]);
    ensure!(
        num(&r["self_distance"]).abs() <= 1e-8,
        "p(z,z) {}",
        r["self_distance"]
    );
    ensure!(
        num(&r["starts_agreement"]) <= 1e-8,
        "agreement {}",
        r["starts_agreement"]
    );
    ensure!(r["unique_claimed"] == true, "uniqueness not claimed");
    let mut max_iter = 0;
    for s in r["per_start"].as_array().unwrap() {
        let n = s["iterations"].as_u64().unwrap();
        ensure!(n <= 80, "start {} took {n} iterations", s["start"]);
        max_iter = max_iter.max(n);
    }
    Ok(format!(
        "z = {z:e}, at most {max_iter} iterations, agreement {:e}",
        num(&r["starts_agreement"])
    ))
}

fn phi_iterates_closed_form() -> Outcome {
    let cf = ComparisonFunction::rational();
    let mut worst: f64 = 0.0;
    for t in [0.1, 1.0, 10.0] {
        let orbit = cf.phi_iterates(t, 10_000).map_err(|e| e.to_string())?;
        ensure!(orbit.len() == 10_001, "orbit length {}", orbit.len());
        for (n, v) in orbit.iter().enumerate() {
            let err = (v - t / (1.0 + n as f64 * t)).abs();
            ensure!(err <= 1e-12, "t = {t}, n = {n}: error {err:e}");
            worst = worst.max(err);
        }
    }
    // the single-value path agrees with the sequence
    let direct = cf.phi_iterate(10.0, 10_000).map_err(|e| e.to_string())?;
    ensure!(
        (direct - 10.0 / 100_001.0).abs() <= 1e-12,
        "phi_iterate {direct}"
    );
    Ok(format!("max error {worst:e} over n <= 10^4"))
}

fn f_inverse_correct() -> Outcome {
    let rational = ComparisonFunction::rational();
    let mut families = vec![rational.clone()];
    for alpha in [0.25, 0.5, 0.75] {
        families.push(ComparisonFunction::linear(alpha).map_err(|e| e.to_string())?);
    }
    let mut worst: f64 = 0.0;
    for s in [1e-6, 1e-3, 0.1, 1.0, 3.0, 10.0] {
        for cf in &families {
            let t = cf
                .f_inverse(s, 1e-12, DEFAULT_T_MAX)
                .map_err(|e| e.to_string())?;
            let res = (cf.f(t).map_err(|e| e.to_string())? - s).abs();
            ensure!(res <= 1e-9, "{}: |f(f^-1({s})) - s| = {res:e}", cf.family());
            worst = worst.max(res);
        }
        let t = rational
            .f_inverse(s, 1e-12, DEFAULT_T_MAX)
            .map_err(|e| e.to_string())?;
        let quad = (s + (s * s + 4.0 * s).sqrt()) / 2.0;
        ensure!((t - quad).abs() <= 1e-9, "rational at {s}: {t} vs {quad}");
    }
    Ok(format!("max residual {worst:e}"))
}

fn shifted_fixed_point() -> Outcome {
    let (out, json) = cli(&["contraction", "shifted-thm1"]);
    ensure!(
        out.code == 0,
        "contraction exit {} ({})",
        out.code,
        out.stderr
    );
    ensure!(json["reports"][0]["pass"] == true, "condition failed");

    // brute force on a fine grid of [3, 4]: T(x) = 3 + (x - 3)/2, p = max
    let t = |x: f64| 3.0 + (x - 3.0) / 2.0;
    let pts: Vec<f64> = (0..=256).map(|k| 3.0 + k as f64 / 256.0).collect();
    for &x in &pts {
        for &y in &pts {
            let lhs = t(x).max(t(y));
            let rhs = (0.5 * x.max(y)).max(x).max(y);
            ensure!(lhs <= rhs + 1e-9, "brute force violation at ({x}, {y})");
        }
    }

    let (out, json) = cli(&["solve", "shifted-thm1", "--all-starts"]);
    ensure!(out.code == 0, "solve exit {} ({})", out.code, out.stderr);
    let r = &json["result"];
    let z = num(&r["candidate"]);
    ensure!((z - 3.0).abs() <= 1e-8, "candidate {z}");
    ensure!(
        (num(&r["self_distance"]) - 3.0).abs() <= 1e-8,
        "p(z,z) {}",
        r["self_distance"]
    );
    ensure!(num(&r["rho_p"]) == 3.0, "rho_p {}", r["rho_p"]);
    ensure!(r["in_xp"] == true, "z not in X_p");
    Ok(format!(
        "z = {z}, p(z,z) = {}, rho_p = {}",
        r["self_distance"], r["rho_p"]
    ))
}

fn linear_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in ["example2-repaired", "shifted-thm1"] {
        let sc = load_scenario(name).map_err(|e| e.to_string())?;
        let sample = SampleSet::build(&sc.space.carrier, &sc.sampling, Some(&sc.map))
            .map_err(|e| e.to_string())?;
        for alpha in [0.25, 0.5, 0.75] {
            let eq = linear_control_equivalence(&sc.space, &sc.map, alpha, &sample, &sc.tolerances)
                .map_err(|e| e.to_string())?;
            ensure!(eq.equivalent, "{name} alpha {alpha}: not equivalent");
            ensure!(
                eq.max_margin_diff <= 1e-15,
                "{name} alpha {alpha}: diff {:e}",
                eq.max_margin_diff
            );
            ensure!(
                eq.linear_report.worst_margin == eq.control_report.worst_margin,
                "{name} alpha {alpha}: worst margins differ"
            );
            worst = worst.max(eq.max_margin_diff);
        }
    }
    Ok(format!("max pairwise margin difference {worst:e}"))
}

fn axiom_suite() -> Outcome {
    let carrier = CarrierSpec::new([(0.0, 2.0), (3.0, 4.0)], [], Completeness::Complete)
        .map_err(|e| e.to_string())?;
    let pts: Vec<f64> = (0..67)
        .map(|k| 2.0 * k as f64 / 66.0)
        .chain((0..33).map(|k| 3.0 + k as f64 / 32.0))
        .collect();
    let sample = SampleSet::from_points(&carrier, pts).map_err(|e| e.to_string())?;
    ensure!(sample.len() == 100, "sample has {} points", sample.len());
    let tol = Tolerances::default();

    let max = PartialMetricSpace::new("max", carrier.clone(), Distance::Max);
    let t0 = Instant::now();
    let mut reports = check_axioms(&max, &sample, &tol).map_err(|e| e.to_string())?;
    reports.push(check_induced_metric(&max, &sample, &tol).map_err(|e| e.to_string())?);
    let elapsed = t0.elapsed();
    for r in &reports {
        ensure!(r.pass, "max fails {}", r.check_id);
    }
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");

    let min = PartialMetricSpace::new(
        "min",
        carrier,
        Distance::parse("min(x,y)").map_err(|e| e.to_string())?,
    );
    let first = |space: &PartialMetricSpace| -> Result<_, String> {
        let r = check_axioms(space, &sample, &tol).map_err(|e| e.to_string())?;
        Ok(r.into_iter()
            .find(|r| r.check_id == "P3")
            .and_then(|r| r.witnesses.first().cloned()))
    };
    let a = first(&min)?;
    let b = first(&min)?;
    let Some(w) = a.clone() else {
        return Err("min(x,y) passes P3".into());
    };
    ensure!(a == b, "P3 witness not deterministic");
    // worst P3 violation for min: p(x,x) = x against p(x,y) = y with x = 4, y = 0
    ensure!(
        w.points == [4.0, 0.0] && w.margin == 4.0,
        "first witness {w:?}"
    );
    Ok(format!(
        "max passes P1-P4 + induced metric in {elapsed:.2?}; min(x,y) P3 witness {:?}",
        w.points
    ))
}

fn orbit_invariants() -> Outcome {
    let mut checked = 0;
    for name in ["example2-repaired", "shifted-thm1"] {
        let sc = load_scenario(name).map_err(|e| e.to_string())?;
        let kind = sc
            .condition_kind(&sc.condition)
            .map_err(|e| e.to_string())?;
        let cf = kind.control();
        let tol = sc.tolerances;
        for x0 in sc.start_set().map_err(|e| e.to_string())?.points() {
            let trace = picard_orbit(&sc.space, &sc.map, *x0, 10_000, tol.tol)
                .map_err(|e| e.to_string())?;
            ensure!(trace.converged(), "{name} from {x0}: not converged");
            let sd: Vec<f64> = trace.iterates.iter().map(|s| s.self_distance).collect();
            ensure!(
                sd.windows(2).all(|w| w[1] <= w[0] + 1e-9),
                "{name} from {x0}: self-distances rise"
            );
            let diag =
                orbit_diagnostics(&sc.space, &trace, tol.eps_num).map_err(|e| e.to_string())?;
            ensure!(
                diag.self_distances_nonincreasing,
                "{name} from {x0}: diagnostics disagree"
            );
            let mx = compute_mx(&sc.space, &sc.map, &cf, *x0).map_err(|e| e.to_string())?;
            let bound = verify_orbit_bound(&trace, mx, &tol);
            ensure!(bound.pass, "{name} from {x0}: orbit leaves radius {mx}");
            checked += 1;
        }

        let (out, json) = cli(&["solve", name, "--all-starts"]);
        ensure!(out.code == 0, "{name} solve exit {}", out.code);
        let res = num(&json["result"]["self_distance_residual"]);
        ensure!(res <= 2e-8, "{name}: self-distance residual {res:e}");
    }

    let sc = load_scenario("example2-repaired").map_err(|e| e.to_string())?;
    let cf = ComparisonFunction::rational();
    let m3 = compute_mx(&sc.space, &sc.map, &cf, 3.0).map_err(|e| e.to_string())?;
    let m1 = compute_mx(&sc.space, &sc.map, &cf, 1.0).map_err(|e| e.to_string())?;
    let m3_closed = (3.0 + 21f64.sqrt()) / 2.0 + 3.0;
    let m1_closed = (1.0 + 5f64.sqrt()) / 2.0 + 1.0;
    ensure!(
        (m3 - m3_closed).abs() <= 1e-6,
        "M_3 = {m3}, expected {m3_closed}"
    );
    ensure!(
        (m1 - m1_closed).abs() <= 1e-6,
        "M_1 = {m1}, expected {m1_closed}"
    );
    ensure!(
        (m3 - 6.791287847).abs() <= 1e-6 && (m1 - 2.618034).abs() <= 1e-6,
        "M values off"
    );
    Ok(format!("{checked} orbits; M_3 = {m3:.9}, M_1 = {m1:.9}"))
}

fn implications_and_self_map() -> Outcome {
    let mut families: Vec<ComparisonFunction> = (1..=9)
        .map(|k| ComparisonFunction::linear(k as f64 / 10.0))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    families.push(ComparisonFunction::rational());
    for cf in &families {
        let h = cf.check_hypotheses(1e-9).map_err(|e| e.to_string())?;
        let v = crosscheck_implications(&h.properties);
        ensure!(
            v.is_empty(),
            "{}: implications {:?} violated",
            cf.family(),
            v
        );
    }

    let sc = load_scenario("example2-paper").map_err(|e| e.to_string())?;
    let mut starts = 0;
    for k in 0..=32 {
        let x0 = 3.0 + k as f64 / 32.0;
        match sc.map.apply(&sc.space.carrier, x0) {
            Err(Error::NotSelfMap { .. }) => {}
            other => return Err(format!("T({x0}) gave {other:?}")),
        }
        let trace = picard_orbit(&sc.space, &sc.map, x0, 100, 1e-8).map_err(|e| e.to_string())?;
        ensure!(
            trace.termination == Termination::Error
                && matches!(trace.failure, Some(Error::NotSelfMap { .. })),
            "orbit from {x0} did not stop with not-a-self-map"
        );
        let arg = x0.to_string();
        let (out, _) = cli(&["solve", "example2-paper", "--start", &arg]);
        ensure!(
            out.code == 2 && out.stderr.contains("not a self-map"),
            "solve from {x0}: {out:?}"
        );
        starts += 1;
    }
    Ok(format!(
        "{} families clean; not-a-self-map at all {starts} starts in [3, 4]",
        families.len()
    ))
}

fn falsify_determinism() -> Outcome {
    let args = [
        "falsify",
        "usual-metric-example2",
        "--condition",
        "eq8",
        "--budget",
        "10000",
        "--seed",
        "42",
    ];
    let (a, json) = cli(&args);
    let (b, _) = cli(&args);
    ensure!(a.code == 1, "exit {} ({})", a.code, a.stderr);
    ensure!(a.stdout == b.stdout, "outputs differ");
    let margin = num(&json["result"]["witness"]["margin"]);
    ensure!(margin >= 7.0 / 30.0 - 1e-9, "margin {margin}");
    Ok(format!(
        "{} identical bytes; witness margin {margin}",
        a.stdout.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        (
            "repaired example satisfies the mean condition",
            example2_repaired_condition,
        ),
        ("usual metric fails at (1, 3)", usual_metric_failure),
        ("repaired example solves to 0", repaired_fixed_point),
        ("phi iterates match t/(1+nt)", phi_iterates_closed_form),
        ("inverse of f is correct", f_inverse_correct),
        ("shifted space has fixed point 3", shifted_fixed_point),
        (
            "linear condition equals its comparison form",
            linear_equivalence,
        ),
        ("axiom suite", axiom_suite),
        ("orbit invariants", orbit_invariants),
        ("implications and self-map error", implications_and_self_map),
        ("falsify is deterministic", falsify_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
