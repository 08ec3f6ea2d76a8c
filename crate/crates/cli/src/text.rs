//! Plain-text rendering of a report, for reading at a terminal.

use std::fmt::Write;

use pmfix::{CheckReport, FalsifyStatus, Witness};

use crate::report::{Payload, Report};

pub fn render(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} ({})",
        report.command, report.scenario, report.version
    );
    let o = &report.options;
    let _ = writeln!(
        out,
        "  p = {}, phi = {}, grid step {}, eps {:e}",
        o.partial_metric, o.phi, o.sampling.grid_step, o.tolerances.eps_num
    );
    if let Some(c) = &o.condition {
        match c.alpha {
            Some(a) => {
                let _ = writeln!(out, "  condition {} (alpha {a})", c.kind);
            }
            None => {
                let _ = writeln!(out, "  condition {}", c.kind);
            }
        }
    }
    for r in &report.reports {
        check(&mut out, r);
    }
    for payload in report.result.iter().chain(&report.details) {
        self::payload(&mut out, payload);
    }
    out
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check(out: &mut String, r: &CheckReport) {
    let worst = r
        .worst_margin
        .map_or("n/a".to_string(), |m| format!("{m:.6e}"));
    let _ = writeln!(
        out,
        "{:<5} {}  worst margin {}  ({} points, {} pairs)",
        verdict(r.pass),
        r.check_id,
        worst,
        r.sample_points,
        r.pairs_scanned
    );
    for w in &r.witnesses {
        witness(out, "witness", w);
    }
    for w in &r.probes {
        witness(out, "probe", w);
    }
}

fn witness(out: &mut String, kind: &str, w: &Witness) {
    let pts: Vec<String> = w.points.iter().map(|x| format!("{x}")).collect();
    let _ = writeln!(
        out,
        "      {kind} ({}) {}: lhs {:.12} rhs {:.12} margin {:.12}",
        pts.join(", "),
        w.label,
        w.lhs,
        w.rhs,
        w.margin
    );
}

fn payload(out: &mut String, p: &Payload) {
    match p {
        Payload::FixedPoint(r) => {
            let _ = writeln!(
                out,
                "{:<5} fixed point {:.12e}  p(z,z) {:.6e}  rho_p {:.6e}  iterations {}",
                verdict(r.converged),
                r.candidate,
                r.self_distance,
                r.rho_p,
                r.iterations
            );
            let _ = writeln!(
                out,
                "      residual {:.3e}, agreement {:.3e}, unique {} ({})",
                r.ps_residual, r.starts_agreement, r.unique_claimed, r.uniqueness_scope
            );
            for s in &r.per_start {
                let _ = writeln!(
                    out,
                    "      start {} -> {:.12e} after {} ({:?})",
                    s.start, s.candidate, s.iterations, s.termination
                );
            }
            for w in &r.warnings {
                let _ = writeln!(out, "      warning: {w}");
            }
        }
        Payload::Hypotheses(h) => {
            let _ = writeln!(
                out,
                "{:<5} phi hypotheses for {}",
                verdict(h.all_hold()),
                h.family
            );
        }
        Payload::Phi(p) => {
            let h = &p.hypotheses;
            let _ = writeln!(
                out,
                "{:<5} phi hypotheses for {}",
                verdict(h.all_hold()),
                h.family
            );
            let _ = writeln!(
                out,
                "      phi increasing {}, f increasing {}, f^-1 at 0 {}, iterates vanish {}",
                h.phi_increasing.holds,
                h.f_increasing.holds,
                h.f_inverse_rc_at_0.holds,
                h.phi_iterates_vanish.holds
            );
            for v in &p.implication_violations {
                let _ = writeln!(out, "FAIL  implication {}: {}", v.id, v.statement);
            }
            if let Some(i) = &p.iterate {
                let _ = writeln!(out, "      phi^{}({}) = {:.16e}", i.n, i.t, i.value);
            }
            if let Some(i) = &p.inverse {
                let _ = writeln!(
                    out,
                    "      f^-1({}) = {:.16e} (residual {:.3e})",
                    i.s, i.t, i.residual
                );
            }
        }
        Payload::Equivalence(e) => {
            let _ = writeln!(
                out,
                "{:<5} linear/comparison equivalence at alpha {}: max margin difference {:e}",
                verdict(e.equivalent),
                e.alpha,
                e.max_margin_diff
            );
        }
        Payload::Falsify(f) => {
            let found = f.status == FalsifyStatus::Found;
            let _ = writeln!(
                out,
                "{:<5} falsify: {} draws, seed {}, {} positive",
                verdict(!found),
                f.budget,
                f.seed,
                f.positive_draws
            );
            if let Some(w) = &f.witness {
                witness(out, "witness", w);
            }
        }
    }
}
