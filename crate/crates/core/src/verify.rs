//! Finite-evidence checks of the partial-metric axioms, the induced metric
//! `p^s`, and Cauchy-type behaviour of orbits.
//!
//! Every check here falsifies; a pass only says no counterexample exists on
//! the sample.

use serde::Serialize;

use crate::solver::OrbitTrace;
use crate::space::{
    ps_from_parts, CheckReport, PartialMetricSpace, SampleSet, Tolerances, WitnessCollector,
};
use crate::{Error, Result};

/// Default cap on sample size for the O(n³) triple scans.
pub const AXIOM_SAMPLE_CAP: usize = 200;
/// Tail bound for the Cauchy heuristics on orbits.
pub const CAUCHY_TAIL_BOUND: f64 = 1e-6;

fn distance_matrix(space: &PartialMetricSpace, pts: &[f64]) -> Result<Vec<Vec<f64>>> {
    pts.iter()
        .map(|&x| pts.iter().map(|&y| space.p(x, y)).collect())
        .collect()
}

fn require_nonempty(sample: &SampleSet) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::Input("verification needs a nonempty sample".into()));
    }
    Ok(())
}

/// One report per axiom, ids `P1`..`P4`.
///
/// P2 is checked in contrapositive form: two distinct sampled points must not
/// have `p(x, x)`, `p(x, y)` and `p(y, y)` all within `eps_num` of each other.
/// Its witnesses carry `lhs = 2·eps_num` and `rhs` = the largest of the two
/// deviations, so the usual `margin > eps_num` rule marks the violation.
pub fn check_axioms(
    space: &PartialMetricSpace,
    sample: &SampleSet,
    tol: &Tolerances,
) -> Result<Vec<CheckReport>> {
    require_nonempty(sample)?;
    let pts = sample.points();
    let n = pts.len();
    let p = distance_matrix(space, pts)?;

    let mut p1 = WitnessCollector::new(*tol);
    let mut p2 = WitnessCollector::new(*tol);
    let mut p3 = WitnessCollector::new(*tol);
    let mut p4 = WitnessCollector::new(*tol);

    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (pts[i], pts[j]);
            p1.observe(&[x, y], (p[i][j] - p[j][i]).abs(), 0.0, "P1 symmetry");
            let dev = (p[i][i] - p[i][j]).abs().max((p[j][j] - p[i][j]).abs());
            p2.observe(
                &[x, y],
                2.0 * tol.eps_num,
                dev,
                "P2 distinct points are separated",
            );
        }
    }
    for i in 0..n {
        for j in 0..n {
            p3.observe(
                &[pts[i], pts[j]],
                p[i][i],
                p[i][j],
                "P3 small self-distance",
            );
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                p4.observe(
                    &[pts[i], pts[j], pts[k]],
                    p[i][k] + p[j][j],
                    p[i][j] + p[j][k],
                    "P4 triangularity",
                );
            }
        }
    }
    Ok(vec![
        p1.finish("P1", n),
        p2.finish("P2", n),
        p3.finish("P3", n),
        p4.finish("P4", n),
    ])
}

/// Checks that `p^s` is a metric on the sample: symmetry, zero diagonal,
/// separation of distinct points (same contrapositive form as P2) and the
/// triangle inequality over all triples.
pub fn check_induced_metric(
    space: &PartialMetricSpace,
    sample: &SampleSet,
    tol: &Tolerances,
) -> Result<CheckReport> {
    require_nonempty(sample)?;
    let pts = sample.points();
    let n = pts.len();
    let p = distance_matrix(space, pts)?;
    let ps: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| ps_from_parts(p[i][j], p[i][i], p[j][j]))
                .collect()
        })
        .collect();

    let mut c = WitnessCollector::new(*tol);
    for i in 0..n {
        c.observe(&[pts[i]], ps[i][i].abs(), 0.0, "ps identity");
        for j in i + 1..n {
            c.observe(
                &[pts[i], pts[j]],
                (ps[i][j] - ps[j][i]).abs(),
                0.0,
                "ps symmetry",
            );
            c.observe(
                &[pts[i], pts[j]],
                2.0 * tol.eps_num,
                ps[i][j],
                "ps positivity",
            );
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c.observe(
                    &[pts[i], pts[j], pts[k]],
                    ps[i][k],
                    ps[i][j] + ps[j][k],
                    "ps triangle",
                );
            }
        }
    }
    Ok(c.finish("induced-metric", n))
}

/// Heuristic convergence diagnostics of a Picard orbit. The Cauchy flags are
/// tail tests over the last quarter of the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitDiagnostics {
    /// Smallest self-distance along the orbit.
    pub r_x_estimate: f64,
    pub self_distances_nonincreasing: bool,
    /// Tail values `p(x_n, x_m)` all at most [`CAUCHY_TAIL_BOUND`].
    pub is_zero_cauchy: bool,
    /// Tail steps `p^s(x_n, x_{n+1})` all at most [`CAUCHY_TAIL_BOUND`].
    pub ps_cauchy: bool,
    pub tail_len: usize,
}

pub fn orbit_diagnostics(
    space: &PartialMetricSpace,
    trace: &OrbitTrace,
    eps_num: f64,
) -> Result<OrbitDiagnostics> {
    let it = &trace.iterates;
    if it.len() < 2 {
        return Err(Error::Input(format!(
            "orbit diagnostics need at least 2 iterates, got {}",
            it.len()
        )));
    }
    let r_x_estimate = it
        .iter()
        .map(|s| s.self_distance)
        .fold(f64::INFINITY, f64::min);
    let self_distances_nonincreasing = it
        .windows(2)
        .all(|w| w[1].self_distance <= w[0].self_distance + eps_num);

    let tail_len = (it.len() / 4).max(2);
    let tail = &it[it.len() - tail_len..];
    let mut is_zero_cauchy = true;
    'outer: for (a, sa) in tail.iter().enumerate() {
        for sb in &tail[a..] {
            if space.p(sa.point, sb.point)? > CAUCHY_TAIL_BOUND {
                is_zero_cauchy = false;
                break 'outer;
            }
        }
    }
    let ps_cauchy = tail.iter().all(|s| s.ps_step <= CAUCHY_TAIL_BOUND);
    Ok(OrbitDiagnostics {
        r_x_estimate,
        self_distances_nonincreasing,
        is_zero_cauchy,
        ps_cauchy,
        tail_len,
    })
}
