//! Picard iteration with the fixed-point certificate: a-priori orbit radius
//! `M_x`, monotone self-distances, the residual `|p(Tz, z) - p(z, z)|`,
//! membership of the limit in X_p, and agreement across starts.
//!
//! Convergence is declared in the induced metric `p^s`.

use serde::{Serialize, Serializer};

use crate::comparison::{ComparisonFunction, HypothesisReport, DEFAULT_T_MAX};
use crate::contraction::{check_contraction, ConditionKind};
use crate::expr::PiecewiseMap;
use crate::space::{
    CheckReport, PartialMetricSpace, RhoEstimate, SampleOptions, SampleSet, Tolerances,
    WitnessCollector,
};
use crate::verify::{orbit_diagnostics, OrbitDiagnostics};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tolerances: Tolerances,
    pub sample: SampleOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 10_000,
            tolerances: Tolerances::default(),
            sample: SampleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitStep {
    pub n: usize,
    pub point: f64,
    pub self_distance: f64,
    /// `p(x_n, x_{n+1})`
    pub step: f64,
    /// `p(x_n, x_0)`
    pub distance_to_start: f64,
    /// `p^s(x_n, x_{n+1})`
    pub ps_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    Error,
}

fn serialize_error<S: Serializer>(e: &Option<Error>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.collect_str(e),
        None => s.serialize_none(),
    }
}

/// Record of `x_0, x_1 = T x_0, …`. The last entry is the candidate limit;
/// its step fields use one further application of `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitTrace {
    pub start: f64,
    pub iterates: Vec<OrbitStep>,
    pub termination: Termination,
    /// Number of `T` applications up to the candidate.
    pub iterations: usize,
    #[serde(serialize_with = "serialize_error")]
    pub failure: Option<Error>,
}

impl OrbitTrace {
    pub fn candidate(&self) -> Option<f64> {
        self.iterates.last().map(|s| s.point)
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn step_record(
    space: &PartialMetricSpace,
    n: usize,
    x: f64,
    next: f64,
    x0: f64,
) -> Result<OrbitStep> {
    let self_distance = space.p(x, x)?;
    let step = space.p(x, next)?;
    let next_self = space.p(next, next)?;
    Ok(OrbitStep {
        n,
        point: x,
        self_distance,
        step,
        distance_to_start: space.p(x, x0)?,
        ps_step: (step - self_distance) + (step - next_self),
    })
}

/// Iterates `x_{n+1} = T(x_n)` until `p^s(x_n, x_{n+1}) <= tol` or
/// `max_iter` applications. A failure mid-orbit ends the trace with
/// [`Termination::Error`] and the partial record.
pub fn picard_orbit(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    x0: f64,
    max_iter: usize,
    tol: f64,
) -> Result<OrbitTrace> {
    if !space.carrier.contains(x0) {
        return Err(Error::Domain { point: x0 });
    }
    if max_iter == 0 {
        return Err(Error::Input("max_iter must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "tolerance must be positive, got {tol}"
        )));
    }

    let mut trace = OrbitTrace {
        start: x0,
        iterates: Vec::new(),
        termination: Termination::MaxIter,
        iterations: 0,
        failure: None,
    };
    let fail = |mut trace: OrbitTrace, e: Error| {
        trace.termination = Termination::Error;
        trace.failure = Some(e);
        Ok(trace)
    };

    let mut x = x0;
    for n in 0..max_iter {
        let next = match map.apply(&space.carrier, x) {
            Ok(v) => v,
            Err(e) => return fail(trace, e),
        };
        let rec = match step_record(space, n, x, next, x0) {
            Ok(r) => r,
            Err(e) => return fail(trace, e),
        };
        trace.iterates.push(rec);
        trace.iterations = n + 1;
        x = next;
        if rec.ps_step <= tol {
            trace.termination = Termination::Converged;
            break;
        }
    }

    let last = match map.apply(&space.carrier, x) {
        Ok(v) => v,
        Err(e) => return fail(trace, e),
    };
    match step_record(space, trace.iterations, x, last, x0) {
        Ok(rec) => trace.iterates.push(rec),
        Err(e) => return fail(trace, e),
    }
    Ok(trace)
}

/// `M_x = f⁻¹(p(x, Tx)) + p(x, x)`, the a-priori bound on `p(Tⁿx, x)`.
pub fn compute_mx(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    cf: &ComparisonFunction,
    x: f64,
) -> Result<f64> {
    let tx = map.apply(&space.carrier, x)?;
    let s = space.p(x, tx)?;
    let inverse = cf.f_inverse(s, 1e-12 * s.max(1.0), DEFAULT_T_MAX)?;
    Ok(inverse + space.p(x, x)?)
}

/// Checks `p(x_n, x_0) <= M_x` along the trace.
pub fn verify_orbit_bound(trace: &OrbitTrace, mx: f64, tol: &Tolerances) -> CheckReport {
    let mut c = WitnessCollector::new(*tol);
    for s in &trace.iterates {
        c.observe(
            &[s.point],
            s.distance_to_start,
            mx,
            &format!("orbit radius at n = {}", s.n),
        );
    }
    c.finish(
        format!("orbit-radius:{}", trace.start),
        trace.iterates.len(),
    )
}

/// Per-start summary inside a [`FixedPointResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartOutcome {
    pub start: f64,
    pub candidate: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub m_x: Option<f64>,
    pub start_in_xp: bool,
    pub diagnostics: OrbitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub candidate: f64,
    /// `p^s(z, Tz)`
    pub ps_residual: f64,
    /// `|p(Tz, z) - p(z, z)|`
    pub self_distance_residual: f64,
    pub self_distance: f64,
    pub rho_p: f64,
    /// How ρ_p was obtained, see [`RhoEstimate::method`].
    pub rho_method: &'static str,
    pub in_xp: bool,
    pub r_x_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub starts_agreement: f64,
    pub unique_claimed: bool,
    /// `"global"` or `"xp"`: where uniqueness is asserted.
    pub uniqueness_scope: &'static str,
    pub warnings: Vec<String>,
    pub per_start: Vec<StartOutcome>,
}

/// Everything a solve produces: the result plus the supporting reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub result: FixedPointResult,
    pub hypotheses: HypothesisReport,
    pub reports: Vec<CheckReport>,
    pub traces: Vec<OrbitTrace>,
}

/// Validates φ and the contraction condition, runs Picard iteration from
/// every start (ascending), and certifies the limit of the first start.
///
/// Failed hypotheses do not stop the solve; they are recorded as warnings
/// and withdraw the uniqueness claim.
pub fn solve_fixed_point(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    kind: &ConditionKind,
    starts: &SampleSet,
    opts: &SolveOptions,
) -> Result<Solution> {
    if starts.is_empty() {
        return Err(Error::Input("solve needs at least one start".into()));
    }
    let tol = &opts.tolerances;
    let cf = kind.control();
    let mut warnings = Vec::new();

    let hypotheses = cf.check_hypotheses(tol.eps_num)?;
    if !hypotheses.all_hold() {
        warnings.push(format!("phi hypotheses fail for {}", cf.family()));
    }
    let sample = SampleSet::build(&space.carrier, &opts.sample, Some(map))?;
    let contraction = check_contraction(space, map, kind, &sample, tol, &[])?;
    if !contraction.pass {
        warnings.push(format!(
            "hypotheses-violated: condition {} fails on the sample",
            kind.tag()
        ));
    }
    let mut reports = vec![contraction.clone()];

    let mut traces = Vec::with_capacity(starts.len());
    let mut mxs = Vec::with_capacity(starts.len());
    for &x0 in starts.points() {
        let trace = picard_orbit(space, map, x0, opts.max_iter, tol.tol)?;
        if let Some(e) = &trace.failure {
            return Err(e.clone());
        }
        if !trace.converged() {
            warnings.push(format!(
                "orbit from {x0} did not converge in {} steps",
                opts.max_iter
            ));
        }
        match compute_mx(space, map, &cf, x0) {
            Ok(mx) => {
                let bound = verify_orbit_bound(&trace, mx, tol);
                if !bound.pass {
                    warnings.push(format!("orbit radius bound fails from {x0}"));
                }
                reports.push(bound);
                mxs.push(Some(mx));
            }
            Err(e) => {
                warnings.push(format!("M_x unavailable from {x0}: {e}"));
                mxs.push(None);
            }
        }
        traces.push(trace);
    }

    let first = &traces[0];
    let z = first
        .candidate()
        .expect("a successful trace has a final record");
    let tz = map.apply(&space.carrier, z)?;
    let pzz = space.p(z, z)?;
    let ps_residual = space.induced_ps(z, tz)?;
    let self_distance_residual = (space.p(tz, z)? - pzz).abs();

    let orbit_points = traces
        .iter()
        .flat_map(|t| t.iterates.iter().map(|s| s.point));
    let pool = SampleSet::from_points(&space.carrier, orbit_points)?.union(starts);
    let RhoEstimate { rho, method, .. } = space.rho_and_xp(&pool, tol.eps_num)?;
    let in_xp = (pzz - rho).abs() <= tol.tol;

    let mut per_start = Vec::with_capacity(traces.len());
    for (trace, mx) in traces.iter().zip(&mxs) {
        per_start.push(StartOutcome {
            start: trace.start,
            candidate: trace.candidate().expect("final record"),
            iterations: trace.iterations,
            termination: trace.termination,
            m_x: *mx,
            start_in_xp: space.p(trace.start, trace.start)? <= rho + tol.eps_num,
            diagnostics: orbit_diagnostics(space, trace, tol.eps_num)?,
        });
    }

    let spread = |outcomes: &mut dyn Iterator<Item = &StartOutcome>| -> Result<f64> {
        let cands: Vec<f64> = outcomes.map(|o| o.candidate).collect();
        let mut worst: f64 = 0.0;
        for (i, &a) in cands.iter().enumerate() {
            for &b in &cands[i + 1..] {
                worst = worst.max(space.induced_ps(a, b)?);
            }
        }
        Ok(worst)
    };
    let starts_agreement = spread(&mut per_start.iter())?;
    let converged = traces.iter().all(OrbitTrace::converged);
    let global = kind.global_uniqueness();
    let scoped_agreement = if global {
        Some(starts_agreement)
    } else if per_start.iter().any(|o| o.start_in_xp) {
        Some(spread(&mut per_start.iter().filter(|o| o.start_in_xp))?)
    } else {
        None
    };
    let unique_claimed = contraction.pass
        && hypotheses.all_hold()
        && converged
        && scoped_agreement.is_some_and(|a| a <= tol.agree_tol);

    let result = FixedPointResult {
        candidate: z,
        ps_residual,
        self_distance_residual,
        self_distance: pzz,
        rho_p: rho,
        rho_method: method,
        in_xp,
        r_x_estimate: per_start[0].diagnostics.r_x_estimate,
        iterations: first.iterations,
        converged,
        starts_agreement,
        unique_claimed,
        uniqueness_scope: if global { "global" } else { "xp" },
        warnings,
        per_start,
    };
    Ok(Solution {
        result,
        hypotheses,
        reports,
        traces,
    })
}
