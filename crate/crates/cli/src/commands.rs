//! Subcommand execution. Each command returns a [`Report`] and an exit code;
//! rendering is left to the caller.

use pmfix::comparison::DEFAULT_T_MAX;
use pmfix::verify::AXIOM_SAMPLE_CAP;
use pmfix::{
    check_axioms, check_contraction, check_induced_metric, crosscheck_implications, falsify,
    linear_control_equivalence, solve_fixed_point, ConditionKind, FalsifyStatus, HypothesisReport,
    Implication, SampleSet, SolveOptions,
};
use serde::Serialize;

use crate::report::{Options, Payload, Report, VERSION};
use crate::scenario::{ConditionSpec, Scenario};
use crate::CliError;

/// Exit code for a run that found no violation.
pub const EXIT_PASS: i32 = 0;
/// Exit code for a completed run that found a violation or did not converge.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit code for unusable input.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Axioms,
    Phi {
        iterate: Option<(f64, u64)>,
        inverse: Option<f64>,
    },
    Contraction {
        condition: Option<String>,
        alpha: Option<f64>,
    },
    Solve {
        start: Option<f64>,
    },
    Falsify {
        condition: Option<String>,
        alpha: Option<f64>,
        budget: u64,
        seed: u64,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Axioms => "axioms",
            Action::Phi { .. } => "phi",
            Action::Contraction { .. } => "contraction",
            Action::Solve { .. } => "solve",
            Action::Falsify { .. } => "falsify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateOutcome {
    pub t: f64,
    pub n: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseOutcome {
    pub s: f64,
    pub t: f64,
    /// `f(t) - s`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiOutcome {
    pub hypotheses: HypothesisReport,
    pub implication_violations: Vec<Implication>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterate: Option<IterateOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseOutcome>,
}

/// The linear condition compared pair by pair with its comparison-function
/// form; the two full reports go in the report list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceSummary {
    pub alpha: f64,
    pub equivalent: bool,
    pub max_margin_diff: f64,
}

/// Runs `action` on `scenario`; `Err` means an input error (exit 2).
pub fn execute(scenario: &Scenario, action: &Action) -> Result<(Report, i32), CliError> {
    let mut report = Report {
        scenario: scenario.name.clone(),
        command: action.name().to_string(),
        options: options(scenario),
        reports: Vec::new(),
        result: None,
        details: None,
        version: VERSION,
    };
    let tol = &scenario.tolerances;
    let space = &scenario.space;
    let map = &scenario.map;

    let pass = match action {
        Action::Axioms => {
            let sample =
                SampleSet::build(&space.carrier, &scenario.sampling, None)?.thin(AXIOM_SAMPLE_CAP);
            report.reports = check_axioms(space, &sample, tol)?;
            report
                .reports
                .push(check_induced_metric(space, &sample, tol)?);
            report.reports.iter().all(|r| r.pass)
        }
        Action::Phi { iterate, inverse } => {
            let phi = &scenario.phi;
            let hypotheses = phi.check_hypotheses(tol.eps_num)?;
            let violations = crosscheck_implications(&hypotheses.properties);
            let iterate = match *iterate {
                Some((t, n)) => Some(IterateOutcome {
                    t,
                    n,
                    value: phi.phi_iterate(t, n)?,
                }),
                None => None,
            };
            let inverse = match *inverse {
                Some(s) => {
                    let t = phi.f_inverse(s, 1e-12 * s.max(1.0), DEFAULT_T_MAX)?;
                    Some(InverseOutcome {
                        s,
                        t,
                        residual: phi.f(t)? - s,
                    })
                }
                None => None,
            };
            let pass = hypotheses.all_hold() && violations.is_empty();
            report.result = Some(Payload::Phi(PhiOutcome {
                hypotheses,
                implication_violations: violations,
                iterate,
                inverse,
            }));
            pass
        }
        Action::Contraction { condition, alpha } => {
            let spec = resolve_condition(scenario, condition, *alpha);
            let kind = scenario.condition_kind(&spec)?;
            report.options.condition = Some(spec);
            let sample = SampleSet::build(&space.carrier, &scenario.sampling, Some(map))?;
            let main = check_contraction(space, map, &kind, &sample, tol, &scenario.probes)?;
            let mut pass = main.pass;
            report.reports.push(main);
            if let ConditionKind::LinearSelfDistanceMax { alpha } = kind {
                // thm1 is also run through its comparison-function form
                if alpha > 0.0 {
                    let eq = linear_control_equivalence(space, map, alpha, &sample, tol)?;
                    pass &= eq.equivalent;
                    report.details = Some(Payload::Equivalence(EquivalenceSummary {
                        alpha,
                        equivalent: eq.equivalent,
                        max_margin_diff: eq.max_margin_diff,
                    }));
                    report.reports.push(eq.control_report);
                }
            }
            pass
        }
        Action::Solve { start } => {
            let spec = scenario.condition.clone();
            let kind = scenario.condition_kind(&spec)?;
            report.options.condition = Some(spec);
            let starts = match *start {
                Some(x0) => SampleSet::from_points(&space.carrier, [x0])?,
                None => scenario.start_set()?,
            };
            report.options.starts = Some(starts.points().to_vec());
            let opts = SolveOptions {
                tolerances: *tol,
                sample: scenario.sampling,
                ..SolveOptions::default()
            };
            let solution = solve_fixed_point(space, map, &kind, &starts, &opts)?;
            let pass = solution.result.converged
                && solution.hypotheses.all_hold()
                && solution.reports.iter().all(|r| r.pass);
            report.reports = solution.reports;
            report.result = Some(Payload::FixedPoint(solution.result));
            report.details = Some(Payload::Hypotheses(solution.hypotheses));
            pass
        }
        Action::Falsify {
            condition,
            alpha,
            budget,
            seed,
        } => {
            let spec = resolve_condition(scenario, condition, *alpha);
            let kind = scenario.condition_kind(&spec)?;
            report.options.condition = Some(spec);
            report.options.budget = Some(*budget);
            report.options.seed = Some(*seed);
            let outcome = falsify(space, map, &kind, *budget, *seed, tol)?;
            let pass = outcome.status == FalsifyStatus::Exhausted;
            report.result = Some(Payload::Falsify(outcome));
            pass
        }
    };
    Ok((report, if pass { EXIT_PASS } else { EXIT_VIOLATION }))
}

/// Command-line condition if given, else the scenario's. An `--alpha` alone
/// overrides the scenario's alpha.
fn resolve_condition(
    scenario: &Scenario,
    tag: &Option<String>,
    alpha: Option<f64>,
) -> ConditionSpec {
    ConditionSpec {
        kind: tag
            .clone()
            .unwrap_or_else(|| scenario.condition.kind.clone()),
        alpha: alpha.or(scenario.condition.alpha),
    }
}

fn options(scenario: &Scenario) -> Options {
    Options {
        tolerances: scenario.tolerances,
        sampling: scenario.sampling,
        completeness: scenario.space.carrier.completeness(),
        partial_metric: scenario.space.distance.to_string(),
        map: scenario
            .map
            .pieces
            .iter()
            .map(|p| format!("[{}, {}] -> {}", p.lo, p.hi, p.expr))
            .collect(),
        phi: scenario.phi.family().to_string(),
        condition: None,
        starts: None,
        budget: None,
        seed: None,
    }
}
