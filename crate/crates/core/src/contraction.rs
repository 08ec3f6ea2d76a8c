//! Contraction-type conditions `p(Tx, Ty) <= rhs(p(x, y), p(x, x), p(y, y))`,
//! scanned over sampled pairs, plus a seeded random counterexample search.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::comparison::ComparisonFunction;
use crate::expr::PiecewiseMap;
use crate::space::{
    CheckReport, PartialMetricSpace, SampleSet, Tolerances, Witness, WitnessCollector,
};
use crate::{Error, Result};

/// Rounds of local refinement around a random find.
pub const REFINE_ROUNDS: usize = 20;
/// Share of random draws taken from isolated points and interval endpoints.
const ATOM_SHARE: f64 = 0.05;

/// The right-hand side of a contraction condition.
///
/// The wire tags (`eq3`, `eq8`, `eq9`, `thm1`) are the names used in scenario
/// files and on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionKind {
    /// `eq3`: `max{φ(p(x,y)), p(x,x), p(y,y)}`.
    SelfDistanceMax(ComparisonFunction),
    /// `eq8`: `max{φ(p(x,y)), (p(x,x) + p(y,y))/2}`.
    SelfDistanceMean(ComparisonFunction),
    /// `eq9`: `φ(p(x,y))`.
    Plain(ComparisonFunction),
    /// `thm1`: `max{α·p(x,y), p(x,x), p(y,y)}` with α in [0, 1).
    LinearSelfDistanceMax { alpha: f64 },
}

impl ConditionKind {
    pub fn from_tag(tag: &str, phi: &ComparisonFunction, alpha: Option<f64>) -> Result<Self> {
        Ok(match tag {
            "eq3" => ConditionKind::SelfDistanceMax(phi.clone()),
            "eq8" => ConditionKind::SelfDistanceMean(phi.clone()),
            "eq9" => ConditionKind::Plain(phi.clone()),
            "thm1" => {
                let alpha = alpha.ok_or_else(|| {
                    Error::Input("condition thm1 needs an alpha parameter".into())
                })?;
                Self::linear(alpha)?
            }
            other => {
                return Err(Error::Input(format!(
                    "unknown condition `{other}` (expected eq3, eq8, eq9 or thm1)"
                )))
            }
        })
    }

    pub fn linear(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Input(format!(
                "thm1 alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(ConditionKind::LinearSelfDistanceMax { alpha })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ConditionKind::SelfDistanceMax(_) => "eq3",
            ConditionKind::SelfDistanceMean(_) => "eq8",
            ConditionKind::Plain(_) => "eq9",
            ConditionKind::LinearSelfDistanceMax { .. } => "thm1",
        }
    }

    /// The control function in force: φ itself, or `αt` for the linear kind.
    pub fn control(&self) -> ComparisonFunction {
        match self {
            ConditionKind::SelfDistanceMax(cf)
            | ConditionKind::SelfDistanceMean(cf)
            | ConditionKind::Plain(cf) => cf.clone(),
            ConditionKind::LinearSelfDistanceMax { alpha } => {
                ComparisonFunction::linear_unchecked(*alpha)
            }
        }
    }

    /// Whether a unique fixed point is asserted on the whole carrier rather
    /// than only among points of minimal self-distance.
    pub fn global_uniqueness(&self) -> bool {
        matches!(
            self,
            ConditionKind::SelfDistanceMean(_) | ConditionKind::Plain(_)
        )
    }

    /// The control term: `φ(p_xy)`, or `α·p_xy` for the linear kind.
    pub fn control_term(&self, p_xy: f64) -> Result<f64> {
        match self {
            ConditionKind::SelfDistanceMax(cf)
            | ConditionKind::SelfDistanceMean(cf)
            | ConditionKind::Plain(cf) => cf.phi(p_xy),
            ConditionKind::LinearSelfDistanceMax { alpha } => Ok(alpha * p_xy),
        }
    }

    pub fn rhs(&self, p_xy: f64, p_xx: f64, p_yy: f64) -> Result<f64> {
        let c = self.control_term(p_xy)?;
        Ok(match self {
            ConditionKind::SelfDistanceMax(_) | ConditionKind::LinearSelfDistanceMax { .. } => {
                c.max(p_xx).max(p_yy)
            }
            ConditionKind::SelfDistanceMean(_) => c.max((p_xx + p_yy) / 2.0),
            ConditionKind::Plain(_) => c,
        })
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionKind::LinearSelfDistanceMax { alpha } => write!(f, "thm1(alpha={alpha})"),
            ConditionKind::SelfDistanceMax(cf)
            | ConditionKind::SelfDistanceMean(cf)
            | ConditionKind::Plain(cf) => write!(f, "{}(phi={})", self.tag(), cf.family()),
        }
    }
}

impl Serialize for ConditionKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Precomputed image and self-distance of each sample point.
struct Prepared<'a> {
    space: &'a PartialMetricSpace,
    kind: &'a ConditionKind,
    pts: Vec<f64>,
    images: Vec<f64>,
    selfs: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(
        space: &'a PartialMetricSpace,
        map: &PiecewiseMap,
        kind: &'a ConditionKind,
        sample: &SampleSet,
    ) -> Result<Self> {
        let pts = sample.points().to_vec();
        let images = pts
            .iter()
            .map(|&x| map.apply(&space.carrier, x))
            .collect::<Result<Vec<_>>>()?;
        let selfs = pts
            .iter()
            .map(|&x| space.p(x, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            space,
            kind,
            pts,
            images,
            selfs,
        })
    }

    /// `(lhs, rhs)` for sample indices `i <= j`.
    fn pair(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        let pxy = if i == j {
            self.selfs[i]
        } else {
            self.space.p(self.pts[i], self.pts[j])?
        };
        let lhs = self.space.p(self.images[i], self.images[j])?;
        let (pxx, pyy) = (self.selfs[i], self.selfs[j]);
        let c = self.kind.control_term(pxy)?;
        let plain = c;
        let mean = c.max((pxx + pyy) / 2.0);
        let max = c.max(pxx).max(pyy);
        // the plain condition implies the mean one, which implies the max one
        assert!(
            plain <= mean && mean <= max,
            "rhs ordering broken at p = {pxy}"
        );
        let rhs = match self.kind {
            ConditionKind::SelfDistanceMax(_) | ConditionKind::LinearSelfDistanceMax { .. } => max,
            ConditionKind::SelfDistanceMean(_) => mean,
            ConditionKind::Plain(_) => plain,
        };
        Ok((lhs, rhs))
    }

    fn scan(&self, mut visit: impl FnMut(usize, usize, f64, f64)) -> Result<()> {
        for i in 0..self.pts.len() {
            for j in i..self.pts.len() {
                let (lhs, rhs) = self.pair(i, j)?;
                visit(i, j, lhs, rhs);
            }
        }
        Ok(())
    }
}

/// Evaluates a single pair, both points in the carrier.
pub fn evaluate_pair(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    kind: &ConditionKind,
    x: f64,
    y: f64,
) -> Result<Witness> {
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    let tx = map.apply(&space.carrier, x)?;
    let ty = map.apply(&space.carrier, y)?;
    let lhs = space.p(tx, ty)?;
    let rhs = kind.rhs(space.p(x, y)?, space.p(x, x)?, space.p(y, y)?)?;
    Ok(Witness::new(vec![x, y], lhs, rhs, kind.tag()))
}

/// Scans every unordered pair of the sample, the diagonal included.
/// `probes` are pairs evaluated and reported whatever their margin.
pub fn check_contraction(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    kind: &ConditionKind,
    sample: &SampleSet,
    tol: &Tolerances,
    probes: &[(f64, f64)],
) -> Result<CheckReport> {
    let prepared = Prepared::new(space, map, kind, sample)?;
    let mut collector = WitnessCollector::new(*tol);
    let pts = &prepared.pts;
    prepared.scan(|i, j, lhs, rhs| collector.observe(&[pts[i], pts[j]], lhs, rhs, kind.tag()))?;
    for &(x, y) in probes {
        collector.probe(evaluate_pair(space, map, kind, x, y)?);
    }
    Ok(collector.finish(format!("contraction:{}", kind.tag()), sample.len()))
}

/// Pair-by-pair comparison of `thm1(α)` against `eq3` with `φ(t) = αt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearEquivalence {
    pub alpha: f64,
    pub equivalent: bool,
    pub max_margin_diff: f64,
    pub linear_report: CheckReport,
    pub control_report: CheckReport,
}

pub const EQUIVALENCE_TOL: f64 = 1e-15;

pub fn linear_control_equivalence(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    alpha: f64,
    sample: &SampleSet,
    tol: &Tolerances,
) -> Result<LinearEquivalence> {
    if sample.is_empty() {
        return Err(Error::Input(
            "equivalence check needs a nonempty sample".into(),
        ));
    }
    let linear = ConditionKind::linear(alpha)?;
    let control = ConditionKind::SelfDistanceMax(ComparisonFunction::linear(alpha)?);

    let margins = |kind: &ConditionKind| -> Result<Vec<f64>> {
        let prepared = Prepared::new(space, map, kind, sample)?;
        let mut out = Vec::new();
        prepared.scan(|_, _, lhs, rhs| out.push(lhs - rhs))?;
        Ok(out)
    };
    let a = margins(&linear)?;
    let b = margins(&control)?;
    let max_margin_diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);

    let linear_report = check_contraction(space, map, &linear, sample, tol, &[])?;
    let control_report = check_contraction(space, map, &control, sample, tol, &[])?;
    Ok(LinearEquivalence {
        alpha,
        equivalent: linear_report.pass == control_report.pass
            && a.len() == b.len()
            && max_margin_diff <= EQUIVALENCE_TOL,
        max_margin_diff,
        linear_report,
        control_report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FalsifyStatus {
    Found,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsifyOutcome {
    pub status: FalsifyStatus,
    pub witness: Option<Witness>,
    pub budget: u64,
    pub seed: u64,
    pub positive_draws: u64,
}

/// Random pair generator over a carrier: intervals weighted by length, with a
/// small share of draws from endpoints and isolated points.
struct CarrierSampler {
    intervals: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
    atoms: Vec<f64>,
}

impl CarrierSampler {
    fn new(space: &PartialMetricSpace) -> Self {
        let intervals: Vec<[f64; 2]> = space
            .carrier
            .intervals()
            .iter()
            .copied()
            .filter(|iv| iv[1] > iv[0])
            .collect();
        let mut acc = 0.0;
        let cumulative = intervals
            .iter()
            .map(|iv| {
                acc += iv[1] - iv[0];
                acc
            })
            .collect();
        let mut atoms: Vec<f64> = space
            .carrier
            .intervals()
            .iter()
            .flat_map(|iv| [iv[0], iv[1]])
            .chain(space.carrier.extra_points().iter().copied())
            .collect();
        atoms.dedup();
        CarrierSampler {
            intervals,
            cumulative,
            atoms,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let total = self.cumulative.last().copied().unwrap_or(0.0);
        if total == 0.0 || rng.gen::<f64>() < ATOM_SHARE {
            return self.atoms[rng.gen_range(0..self.atoms.len())];
        }
        let u = rng.gen::<f64>() * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.intervals.len() - 1);
        let [lo, hi] = self.intervals[k];
        (lo + rng.gen::<f64>() * (hi - lo)).min(hi)
    }
}

fn better(candidate: &Witness, best: &Option<Witness>) -> bool {
    match best {
        None => true,
        Some(b) => candidate.canonical_cmp(b).is_lt(),
    }
}

/// Seeded random search for a pair violating `kind`, with local refinement
/// of every positive-margin find. Never reports a margin at or below
/// `eps_num`.
pub fn falsify(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    kind: &ConditionKind,
    budget: u64,
    seed: u64,
    tol: &Tolerances,
) -> Result<FalsifyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = CarrierSampler::new(space);
    let span = (space.carrier.greatest_point() - space.carrier.least_point()).max(1.0);
    let mut best: Option<Witness> = None;
    let mut positive_draws = 0;

    for _ in 0..budget {
        let x = sampler.draw(&mut rng);
        let y = sampler.draw(&mut rng);
        let w = evaluate_pair(space, map, kind, x, y)?;
        if w.margin <= 0.0 {
            continue;
        }
        positive_draws += 1;
        let refined = refine(space, map, kind, w, span / 64.0)?;
        if refined.margin > tol.eps_num && better(&refined, &best) {
            best = Some(refined);
        }
    }
    Ok(FalsifyOutcome {
        status: if best.is_some() {
            FalsifyStatus::Found
        } else {
            FalsifyStatus::Exhausted
        },
        witness: best,
        budget,
        seed,
        positive_draws,
    })
}

/// Coordinate pattern search: try the eight neighbours at step `h`, move to
/// the best improvement, halve `h`.
fn refine(
    space: &PartialMetricSpace,
    map: &PiecewiseMap,
    kind: &ConditionKind,
    start: Witness,
    mut h: f64,
) -> Result<Witness> {
    let mut best = start;
    for _ in 0..REFINE_ROUNDS {
        let (x, y) = (best.points[0], best.points[1]);
        let mut round_best: Option<Witness> = None;
        for dx in [-h, 0.0, h] {
            for dy in [-h, 0.0, h] {
                if dx == 0.0 && dy == 0.0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if !space.carrier.contains(nx) || !space.carrier.contains(ny) {
                    continue;
                }
                let w = evaluate_pair(space, map, kind, nx, ny)?;
                if better(&w, &round_best) {
                    round_best = Some(w);
                }
            }
        }
        if let Some(w) = round_best {
            if w.margin > best.margin {
                best = w;
            }
        }
        h /= 2.0;
    }
    Ok(best)
}
