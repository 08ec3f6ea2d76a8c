//! Carriers, sample sets, partial metric spaces and verification reports.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::expr::{Expression, PiecewiseMap};
use crate::{Error, Result, DELTA_PT, EPS_NUM, K_MAX};

/// Numeric tolerances shared by every check, echoed into reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Slack for inequality comparisons.
    pub eps_num: f64,
    /// Point-equality threshold.
    pub delta_pt: f64,
    /// Convergence tolerance in the induced metric.
    pub tol: f64,
    /// Maximum p^s spread tolerated between per-start fixed points.
    pub agree_tol: f64,
    pub k_max: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_num: EPS_NUM,
            delta_pt: DELTA_PT,
            tol: 1e-8,
            agree_tol: 1e-6,
            k_max: K_MAX,
        }
    }
}

/// Declared completeness of a space. Documentation only; never computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completeness {
    Complete,
    ZeroComplete,
    #[default]
    Unknown,
}

/// A finite union of closed intervals plus isolated points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarrierSpec {
    intervals: Vec<[f64; 2]>,
    extra_points: Vec<f64>,
    completeness: Completeness,
}

impl CarrierSpec {
    /// Normalises the description: intervals sorted and merged when they
    /// overlap or touch, extra points inside an interval dropped, the rest
    /// sorted and deduplicated.
    pub fn new(
        intervals: impl IntoIterator<Item = (f64, f64)>,
        extra_points: impl IntoIterator<Item = f64>,
        completeness: Completeness,
    ) -> Result<Self> {
        let mut ivs: Vec<[f64; 2]> = Vec::new();
        for (lo, hi) in intervals {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Input(format!("interval [{lo}, {hi}] is not finite")));
            }
            if lo > hi {
                return Err(Error::Input(format!("interval [{lo}, {hi}] has lo > hi")));
            }
            ivs.push([lo, hi]);
        }
        ivs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut merged: Vec<[f64; 2]> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match merged.last_mut() {
                Some(last) if iv[0] <= last[1] => last[1] = last[1].max(iv[1]),
                _ => merged.push(iv),
            }
        }

        let mut extras = Vec::new();
        for x in extra_points {
            if !x.is_finite() {
                return Err(Error::Input(format!("extra point {x} is not finite")));
            }
            if !merged.iter().any(|iv| iv[0] <= x && x <= iv[1]) {
                extras.push(x);
            }
        }
        extras.sort_by(f64::total_cmp);
        extras.dedup_by(|b, a| (*b - *a).abs() <= DELTA_PT);

        if merged.is_empty() && extras.is_empty() {
            return Err(Error::Input("carrier is empty".into()));
        }
        Ok(CarrierSpec {
            intervals: merged,
            extra_points: extras,
            completeness,
        })
    }

    pub fn intervals(&self) -> &[[f64; 2]] {
        &self.intervals
    }

    pub fn extra_points(&self) -> &[f64] {
        &self.extra_points
    }

    pub fn completeness(&self) -> Completeness {
        self.completeness
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv[0] <= x && x <= iv[1])
            || self.extra_points.iter().any(|e| (x - e).abs() <= DELTA_PT)
    }

    pub fn least_point(&self) -> f64 {
        let a = self.intervals.first().map_or(f64::INFINITY, |iv| iv[0]);
        let b = self.extra_points.first().copied().unwrap_or(f64::INFINITY);
        a.min(b)
    }

    /// Largest point of the carrier.
    pub fn greatest_point(&self) -> f64 {
        let a = self.intervals.last().map_or(f64::NEG_INFINITY, |iv| iv[1]);
        let b = self
            .extra_points
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY);
        a.max(b)
    }
}

/// Where a sample point came from. Ordered by precedence when two sources
/// produce the same point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Endpoint,
    Extra,
    Grid,
    Orbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleOptions {
    pub grid_step: f64,
    /// Depth of the orbit closure `T, T², …` when a map is supplied.
    pub orbit_depth: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            grid_step: 1.0 / 16.0,
            orbit_depth: 64,
        }
    }
}

/// A finite, ascending, deduplicated set of carrier points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl SampleSet {
    /// Grid points, interval endpoints and extra points, plus the orbit
    /// closure under `map` when one is given. An orbit that leaves the carrier
    /// is cut at the last valid point; the checks that use the map report the
    /// failure themselves.
    pub fn build(
        carrier: &CarrierSpec,
        opts: &SampleOptions,
        map: Option<&PiecewiseMap>,
    ) -> Result<SampleSet> {
        if !(opts.grid_step > 0.0) || !opts.grid_step.is_finite() {
            return Err(Error::Input(format!(
                "grid step must be positive, got {}",
                opts.grid_step
            )));
        }
        let mut raw = Vec::new();
        for &[lo, hi] in carrier.intervals() {
            raw.push((lo, Provenance::Endpoint));
            raw.push((hi, Provenance::Endpoint));
            let mut k = 1u64;
            loop {
                let x = lo + k as f64 * opts.grid_step;
                if x >= hi {
                    break;
                }
                raw.push((x, Provenance::Grid));
                k += 1;
            }
        }
        raw.extend(
            carrier
                .extra_points()
                .iter()
                .map(|&x| (x, Provenance::Extra)),
        );

        if let Some(map) = map {
            let bases: Vec<f64> = raw.iter().map(|&(x, _)| x).collect();
            for x0 in bases {
                let mut x = x0;
                for _ in 0..opts.orbit_depth {
                    match map.apply(carrier, x) {
                        Ok(next) => {
                            if (next - x).abs() <= DELTA_PT {
                                break;
                            }
                            raw.push((next, Provenance::Orbit));
                            x = next;
                        }
                        Err(_) => break,
                    }
                }
            }
        }
        Ok(Self::normalize(raw))
    }

    /// A sample made of caller-chosen points (e.g. solver starts).
    pub fn from_points(
        carrier: &CarrierSpec,
        points: impl IntoIterator<Item = f64>,
    ) -> Result<SampleSet> {
        let mut raw = Vec::new();
        for x in points {
            if !carrier.contains(x) {
                return Err(Error::Domain { point: x });
            }
            raw.push((x, Provenance::Extra));
        }
        Ok(Self::normalize(raw))
    }

    fn normalize(mut raw: Vec<(f64, Provenance)>) -> SampleSet {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut points: Vec<f64> = Vec::with_capacity(raw.len());
        let mut provenance: Vec<Provenance> = Vec::with_capacity(raw.len());
        for (x, tag) in raw {
            match points.last() {
                Some(&last) if (x - last).abs() <= DELTA_PT => {
                    let slot = provenance.last_mut().expect("parallel vectors");
                    *slot = (*slot).min(tag);
                }
                _ => {
                    points.push(x);
                    provenance.push(tag);
                }
            }
        }
        SampleSet { points, provenance }
    }

    /// Keeps at most `cap` points, evenly spaced by index, always including
    /// the first and last.
    pub fn thin(&self, cap: usize) -> SampleSet {
        let n = self.points.len();
        if n <= cap || cap == 0 {
            return self.clone();
        }
        if cap == 1 {
            return SampleSet {
                points: vec![self.points[0]],
                provenance: vec![self.provenance[0]],
            };
        }
        let mut idx: Vec<usize> = (0..cap)
            .map(|i| ((i as f64) * (n - 1) as f64 / (cap - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        SampleSet {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    /// Union with another sample over the same carrier.
    pub fn union(&self, other: &SampleSet) -> SampleSet {
        let raw = self
            .iter()
            .chain(other.iter())
            .collect::<Vec<(f64, Provenance)>>();
        Self::normalize(raw)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Provenance)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.provenance.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How the distance is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Distance {
    /// `p(x, y) = max{x, y}`.
    Max,
    Expr(Expression),
}

impl Distance {
    pub fn parse(source: &str) -> Result<Distance> {
        if source.trim() == "max" {
            Ok(Distance::Max)
        } else {
            Ok(Distance::Expr(Expression::parse(source, &["x", "y"])?))
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Max => f.write_str("max"),
            Distance::Expr(e) => write!(f, "{e}"),
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// ρ_p together with the sampled part of X_p.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub rho: f64,
    /// `"least-carrier-point"` for the exact fast path, otherwise
    /// `"sampled-infimum"`.
    pub method: &'static str,
    pub xp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialMetricSpace {
    pub name: String,
    pub carrier: CarrierSpec,
    pub distance: Distance,
}

impl PartialMetricSpace {
    pub fn new(name: impl Into<String>, carrier: CarrierSpec, distance: Distance) -> Self {
        PartialMetricSpace {
            name: name.into(),
            carrier,
            distance,
        }
    }

    /// `p(x, y)`, checked to be a finite nonnegative real.
    pub fn p(&self, x: f64, y: f64) -> Result<f64> {
        for pt in [x, y] {
            if !self.carrier.contains(pt) {
                return Err(Error::Domain { point: pt });
            }
        }
        let value = match &self.distance {
            Distance::Max => x.max(y),
            Distance::Expr(e) => {
                e.eval(&[x, y])
                    .map_err(|source| Error::MetricEval { x, y, source })?
            }
        };
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidMetric { x, y, value });
        }
        Ok(value)
    }

    /// The induced metric `p^s(x, y) = 2p(x, y) - p(x, x) - p(y, y)`.
    pub fn induced_ps(&self, x: f64, y: f64) -> Result<f64> {
        let pxy = self.p(x, y)?;
        let pxx = self.p(x, x)?;
        let pyy = self.p(y, y)?;
        Ok(ps_from_parts(pxy, pxx, pyy))
    }

    /// Membership in the open ball `B_p(center, eps)`; strict, no tolerance.
    pub fn ball_contains(&self, center: f64, eps: f64, y: f64) -> Result<bool> {
        if !(eps > 0.0) {
            return Err(Error::Input(format!(
                "ball radius must be positive, got {eps}"
            )));
        }
        Ok(self.p(center, y)? < self.p(center, center)? + eps)
    }

    /// ρ_p = inf p(x, y) and the sampled points whose self-distance attains
    /// it within `eps_num`.
    pub fn rho_and_xp(&self, sample: &SampleSet, eps_num: f64) -> Result<RhoEstimate> {
        if sample.is_empty() {
            return Err(Error::Input("rho_p needs a nonempty sample".into()));
        }
        let selfs: Vec<f64> = sample
            .points()
            .iter()
            .map(|&x| self.p(x, x))
            .collect::<Result<_>>()?;

        let least = self.carrier.least_point();
        let (rho, method) = if matches!(self.distance, Distance::Max) && least >= 0.0 {
            (least, "least-carrier-point")
        } else {
            // P3 puts the infimum on the diagonal, but the scan does not
            // assume the axioms hold.
            let pts = sample.points();
            let mut rho = f64::INFINITY;
            for (i, &x) in pts.iter().enumerate() {
                rho = rho.min(selfs[i]);
                for &y in &pts[i + 1..] {
                    rho = rho.min(self.p(x, y)?);
                }
            }
            (rho, "sampled-infimum")
        };
        let xp = sample
            .points()
            .iter()
            .zip(&selfs)
            .filter(|(_, &s)| s <= rho + eps_num)
            .map(|(&x, _)| x)
            .collect();
        Ok(RhoEstimate { rho, method, xp })
    }
}

/// `p^s` from the three partial distances. Written as a sum of two
/// nonnegative differences so it is symmetric in floating point and exact
/// for the `max` distance.
pub fn ps_from_parts(pxy: f64, pxx: f64, pyy: f64) -> f64 {
    (pxy - pxx) + (pxy - pyy)
}

/// A concrete instance of a checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub points: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; a violation when above `eps_num`.
    pub margin: f64,
    pub label: String,
}

impl Witness {
    pub fn new(points: Vec<f64>, lhs: f64, rhs: f64, label: impl Into<String>) -> Self {
        Witness {
            points,
            lhs,
            rhs,
            margin: lhs - rhs,
            label: label.into(),
        }
    }

    /// Canonical report order: margin descending, then points ascending.
    pub fn canonical_cmp(&self, other: &Witness) -> Ordering {
        other
            .margin
            .total_cmp(&self.margin)
            .then_with(|| {
                for (a, b) in self.points.iter().zip(&other.points) {
                    match a.total_cmp(b) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                self.points.len().cmp(&other.points.len())
            })
            .then_with(|| self.label.cmp(&other.label))
    }
}

fn serialize_margin<S: Serializer>(m: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_none(),
    }
}

/// Outcome of a verification scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_id: String,
    pub pass: bool,
    /// Largest margin seen; `None` when nothing was scanned.
    #[serde(serialize_with = "serialize_margin")]
    pub worst_margin: Option<f64>,
    pub witnesses: Vec<Witness>,
    pub pairs_scanned: u64,
    pub sample_points: usize,
    /// Named points evaluated regardless of outcome.
    pub probes: Vec<Witness>,
    pub options_echo: Tolerances,
}

impl CheckReport {
    pub fn violations(&self) -> impl Iterator<Item = &Witness> {
        let eps = self.options_echo.eps_num;
        self.witnesses.iter().filter(move |w| w.margin > eps)
    }
}

/// Streams margins into a bounded, canonically ordered witness list.
#[derive(Debug, Clone)]
pub struct WitnessCollector {
    tolerances: Tolerances,
    worst: Option<f64>,
    scanned: u64,
    kept: Vec<Witness>,
    probes: Vec<Witness>,
}

impl WitnessCollector {
    pub fn new(tolerances: Tolerances) -> Self {
        WitnessCollector {
            tolerances,
            worst: None,
            scanned: 0,
            kept: Vec::new(),
            probes: Vec::new(),
        }
    }

    pub fn observe(&mut self, points: &[f64], lhs: f64, rhs: f64, label: &str) {
        let margin = lhs - rhs;
        self.scanned += 1;
        self.worst = Some(self.worst.map_or(margin, |w| w.max(margin)));
        if margin > self.tolerances.eps_num {
            self.kept
                .push(Witness::new(points.to_vec(), lhs, rhs, label));
            if self.kept.len() >= 8 * self.tolerances.k_max.max(1) {
                self.compact();
            }
        }
    }

    pub fn probe(&mut self, witness: Witness) {
        self.probes.push(witness);
    }

    fn compact(&mut self) {
        self.kept.sort_by(Witness::canonical_cmp);
        self.kept.truncate(self.tolerances.k_max);
    }

    pub fn finish(mut self, check_id: impl Into<String>, sample_points: usize) -> CheckReport {
        self.compact();
        let pass = self.worst.is_none_or(|w| w <= self.tolerances.eps_num);
        CheckReport {
            check_id: check_id.into(),
            pass,
            worst_margin: self.worst,
            witnesses: self.kept,
            pairs_scanned: self.scanned,
            sample_points,
            probes: self.probes,
            options_echo: self.tolerances,
        }
    }
}
