//! Control functions φ, the companion `f(t) = t - φ(t)`, its numeric inverse
//! and the finite-grid checks of the standard comparison-function properties.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::expr::Expression;
use crate::{Error, Result};

/// Upper cap on the bracket search in [`ComparisonFunction::f_inverse`].
pub const DEFAULT_T_MAX: f64 = 1e12;
/// Largest `f⁻¹(2⁻⁴⁰)` accepted as evidence of right-continuity at 0.
pub const INVERSE_AT_ZERO_BOUND: f64 = 1e-4;
/// Threshold below which an iterate counts as vanished.
pub const DECAY_THRESHOLD: f64 = 1e-5;
/// Iteration budget for the decay probe.
pub const DECAY_MAX_STEPS: u64 = 1_000_000;
/// Starting values probed for iterate decay.
pub const DECAY_STARTS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
/// Largest right-limit gap `|φ(t + 2⁻⁴⁰) - φ(t)|` read as continuous.
pub const RIGHT_LIMIT_BOUND: f64 = 1e-4;

const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum PhiFamily {
    /// φ(t) = αt with α in (0, 1).
    Linear {
        alpha: f64,
    },
    /// φ(t) = t / (1 + t).
    Rational,
    Custom(Expression),
}

impl fmt::Display for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiFamily::Linear { alpha } => write!(f, "linear({alpha})"),
            PhiFamily::Rational => f.write_str("rational"),
            PhiFamily::Custom(e) => write!(f, "custom({e})"),
        }
    }
}

impl Serialize for PhiFamily {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonFunction {
    family: PhiFamily,
    grid: Vec<f64>,
}

/// `0` followed by 96 log-spaced points in `[1e-6, 1e3]`.
pub fn default_grid() -> Vec<f64> {
    let n = 96;
    let (a, b) = (1e-6f64.log10(), 3.0);
    std::iter::once(0.0)
        .chain((0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)))
        .collect()
}

impl ComparisonFunction {
    pub fn new(family: PhiFamily) -> Result<Self> {
        if let PhiFamily::Linear { alpha } = family {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Input(format!(
                    "linear alpha must lie in (0, 1), got {alpha}"
                )));
            }
        }
        Ok(ComparisonFunction {
            family,
            grid: default_grid(),
        })
    }

    pub fn linear(alpha: f64) -> Result<Self> {
        Self::new(PhiFamily::Linear { alpha })
    }

    /// `αt` for any α in [0, 1), bypassing the open-interval check. Used
    /// for the linear contraction kind, which admits α = 0.
    pub(crate) fn linear_unchecked(alpha: f64) -> Self {
        ComparisonFunction {
            family: PhiFamily::Linear { alpha },
            grid: default_grid(),
        }
    }

    pub fn rational() -> Self {
        Self::new(PhiFamily::Rational).expect("rational family has no parameters")
    }

    /// φ given as an expression in `t`.
    pub fn custom(source: &str) -> Result<Self> {
        Self::new(PhiFamily::Custom(Expression::parse(source, &["t"])?))
    }

    pub fn with_grid(mut self, mut grid: Vec<f64>) -> Result<Self> {
        if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Input(
                "phi grid must hold finite nonnegative reals".into(),
            ));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        self.grid = grid;
        Ok(self)
    }

    pub fn family(&self) -> &PhiFamily {
        &self.family
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        let value = match &self.family {
            PhiFamily::Linear { alpha } => alpha * t,
            PhiFamily::Rational => t / (1.0 + t),
            PhiFamily::Custom(e) => e
                .eval(&[t])
                .map_err(|source| Error::PhiEval { t, source })?,
        };
        if !value.is_finite() || value < 0.0 {
            return Err(Error::PhiInvalid { t, value });
        }
        Ok(value)
    }

    /// `f(t) = t - φ(t)`.
    pub fn f(&self, t: f64) -> Result<f64> {
        Ok(t - self.phi(t)?)
    }

    /// φⁿ(t) by literal n-fold composition.
    pub fn phi_iterate(&self, t: f64, n: u64) -> Result<f64> {
        let mut v = t;
        for _ in 0..n {
            v = self.phi(v)?;
        }
        Ok(v)
    }

    /// `[t, φ(t), …, φⁿ(t)]`.
    pub fn phi_iterates(&self, t: f64, n: u64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n as usize + 1);
        let mut v = t;
        out.push(v);
        for _ in 0..n {
            v = self.phi(v)?;
            out.push(v);
        }
        Ok(out)
    }

    /// Solves `f(t) = s`. Builtin families use their closed forms; custom φ
    /// goes through [`Self::f_inverse_numeric`].
    pub fn f_inverse(&self, s: f64, tol: f64, t_max: f64) -> Result<f64> {
        check_target(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            PhiFamily::Linear { alpha } => Ok(s / (1.0 - alpha)),
            // t²/(1+t) = s  ⇔  t² - st - s = 0
            PhiFamily::Rational => Ok((s + (s * s + 4.0 * s).sqrt()) / 2.0),
            PhiFamily::Custom(_) => self.f_inverse_numeric(s, tol, t_max),
        }
    }

    /// Bracket `[s, hi]` with `hi` doubled from `max(s, 1)` until `f(hi) >= s`,
    /// then bisect. Since `f(t) <= t` the answer is never below `s`.
    pub fn f_inverse_numeric(&self, s: f64, tol: f64, t_max: f64) -> Result<f64> {
        check_target(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        let mut lo = s;
        let mut f_lo = self.f(lo)?;
        if (f_lo - s).abs() <= tol {
            return Ok(lo);
        }
        if f_lo > s {
            return Err(Error::InvalidHypothesis(format!(
                "f({s}) = {f_lo} exceeds {s}, so phi({s}) < 0"
            )));
        }
        let mut hi = s.max(1.0);
        let mut f_hi = self.f(hi)?;
        while f_hi < s {
            if f_hi > f_lo {
                lo = hi;
                f_lo = f_hi;
            }
            hi *= 2.0;
            if hi > t_max {
                return Err(Error::Range { s, t_max });
            }
            f_hi = self.f(hi)?;
        }
        if (f_hi - s).abs() <= tol {
            return Ok(hi);
        }
        for _ in 0..BISECTION_MAX_ITER {
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = self.f(mid)?;
            if (f_mid - s).abs() <= tol {
                return Ok(mid);
            }
            if f_mid < f_lo || f_mid > f_hi {
                return Err(Error::InvalidHypothesis(format!(
                    "f is not monotone on [{lo}, {hi}]: f({mid}) = {f_mid}"
                )));
            }
            if f_mid < s {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
        }
        Err(Error::InvalidHypothesis(format!(
            "f jumps over {s} near t = {lo} (f = {f_lo} .. {f_hi})"
        )))
    }

    /// Grid evidence for the hypotheses on φ and the six comparison-function
    /// properties.
    pub fn check_hypotheses(&self, eps_num: f64) -> Result<HypothesisReport> {
        let grid = &self.grid;
        let phis: Vec<f64> = grid.iter().map(|&t| self.phi(t)).collect::<Result<_>>()?;
        let fs: Vec<f64> = grid.iter().zip(&phis).map(|(t, p)| t - p).collect();

        let phi_increasing = MonotoneEvidence::scan(grid, &phis, eps_num);
        let f_increasing = MonotoneEvidence::scan(grid, &fs, eps_num);
        let f_inverse_rc_at_0 = self.inverse_at_zero(eps_num);
        let phi_iterates_vanish = self.iterate_decay()?;

        let phi_zero = self.phi(0.0)?;
        let below_identity = grid
            .iter()
            .zip(&phis)
            .filter(|(t, _)| **t > 0.0)
            .all(|(t, p)| p < t);
        let mut usc = true;
        let mut rc = true;
        for &t in grid {
            let gap = self.phi(t + 2f64.powi(-40))? - self.phi(t)?;
            usc &= gap <= RIGHT_LIMIT_BOUND;
            rc &= gap.abs() <= RIGHT_LIMIT_BOUND;
        }

        let properties = PropertyFlags {
            i: phi_increasing.holds,
            ii: below_identity,
            iii: phi_zero.abs() <= eps_num,
            iv: usc,
            v: rc,
            vi: phi_iterates_vanish.holds,
        };
        Ok(HypothesisReport {
            family: self.family.clone(),
            grid_size: grid.len(),
            phi_increasing,
            f_increasing,
            f_inverse_rc_at_0,
            phi_iterates_vanish,
            properties,
        })
    }

    fn inverse_at_zero(&self, eps_num: f64) -> InverseAtZeroEvidence {
        let mut probes: Vec<[f64; 2]> = Vec::with_capacity(40);
        let mut holds = true;
        let mut failure = None;
        for k in 1..=40 {
            let s = 2f64.powi(-k);
            match self.f_inverse(s, s * 1e-9, DEFAULT_T_MAX) {
                Ok(t) => {
                    if let Some(&[_, prev]) = probes.last() {
                        if t > prev + eps_num {
                            holds = false;
                            failure.get_or_insert_with(|| {
                                format!("f^-1 increases from {prev} to {t} as s drops to {s}")
                            });
                        }
                    }
                    probes.push([s, t]);
                }
                Err(e) => {
                    holds = false;
                    failure = Some(format!("f^-1({s}) failed: {e}"));
                    break;
                }
            }
        }
        let final_value = probes.last().map(|p| p[1]);
        if probes.len() == 40 {
            let last = final_value.unwrap_or(f64::INFINITY);
            if last > INVERSE_AT_ZERO_BOUND {
                holds = false;
                failure.get_or_insert_with(|| {
                    format!("f^-1(2^-40) = {last} exceeds {INVERSE_AT_ZERO_BOUND}")
                });
            }
        }
        InverseAtZeroEvidence {
            holds,
            final_value,
            failure,
            probes,
        }
    }

    fn iterate_decay(&self) -> Result<DecayEvidence> {
        let mut traces = Vec::with_capacity(DECAY_STARTS.len());
        for &t in &DECAY_STARTS {
            let mut v = t;
            let mut steps = 0u64;
            let mut diverged = false;
            while v >= DECAY_THRESHOLD && steps < DECAY_MAX_STEPS {
                match self.phi(v) {
                    Ok(next) => v = next,
                    // overflow of an exploding orbit
                    Err(Error::PhiEval { .. } | Error::PhiInvalid { .. }) if v > 1.0 => {
                        diverged = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
                steps += 1;
            }
            traces.push(DecayTrace {
                t,
                steps,
                value: v,
                vanished: !diverged && v < DECAY_THRESHOLD,
                diverged,
            });
        }
        Ok(DecayEvidence {
            holds: traces.iter().all(|d| d.vanished),
            traces,
        })
    }
}

fn check_target(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Input(format!("f^-1 needs a finite s >= 0, got {s}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneEvidence {
    pub holds: bool,
    /// Adjacent grid pair with the largest decrease.
    pub worst_pair: Option<[f64; 2]>,
    pub worst_drop: f64,
}

impl MonotoneEvidence {
    fn scan(grid: &[f64], values: &[f64], eps_num: f64) -> Self {
        let mut worst_pair = None;
        let mut worst_drop = 0.0;
        for i in 1..grid.len() {
            let drop = values[i - 1] - values[i];
            if drop > worst_drop {
                worst_drop = drop;
                worst_pair = Some([grid[i - 1], grid[i]]);
            }
        }
        MonotoneEvidence {
            holds: worst_drop <= eps_num,
            worst_pair,
            worst_drop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseAtZeroEvidence {
    pub holds: bool,
    pub final_value: Option<f64>,
    pub failure: Option<String>,
    /// `(s_k, f⁻¹(s_k))` for `s_k = 2⁻ᵏ`.
    pub probes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrace {
    pub t: f64,
    pub steps: u64,
    pub value: f64,
    pub vanished: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEvidence {
    pub holds: bool,
    pub traces: Vec<DecayTrace>,
}

/// Properties (i)–(vi): monotone, φ(t) < t, φ(0) = 0, right upper
/// semicontinuous, right continuous, φⁿ(t) → 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PropertyFlags {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub iv: bool,
    pub v: bool,
    pub vi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub family: PhiFamily,
    pub grid_size: usize,
    pub phi_increasing: MonotoneEvidence,
    pub f_increasing: MonotoneEvidence,
    pub f_inverse_rc_at_0: InverseAtZeroEvidence,
    pub phi_iterates_vanish: DecayEvidence,
    pub properties: PropertyFlags,
}

impl HypothesisReport {
    /// All four hypotheses on φ required by the φ-contraction theorems.
    pub fn all_hold(&self) -> bool {
        self.phi_increasing.holds
            && self.f_increasing.holds
            && self.f_inverse_rc_at_0.holds
            && self.phi_iterates_vanish.holds
    }
}

/// One of the five implications between the comparison-function properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Implication {
    pub id: u8,
    pub statement: &'static str,
}

pub const IMPLICATIONS: [Implication; 5] = [
    Implication {
        id: 1,
        statement: "(i) and (ii) imply (iii)",
    },
    Implication {
        id: 2,
        statement: "(ii) and (v) imply (iii)",
    },
    Implication {
        id: 3,
        statement: "(i) and (vi) imply (ii)",
    },
    Implication {
        id: 4,
        statement: "(i) and (iv) imply (vi)",
    },
    Implication {
        id: 5,
        statement: "(i) implies ((iv) iff (v))",
    },
];

/// Implications whose premises are flagged true but whose conclusion is not.
pub fn crosscheck_implications(flags: &PropertyFlags) -> Vec<Implication> {
    let f = flags;
    let holds = [
        !(f.i && f.ii) || f.iii,
        !(f.ii && f.v) || f.iii,
        !(f.i && f.vi) || f.ii,
        !(f.i && f.iv) || f.vi,
        !f.i || (f.iv == f.v),
    ];
    IMPLICATIONS
        .iter()
        .zip(holds)
        .filter(|(_, ok)| !ok)
        .map(|(imp, _)| *imp)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 97);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-6).abs() < 1e-18);
        assert!((g[96] - 1e3).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn f_inverse_examples() {
        let lin = ComparisonFunction::linear(0.5).unwrap();
        assert_eq!(lin.f_inverse(1.0, 1e-12, DEFAULT_T_MAX).unwrap(), 2.0);
        let rat = ComparisonFunction::rational();
        let t = rat.f_inverse(3.0, 1e-12, DEFAULT_T_MAX).unwrap();
        assert!((t - 3.791287847).abs() < 1e-9);
        assert!((rat.f(t).unwrap() - 3.0).abs() < 1e-12);
        for cf in [&lin, &rat] {
            assert_eq!(cf.f_inverse(0.0, 1e-12, DEFAULT_T_MAX).unwrap(), 0.0);
            assert_eq!(
                cf.f_inverse_numeric(0.0, 1e-12, DEFAULT_T_MAX).unwrap(),
                0.0
            );
        }
        assert!(matches!(
            rat.f_inverse(-1.0, 1e-9, DEFAULT_T_MAX),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn f_inverse_bounded_f_is_range_error() {
        // f(t) = min(t, 1) never reaches 2
        let cf = ComparisonFunction::custom("t - min(t, 1)").unwrap();
        let err = cf.f_inverse(2.0, 1e-9, 1e6).unwrap_err();
        assert!(matches!(err, Error::Range { .. }), "{err}");
    }

    #[test]
    fn f_inverse_detects_non_monotone_f() {
        // f(t) = 0.4t plus a bump at 6: the bracket is [4, 8] and its
        // midpoint lands on the bump above f(8)
        let cf = ComparisonFunction::custom("0.6*t - 2*max(0, 1 - abs(t - 6))").unwrap();
        let err = cf.f_inverse_numeric(2.0, 1e-12, 1e6).unwrap_err();
        assert!(matches!(err, Error::InvalidHypothesis(_)), "{err}");

        // φ(t) = 2t makes f(t) = -t, which never reaches s
        let cf = ComparisonFunction::custom("2*t").unwrap();
        assert!(matches!(
            cf.f_inverse_numeric(1.0, 1e-9, 1e6),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn phi_iterate_examples() {
        let rat = ComparisonFunction::rational();
        let v = rat.phi_iterate(2.0, 3).unwrap();
        assert!((v - 2.0 / 7.0).abs() < 1e-15);
        let manual = rat.phi(rat.phi(rat.phi(2.0).unwrap()).unwrap()).unwrap();
        assert_eq!(v, manual);
        assert_eq!(rat.phi_iterate(0.0, 50).unwrap(), 0.0);
        assert_eq!(rat.phi_iterate(5.0, 0).unwrap(), 5.0);
        let lin = ComparisonFunction::linear(0.5).unwrap();
        assert_eq!(lin.phi_iterate(8.0, 3).unwrap(), 1.0);
        assert_eq!(rat.phi_iterates(2.0, 3).unwrap().len(), 4);
    }

    #[test]
    fn rejects_out_of_range_alpha() {
        for a in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(ComparisonFunction::linear(a).is_err());
        }
    }

    #[test]
    fn rational_family_passes_everything() {
        let r = ComparisonFunction::rational()
            .check_hypotheses(1e-9)
            .unwrap();
        assert!(r.all_hold(), "{r:#?}");
        let l = r.properties;
        assert!(l.i && l.ii && l.iii && l.iv && l.v && l.vi);
        assert!(crosscheck_implications(&l).is_empty());
        let final_value = r.f_inverse_rc_at_0.final_value.unwrap();
        assert!(final_value < INVERSE_AT_ZERO_BOUND);
    }

    #[test]
    fn linear_families_pass() {
        for k in 1..=9 {
            let cf = ComparisonFunction::linear(k as f64 / 10.0).unwrap();
            let r = cf.check_hypotheses(1e-9).unwrap();
            assert!(r.all_hold(), "alpha = {}", k as f64 / 10.0);
            assert!(crosscheck_implications(&r.properties).is_empty());
        }
    }

    #[test]
    fn doubling_iterates_do_not_vanish() {
        let r = ComparisonFunction::custom("2*t")
            .unwrap()
            .check_hypotheses(1e-9)
            .unwrap();
        assert!(!r.phi_iterates_vanish.holds);
        assert!(r.phi_iterates_vanish.traces.iter().all(|d| d.diverged));
        assert!(!r.f_increasing.holds);
        assert!(!r.f_inverse_rc_at_0.holds);
        assert!(!r.properties.ii);
        // (i) and (iv) hold but (vi) fails: implication 4 as stated
        // needs φ(t) < t as well.
        let violated: Vec<u8> = crosscheck_implications(&r.properties)
            .iter()
            .map(|i| i.id)
            .collect();
        assert_eq!(violated, vec![4]);
    }

    #[test]
    fn decreasing_phi_is_flagged() {
        let cf = ComparisonFunction::custom("1/(1+t)").unwrap();
        let r = cf.check_hypotheses(1e-9).unwrap();
        assert!(!r.phi_increasing.holds);
        assert!(r.phi_increasing.worst_pair.is_some());
        assert!(!r.properties.iii);
    }

    #[test]
    fn crosscheck_on_hand_built_flags() {
        let flags = PropertyFlags {
            i: true,
            vi: true,
            ii: false,
            iii: true,
            iv: true,
            v: true,
        };
        let v = crosscheck_implications(&flags);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].id, 3);
        assert!(crosscheck_implications(&PropertyFlags::default()).is_empty());
    }
}
