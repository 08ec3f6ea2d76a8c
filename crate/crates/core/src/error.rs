use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point} is outside the carrier")]
    Domain { point: f64 },

    #[error("distance p({x}, {y}) = {value} is not a finite nonnegative real")]
    InvalidMetric { x: f64, y: f64, value: f64 },

    #[error("distance p({x}, {y}) failed to evaluate: {source}")]
    MetricEval { x: f64, y: f64, source: EvalError },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("map `{map}` has no piece whose guard contains {x}")]
    NoMatchingPiece { map: String, x: f64 },

    #[error("map `{map}` failed at x = {x}: {source}")]
    MapEval {
        map: String,
        x: f64,
        source: EvalError,
    },

    #[error("map `{map}` is not a self-map: T({x}) = {image} lies outside the carrier")]
    NotSelfMap { map: String, x: f64, image: f64 },

    #[error("phi failed at t = {t}: {source}")]
    PhiEval { t: f64, source: EvalError },

    #[error("phi({t}) = {value} is not a finite nonnegative real")]
    PhiInvalid { t: f64, value: f64 },

    #[error("f(t) = t - phi(t) stays below {s} for every t <= {t_max}")]
    Range { s: f64, t_max: f64 },

    #[error("hypothesis violated: {0}")]
    InvalidHypothesis(String),
}
