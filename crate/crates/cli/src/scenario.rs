//! Scenario files: the JSON input format and its validation.

use std::path::Path;

use pmfix::{
    CarrierSpec, ComparisonFunction, Completeness, ConditionKind, Distance, PartialMetricSpace,
    PhiFamily, PiecewiseMap, SampleOptions, SampleSet, Tolerances,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

const BUILTINS: [(&str, &str); 5] = [
    ("example1", include_str!("../scenarios/example1.json")),
    (
        "example2-paper",
        include_str!("../scenarios/example2-paper.json"),
    ),
    (
        "example2-repaired",
        include_str!("../scenarios/example2-repaired.json"),
    ),
    (
        "shifted-thm1",
        include_str!("../scenarios/shifted-thm1.json"),
    ),
    (
        "usual-metric-example2",
        include_str!("../scenarios/usual-metric-example2.json"),
    ),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(name, _)| *name)
}

/// Raw file contents, before any expression is parsed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub carrier: CarrierFile,
    #[serde(default)]
    pub completeness: Completeness,
    pub partial_metric: String,
    pub map: Vec<PieceFile>,
    pub phi: PhiFile,
    pub condition: ConditionFile,
    #[serde(default)]
    pub sampling: SamplingFile,
    #[serde(default)]
    pub tolerances: TolerancesFile,
    #[serde(default)]
    pub probes: Vec<[f64; 2]>,
    #[serde(default)]
    pub starts: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierFile {
    pub intervals: Vec<[f64; 2]>,
    #[serde(default)]
    pub extra_points: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceFile {
    pub when: [f64; 2],
    pub expr: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiFile {
    Linear { alpha: f64 },
    Rational,
    Custom { expr: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionFile {
    pub kind: String,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingFile {
    pub grid_step: f64,
    pub orbit_depth: usize,
}

impl Default for SamplingFile {
    fn default() -> Self {
        let d = SampleOptions::default();
        SamplingFile {
            grid_step: d.grid_step,
            orbit_depth: d.orbit_depth,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancesFile {
    pub eps_num: f64,
    pub tol: f64,
    pub agree_tol: f64,
}

impl Default for TolerancesFile {
    fn default() -> Self {
        let d = Tolerances::default();
        TolerancesFile {
            eps_num: d.eps_num,
            tol: d.tol,
            agree_tol: d.agree_tol,
        }
    }
}

/// The condition as named in the scenario, resolved against φ on demand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub space: PartialMetricSpace,
    pub map: PiecewiseMap,
    pub phi: ComparisonFunction,
    pub condition: ConditionSpec,
    pub sampling: SampleOptions,
    pub tolerances: Tolerances,
    pub probes: Vec<(f64, f64)>,
    pub starts: Vec<f64>,
}

impl Scenario {
    /// `phi` combined with the named condition. For `thm1` the alpha comes
    /// from the condition; for the others it is ignored.
    pub fn condition_kind(&self, spec: &ConditionSpec) -> Result<ConditionKind, CliError> {
        Ok(ConditionKind::from_tag(&spec.kind, &self.phi, spec.alpha)?)
    }

    /// The scenario's starts, or the carrier's endpoints and isolated points
    /// when none are listed.
    pub fn start_set(&self) -> Result<SampleSet, CliError> {
        let carrier = &self.space.carrier;
        let pts: Vec<f64> = if self.starts.is_empty() {
            carrier
                .intervals()
                .iter()
                .flat_map(|iv| [iv[0], iv[1]])
                .chain(carrier.extra_points().iter().copied())
                .collect()
        } else {
            self.starts.clone()
        };
        Ok(SampleSet::from_points(carrier, pts)?)
    }
}

/// Loads a built-in scenario by name, or reads a JSON file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, CliError> {
    if let Some((_, text)) = BUILTINS.iter().find(|(name, _)| *name == name_or_path) {
        return parse_scenario(text, name_or_path);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: name_or_path.to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, name_or_path)
}

/// Parses and validates scenario JSON. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Scenario {
            origin: origin.to_string(),
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    validate(file, origin)
}

fn validate(file: ScenarioFile, origin: &str) -> Result<Scenario, CliError> {
    let at = |path: &str, message: String| CliError::Scenario {
        origin: origin.to_string(),
        path: path.to_string(),
        message,
    };

    if file.name.trim().is_empty() {
        return Err(at("name", "must not be empty".into()));
    }
    let carrier = CarrierSpec::new(
        file.carrier.intervals.iter().map(|iv| (iv[0], iv[1])),
        file.carrier.extra_points.iter().copied(),
        file.completeness,
    )
    .map_err(|e| at("carrier", e.to_string()))?;
    let distance =
        Distance::parse(&file.partial_metric).map_err(|e| at("partial_metric", e.to_string()))?;

    if file.map.is_empty() {
        return Err(at("map", "needs at least one piece".into()));
    }
    let mut map = PiecewiseMap::new("T");
    for (i, piece) in file.map.iter().enumerate() {
        let [lo, hi] = piece.when;
        if !(lo <= hi) {
            return Err(at(
                &format!("map[{i}].when"),
                format!("[{lo}, {hi}] is not an interval"),
            ));
        }
        map = map
            .piece(lo, hi, &piece.expr)
            .map_err(|e| at(&format!("map[{i}].expr"), e.to_string()))?;
    }

    let phi = match file.phi {
        PhiFile::Linear { alpha } => ComparisonFunction::new(PhiFamily::Linear { alpha })
            .map_err(|e| at("phi.alpha", e.to_string()))?,
        PhiFile::Rational => ComparisonFunction::rational(),
        PhiFile::Custom { expr } => {
            ComparisonFunction::custom(&expr).map_err(|e| at("phi.expr", e.to_string()))?
        }
    };

    let condition = ConditionSpec {
        kind: file.condition.kind,
        alpha: file.condition.alpha,
    };
    ConditionKind::from_tag(&condition.kind, &phi, condition.alpha)
        .map_err(|e| at("condition", e.to_string()))?;

    let sampling = SampleOptions {
        grid_step: file.sampling.grid_step,
        orbit_depth: file.sampling.orbit_depth,
    };
    if !(sampling.grid_step > 0.0 && sampling.grid_step.is_finite()) {
        return Err(at(
            "sampling.grid_step",
            format!("must be positive, got {}", sampling.grid_step),
        ));
    }

    let t = file.tolerances;
    for (field, v) in [
        ("eps_num", t.eps_num),
        ("tol", t.tol),
        ("agree_tol", t.agree_tol),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(at(
                &format!("tolerances.{field}"),
                format!("must be positive, got {v}"),
            ));
        }
    }
    let tolerances = Tolerances {
        eps_num: t.eps_num,
        tol: t.tol,
        agree_tol: t.agree_tol,
        ..Tolerances::default()
    };

    for (i, &[x, y]) in file.probes.iter().enumerate() {
        for v in [x, y] {
            if !carrier.contains(v) {
                return Err(at(
                    &format!("probes[{i}]"),
                    format!("{v} is outside the carrier"),
                ));
            }
        }
    }
    for (i, &x) in file.starts.iter().enumerate() {
        if !carrier.contains(x) {
            return Err(at(
                &format!("starts[{i}]"),
                format!("{x} is outside the carrier"),
            ));
        }
    }

    Ok(Scenario {
        space: PartialMetricSpace::new(file.name.clone(), carrier, distance),
        name: file.name,
        map,
        phi,
        condition,
        sampling,
        tolerances,
        probes: file.probes.iter().map(|p| (p[0], p[1])).collect(),
        starts: file.starts,
    })
}
