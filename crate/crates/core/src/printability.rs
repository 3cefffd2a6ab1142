//! Probabilistic printability scoring.
//!
//! The probability that a model prints successfully is the product of a
//! global survival term, driven by technology defect scores, application
//! sensitivities and tessellation quality, and one survival term per local
//! part characteristic (hole, pin, wall, ...). Each local term is a sigmoid
//! centred on the technology's critical value `w` for that characteristic,
//! shifted by the predicted dimensional error `ε` and scaled by the
//! application significance `s`:
//!
//! ```text
//! decreasing kinds:  P_F = (1 − 1/(1 + e^{(w − (d − ε))·c})) · s
//! increasing kinds:  P_F = (1/(1 + e^{(w − (d − ε))·c})) · s
//! global:            P_G = 1 − Π_x (1 − (1 − (1 − DS(x))·QS)·k(x))
//! overall:           P   = (1 − P_G) · Π_i (1 − P_F(i))
//! ```
//!
//! The slope `c` is fitted per critical value so the sigmoid best matches a
//! linear ramp over `[d_min, d_max] = [w / (10 · 2w), 2w]` in the
//! least-squares sense.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minimize::{brent, MinimizeError};

pub const SCHEMA_VERSION: u32 = 1;

/// Samples used in the trapezoid approximation of the fitting integral.
pub const INTEGRATION_SAMPLES: usize = 2048;

/// Coarse log-spaced scan used to bracket the minimum before refining.
const BRACKET_SCAN_POINTS: usize = 256;

/// Maximum stress a 45° overhang tolerates on binder jetting (N/m²) with a
/// 50% success probability.
pub const BJ_OVERHANG_CRITICAL_STRESS: f64 = 2.78e4;

/// Density of the binder-jetting composite, kg/m³.
pub const BJ_MATERIAL_DENSITY: f64 = 1360.0;

pub const STANDARD_GRAVITY: f64 = 9.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrintabilityError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{kind} is not supported on {technology}")]
    Unsupported { technology: Technology, kind: CharacteristicKind },
    #[error("coefficient fit for w = {w} failed: {source}")]
    Fit { w: f64, source: MinimizeError },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> PrintabilityError {
    PrintabilityError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Technology {
    #[serde(rename = "FDM")]
    Fdm,
    #[serde(rename = "BJ")]
    Bj,
    #[serde(rename = "MJ")]
    Mj,
}

impl Technology {
    pub const ALL: [Technology; 3] = [Technology::Fdm, Technology::Bj, Technology::Mj];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FDM" => Some(Technology::Fdm),
            "BJ" => Some(Technology::Bj),
            "MJ" => Some(Technology::Mj),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Technology::Fdm => "FDM",
            Technology::Bj => "BJ",
            Technology::Mj => "MJ",
        }
    }

    /// Critical-value table for this technology.
    pub fn critical_values(self) -> Vec<CriticalValue> {
        use CharacteristicKind::*;
        use DimensionType::*;
        let mm = |kind, dimension, w| CriticalValue::new(kind, dimension, w);
        match self {
            Technology::Fdm => vec![
                mm(Hole, Diameter, 2.0),
                mm(Pin, Diameter, 1.8),
                mm(SupportedWall, Thickness, 0.8),
                mm(UnsupportedWall, Thickness, 0.8),
                mm(Bridge, Length, 10.0),
                mm(ThinPart, Thickness, 2.0),
                mm(Overhang, Angle, 45.0),
                mm(Embossed, Width, 0.6),
                mm(Embossed, Height, 2.0),
                mm(Engraved, Width, 0.5),
                mm(Engraved, Depth, 0.9),
            ],
            Technology::Bj => vec![
                mm(Hole, Diameter, 1.5),
                mm(Pin, Diameter, 2.0),
                mm(SupportedWall, Thickness, 2.0),
                mm(UnsupportedWall, Thickness, 3.0),
                mm(ThinPart, Thickness, 2.0),
                mm(Overhang, Stress, BJ_OVERHANG_CRITICAL_STRESS),
                mm(Embossed, Width, 0.5),
                mm(Embossed, Height, 0.5),
                mm(Engraved, Width, 0.5),
                mm(Engraved, Depth, 0.5),
            ],
            Technology::Mj => vec![
                mm(Hole, Diameter, 0.5),
                mm(Pin, Diameter, 0.5),
                mm(SupportedWall, Thickness, 1.0),
                mm(UnsupportedWall, Thickness, 1.0),
                mm(ThinPart, Thickness, 0.5),
                mm(Embossed, Width, 0.8),
                mm(Embossed, Height, 0.5),
                mm(Engraved, Width, 0.5),
                mm(Engraved, Depth, 0.5),
            ],
        }
    }

    pub fn critical_value(self, kind: CharacteristicKind, dimension: DimensionType) -> Option<CriticalValue> {
        self.critical_values().into_iter().find(|c| c.kind == kind && c.dimension == dimension)
    }

    pub fn supports(self, kind: CharacteristicKind) -> bool {
        self.critical_values().iter().any(|c| c.kind == kind)
    }

    /// Defect score `DS_T_Perfect(x)` under a preset.
    pub fn defect_score(self, preset: DefectPreset, x: GlobalCharacteristic) -> f64 {
        use GlobalCharacteristic::*;
        match preset {
            DefectPreset::Derived => 1.0 / 30.0,
            DefectPreset::Rated => {
                // *** = 0.01, ** = 0.03, * = 0.05
                let (high, moderate, low) = (0.01, 0.03, 0.05);
                match (self, x) {
                    (Technology::Fdm, Accuracy) => moderate,
                    (Technology::Fdm, SurfaceTexture) => low,
                    (Technology::Fdm, Abnormalities) => low,
                    (Technology::Fdm, SupportConstruction) => moderate,
                    (Technology::Bj, SupportConstruction) => high,
                    (Technology::Bj, _) => moderate,
                    (Technology::Mj, SupportConstruction) => moderate,
                    (Technology::Mj, _) => high,
                }
            }
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacteristicKind {
    Hole,
    Pin,
    SupportedWall,
    UnsupportedWall,
    Bridge,
    ThinPart,
    Overhang,
    Embossed,
    Engraved,
}

impl CharacteristicKind {
    pub fn name(self) -> &'static str {
        match self {
            CharacteristicKind::Hole => "hole",
            CharacteristicKind::Pin => "pin",
            CharacteristicKind::SupportedWall => "supported_wall",
            CharacteristicKind::UnsupportedWall => "unsupported_wall",
            CharacteristicKind::Bridge => "bridge",
            CharacteristicKind::ThinPart => "thin_part",
            CharacteristicKind::Overhang => "overhang",
            CharacteristicKind::Embossed => "embossed",
            CharacteristicKind::Engraved => "engraved",
        }
    }

    /// Failure probability grows with the dimension for overhangs and bridges.
    pub fn direction(self) -> Direction {
        match self {
            CharacteristicKind::Overhang | CharacteristicKind::Bridge => Direction::Increasing,
            _ => Direction::Decreasing,
        }
    }
}

impl fmt::Display for CharacteristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionType {
    Diameter,
    Thickness,
    Length,
    Width,
    Height,
    Depth,
    Angle,
    Stress,
}

impl DimensionType {
    pub fn unit(self) -> Unit {
        match self {
            DimensionType::Angle => Unit::Degree,
            DimensionType::Stress => Unit::NewtonPerSquareMetre,
            _ => Unit::Millimetre,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "mm")]
    Millimetre,
    #[serde(rename = "deg")]
    Degree,
    #[serde(rename = "N/m^2")]
    NewtonPerSquareMetre,
}

/// How failure probability responds to a growing dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger is safer (holes, pins, walls, ...).
    Decreasing,
    /// Larger is riskier (overhang stress or angle, bridge length).
    Increasing,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decreasing" => Some(Direction::Decreasing),
            "increasing" => Some(Direction::Increasing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub kind: CharacteristicKind,
    pub dimension: DimensionType,
    pub w: f64,
    pub unit: Unit,
    pub direction: Direction,
}

impl CriticalValue {
    fn new(kind: CharacteristicKind, dimension: DimensionType, w: f64) -> Self {
        CriticalValue { kind, dimension, w, unit: dimension.unit(), direction: kind.direction() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalCharacteristic {
    Accuracy,
    SurfaceTexture,
    Abnormalities,
    SupportConstruction,
}

impl GlobalCharacteristic {
    /// The set used when an application does not list its own.
    pub const DEFAULT_SET: [GlobalCharacteristic; 3] = [
        GlobalCharacteristic::Accuracy,
        GlobalCharacteristic::SurfaceTexture,
        GlobalCharacteristic::Abnormalities,
    ];
}

/// Source of technology defect scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectPreset {
    /// 1/30 for every characteristic (matches the published binder-jetting tables).
    #[default]
    Derived,
    /// Star ratings per technology: *** = 0.01, ** = 0.03, * = 0.05.
    Rated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSource {
    Predicted,
    Manual,
    #[default]
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Application {
    pub name: String,
    /// `k(x, A)` per global characteristic; its keys form the set `S`.
    pub sensitivity: BTreeMap<GlobalCharacteristic, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartCharacteristic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: CharacteristicKind,
    pub dimensions: BTreeMap<DimensionType, f64>,
    /// Mean predicted dimensional error over the characteristic (mm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_source: Option<EpsilonSource>,
    /// Application significance `s` in (0, 1].
    #[serde(default = "one")]
    pub significance: f64,
}

fn one() -> f64 {
    1.0
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl PartCharacteristic {
    pub fn new(kind: CharacteristicKind, dimension: DimensionType, value: f64) -> Self {
        PartCharacteristic {
            label: None,
            kind,
            dimensions: BTreeMap::from([(dimension, value)]),
            epsilon: None,
            epsilon_source: None,
            significance: 1.0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64, source: EpsilonSource) -> Self {
        self.epsilon = Some(epsilon);
        self.epsilon_source = Some(source);
        self
    }

    pub fn with_dimension(mut self, dimension: DimensionType, value: f64) -> Self {
        self.dimensions.insert(dimension, value);
        self
    }

    pub fn with_significance(mut self, s: f64) -> Self {
        self.significance = s;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn epsilon_provenance(&self) -> (f64, EpsilonSource) {
        match self.epsilon {
            None => (0.0, EpsilonSource::Default),
            Some(e) => (e, self.epsilon_source.unwrap_or(EpsilonSource::Manual)),
        }
    }
}

/// A scoring request: technology, application, surface quality and the
/// model's part characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrintabilityConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub technology: Technology,
    pub application: Application,
    #[serde(default)]
    pub defect_preset: DefectPreset,
    /// Per-characteristic overrides of the preset defect scores.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub defect_scores: BTreeMap<GlobalCharacteristic, f64>,
    /// Tessellation quality `Area(M) / Area(O)`; alternative to the two areas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cad_area: Option<f64>,
    #[serde(default)]
    pub characteristics: Vec<PartCharacteristic>,
}

impl PrintabilityConfig {
    /// Config with the three default global characteristics at sensitivity `k`,
    /// QS = 1 and no part characteristics.
    pub fn uniform(technology: Technology, application: &str, k: f64) -> Self {
        PrintabilityConfig {
            schema_version: SCHEMA_VERSION,
            technology,
            application: Application {
                name: application.to_string(),
                sensitivity: GlobalCharacteristic::DEFAULT_SET.iter().map(|&x| (x, k)).collect(),
            },
            defect_preset: DefectPreset::Derived,
            defect_scores: BTreeMap::new(),
            qs: Some(1.0),
            mesh_area: None,
            cad_area: None,
            characteristics: Vec::new(),
        }
    }

    pub fn with_characteristic(mut self, c: PartCharacteristic) -> Self {
        self.characteristics.push(c);
        self
    }

    /// Resolves QS from the explicit ratio or the two areas.
    pub fn quality_ratio(&self) -> Result<f64, PrintabilityError> {
        let qs = match (self.qs, self.mesh_area, self.cad_area) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(invalid("qs", "give either qs or mesh_area/cad_area, not both"))
            }
            (Some(q), None, None) => q,
            (None, Some(m), Some(o)) => {
                if !(m > 0.0 && m.is_finite()) {
                    return Err(invalid("mesh_area", "must be positive"));
                }
                if !(o > 0.0 && o.is_finite()) {
                    return Err(invalid("cad_area", "must be positive"));
                }
                m / o
            }
            (None, _, _) => return Err(invalid("qs", "missing: give qs or both mesh_area and cad_area")),
        };
        if !(qs > 0.0 && qs.is_finite()) {
            return Err(invalid("qs", format!("must be positive, got {qs}")));
        }
        Ok(qs)
    }

    /// Checks every field; returns the first problem with its JSON path.
    pub fn validate(&self) -> Result<(), PrintabilityError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        for (x, &k) in &self.application.sensitivity {
            if !(0.0..=1.0).contains(&k) {
                return Err(invalid(format!("application.sensitivity.{}", snake(x)), format!("k = {k} outside [0, 1]")));
            }
        }
        for (x, &ds) in &self.defect_scores {
            if !(0.0..=1.0).contains(&ds) {
                return Err(invalid(format!("defect_scores.{}", snake(x)), format!("{ds} outside [0, 1]")));
            }
        }
        self.quality_ratio()?;
        for (i, c) in self.characteristics.iter().enumerate() {
            let path = |f: &str| format!("characteristics[{i}].{f}");
            if !self.technology.supports(c.kind) {
                return Err(PrintabilityError::Unsupported { technology: self.technology, kind: c.kind });
            }
            if c.dimensions.is_empty() {
                return Err(invalid(path("dimensions"), "at least one dimension is required"));
            }
            for (&dim, &v) in &c.dimensions {
                if self.technology.critical_value(c.kind, dim).is_none() {
                    return Err(invalid(
                        format!("{}.{}", path("dimensions"), snake(&dim)),
                        format!("{} on {} has no {} critical value", c.kind, self.technology, snake(&dim)),
                    ));
                }
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{}.{}", path("dimensions"), snake(&dim)), "must be positive"));
                }
            }
            if let Some(e) = c.epsilon {
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(invalid(path("epsilon"), "must be non-negative"));
                }
            }
            if !(c.significance > 0.0 && c.significance <= 1.0) {
                return Err(invalid(path("significance"), format!("s = {} outside (0, 1]", c.significance)));
            }
        }
        Ok(())
    }
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Sigmoid and coefficient fitting

/// `1 / (1 + e^z)` without overflow.
pub fn logistic_neg(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `[d_min, d_max]` for critical value `w`: `d_max = 2w`, `d_min = w / (10·d_max)`.
pub fn fit_interval(w: f64) -> (f64, f64) {
    let d_max = 2.0 * w;
    (w / (10.0 * d_max), d_max)
}

/// Trapezoid approximation of the squared gap between the linear ramp and
/// the sigmoid over the fit interval.
pub fn fit_objective(c: f64, w: f64, direction: Direction) -> f64 {
    let (lo, hi) = fit_interval(w);
    let n = INTEGRATION_SAMPLES;
    let h = (hi - lo) / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x = lo + h * i as f64;
        let s = logistic_neg((w - x) * c);
        let gap = match direction {
            Direction::Decreasing => (hi - x) / (hi - lo) - (1.0 - s),
            Direction::Increasing => (x - lo) / (hi - lo) - s,
        };
        let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += weight * gap * gap;
    }
    sum * h
}

/// Search range for `c`: `[1e-6 / w, 1e3 / w]`.
pub fn coefficient_range(w: f64) -> (f64, f64) {
    (1e-6 / w, 1e3 / w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub w: f64,
    pub direction: Direction,
    pub c: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Fits the sigmoid slope `c` for critical value `w`.
///
/// A coarse log-spaced scan locates the best cell, then Brent's method
/// refines `ln c` inside the neighbouring cells.
pub fn fit_coefficient(w: f64, direction: Direction) -> Result<CoefficientFit, PrintabilityError> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(invalid("w", format!("critical value must be positive, got {w}")));
    }
    let (lo, hi) = coefficient_range(w);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (BRACKET_SCAN_POINTS - 1) as f64;
    let objective = |lc: f64| fit_objective(lc.exp(), w, direction);
    let best = (0..BRACKET_SCAN_POINTS)
        .map(|i| (i, objective(llo + step * i as f64)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap();
    let a = llo + step * best.saturating_sub(1) as f64;
    let b = llo + step * (best + 1).min(BRACKET_SCAN_POINTS - 1) as f64;
    let m = brent(objective, a, b, 1e-10, 500).map_err(|source| PrintabilityError::Fit { w, source })?;
    Ok(CoefficientFit { w, direction, c: m.x.exp(), objective: m.value, iterations: m.iterations })
}

/// Number of strict local minima of the fitting objective on an `n`-point
/// log grid over the search range.
pub fn count_local_minima(w: f64, direction: Direction, n: usize) -> usize {
    let (lo, hi) = coefficient_range(w);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let values: Vec<f64> = crate::par::map_range(n, |i| {
        let lc = llo + (lhi - llo) * i as f64 / (n - 1) as f64;
        fit_objective(lc.exp(), w, direction)
    });
    let mut count = 0;
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { values[i + 1] };
        if values[i] < left && values[i] <= right {
            count += 1;
        }
    }
    count
}

/// Compute-once cache of fitted coefficients keyed by `(w, direction)`.
#[derive(Default)]
pub struct CoefficientCache {
    cells: RwLock<HashMap<(u64, Direction), Arc<OnceLock<Result<CoefficientFit, PrintabilityError>>>>>,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache shared by the CLI and the HTTP service.
    pub fn global() -> &'static CoefficientCache {
        static CACHE: OnceLock<CoefficientCache> = OnceLock::new();
        CACHE.get_or_init(CoefficientCache::new)
    }

    pub fn get(&self, w: f64, direction: Direction) -> Result<CoefficientFit, PrintabilityError> {
        let key = (w.to_bits(), direction);
        let existing = self.cells.read().expect("cache lock").get(&key).cloned();
        let cell = match existing {
            Some(c) => c,
            None => self.cells.write().expect("cache lock").entry(key).or_default().clone(),
        };
        cell.get_or_init(|| fit_coefficient(w, direction)).clone()
    }

    pub fn len(&self) -> usize {
        self.cells.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Failure probability for one dimension against critical value `w`.
pub fn failure_probability(w: f64, d: f64, epsilon: f64, significance: f64, c: f64, direction: Direction) -> f64 {
    let s = logistic_neg((w - (d - epsilon)) * c);
    let p = match direction {
        Direction::Decreasing => (1.0 - s) * significance,
        Direction::Increasing => s * significance,
    };
    p.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Scoring

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: CharacteristicKind,
    /// Governing dimension (the smallest one supplied).
    pub dimension: DimensionType,
    pub value: f64,
    pub unit: Unit,
    pub critical_value: f64,
    pub direction: Direction,
    pub coefficient: f64,
    /// ε applied in the sigmoid (0 for non-length dimensions).
    pub epsilon: f64,
    pub epsilon_source: EpsilonSource,
    pub significance: f64,
    pub failure_probability: f64,
    pub survival: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFactor {
    pub characteristic: GlobalCharacteristic,
    pub defect_score: f64,
    pub sensitivity: f64,
    /// `1 − (1 − (1 − DS)·QS)·k`
    pub survival_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub qs: f64,
    pub defect_preset: DefectPreset,
    pub factors: Vec<GlobalFactor>,
    pub failure_probability: f64,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintabilityReport {
    pub schema_version: u32,
    pub technology: Technology,
    pub application: String,
    pub global: GlobalReport,
    pub characteristics: Vec<CharacteristicReport>,
    /// Π (1 − P_F) over all characteristics.
    pub part_survival: f64,
    /// P(M, T) = (1 − P_G) · Π (1 − P_F).
    pub overall: f64,
    pub score_percent: f64,
    pub coefficients: Vec<CoefficientFit>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Global failure probability `P_G`.
pub fn global_failure_probability(config: &PrintabilityConfig) -> Result<GlobalReport, PrintabilityError> {
    let qs = config.quality_ratio()?;
    let mut factors = Vec::new();
    let mut survival = 1.0;
    for (&x, &k) in &config.application.sensitivity {
        let ds = config
            .defect_scores
            .get(&x)
            .copied()
            .unwrap_or_else(|| config.technology.defect_score(config.defect_preset, x));
        let factor = 1.0 - (1.0 - (1.0 - ds) * qs) * k;
        survival *= factor;
        factors.push(GlobalFactor { characteristic: x, defect_score: ds, sensitivity: k, survival_factor: factor });
    }
    let survival = survival.clamp(0.0, 1.0);
    Ok(GlobalReport {
        qs,
        defect_preset: config.defect_preset,
        factors,
        failure_probability: 1.0 - survival,
        survival,
    })
}

/// Scores one characteristic using coefficients from `cache`.
pub fn part_failure_probability(
    c: &PartCharacteristic,
    technology: Technology,
    cache: &CoefficientCache,
) -> Result<CharacteristicReport, PrintabilityError> {
    if !technology.supports(c.kind) {
        return Err(PrintabilityError::Unsupported { technology, kind: c.kind });
    }
    let (eps, source) = c.epsilon_provenance();
    let mut best: Option<CharacteristicReport> = None;
    let min_value = c.dimensions.values().copied().fold(f64::INFINITY, f64::min);
    for (&dim, &value) in &c.dimensions {
        if value != min_value {
            continue;
        }
        let cv = technology.critical_value(c.kind, dim).ok_or_else(|| {
            invalid(format!("dimensions.{}", snake(&dim)), format!("{} on {technology} has no such dimension", c.kind))
        })?;
        let fit = cache.get(cv.w, cv.direction)?;
        let mut notes = Vec::new();
        // ε is a length; it does not shift stress or angle dimensions
        let applied_eps = if cv.unit == Unit::Millimetre { eps } else { 0.0 };
        if cv.unit == Unit::NewtonPerSquareMetre {
            notes.push("fit interval lower bound d_min = 0.05 applied literally in stress units".to_string());
        }
        if applied_eps != eps {
            notes.push(format!("epsilon {eps} mm ignored for {} dimension", snake(&dim)));
        }
        let pf = failure_probability(cv.w, value, applied_eps, c.significance, fit.c, cv.direction);
        let report = CharacteristicReport {
            label: c.label.clone(),
            kind: c.kind,
            dimension: dim,
            value,
            unit: cv.unit,
            critical_value: cv.w,
            direction: cv.direction,
            coefficient: fit.c,
            epsilon: applied_eps,
            epsilon_source: source,
            significance: c.significance,
            failure_probability: pf,
            survival: 1.0 - pf,
            notes,
        };
        if best.as_ref().is_none_or(|b| report.survival < b.survival) {
            best = Some(report);
        }
    }
    best.ok_or_else(|| invalid("dimensions", "at least one dimension is required"))
}

/// Full report for a configuration using the shared coefficient cache.
pub fn overall_printability(config: &PrintabilityConfig) -> Result<PrintabilityReport, PrintabilityError> {
    overall_printability_with(config, CoefficientCache::global())
}

pub fn overall_printability_with(
    config: &PrintabilityConfig,
    cache: &CoefficientCache,
) -> Result<PrintabilityReport, PrintabilityError> {
    config.validate()?;
    let global = global_failure_probability(config)?;
    let mut notes = Vec::new();
    if global.qs > 1.0 {
        notes.push(format!("QS = {} exceeds 1: mesh area larger than CAD area", global.qs));
    }
    let characteristics = config
        .characteristics
        .iter()
        .map(|c| part_failure_probability(c, config.technology, cache))
        .collect::<Result<Vec<_>, _>>()?;
    let part_survival: f64 = characteristics.iter().map(|c| c.survival).product();
    let overall = global.survival * part_survival;

    let mut coefficients: Vec<CoefficientFit> = Vec::new();
    for c in &characteristics {
        if !coefficients.iter().any(|f| f.w == c.critical_value && f.direction == c.direction) {
            coefficients.push(cache.get(c.critical_value, c.direction)?);
        }
    }
    Ok(PrintabilityReport {
        schema_version: SCHEMA_VERSION,
        technology: config.technology,
        application: config.application.name.clone(),
        global,
        characteristics,
        part_survival,
        overall,
        score_percent: overall * 100.0,
        coefficients,
        notes,
    })
}

/// Root bending stress (N/m²) of a prismatic cantilever under the transverse
/// component of its own weight: `σ = 3·ρ·g·L²·cos(angle) / T`.
///
/// Lengths are in mm, the angle in degrees from horizontal. This is a
/// closed-form stand-in for finite-element stress and does not reproduce
/// clamped-base FEA values.
pub fn cantilever_stress_surrogate(
    length_mm: f64,
    width_mm: f64,
    thickness_mm: f64,
    angle_deg: f64,
    density: f64,
    gravity: f64,
) -> Result<f64, PrintabilityError> {
    for (name, v) in [("length", length_mm), ("width", width_mm), ("thickness", thickness_mm), ("density", density)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be positive"));
        }
    }
    let l = length_mm * 1e-3;
    let t = thickness_mm * 1e-3;
    // width cancels: q = ρ g W T cosθ, M = qL²/2, S = W T²/6
    Ok(3.0 * density * gravity * l * l * angle_deg.to_radians().cos() / t)
}
