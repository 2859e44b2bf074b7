//! Run configuration: a sectioned TOML document, command-line overrides and
//! the mapping onto the library's [`Setup`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use fluxnmr::ensemble::{Placement, PolarizationMode};
use fluxnmr::protocols::DephasingConvention;
use fluxnmr::rfdrive::{current_from_normalized, OffsetReference, RfSide};
use fluxnmr::sensitivity::RfSettings;
use fluxnmr::sweep::CustomPlan;
use fluxnmr::{QubitParams, Scheme, Setup};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Anything wrong with the configuration itself; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitSection {
    /// Tunnel gap Δ/2π (Hz).
    pub gap_hz: f64,
    /// Flux detuning ε/2π (Hz).
    pub detuning_hz: f64,
    pub persistent_current: f64,
    pub loop_side: f64,
    pub t2_star: f64,
    pub visibility: f64,
    pub t_rep: f64,
    pub t_tot: f64,
    /// T₂(n) keyed by the pulse index.
    pub t2: BTreeMap<String, f64>,
}

impl Default for QubitSection {
    fn default() -> Self {
        let q = QubitParams::default();
        Self {
            gap_hz: q.gap / (2.0 * PI),
            detuning_hz: q.detuning / (2.0 * PI),
            persistent_current: q.persistent_current,
            loop_side: q.loop_side,
            t2_star: q.t2_star,
            visibility: q.visibility,
            t_rep: q.t_rep,
            t_tot: q.t_tot,
            t2: q.t2_of_n.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub temperature: f64,
    pub b_ex: f64,
    /// Gyromagnetic ratio (rad s⁻¹ T⁻¹).
    pub gamma: f64,
    pub linewidth: f64,
    pub relaxation: f64,
    pub polarization: PolarizationMode,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        let e = fluxnmr::ensemble::Environment::default();
        Self {
            temperature: e.temperature,
            b_ex: e.b_ex,
            gamma: e.gamma,
            linewidth: e.linewidth,
            relaxation: e.relaxation,
            polarization: e.polarization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfSection {
    pub offset: f64,
    pub reference: OffsetReference,
    pub side: RfSide,
    /// Fixed I_RF (A). Optimized when neither this nor `normalized_current`
    /// is set.
    pub current: Option<f64>,
    /// Fixed γμ₀I_RF/(Γ̃R).
    pub normalized_current: Option<f64>,
}

impl Default for RfSection {
    fn default() -> Self {
        let r = RfSettings::default();
        Self { offset: r.offset, reference: r.reference, side: r.side, current: None, normalized_current: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdSection {
    pub convention: DephasingConvention,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseySection {
    /// Free-evolution time; T₂* when unset.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub standoff: f64,
    /// Thickness of small samples.
    pub height: f64,
    /// Placement and side length of the small sample used by min-number.
    pub placement: Placement,
    pub size: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        let s = Setup::default();
        Self { standoff: s.standoff, height: s.small_height, placement: Placement::B, size: 2e-6 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// Voxel edge; chosen from the sample geometry when unset.
    pub voxel_edge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; all cores when unset.
    pub threads: Option<usize>,
    pub out: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { threads: None, out: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuerySection {
    /// ramsey, echo or dd<n>.
    pub scheme: String,
}

impl Default for QuerySection {
    fn default() -> Self {
        Self { scheme: "echo".into() }
    }
}

/// Axes of the `custom` figure plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CustomSection {
    pub loop_side: Vec<f64>,
    pub standoff: Vec<f64>,
    pub b_ex: Vec<f64>,
    pub schemes: Vec<String>,
}

impl Default for CustomSection {
    fn default() -> Self {
        Self {
            loop_side: vec![2e-6],
            standoff: vec![0.1e-6],
            b_ex: vec![4e-3],
            schemes: vec!["ramsey".into(), "echo".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub qubit: QubitSection,
    pub environment: EnvironmentSection,
    pub rf: RfSection,
    pub dd: DdSection,
    pub ramsey: RamseySection,
    pub sample: SampleSection,
    pub numerics: NumericsSection,
    pub run: RunSection,
    pub query: QuerySection,
    pub custom: CustomSection,
}

/// Keys settable through `--convention`.
const CONVENTION_KEYS: [(&str, &str); 3] =
    [("polarization", "environment.polarization"), ("dephasing", "dd.convention"), ("rf_offset", "rf.reference")];

/// Collected `section.key = value` overrides. Repeating a key is allowed only
/// with the same value.
#[derive(Debug, Default)]
pub struct Overrides {
    entries: BTreeMap<String, (toml::Value, String)>,
}

impl Overrides {
    /// Adds `key=value`; `origin` names the flag for diagnostics.
    pub fn add(&mut self, assignment: &str, origin: &str) -> anyhow::Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("{origin} `{assignment}`: expected key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        if key.split('.').count() < 2 || key.split('.').any(str::is_empty) {
            return Err(config_err(format!("{origin} `{assignment}`: key must be section.key")));
        }
        self.insert(key, parse_value(raw), origin)
    }

    /// Adds a `--convention name=value` flag.
    pub fn add_convention(&mut self, assignment: &str) -> anyhow::Result<()> {
        let (name, raw) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("--convention `{assignment}`: expected name=value")))?;
        let key = CONVENTION_KEYS.iter().find(|(n, _)| *n == name.trim()).map(|(_, k)| *k).ok_or_else(|| {
            let names: Vec<&str> = CONVENTION_KEYS.iter().map(|(n, _)| *n).collect();
            config_err(format!("--convention `{name}`: expected one of {}", names.join(", ")))
        })?;
        self.insert(key, toml::Value::String(raw.trim().to_string()), "--convention")
    }

    pub fn insert(&mut self, key: &str, value: toml::Value, origin: &str) -> anyhow::Result<()> {
        if let Some((prev, prev_origin)) = self.entries.get(key) {
            if *prev != value {
                return Err(config_err(format!(
                    "conflicting values for `{key}`: {prev} (from {prev_origin}) and {value} (from {origin})"
                )));
            }
            return Ok(());
        }
        self.entries.insert(key.to_string(), (value, origin.to_string()));
        Ok(())
    }

    fn apply(&self, doc: &mut toml::Table) -> anyhow::Result<()> {
        for (key, (value, _)) in &self.entries {
            let parts: Vec<&str> = key.split('.').collect();
            let mut table = &mut *doc;
            for part in &parts[..parts.len() - 1] {
                let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
                table =
                    entry.as_table_mut().ok_or_else(|| config_err(format!("`{key}`: `{part}` is not a section")))?;
            }
            table.insert(parts[parts.len() - 1].to_string(), value.clone());
        }
        Ok(())
    }
}

/// Parses a TOML literal; bare words are taken as strings.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        overrides.apply(&mut doc)?;
        let cfg: RunConfig =
            toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        cfg.setup()?;
        cfg.scheme()?;
        cfg.custom_plan()?;
        if cfg.run.threads == Some(0) {
            return Err(config_err("run.threads must be >= 1"));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn setup(&self) -> anyhow::Result<Setup> {
        let q = &self.qubit;
        let mut t2_of_n = BTreeMap::new();
        for (k, v) in &q.t2 {
            let n: u32 = k.parse().map_err(|_| config_err(format!("qubit.t2: key `{k}` is not a pulse index")))?;
            t2_of_n.insert(n, *v);
        }
        let qubit = QubitParams {
            gap: 2.0 * PI * q.gap_hz,
            detuning: 2.0 * PI * q.detuning_hz,
            persistent_current: q.persistent_current,
            loop_side: q.loop_side,
            t2_star: q.t2_star,
            t2_of_n,
            visibility: q.visibility,
            t_rep: q.t_rep,
            t_tot: q.t_tot,
        };
        let e = &self.environment;
        let env = fluxnmr::ensemble::Environment {
            temperature: e.temperature,
            b_ex: e.b_ex,
            gamma: e.gamma,
            linewidth: e.linewidth,
            relaxation: e.relaxation,
            polarization: e.polarization,
        };
        let current = match (self.rf.current, self.rf.normalized_current) {
            (Some(_), Some(_)) => return Err(config_err("set at most one of rf.current and rf.normalized_current")),
            (Some(i), None) => Some(i),
            (None, Some(c)) => Some(current_from_normalized(c, e.gamma, e.linewidth)),
            (None, None) => None,
        };
        let setup = Setup {
            qubit,
            env,
            rf: RfSettings { offset: self.rf.offset, reference: self.rf.reference, side: self.rf.side, current },
            convention: self.dd.convention,
            ramsey_tau: self.ramsey.tau,
            standoff: self.sample.standoff,
            small_height: self.sample.height,
            voxel_edge: self.numerics.voxel_edge,
        };
        setup.validate().map_err(|e| config_err(e.to_string()))?;
        if self.sample.size.is_nan() || self.sample.size <= 0.0 {
            return Err(config_err(format!("sample.size must be > 0, got {}", self.sample.size)));
        }
        Ok(setup)
    }

    pub fn scheme(&self) -> anyhow::Result<Scheme> {
        self.query.scheme.parse().map_err(|e: fluxnmr::Error| config_err(e.to_string()))
    }

    pub fn custom_plan(&self) -> anyhow::Result<CustomPlan> {
        let schemes = self
            .custom
            .schemes
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| config_err(format!("custom.schemes: {e}")))?;
        Ok(CustomPlan {
            loop_side: self.custom.loop_side.clone(),
            standoff: self.custom.standoff.clone(),
            b_ex: self.custom.b_ex.clone(),
            schemes,
        })
    }
}
