//! TOML run configuration.
//!
//! ```toml
//! [domain]
//! dimension = 2
//! radius = 1.0
//! radial_nodes = 64
//! angular_nodes = 64
//!
//! [flow]
//! alpha = -1.0
//! horizon = 2.0          # t_end, or s_end when mode = "rescaled"
//! mode = "physical"
//!
//! [initial]
//! preset = "constant"
//! u0 = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{Flavor, InitialData};
use crate::flow::{FlowParams, Stepper};
use crate::monitor::MonitorOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub flow: FlowSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub rescale: RescaleSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dimension: usize,
    pub radius: f64,
    pub radial_nodes: usize,
    /// Required for `dimension = 2`, forbidden for `dimension = 1`.
    pub angular_nodes: Option<usize>,
}

fn default_stepper() -> Stepper {
    Stepper::Rk2
}

fn default_cfl() -> f64 {
    0.4
}

fn default_mode() -> Flavor {
    Flavor::Physical
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub alpha: f64,
    #[serde(default = "default_stepper")]
    pub stepper: Stepper,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub horizon: f64,
    #[serde(default = "default_mode")]
    pub mode: Flavor,
    pub convergence_tol: Option<f64>,
    #[serde(default = "default_stride")]
    pub monitor_stride: usize,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `constant`, `bump` or `table`.
    pub preset: String,
    pub u0: Option<f64>,
    pub r0: Option<f64>,
    pub epsilon: Option<f64>,
    /// Inline nodal values of `phi_0` (table preset).
    pub values: Option<Vec<f64>>,
    /// File of whitespace- or comma-separated `phi_0` values (table preset),
    /// relative to the config file.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleSection {
    /// Rescaling constant; defaults to the midpoint of `[inf phi0, sup phi0]`.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; relative paths resolve against `IMCF_OUTPUT_ROOT`
    /// when set, else the working directory.
    pub directory: Option<PathBuf>,
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub c_tol: f64,
    pub gradient_slack: f64,
    pub area_ode_tol: f64,
    pub radius_slack: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let m = MonitorOptions::default();
        Self {
            c_tol: m.c_tol,
            gradient_slack: m.gradient_slack,
            area_ode_tol: m.area_ode_tol,
            radius_slack: m.radius_slack,
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub spec: DomainSpec,
    pub params: FlowParams,
    pub mode: Flavor,
    pub initial: InitialData,
    pub c: Option<f64>,
    pub options: MonitorOptions,
    pub output_dir: PathBuf,
    pub config: RunConfig,
    pub hash: String,
}

/// Environment variable overriding the root of relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "IMCF_OUTPUT_ROOT";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = field_from_message(&message).unwrap_or_else(|| locate(text, e.span()));
            Error::config(field, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical JSON form; insensitive to comments and layout.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every field and assembles the run description. `base_dir` is
    /// where relative table files live; `name` labels the default output directory.
    pub fn resolve(&self, base_dir: &Path, name: &str) -> Result<Experiment> {
        let d = &self.domain;
        let spec = match d.dimension {
            1 => {
                if d.angular_nodes.is_some() {
                    return Err(Error::config("domain.angular_nodes", "not used when dimension = 1"));
                }
                DomainSpec::segment(d.radius, d.radial_nodes)
            }
            2 => match d.angular_nodes {
                Some(nt) => DomainSpec::disk(d.radius, d.radial_nodes, nt),
                None => return Err(Error::config("domain.angular_nodes", "required when dimension = 2")),
            },
            n => return Err(Error::config("domain.dimension", format!("must be 1 or 2, got {n}"))),
        };
        spec.validate().map_err(|e| Error::config(domain_field(&e.to_string()), e.to_string()))?;

        let f = &self.flow;
        if !(f.alpha.is_finite() && f.alpha <= 0.0) {
            return Err(Error::config("flow.alpha", format!("must be <= 0, got {}", f.alpha)));
        }
        if !(f.cfl > 0.0 && f.cfl <= 1.0) {
            return Err(Error::config("flow.cfl", format!("must lie in (0, 1], got {}", f.cfl)));
        }
        if !(f.horizon.is_finite() && f.horizon > 0.0) {
            return Err(Error::config("flow.horizon", format!("must be positive, got {}", f.horizon)));
        }
        if let Some(tol) = f.convergence_tol {
            if !(tol > 0.0) {
                return Err(Error::config("flow.convergence_tol", format!("must be positive, got {tol}")));
            }
            if f.mode != Flavor::Rescaled {
                return Err(Error::config("flow.convergence_tol", "only meaningful with mode = \"rescaled\""));
            }
        }
        if f.monitor_stride == 0 {
            return Err(Error::config("flow.monitor_stride", "must be at least 1"));
        }
        if f.max_steps == Some(0) {
            return Err(Error::config("flow.max_steps", "must be at least 1"));
        }
        if self.output.snapshot_stride == Some(0) {
            return Err(Error::config("output.snapshot_stride", "must be at least 1"));
        }
        let t = &self.tolerances;
        for (field, value) in [
            ("tolerances.c_tol", t.c_tol),
            ("tolerances.gradient_slack", t.gradient_slack),
            ("tolerances.area_ode_tol", t.area_ode_tol),
            ("tolerances.radius_slack", t.radius_slack),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::config(field, format!("must be a non-negative number, got {value}")));
            }
        }
        let initial = self.initial.resolve(base_dir)?;
        let params = FlowParams {
            alpha: f.alpha,
            stepper: f.stepper,
            cfl: f.cfl,
            horizon: f.horizon,
            convergence_tol: f.convergence_tol,
            monitor_stride: f.monitor_stride,
            snapshot_stride: self.output.snapshot_stride,
            max_steps: f.max_steps.unwrap_or(FlowParams::default().max_steps),
            exec: Exec::default(),
        };
        let directory = self
            .output
            .directory
            .clone()
            .unwrap_or_else(|| PathBuf::from("output").join(name));
        Ok(Experiment {
            name: name.to_string(),
            spec,
            params,
            mode: f.mode,
            initial,
            c: self.rescale.c,
            options: MonitorOptions {
                c_tol: t.c_tol,
                gradient_slack: t.gradient_slack,
                area_ode_tol: t.area_ode_tol,
                radius_slack: t.radius_slack,
            },
            output_dir: output_root(&directory),
            config: self.clone(),
            hash: self.hash(),
        })
    }
}

impl InitialSection {
    fn resolve(&self, base_dir: &Path) -> Result<InitialData> {
        let unexpected = |present: bool, key: &str| -> Result<()> {
            if present {
                Err(Error::config(
                    format!("initial.{key}"),
                    format!("not used by preset \"{}\"", self.preset),
                ))
            } else {
                Ok(())
            }
        };
        match self.preset.as_str() {
            "constant" => {
                unexpected(self.r0.is_some(), "r0")?;
                unexpected(self.epsilon.is_some(), "epsilon")?;
                unexpected(self.values.is_some(), "values")?;
                unexpected(self.file.is_some(), "file")?;
                let u0 = self.u0.unwrap_or(1.0);
                if !(u0.is_finite() && u0 > 0.0) {
                    return Err(Error::config("initial.u0", format!("must be positive, got {u0}")));
                }
                Ok(InitialData::Constant { u0 })
            }
            "bump" => {
                unexpected(self.u0.is_some(), "u0")?;
                unexpected(self.values.is_some(), "values")?;
                unexpected(self.file.is_some(), "file")?;
                let r0 = self.r0.unwrap_or(1.0);
                if !(r0.is_finite() && r0 > 0.0) {
                    return Err(Error::config("initial.r0", format!("must be positive, got {r0}")));
                }
                let epsilon = self
                    .epsilon
                    .ok_or_else(|| Error::config("initial.epsilon", "required by preset \"bump\""))?;
                if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
                    return Err(Error::config("initial.epsilon", format!("must lie in [0, 1), got {epsilon}")));
                }
                Ok(InitialData::Bump { r0, epsilon })
            }
            "table" => {
                unexpected(self.u0.is_some(), "u0")?;
                unexpected(self.r0.is_some(), "r0")?;
                unexpected(self.epsilon.is_some(), "epsilon")?;
                match (&self.values, &self.file) {
                    (Some(v), None) => Ok(InitialData::Table(v.clone())),
                    (None, Some(file)) => {
                        let path = base_dir.join(file);
                        let text = std::fs::read_to_string(&path).map_err(|e| {
                            Error::config("initial.file", format!("cannot read {}: {e}", path.display()))
                        })?;
                        parse_table(&text).map(InitialData::Table)
                    }
                    _ => Err(Error::config(
                        "initial.values",
                        "preset \"table\" needs exactly one of `values` or `file`",
                    )),
                }
            }
            other => Err(Error::config(
                "initial.preset",
                format!("unknown preset \"{other}\" (expected constant, bump or table)"),
            )),
        }
    }
}

fn parse_table(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|tok| !tok.is_empty())
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::config("initial.file", format!("not a number: {tok:?}")))
        })
        .collect()
}

/// Resolves a relative output directory against [`OUTPUT_ROOT_ENV`].
pub fn output_root(directory: &Path) -> PathBuf {
    if directory.is_absolute() {
        return directory.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(directory),
        _ => directory.to_path_buf(),
    }
}

fn domain_field(message: &str) -> &'static str {
    if message.contains("radius") {
        "domain.radius"
    } else if message.contains("angular") || message.contains("theta") {
        "domain.angular_nodes"
    } else if message.contains("radial") || message.contains("nodes") {
        "domain.radial_nodes"
    } else {
        "domain"
    }
}

/// Extracts the key from serde messages such as "unknown field `foo`".
fn field_from_message(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    let key = &message[start..end];
    (message.starts_with("unknown field") || message.starts_with("missing field")).then(|| key.to_string())
}

/// Dotted `section.key` for a byte span of the source text.
fn locate(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    let Some(span) = span else {
        return "<config>".into();
    };
    let before = &text[..span.start.min(text.len())];
    let section = before
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').to_string());
    let line = text[before.rfind('\n').map_or(0, |i| i + 1)..]
        .lines()
        .next()
        .unwrap_or("");
    let key = line.split('=').next().map(str::trim).filter(|k| !k.is_empty() && !k.starts_with('['));
    match (section, key) {
        (Some(s), Some(k)) => format!("{s}.{k}"),
        (Some(s), None) => s,
        (None, Some(k)) => k.to_string(),
        (None, None) => "<config>".into(),
    }
}
