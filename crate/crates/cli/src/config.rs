//! Run configuration: a TOML file with model parameters at the top level and
//! one table per subcommand, overridden by `--set` and parameter flags.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clickdyn::Params;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub xi: f64,
    pub m0: f64,
    pub omega0: f64,
    pub phi: f64,
    pub seed: u64,
    pub energy: CurveSection,
    pub moment: CurveSection,
    pub stiffness: CurveSection,
    #[serde(rename = "phase-portrait")]
    pub phase_portrait: PhasePortraitSection,
    #[serde(rename = "bifurcation-set")]
    pub bifurcation_set: BifurcationSection,
    pub freevib: FreevibSection,
    pub hbm: HbmSection,
    pub melnikov: MelnikovSection,
    pub simulate: SimulateSection,
    pub sweep: SweepSection,
    pub lyapunov: LyapunovSection,
    pub poincare: PoincareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 1.0,
            gamma: 0.0,
            kappa: 1.0,
            xi: 0.0,
            m0: 0.0,
            omega0: 0.0,
            phi: 0.0,
            seed: 0,
            energy: CurveSection::default(),
            moment: CurveSection::default(),
            stiffness: CurveSection::default(),
            phase_portrait: PhasePortraitSection::default(),
            bifurcation_set: BifurcationSection::default(),
            freevib: FreevibSection::default(),
            hbm: HbmSection::default(),
            melnikov: MelnikovSection::default(),
            simulate: SimulateSection::default(),
            sweep: SweepSection::default(),
            lyapunov: LyapunovSection::default(),
            poincare: PoincareSection::default(),
        }
    }
}

/// θ-grid curves of `energy`, `moment` and `stiffness`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub theta_min: f64,
    pub theta_max: f64,
    pub n: usize,
    /// One curve per value; empty means the top-level `alpha`.
    pub alphas: Vec<f64>,
}

impl Default for CurveSection {
    fn default() -> Self {
        Self {
            theta_min: -PI,
            theta_max: PI,
            n: 721,
            alphas: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhasePortraitSection {
    pub theta_min: f64,
    pub theta_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_theta: usize,
    pub n_omega: usize,
    /// Empty selects the barrier energies plus levels on either side.
    pub levels: Vec<f64>,
}

impl Default for PhasePortraitSection {
    fn default() -> Self {
        Self {
            theta_min: -PI,
            theta_max: PI,
            omega_min: -2.0,
            omega_max: 2.0,
            n_theta: 401,
            n_omega: 401,
            levels: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifurcationSection {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub n_alpha: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub n_beta: usize,
    pub theta_cells: usize,
}

impl Default for BifurcationSection {
    fn default() -> Self {
        Self {
            alpha_min: 0.01,
            alpha_max: 4.0,
            n_alpha: 400,
            beta_min: 0.05,
            beta_max: 3.0,
            n_beta: 119,
            theta_cells: 720,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreevibSection {
    /// Branch labels such as `"AF3"`; empty means every branch present.
    pub branches: Vec<String>,
    pub n: usize,
    /// Elliptic waveforms (`"sn"`, `"cn"`, `"dn"`) compared with integration.
    pub waveforms: Vec<String>,
    pub waveform_theta0: f64,
    pub waveform_samples: usize,
}

impl Default for FreevibSection {
    fn default() -> Self {
        Self {
            branches: Vec::new(),
            n: 60,
            waveforms: Vec::new(),
            waveform_theta0: 0.2,
            waveform_samples: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbmSection {
    /// `auto`, `interior`, `zero` or `pi`.
    pub center: String,
    /// Overrides of the normalized coefficients.
    pub epsilon: Option<f64>,
    pub zeta: Option<f64>,
    pub b: Option<f64>,
    pub s_min: f64,
    pub s_max: f64,
    pub n: usize,
    pub backbone_amplitude_max: f64,
    pub n_backbone: usize,
}

impl Default for HbmSection {
    fn default() -> Self {
        Self {
            center: "auto".into(),
            epsilon: None,
            zeta: None,
            b: None,
            s_min: 0.5,
            s_max: 1.5,
            n: 401,
            backbone_amplitude_max: 1.0,
            n_backbone: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelnikovSection {
    /// `auto`, `duffing`, `pendulum` or `soft-cubic`.
    pub variant: String,
    /// `closed-form` or `continued`.
    pub orbit: String,
    /// Any of `numeric`, `derived`, `r1`, `r2`, `r3`.
    pub methods: Vec<String>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    /// Damping values; empty means `[xi]` when `xi > 0`, else `[0.1, 0.4]`.
    pub xis: Vec<f64>,
}

impl Default for MelnikovSection {
    fn default() -> Self {
        Self {
            variant: "auto".into(),
            orbit: "closed-form".into(),
            methods: vec!["numeric".into(), "derived".into()],
            omega_min: 0.2,
            omega_max: 3.0,
            n_omega: 57,
            xis: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub theta_init: f64,
    pub omega_init: f64,
    pub t_end: f64,
    /// `rk45` or `rk4`.
    pub method: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Fixed step for `rk4`.
    pub h: f64,
    /// Uniform output spacing; `None` records every accepted step.
    pub sample_interval: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            theta_init: 0.5,
            omega_init: 0.0,
            t_end: 100.0,
            method: "rk45".into(),
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h: 1e-3,
            sample_interval: Some(0.05),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `full` or `cubic`.
    pub system: String,
    pub center: String,
    pub epsilon: Option<f64>,
    pub zeta: Option<f64>,
    pub b: Option<f64>,
    pub s_min: f64,
    pub s_max: f64,
    pub n_steps: usize,
    pub steady_tol: f64,
    pub min_periods: usize,
    pub max_periods: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            system: "full".into(),
            center: "auto".into(),
            epsilon: None,
            zeta: None,
            b: None,
            s_min: 0.8,
            s_max: 1.2,
            n_steps: 81,
            steady_tol: 1e-3,
            min_periods: 40,
            max_periods: 600,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovSection {
    pub theta_init: f64,
    pub omega_init: f64,
    /// Extra starts drawn around the first one from the seeded generator.
    pub n_starts: usize,
    pub horizon: f64,
    pub renorm_interval: f64,
    pub discard_periods: usize,
    pub d0: f64,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        Self {
            theta_init: 0.5,
            omega_init: 0.0,
            n_starts: 1,
            horizon: 2000.0,
            renorm_interval: 1.0,
            discard_periods: 200,
            d0: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareSection {
    pub theta_init: f64,
    pub omega_init: f64,
    pub n_points: usize,
    pub discard: usize,
    pub cluster_tol: f64,
}

impl Default for PoincareSection {
    fn default() -> Self {
        Self {
            theta_init: 0.5,
            omega_init: 0.0,
            n_points: 300,
            discard: 200,
            cluster_tol: 1e-3,
        }
    }
}

/// Values given on the command line; `Some` entries win over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub xi: Option<f64>,
    pub m0: Option<f64>,
    pub omega0: Option<f64>,
    pub seed: Option<u64>,
    /// `key=value` or `section.key=value`, values in TOML syntax.
    pub set: Vec<String>,
}

impl RunConfig {
    /// Parse a TOML document and check every key against the known table.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("malformed config: {}", e.message())))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, CliError> {
        check_keys(&table)?;
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("invalid config: {}", e.message())))
    }

    /// File (if any), then `--set`, then the parameter flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("malformed config {}: {}", path.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for item in &overrides.set {
            apply_set(&mut table, item)?;
        }
        let mut cfg = Self::from_table(table)?;
        let o = overrides;
        cfg.alpha = o.alpha.or(cfg.alpha);
        cfg.beta = o.beta.unwrap_or(cfg.beta);
        cfg.gamma = o.gamma.unwrap_or(cfg.gamma);
        cfg.kappa = o.kappa.unwrap_or(cfg.kappa);
        cfg.xi = o.xi.unwrap_or(cfg.xi);
        cfg.m0 = o.m0.unwrap_or(cfg.m0);
        cfg.omega0 = o.omega0.unwrap_or(cfg.omega0);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        Ok(cfg)
    }

    /// Validated model parameters; `alpha` has no default.
    pub fn params(&self) -> Result<Params, CliError> {
        let alpha = self
            .alpha
            .ok_or_else(|| CliError::Config("missing required key `alpha`".into()))?;
        let p = Params {
            alpha,
            beta: self.beta,
            gamma: self.gamma,
            kappa: self.kappa,
            xi: self.xi,
            m_big0: self.m0,
            omega_big0: self.omega0,
            phi: self.phi,
        };
        p.validate().map_err(CliError::from)?;
        Ok(p)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn apply_set(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    match key.split_once('.') {
        Some((section, field)) => {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let inner = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("`{section}` is not a section")))?;
            inner.insert(field.to_string(), value);
        }
        None => {
            table.insert(key.to_string(), value);
        }
    }
    Ok(())
}

fn nearest<'a>(key: &str, candidates: impl Iterator<Item = &'a String>) -> Option<&'a String> {
    candidates.min_by_key(|c| strsim::levenshtein(key, c))
}

fn unknown(key: &str, scope: &str, known: &serde_json::Map<String, Value>) -> CliError {
    let hint = nearest(key, known.keys())
        .map(|k| format!("; nearest valid key is `{k}`"))
        .unwrap_or_default();
    CliError::Config(format!("unknown key `{key}` in {scope}{hint}"))
}

fn check_keys(table: &toml::Table) -> Result<(), CliError> {
    let Value::Object(known) = RunConfig::default().to_json() else {
        unreachable!("config serializes to an object")
    };
    for (key, value) in table {
        let Some(spec) = known.get(key) else {
            return Err(unknown(key, "the top level", &known));
        };
        if let (Value::Object(fields), toml::Value::Table(inner)) = (spec, value) {
            for k in inner.keys() {
                if !fields.contains_key(k) {
                    return Err(unknown(k, &format!("[{key}]"), fields));
                }
            }
        }
    }
    Ok(())
}

/// Where a run writes when `--out` is absent.
pub fn default_out_dir(command: &str) -> PathBuf {
    PathBuf::from("clickdyn-out").join(command)
}
