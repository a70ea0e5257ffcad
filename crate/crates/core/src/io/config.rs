//! Run configuration: the representation, the cocycle and the numeric knobs.

use crate::error::{Error, Result};
use crate::group::{Cocycle, Representation};
use crate::lorentz::{translation_along, Isom, MinkVec};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_SCHEMA: &str = "margulis-config/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub generators: Vec<GeneratorSpec>,
    pub cocycle: CocycleSpec,
    #[serde(default)]
    pub knobs: Knobs,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    #[serde(flatten)]
    pub form: GeneratorForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorForm {
    /// Rows of an SL(2,R) matrix.
    Matrix([[f64; 2]; 2]),
    /// Translation by `length` along the geodesic from the ideal point at angle
    /// `from` to the one at angle `to` (radians, unit circle of the disk).
    Axis { from: f64, to: f64, length: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CocycleSpec {
    /// u(gamma_i) per generator, in (x, y, z) coordinates of R^{2,1}.
    Values(Vec<[f64; 3]>),
    /// u(gamma) = X - Ad(gamma) X.
    Coboundary([f64; 3]),
    /// Per-generator derivative of translation length.
    LengthDerivative(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Word length of the Margulis invariant scan.
    pub word_depth: usize,
    /// Word length used for the core radius estimate of the domain.
    pub domain_depth: usize,
    pub h: f64,
    /// Truncation radius; absent means core radius plus one.
    pub radius: Option<f64>,
    pub delta: f64,
    pub witness_n: u32,
    pub ping_pong_samples: usize,
    pub pair_factor: f64,
    pub tight_tol: f64,
    pub solver_tol: f64,
    pub solver_max_iter: u32,
    pub reg: f64,
    /// Allowed |k_star - k_alpha| when reconciling the two estimates.
    pub reconcile_tol: f64,
    pub probes: usize,
    pub sigma_points: usize,
    /// Section parameter used for Pi.
    pub pi_t: f64,
    pub pi_tol: f64,
    pub varpi_tol: f64,
    /// Decreasing t values of the transition tables.
    pub t_grid: Vec<f64>,
    /// t values of the section Lipschitz table.
    pub lip_grid: Vec<f64>,
    pub thetas: Vec<f64>,
    pub metric_thetas: Vec<f64>,
    pub grid_points: usize,
    pub metric_points: usize,
    pub h_fd: f64,
    pub metric_step: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            word_depth: 8,
            domain_depth: 4,
            h: 0.1,
            radius: None,
            delta: 1e-3,
            witness_n: 40,
            ping_pong_samples: 64,
            pair_factor: 3.0,
            tight_tol: 1e-4,
            solver_tol: 1e-8,
            solver_max_iter: 200,
            reg: 1e-6,
            reconcile_tol: 0.1,
            probes: 100,
            sigma_points: 50,
            pi_t: 0.1,
            pi_tol: 1e-10,
            varpi_tol: 1e-12,
            t_grid: vec![0.2, 0.1, 0.05, 0.025],
            lip_grid: (1..=10).map(|i| 0.02 * i as f64).collect(),
            thetas: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            metric_thetas: vec![-1.0, 0.0, 1.5],
            grid_points: 8,
            metric_points: 4,
            h_fd: 1e-4,
            metric_step: 1e-3,
        }
    }
}

impl Knobs {
    fn validate(&self) -> Result<()> {
        let pos = [
            ("h", self.h),
            ("delta", self.delta),
            ("pair_factor", self.pair_factor),
            ("tight_tol", self.tight_tol),
            ("solver_tol", self.solver_tol),
            ("reg", self.reg),
            ("reconcile_tol", self.reconcile_tol),
            ("pi_t", self.pi_t),
            ("pi_tol", self.pi_tol),
            ("varpi_tol", self.varpi_tol),
            ("h_fd", self.h_fd),
            ("metric_step", self.metric_step),
            ("radius", self.radius.unwrap_or(1.0)),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("knobs.{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("word_depth", self.word_depth),
            ("domain_depth", self.domain_depth),
            ("witness_n", self.witness_n as usize),
            ("ping_pong_samples", self.ping_pong_samples),
            ("solver_max_iter", self.solver_max_iter as usize),
            ("grid_points", self.grid_points),
            ("metric_points", self.metric_points),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("knobs.{name} must be positive")));
            }
        }
        for (name, g) in [("t_grid", &self.t_grid), ("lip_grid", &self.lip_grid)] {
            if g.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(Error::Config(format!("knobs.{name} entries must be positive")));
            }
        }
        if self.t_grid.len() < 2 || self.t_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("knobs.t_grid must hold at least two strictly decreasing values".into()));
        }
        Ok(())
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("at {}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!("schema: expected {CONFIG_SCHEMA:?}, got {:?}", self.schema)));
        }
        if self.generators.is_empty() {
            return Err(Error::Config("generators: at least one generator is required".into()));
        }
        for (i, g) in self.generators.iter().enumerate() {
            if self.generators[..i].iter().any(|o| o.name == g.name) {
                return Err(Error::Config(format!("generators[{i}]: duplicate name {:?}", g.name)));
            }
            g.isom().map_err(|e| Error::Config(format!("generators[{i}] ({}): {e}", g.name)))?;
        }
        let rank = self.generators.len();
        let n = match &self.cocycle {
            CocycleSpec::Values(v) => v.len(),
            CocycleSpec::LengthDerivative(v) => v.len(),
            CocycleSpec::Coboundary(_) => rank,
        };
        if n != rank {
            return Err(Error::Config(format!("cocycle: {n} values for {rank} generators")));
        }
        self.knobs.validate()
    }

    pub fn representation(&self) -> Result<Representation> {
        Representation::new(self.generators.iter().map(GeneratorSpec::isom).collect::<Result<_>>()?)
    }

    pub fn cocycle(&self, rep: &Representation) -> Result<Cocycle> {
        match &self.cocycle {
            CocycleSpec::Values(v) => Ok(Cocycle::new(v.iter().map(|a| MinkVec::from_array(*a)).collect())),
            CocycleSpec::Coboundary(x) => Ok(Cocycle::coboundary(rep, MinkVec::from_array(*x))),
            CocycleSpec::LengthDerivative(l) => Cocycle::length_derivative(rep, l),
        }
    }

    /// Sets a knob (or `seed`) from a command-line `key=value`; the value is
    /// parsed as JSON, falling back to a string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v: serde_json::Value =
            serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        if key == "seed" {
            self.seed = serde_json::from_value(v).map_err(|e| Error::Config(format!("seed: {e}")))?;
            return Ok(());
        }
        let mut knobs = serde_json::to_value(&self.knobs)?;
        let map = knobs.as_object_mut().expect("knobs serialize to an object");
        if !map.contains_key(key) {
            return Err(Error::Config(format!("unknown knob {key:?}")));
        }
        map.insert(key.to_string(), v);
        self.knobs = serde_json::from_value(knobs).map_err(|e| Error::Config(format!("knobs.{key}: {e}")))?;
        self.knobs.validate()
    }

    /// sha256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}

impl GeneratorSpec {
    pub fn isom(&self) -> Result<Isom> {
        match &self.form {
            GeneratorForm::Matrix(r) => {
                let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
                if !det.is_finite() || (det - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("generator {:?} has determinant {det}, expected 1", self.name)));
                }
                Isom::from_rows(*r)
            }
            GeneratorForm::Axis { from, to, length } => translation_along(*from, *to, *length),
        }
    }
}

pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Config::from_json(&text)
}
