//! Run configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cac_core::active::Schedule;
use cac_core::data::{
    generate, load_csv_with, pca_fit_transform, standardize, Dataset, GeneratorSpec, LabelColumn, Scaling,
};
use cac_core::kernel::KernelConfig;
use cac_core::PointSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Generator {
        name: String,
        points: usize,
        /// Generator-specific parameter (gap, noise or separation).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<f64>,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        labels: LabelColumnSpec,
        /// Reduce to this many principal components before clustering.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pca_dim: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumnSpec {
    None,
    Last,
    #[default]
    Auto,
}

impl From<LabelColumnSpec> for LabelColumn {
    fn from(s: LabelColumnSpec) -> Self {
        match s {
            LabelColumnSpec::None => LabelColumn::None,
            LabelColumnSpec::Last => LabelColumn::Last,
            LabelColumnSpec::Auto => LabelColumn::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub sigma: f64,
    /// Data are rescaled to fit `[-kappa n, kappa n]^q` at the largest degree.
    pub kappa: f64,
    /// When false the coordinates are used as given.
    pub standardize: bool,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            kappa: cac_core::data::DEFAULT_KAPPA,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleMode {
    /// Answers from the dataset's own labels.
    #[default]
    Truth,
    /// Answers from an `index,label` file.
    Replay { path: PathBuf },
    /// Answers from a client of the label server.
    Interactive {
        #[serde(default = "default_port")]
        port: u16,
    },
}

fn default_port() -> u16 {
    8080
}

impl FromStr for OracleMode {
    type Err = String;

    /// `truth`, `replay:PATH` or `interactive[:PORT]`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, arg) = s.split_once(':').map_or((s, None), |(k, a)| (k, Some(a)));
        match (kind, arg) {
            ("truth", None) => Ok(OracleMode::Truth),
            ("replay", Some(p)) if !p.is_empty() => Ok(OracleMode::Replay { path: p.into() }),
            ("interactive", None) => Ok(OracleMode::Interactive { port: default_port() }),
            ("interactive", Some(p)) => p
                .parse()
                .map(|port| OracleMode::Interactive { port })
                .map_err(|_| format!("bad port `{p}`")),
            _ => Err(format!("expected truth, replay:PATH or interactive[:PORT], got `{s}`")),
        }
    }
}

impl fmt::Display for OracleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleMode::Truth => write!(f, "truth"),
            OracleMode::Replay { path } => write!(f, "replay:{}", path.display()),
            OracleMode::Interactive { port } => write!(f, "interactive:{port}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessSection {
    /// Permutations per uncertain point for p-values; omitted means none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the generator and the permutation tests.
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub oracle: OracleMode,
    #[serde(default)]
    pub witness: WitnessSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("cac-out")
}

impl RunConfig {
    /// Defaults everywhere except the dataset.
    pub fn new(dataset: DatasetSpec) -> Self {
        Self {
            seed: 0,
            dataset,
            kernel: KernelSection::default(),
            schedule: Schedule::default(),
            oracle: OracleMode::default(),
            witness: WitnessSection::default(),
            output: default_output(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks parameter ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let k = &self.kernel;
        if !(k.sigma > 0.0 && k.sigma.is_finite()) {
            return Err(CliError::Config(format!("sigma must be positive, got {}", k.sigma)));
        }
        if !(k.kappa > 0.0 && k.kappa.is_finite()) {
            return Err(CliError::Config(format!("kappa must be positive, got {}", k.kappa)));
        }
        match &self.dataset {
            DatasetSpec::Generator { points, .. } if *points == 0 => {
                return Err(CliError::Config("generator needs at least one point".into()))
            }
            DatasetSpec::File { path, pca_dim, .. } => {
                require_file(path, "dataset")?;
                if *pca_dim == Some(0) {
                    return Err(CliError::Config("pca_dim must be at least 1".into()));
                }
            }
            _ => {}
        }
        match &self.oracle {
            OracleMode::Replay { path } => require_file(path, "replay")?,
            OracleMode::Interactive { .. } | OracleMode::Truth => {}
        }
        if self.witness.permutations == Some(0) {
            return Err(CliError::Config("witness permutations must be at least 1".into()));
        }
        Ok(())
    }

    /// Loads or generates the dataset and maps it into kernel coordinates.
    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let mut dataset = match &self.dataset {
            DatasetSpec::Generator { name, points, param } => generate(&GeneratorSpec {
                name: name.clone(),
                points: *points,
                seed: self.seed,
                param: *param,
            })
            .map_err(|e| CliError::Config(e.to_string()))?,
            DatasetSpec::File { path, labels, .. } => {
                load_csv_with(path, (*labels).into()).map_err(|e| CliError::Data(e.to_string()))?
            }
        };
        if let DatasetSpec::File { pca_dim: Some(d), .. } = &self.dataset {
            let (_, projected) = pca_fit_transform(&dataset.points, *d).map_err(|e| CliError::Data(e.to_string()))?;
            dataset = dataset.with_points(projected)?;
        }
        let n_max = self.schedule.n_max;
        let (points, scaling) = if self.kernel.standardize {
            let (p, s) = standardize(&dataset.points, n_max, self.kernel.kappa)?;
            (p, Some(s))
        } else {
            (dataset.points.clone(), None)
        };
        let kernel = KernelConfig::new(n_max, dataset.dim(), self.kernel.sigma).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Prepared {
            dataset,
            points,
            scaling,
            kernel,
        })
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} file {} does not exist", path.display())))
    }
}

/// A dataset together with its kernel-coordinate copy.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    /// Coordinates handed to the kernel.
    pub points: PointSet,
    pub scaling: Option<Scaling>,
    /// Kernel at the largest degree of the schedule.
    pub kernel: KernelConfig,
}

impl Prepared {
    /// Maps points given in dataset coordinates into kernel coordinates.
    pub fn to_kernel_coords(&self, points: &PointSet) -> Result<PointSet> {
        match &self.scaling {
            Some(s) => Ok(s.apply(points)?),
            None => Ok(points.clone()),
        }
    }
}
