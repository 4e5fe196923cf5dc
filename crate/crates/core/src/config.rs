//! Energy and experiment descriptions as read from the command line or TOML.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{make_dirichlet, make_p_edge, make_perturbed, pair_count, EdgePower, EnergyModel};
use crate::error::{Error, Result};
use crate::renorm::{quadratic_eigen, SolverConfig};
use crate::topology::{Fractal, FractalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Dirichlet,
    PEdge,
    Perturbed,
}

/// Energy family plus parameters. Coefficients default to one on every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    /// Exponent of `p_edge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Exponent of the edge bump added by `perturbed` (default 4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_coeffs: Option<Vec<f64>>,
}

impl Default for EnergySpec {
    fn default() -> Self {
        EnergySpec { family: Family::Dirichlet, coeffs: None, p: None, bump: None, bump_coeffs: None }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number `{x}`: {e}"))))
        .collect()
}

impl FromStr for EnergySpec {
    type Err = Error;

    /// `family key=value ...`, for example `p_edge p=4` or
    /// `perturbed bump=4 coeffs=1,1,1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let family = match words.next() {
            Some("dirichlet") => Family::Dirichlet,
            Some("p_edge") => Family::PEdge,
            Some("perturbed") => Family::Perturbed,
            other => return Err(Error::Config(format!("unknown energy family {other:?}"))),
        };
        let mut spec = EnergySpec { family, ..EnergySpec::default() };
        for word in words {
            let (key, value) = word
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{word}`")))?;
            let number = || value.parse::<f64>().map_err(|e| Error::Config(format!("bad {key}: {e}")));
            match key {
                "p" => spec.p = Some(number()?),
                "bump" => spec.bump = Some(number()?),
                "coeffs" => spec.coeffs = Some(parse_list(value)?),
                "bump_coeffs" => spec.bump_coeffs = Some(parse_list(value)?),
                _ => return Err(Error::Config(format!("unknown energy parameter `{key}`"))),
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for EnergySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            Family::Dirichlet => "dirichlet",
            Family::PEdge => "p_edge",
            Family::Perturbed => "perturbed",
        };
        write!(f, "{name}")?;
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        if let Some(p) = self.p {
            write!(f, " p={p}")?;
        }
        if let Some(b) = self.bump {
            write!(f, " bump={b}")?;
        }
        if let Some(c) = &self.coeffs {
            write!(f, " coeffs={}", list(c))?;
        }
        if let Some(c) = &self.bump_coeffs {
            write!(f, " bump_coeffs={}", list(c))?;
        }
        Ok(())
    }
}

impl EnergySpec {
    /// Builds the model. Quadratic forms that are eigenforms of the fractal get
    /// their eigenvalue attached as reference metadata.
    pub fn build(&self, fractal: &Fractal) -> Result<EnergyModel> {
        let n = fractal.boundary_size();
        let coeffs = self.coeffs.clone().unwrap_or_else(|| vec![1.0; pair_count(n)]);
        if coeffs.len() != pair_count(n) {
            return Err(Error::DimensionMismatch { expected: pair_count(n), got: coeffs.len() });
        }
        let quadratic = |coeffs: Vec<f64>| -> Result<EnergyModel> {
            let model = make_dirichlet(n, coeffs, true)?;
            let form = model.energy().as_dirichlet().expect("dirichlet model").clone();
            let eigen = quadratic_eigen(fractal, &form)?;
            if eigen.proportional {
                model.as_eigenform(eigen.rho)
            } else {
                Ok(model)
            }
        };
        match self.family {
            Family::Dirichlet => quadratic(coeffs),
            Family::PEdge => {
                let p = self.p.ok_or_else(|| Error::Config("p_edge needs p".into()))?;
                make_p_edge(n, coeffs, p)
            }
            Family::Perturbed => {
                let base = quadratic(coeffs)?;
                if base.a2().is_none() {
                    return Err(Error::HypothesisViolation(
                        "perturbed energies need a base form that is an eigenform".into(),
                    ));
                }
                let bump_coeffs = self.bump_coeffs.clone().unwrap_or_else(|| vec![1.0; pair_count(n)]);
                let bump = EdgePower::new(n, bump_coeffs, self.bump.unwrap_or(4.0))?;
                make_perturbed(&base, bump)
            }
        }
    }
}

fn default_fractal() -> String {
    "gasket".into()
}

fn default_sigma() -> f64 {
    1.0
}

fn default_depth() -> usize {
    4
}

/// One experiment: where the fractal and energy come from, the boundary data
/// and the solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_fractal")]
    pub fractal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(default)]
    pub energy: EnergySpec,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default)]
    pub unsafe_sigma: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            fractal: default_fractal(),
            spec: None,
            energy: EnergySpec::default(),
            sigma: default_sigma(),
            depth: default_depth(),
            seed: 0,
            u: None,
            unsafe_sigma: false,
            threads: None,
            out: None,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::HypothesisViolation(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// The extension additionally needs `sigma <= 1` unless overridden.
    pub fn validate_extension(&self) -> Result<()> {
        self.validate()?;
        if self.sigma > 1.0 && !self.unsafe_sigma {
            return Err(Error::HypothesisViolation(format!(
                "sigma = {} is outside (0, 1]; pass the unsafe-sigma override to proceed",
                self.sigma
            )));
        }
        Ok(())
    }

    /// The fractal named by `spec` when given, else the built-in `fractal`.
    pub fn load_fractal(&self) -> Result<Arc<Fractal>> {
        let fractal = match &self.spec {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                Fractal::validate(FractalSpec::from_toml_str(&text)?)?
            }
            None => Fractal::builtin(&self.fractal)?,
        };
        Ok(Arc::new(fractal))
    }
}
