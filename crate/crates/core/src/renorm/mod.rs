//! The one-level renormalization `Lambda_(theta)`, its scaling root and the
//! chosen minimizer.

mod descent;
mod quadratic;
mod theta;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::topology::{osc, Fractal, LevelFunction, LevelVertexSet};

use descent::Geometry;
pub use quadratic::{quadratic_eigen, trace_form, EigenReport};
pub(crate) use quadratic::Schur;
pub use theta::{theta_bar_with, RootSearch};

/// Tolerances and caps shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Coordinate moves below `tol_coord * osc(u)` end the descent.
    pub tol_coord: f64,
    /// Relative residual accepted for the scaling root.
    pub tol_theta: f64,
    /// Cap on coordinate updates per solve.
    pub max_iters: usize,
    pub bracket_growth: f64,
    /// Use the closed form for the scaling root of a homogeneous energy.
    pub use_homogeneity: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_coord: 1e-10,
            tol_theta: 1e-10,
            max_iters: 1_000_000,
            bracket_growth: 2.0,
            use_homogeneity: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("tol_coord", self.tol_coord)?;
        positive("tol_theta", self.tol_theta)?;
        if !(self.bracket_growth > 1.0) || !self.bracket_growth.is_finite() {
            return Err(Error::Config(format!("bracket_growth must exceed 1, got {}", self.bracket_growth)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of minimizing `S_(theta)(E)` over extensions of `u`.
#[derive(Debug, Clone)]
pub struct RenormResult {
    /// `Lambda_(theta)(E)(u)`: the smaller of the two values below.
    pub value: f64,
    pub minimizer: LevelFunction,
    pub minimizer_value: f64,
    /// `(v max min u) min max u`.
    pub clamped: LevelFunction,
    pub clamped_value: f64,
    pub iterations: usize,
    /// Last coordinate move, zero for exact solves.
    pub residual: f64,
}

/// How the scaling root was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMethod {
    Constant,
    Homogeneous,
    Bisection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSolve {
    pub sigma: f64,
    pub theta: f64,
    pub brackets: Vec<(f64, f64)>,
    /// `|Lambda_(theta)(E)(u) - sigma E(u)|`.
    pub residual: f64,
    pub relative_residual: f64,
    pub method: ThetaMethod,
}

/// A chosen element of `H'`: the scaling root and the clamped minimizer at it.
#[derive(Debug, Clone)]
pub struct HPrime {
    pub theta: ThetaSolve,
    pub extension: LevelFunction,
    /// `S_(theta)(E)(extension)`.
    pub value: f64,
}

/// Solver for one fractal and one energy.
#[derive(Debug)]
pub struct Renormalizer {
    fractal: Arc<Fractal>,
    energy: EnergyModel,
    config: SolverConfig,
    level1: Arc<LevelVertexSet>,
    geometry: Geometry,
    schur: Option<Schur>,
    cache: Mutex<HashMap<Vec<u64>, ThetaSolve>>,
}

impl Renormalizer {
    pub fn new(fractal: Arc<Fractal>, energy: EnergyModel, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        if energy.boundary_size() != fractal.boundary_size() {
            return Err(Error::DimensionMismatch {
                expected: fractal.boundary_size(),
                got: energy.boundary_size(),
            });
        }
        let level1 = fractal.level(1);
        let geometry = Geometry::new(&level1);
        let schur = match energy.energy().as_dirichlet() {
            Some(form) => Some(Schur::new(&level1, form)?),
            None => None,
        };
        Ok(Renormalizer {
            fractal,
            energy,
            config,
            level1,
            geometry,
            schur,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn fractal(&self) -> &Arc<Fractal> {
        &self.fractal
    }

    pub fn energy(&self) -> &EnergyModel {
        &self.energy
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn is_exact(&self) -> bool {
        self.schur.is_some()
    }

    fn check_theta(theta: f64) -> Result<()> {
        if theta > 0.0 && theta.is_finite() {
            Ok(())
        } else {
            Err(Error::HypothesisViolation(format!("theta must be positive, got {theta}")))
        }
    }

    fn check_boundary(&self, u: &[f64]) -> Result<()> {
        let n = self.fractal.boundary_size();
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        if let Some(bad) = u.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("boundary value {bad}")));
        }
        Ok(())
    }

    pub(crate) fn total(&self, theta: f64, v: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.fractal.boundary_size()];
        self.geometry.total(self.energy.energy(), theta, v, &mut buf)
    }

    /// `S_(theta)(E)(v) = sum_i E(theta v o psi_i)` for `v` on `V(1)`.
    pub fn s_theta(&self, theta: f64, v: &LevelFunction) -> Result<f64> {
        Self::check_theta(theta)?;
        if v.level() != 1 {
            return Err(Error::LevelMismatch { expected: 1, got: v.level() });
        }
        if v.values().len() != self.level1.len() {
            return Err(Error::DimensionMismatch { expected: self.level1.len(), got: v.values().len() });
        }
        Ok(self.total(theta, v.values()))
    }

    /// `Lambda_(theta)(E)(u)` with its minimizer.
    pub fn lambda_theta(&self, theta: f64, u: &[f64]) -> Result<RenormResult> {
        Self::check_theta(theta)?;
        self.check_boundary(u)?;
        self.solve(theta, u, None)
    }

    fn initial(&self, u: &[f64], warm: Option<&[f64]>) -> Vec<f64> {
        if let Some(w) = warm {
            let mut v = w.to_vec();
            for (&id, &x) in self.geometry.boundary.iter().zip(u) {
                v[id] = x;
            }
            return v;
        }
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        let mut v = vec![mean; self.geometry.len];
        for (&id, &x) in self.geometry.boundary.iter().zip(u) {
            v[id] = x;
        }
        v
    }

    fn solve(&self, theta: f64, u: &[f64], warm: Option<&[f64]>) -> Result<RenormResult> {
        let scale = osc(u);
        let (values, iterations, residual) = if scale == 0.0 {
            (vec![u[0]; self.geometry.len], 0, 0.0)
        } else if let Some(schur) = &self.schur {
            (schur.extend(u, self.geometry.len), 0, 0.0)
        } else {
            let mut v = self.initial(u, warm);
            let out = descent::minimize(self.energy.energy(), &self.geometry, theta, &mut v, scale, &self.config)?;
            (v, out.updates, out.last_move)
        };
        let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let clamped: Vec<f64> = values.iter().map(|&x| x.min(hi).max(lo)).collect();
        let minimizer_value = self.total(theta, &values);
        let clamped_value = self.total(theta, &clamped);
        if !minimizer_value.is_finite() || !clamped_value.is_finite() {
            return Err(Error::NonFinite("renormalized value".into()));
        }
        Ok(RenormResult {
            value: minimizer_value.min(clamped_value),
            minimizer: LevelFunction::new(Arc::clone(&self.level1), values)?,
            minimizer_value,
            clamped: LevelFunction::new(Arc::clone(&self.level1), clamped)?,
            clamped_value,
            iterations,
            residual,
        })
    }

    /// The unique `theta > 0` with `Lambda_(theta)(E)(u) = sigma E(u)`.
    pub fn theta_bar(&self, sigma: f64, u: &[f64]) -> Result<ThetaSolve> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::HypothesisViolation(format!("sigma must be positive, got {sigma}")));
        }
        self.check_boundary(u)?;
        let scale = osc(u);
        if scale == 0.0 {
            let a2 = self.energy.a2().ok_or(Error::MissingA2Metadata)?;
            return Ok(ThetaSolve {
                sigma,
                theta: (sigma / a2.rho).powf(1.0 / a2.p),
                brackets: Vec::new(),
                residual: 0.0,
                relative_residual: 0.0,
                method: ThetaMethod::Constant,
            });
        }
        let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
        let homogeneous = self.energy.energy().homogeneity().filter(|_| self.config.use_homogeneity);
        let key_scale = if homogeneous.is_some() { scale } else { 1.0 };
        let normalized: Vec<f64> = u.iter().map(|x| (x - lo) / key_scale).collect();
        let mut key: Vec<u64> = normalized.iter().map(|x| x.to_bits()).collect();
        key.push(sigma.to_bits());
        if let Some(hit) = self.cache.lock().expect("theta cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let solved = self.theta_uncached(sigma, &normalized, homogeneous)?;
        self.cache.lock().expect("theta cache poisoned").insert(key, solved.clone());
        Ok(solved)
    }

    fn theta_uncached(&self, sigma: f64, u: &[f64], homogeneous: Option<f64>) -> Result<ThetaSolve> {
        let e_u = self.energy.eval(u);
        if !(e_u > 0.0) {
            return Err(Error::HypothesisViolation(format!(
                "energy {e_u} of a nonconstant boundary function is not positive"
            )));
        }
        let target = sigma * e_u;
        if let Some(p) = homogeneous {
            let base = self.solve(1.0, u, None)?;
            if !(base.value > 0.0) {
                return Err(Error::HypothesisViolation("renormalized energy vanishes".into()));
            }
            let theta = (target / base.value).powf(1.0 / p);
            let residual = (self.total(theta, base.clamped.values()) - target).abs();
            return Ok(ThetaSolve {
                sigma,
                theta,
                brackets: Vec::new(),
                residual,
                relative_residual: residual / target,
                method: ThetaMethod::Homogeneous,
            });
        }
        let mut warm: Option<Vec<f64>> = None;
        let search = theta_bar_with(
            |theta| {
                let r = self.solve(theta, u, warm.as_deref())?;
                let value = r.value;
                warm = Some(r.minimizer.into_values());
                Ok(value)
            },
            target,
            &self.config,
        )?;
        Ok(ThetaSolve {
            sigma,
            theta: search.theta,
            brackets: search.brackets,
            residual: search.relative_residual * target,
            relative_residual: search.relative_residual,
            method: ThetaMethod::Bisection,
        })
    }

    /// Deterministic element of `H'_{sigma,E}(u)`: the clamped minimizer at the
    /// scaling root, started from the boundary mean.
    pub fn choose_h_prime(&self, sigma: f64, u: &[f64]) -> Result<HPrime> {
        let theta = self.theta_bar(sigma, u)?;
        let r = self.solve(theta.theta, u, None)?;
        Ok(HPrime { value: r.clamped_value, extension: r.clamped, theta })
    }
}
