//! Cascades of scaling factors, the iterated energies and the minimal extension.
//!
//! Factors are stored per level: `factors[m][w]` is the factor of the word with
//! index `w` and length `m`. They satisfy `factor(empty) = 1` and
//! `factor(w i) = factor(w) * theta_bar(factor(w) * v o psi_w |V(0))` for every
//! letter `i`, which is the composition law unrolled from the front.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::renorm::Renormalizer;
use crate::topology::{osc, LevelFunction, Word};

/// Per-word factors for words of length `0..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCascade {
    sigma: f64,
    maps: usize,
    factors: Vec<Vec<f64>>,
}

impl ThetaCascade {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn depth(&self) -> usize {
        self.factors.len() - 1
    }

    pub fn level_factors(&self, m: usize) -> &[f64] {
        &self.factors[m]
    }

    pub fn factor(&self, word: &Word) -> Option<f64> {
        self.factors.get(word.len()).map(|f| f[word.index(self.maps)])
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::HypothesisViolation(format!("sigma must be positive, got {sigma}")))
    }
}

/// Boundary values `v o psi_w |V(0)` of every `m`-cell.
fn cell_values(renorm: &Renormalizer, v: &LevelFunction, m: usize) -> Result<Vec<Vec<f64>>> {
    let fractal = renorm.fractal();
    let n = fractal.boundary_size();
    (0..fractal.maps().pow(m as u32))
        .map(|w| {
            let mut g = vec![0.0; n];
            fractal.cell_boundary_values(v, m, w, &mut g)?;
            Ok(g)
        })
        .collect()
}

fn scale(cells: &[Vec<f64>], factors: &[f64]) -> Vec<Vec<f64>> {
    cells
        .iter()
        .zip(factors)
        .map(|(g, &f)| g.iter().map(|x| x * f).collect())
        .collect()
}

/// Scaled boundary values `factor * v o psi_w |V(0)` of every `m`-cell.
fn scaled_traces(renorm: &Renormalizer, v: &LevelFunction, m: usize, factors: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(scale(&cell_values(renorm, v, m)?, factors))
}

/// Factors of the next level from the scaling roots of the current one.
fn next_factors(renorm: &Renormalizer, sigma: f64, traces: &[Vec<f64>], factors: &[f64]) -> Result<Vec<f64>> {
    let k = renorm.fractal().maps();
    let roots: Vec<f64> = traces
        .par_iter()
        .map(|g| renorm.theta_bar(sigma, g).map(|t| t.theta))
        .collect::<Result<_>>()?;
    Ok(factors
        .iter()
        .zip(&roots)
        .flat_map(|(&f, &r)| std::iter::repeat_n(f * r, k))
        .collect())
}

/// Factors for all words of length at most `depth`. Length-`n` factors only
/// read `v` on `V(n-1)`, so `depth` may exceed the level of `v` by one.
pub fn build_cascade(renorm: &Renormalizer, sigma: f64, v: &LevelFunction, depth: usize) -> Result<ThetaCascade> {
    check_sigma(sigma)?;
    if depth > v.level() + 1 {
        return Err(Error::InsufficientDepth { depth: v.level(), required: depth - 1 });
    }
    let mut factors = vec![vec![1.0]];
    for m in 0..depth {
        let traces = scaled_traces(renorm, v, m, &factors[m])?;
        let next = next_factors(renorm, sigma, &traces, &factors[m])?;
        factors.push(next);
    }
    Ok(ThetaCascade { sigma, maps: renorm.fractal().maps(), factors })
}

fn sum_energy(renorm: &Renormalizer, sigma: f64, traces: &[Vec<f64>], m: usize) -> f64 {
    let e = renorm.energy();
    traces.iter().map(|g| e.eval(g)).sum::<f64>() / sigma.powi(m as i32)
}

/// `E~_n(v) = sigma^-n sum_{|w|=n} E(factor(w) v o psi_w |V(0))`.
pub fn energy_at_level(renorm: &Renormalizer, sigma: f64, v: &LevelFunction, n: usize) -> Result<f64> {
    if n > v.level() {
        return Err(Error::WordTooLong { word: n, level: v.level() });
    }
    let cascade = build_cascade(renorm, sigma, v, n)?;
    let traces = scaled_traces(renorm, v, n, &cascade.factors[n])?;
    Ok(sum_energy(renorm, sigma, &traces, n))
}

/// `E~_0(v), ..., E~_n(v)` for `v` on `V(n)`, sharing one cascade.
pub fn energies(renorm: &Renormalizer, sigma: f64, v: &LevelFunction) -> Result<Vec<f64>> {
    let n = v.level();
    let cascade = build_cascade(renorm, sigma, v, n)?;
    (0..=n)
        .map(|m| Ok(sum_energy(renorm, sigma, &scaled_traces(renorm, v, m, &cascade.factors[m])?, m)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtensionOptions {
    /// Accept `sigma > 1`.
    pub allow_unsafe_sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub word: String,
    pub oscillation: f64,
    /// Cascade factor of the cell.
    pub factor: f64,
    /// `E(factor * v o psi_w |V(0))`.
    pub energy: f64,
    /// Scaling root used to refine the cell, absent on the last level.
    pub root: Option<f64>,
    /// Relative residual of that scaling root.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub function: LevelFunction,
    pub energy: f64,
    pub max_oscillation: f64,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone)]
pub struct ExtensionTrace {
    pub sigma: f64,
    pub boundary: Vec<f64>,
    pub boundary_energy: f64,
    pub levels: Vec<LevelRecord>,
}

impl ExtensionTrace {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn last(&self) -> &LevelFunction {
        &self.levels[self.depth()].function
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn max_oscillations(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.max_oscillation).collect()
    }
}

struct Refined {
    root: f64,
    residual: f64,
    values: Vec<f64>,
}

/// Level-by-level energy-preserving extension of `u` to `V(depth)`.
pub fn minimal_extension(
    renorm: &Renormalizer,
    sigma: f64,
    u: &[f64],
    depth: usize,
    options: ExtensionOptions,
) -> Result<ExtensionTrace> {
    check_sigma(sigma)?;
    if sigma > 1.0 && !options.allow_unsafe_sigma {
        return Err(Error::HypothesisViolation(format!(
            "sigma = {sigma} is outside (0, 1]; pass the unsafe-sigma override to proceed"
        )));
    }
    let fractal = renorm.fractal();
    let k = fractal.maps();
    let level1 = fractal.level(1);
    let mut v = fractal.boundary_function(u)?;
    let boundary_energy = renorm.energy().eval(u);
    let cfg = renorm.config();
    let unit_budget = 10.0 * cfg.tol_coord.max(cfg.tol_theta) * boundary_energy.abs();

    let mut factors = vec![1.0];
    let mut levels = Vec::with_capacity(depth + 1);
    for m in 0..=depth {
        let raw = cell_values(renorm, &v, m)?;
        let traces = scale(&raw, &factors);
        let energy = sum_energy(renorm, sigma, &traces, m);
        let drift = (energy - boundary_energy).abs();
        let budget = unit_budget * m.max(1) as f64;
        if !(drift <= 100.0 * budget + 1e-14 * boundary_energy.abs()) {
            return Err(Error::ConservationDrift { level: m, drift, budget });
        }

        let refined: Option<Vec<Refined>> = if m < depth {
            Some(
                traces
                    .par_iter()
                    .map(|g| {
                        let h = renorm.choose_h_prime(sigma, g)?;
                        Ok(Refined {
                            root: h.theta.theta,
                            residual: h.theta.relative_residual,
                            values: h.extension.into_values(),
                        })
                    })
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };

        let cells = traces
            .iter()
            .enumerate()
            .map(|(w, g)| CellRecord {
                word: Word::from_index(w, m, k).to_string(),
                oscillation: osc(&raw[w]),
                factor: factors[w],
                energy: renorm.energy().eval(g),
                root: refined.as_ref().map(|r| r[w].root),
                residual: refined.as_ref().map(|r| r[w].residual),
            })
            .collect::<Vec<_>>();
        let max_oscillation = cells.iter().map(|c| c.oscillation).fold(0.0, f64::max);

        let next = match &refined {
            Some(refined) => {
                let set = fractal.level(m + 1);
                let mut values = vec![f64::NAN; set.len()];
                for (old, &id) in set.previous_embedding().iter().enumerate() {
                    values[id] = v.values()[old];
                }
                for (w, r) in refined.iter().enumerate() {
                    let (lo, hi) = raw[w].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                    for i in 0..k {
                        let child = set.cell_ids(w * k + i);
                        for (j, &id) in child.iter().enumerate() {
                            if set.birth_level(id) == m + 1 {
                                let x = r.values[level1.cell_ids(i)[j]] / factors[w];
                                values[id] = x.min(hi).max(lo);
                            }
                        }
                    }
                }
                Some(LevelFunction::new(set, values)?)
            }
            None => None,
        };

        levels.push(LevelRecord { level: m, function: v.clone(), energy, max_oscillation, cells });

        if let (Some(refined), Some(next)) = (refined, next) {
            factors = factors
                .iter()
                .zip(&refined)
                .flat_map(|(&f, r)| std::iter::repeat_n(f * r.root, k))
                .collect();
            v = next;
        }
    }
    Ok(ExtensionTrace { sigma, boundary: u.to_vec(), boundary_energy, levels })
}

/// `E~_n(v)` and `E~_{n+1}(v)` for `v` on `V(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneCheck {
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

pub fn monotone_energy_check(renorm: &Renormalizer, sigma: f64, v: &LevelFunction, tol: f64) -> Result<MonotoneCheck> {
    let top = v.level();
    if top == 0 {
        return Err(Error::InsufficientDepth { depth: 0, required: 1 });
    }
    let e = energies(renorm, sigma, v)?;
    let (lower, upper) = (e[top - 1], e[top]);
    Ok(MonotoneCheck { lower, upper, pass: upper >= lower - tol * lower.abs().max(1.0) })
}

/// `|E~_{n+1}(v) - sigma^-1 sum_i E~_n(theta_bar(v|V(0)) v o psi_i)|` for `v` on `V(n+1)`.
pub fn self_similarity_residual(renorm: &Renormalizer, sigma: f64, v: &LevelFunction) -> Result<f64> {
    let top = v.level();
    if top == 0 {
        return Err(Error::InsufficientDepth { depth: 0, required: 1 });
    }
    let fractal = renorm.fractal();
    let lhs = energy_at_level(renorm, sigma, v, top)?;
    let root = renorm.theta_bar(sigma, &v.boundary_values())?.theta;
    let mut rhs = 0.0;
    for i in 0..fractal.maps() {
        let trace = fractal.cell_trace(v, &Word::new(vec![i], fractal.maps())?)?;
        let scaled: Vec<f64> = trace.values().iter().map(|x| x * root).collect();
        let scaled = LevelFunction::new(Arc::clone(trace.vertices()), scaled)?;
        rhs += energy_at_level(renorm, sigma, &scaled, top - 1)?;
    }
    Ok((lhs - rhs / sigma).abs())
}
