//! Empirical contraction constants and convergence evidence for extensions.
//!
//! Everything here is a sampled supremum or a fitted rate. Nothing is a proven
//! bound.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::audit::slice_sample;
use crate::cascade::ExtensionTrace;
use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::renorm::Renormalizer;
use crate::topology::{osc, LevelVertexSet};

/// Worst oscillation ratio of the one-level minimizer over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub window: (f64, f64),
    pub alpha: f64,
    pub samples: usize,
    pub witness_u: Vec<f64>,
    pub witness_theta: f64,
}

fn cell_oscillations<'a>(set: &'a LevelVertexSet, v: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    let mut buf = Vec::new();
    (0..set.word_count()).map(move |w| {
        buf.clear();
        buf.extend(set.cell_ids(w).iter().map(|&id| v[id]));
        osc(&buf)
    })
}

/// `max_i Osc(v o psi_i) / Osc(u)` at the minimizer `v` of `Lambda_(theta)`,
/// sampled over `Osc(u)` and `theta` in `[a, b]`.
pub fn estimate_alpha(renorm: &Renormalizer, window: (f64, f64), budget: usize, seed: u64) -> Result<AlphaEstimate> {
    let (a, b) = window;
    if !(a > 0.0 && a <= b && b.is_finite()) {
        return Err(Error::Config(format!("window [{a}, {b}] must satisfy 0 < a <= b")));
    }
    let n = renorm.fractal().boundary_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let indicator: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        for s in [a, b] {
            for t in [a, b] {
                samples.push((indicator.iter().map(|x| x * s).collect(), t));
            }
        }
    }
    for _ in 0..budget {
        let s = rng.random_range(a..=b);
        let t = rng.random_range(a..=b);
        samples.push((slice_sample(&mut rng, n).into_iter().map(|x| x * s).collect(), t));
    }
    let level1 = renorm.fractal().level(1);
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|(u, t)| {
            let r = renorm.lambda_theta(*t, u)?;
            let worst = cell_oscillations(&level1, r.clamped.values()).fold(0.0, f64::max);
            Ok(worst / osc(u))
        })
        .collect::<Result<_>>()?;
    let (idx, &alpha) = ratios
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(AlphaEstimate {
        window,
        alpha,
        samples: samples.len(),
        witness_u: samples[idx].0.clone(),
        witness_theta: samples[idx].1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallOscRow {
    pub oscillation: f64,
    /// `max_i E~(v o psi_i) / E~(u)` over the samples at this scale.
    pub ratio: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallOscReport {
    pub sigma: f64,
    pub rows: Vec<SmallOscRow>,
    /// Largest sampled oscillation from which every smaller scale kept the
    /// ratio below one.
    pub window: Option<f64>,
    pub warning: Option<String>,
}

/// Ratio of reference energies between the cells of the chosen extension and
/// the boundary data, at each oscillation in `scales`.
pub fn estimate_small_osc_decay(
    renorm: &Renormalizer,
    sigma: f64,
    scales: &[f64],
    samples: usize,
    seed: u64,
) -> Result<SmallOscReport> {
    let meta = renorm.energy().a2().ok_or(Error::MissingA2Metadata)?;
    let reference: Arc<dyn Energy> = Arc::clone(&meta.reference);
    let warning = (meta.rho >= 1.0).then(|| {
        format!("eigenvalue {} is not below one; no decay is expected", meta.rho)
    });
    let n = renorm.fractal().boundary_size();
    let level1 = renorm.fractal().level(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut us: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|i| if i == j { scale } else { 0.0 }).collect())
            .collect();
        for _ in 0..samples {
            us.push(slice_sample(&mut rng, n).into_iter().map(|x| x * scale).collect());
        }
        let ratios: Vec<f64> = us
            .par_iter()
            .map(|u| {
                let h = renorm.choose_h_prime(sigma, u)?;
                let v = h.extension.values();
                let mut cell = vec![0.0; n];
                let mut worst: f64 = 0.0;
                for w in 0..level1.word_count() {
                    for (slot, &id) in cell.iter_mut().zip(level1.cell_ids(w)) {
                        *slot = v[id];
                    }
                    worst = worst.max(reference.eval(&cell));
                }
                Ok(worst / reference.eval(u))
            })
            .collect::<Result<_>>()?;
        let (idx, &ratio) = ratios
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        rows.push(SmallOscRow { oscillation: scale, ratio, witness: us[idx].clone() });
    }
    let mut sorted: Vec<&SmallOscRow> = rows.iter().collect();
    sorted.sort_by(|x, y| x.oscillation.total_cmp(&y.oscillation));
    let mut window = None;
    for row in sorted {
        if row.ratio < 1.0 {
            window = Some(row.oscillation);
        } else {
            break;
        }
    }
    Ok(SmallOscReport { sigma, rows, window, warning })
}

/// Largest oscillation of a scaled cell trace `factor(w) v o psi_w |V(0)` over
/// the recorded levels.
pub fn cascade_bound(trace: &ExtensionTrace) -> f64 {
    trace
        .levels
        .iter()
        .flat_map(|l| l.cells.iter().map(|c| c.factor * c.oscillation))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `exp` of the fitted slope of `log(max oscillation)` against level.
    pub rate: f64,
    pub r_squared: f64,
    pub levels: usize,
}

/// Least-squares geometric fit of the per-level maximal cell oscillation.
pub fn convergence_certificate(trace: &ExtensionTrace) -> Result<RateFit> {
    if trace.depth() < 3 {
        return Err(Error::InsufficientDepth { depth: trace.depth(), required: 3 });
    }
    let points: Vec<(f64, f64)> = trace
        .levels
        .iter()
        .filter(|l| l.max_oscillation > 0.0)
        .map(|l| (l.level as f64, l.max_oscillation.ln()))
        .collect();
    if points.len() < 2 {
        return Ok(RateFit { rate: 0.0, r_squared: 1.0, levels: points.len() });
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { rate: slope.exp(), r_squared, levels: points.len() })
}

/// Everything the diagnostics report for one fractal, energy and boundary datum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub alpha: AlphaEstimate,
    pub small_osc: Option<SmallOscReport>,
    pub cascade_bound: f64,
    pub fit: Option<RateFit>,
}

pub fn contraction_report(
    renorm: &Renormalizer,
    trace: &ExtensionTrace,
    window: (f64, f64),
    budget: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let alpha = estimate_alpha(renorm, window, budget, seed)?;
    let small_osc = match estimate_small_osc_decay(renorm, trace.sigma, &[1e-1, 1e-2, 1e-3, 1e-4], budget, seed) {
        Ok(r) => Some(r),
        Err(Error::MissingA2Metadata) => None,
        Err(e) => return Err(e),
    };
    let fit = match convergence_certificate(trace) {
        Ok(f) => Some(f),
        Err(Error::InsufficientDepth { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ContractionReport { alpha, small_osc, cascade_bound: cascade_bound(trace), fit })
}
