//! Sampling audits of the structural axioms an energy is expected to satisfy.
//!
//! Failures are report entries carrying a concrete witness, not errors.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::energy::{Energy, EnergyModel};
use crate::error::{Error, Result};
use crate::renorm::{Renormalizer, SolverConfig};
use crate::topology::{osc, Fractal};

/// Offending input for a failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub u: Vec<f64>,
    /// Second input where the check needs one (pair partner, clamped function,
    /// direction).
    pub w: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomEntry {
    pub name: &'static str,
    pub pass: bool,
    pub samples: usize,
    /// Largest violation seen, in the check's own units (zero or negative when
    /// everything passed).
    pub worst: f64,
    pub witness: Option<Witness>,
}

impl AxiomEntry {
    fn new(name: &'static str) -> Self {
        AxiomEntry { name, pass: true, samples: 0, worst: f64::NEG_INFINITY, witness: None }
    }

    fn record(&mut self, excess: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if excess > self.worst {
            self.worst = excess;
            if excess > 0.0 {
                self.pass = false;
                self.witness = Some(witness());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub entries: Vec<AxiomEntry>,
    /// Smallest `E(u) / Osc(u)` seen on the slice `u(P1) = 0`, `Osc(u) = 1`.
    pub coercivity: f64,
}

impl AxiomReport {
    pub fn entry(&self, name: &str) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Point on the slice `u(P1) = 0`, `Osc(u) = 1`.
pub fn slice_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut u = normal_vec(rng, n);
        u[0] = 0.0;
        let o = osc(&u);
        if o > 1e-9 {
            return u.into_iter().map(|x| x / o).collect();
        }
    }
}

/// Boundary functions used by the audits: indicators, a few structured
/// patterns with repeated values, then seeded Gaussian samples at several scales.
fn probes(n: usize, budget: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    out.push((0..n).map(|i| [0.0, 1.0].get(i).copied().unwrap_or(-0.25)).collect());
    out.push((0..n).map(|i| i as f64).collect());
    let scales = [1e-2, 1.0, 10.0];
    for s in 0..budget {
        let scale = scales[s % scales.len()];
        out.push(normal_vec(rng, n).into_iter().map(|x| x * scale).collect());
    }
    out
}

fn clamp(u: &[f64], a: f64, b: f64) -> Vec<f64> {
    u.iter().map(|&x| x.min(a).max(b)).collect()
}

/// Samples Q1 to Q4 together with superadditivity `E(tu) >= t E(u)` for
/// `t >= 1` and the coercivity constant on the unit-oscillation slice.
pub fn audit_axioms(e: &dyn Energy, budget: usize, seed: u64) -> AxiomReport {
    let n = e.boundary_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us = probes(n, budget.max(1), &mut rng);
    let rel = |x: f64| 1e-9 * x.abs().max(1.0);

    let mut q1 = AxiomEntry::new("Q1 convexity");
    let mut q2 = AxiomEntry::new("Q2 symmetry and translation");
    let mut q3 = AxiomEntry::new("Q3 zero exactly on constants");
    let mut q4 = AxiomEntry::new("Q4 clamping");
    let mut superadd = AxiomEntry::new("superadditivity");
    let mut coercive = AxiomEntry::new("coercivity");

    for (idx, u) in us.iter().enumerate() {
        let eu = e.eval(u);
        let partner = &us[(idx * 7 + 3) % us.len()];
        let ew = e.eval(partner);
        let mid: Vec<f64> = u.iter().zip(partner).map(|(a, b)| 0.5 * (a + b)).collect();
        let excess = e.eval(&mid) - 0.5 * (eu + ew);
        q1.record(excess - 1e-12 * (eu + ew).abs().max(1.0), || Witness {
            u: u.clone(),
            w: Some(partner.clone()),
            detail: format!("midpoint energy exceeds the chord by {excess:e}"),
        });

        let c: f64 = rng.random_range(-5.0..5.0);
        for sign in [1.0, -1.0] {
            let shifted: Vec<f64> = u.iter().map(|x| sign * x + c).collect();
            let diff = (e.eval(&shifted) - eu).abs();
            q2.record(diff - rel(eu), || Witness {
                u: u.clone(),
                w: Some(shifted.clone()),
                detail: format!("E changes by {diff:e} under u -> {sign} u + {c}"),
            });
        }

        let constant = vec![c; n];
        let e0 = e.eval(&constant);
        q3.record(e0.abs() - 1e-12, || Witness {
            u: constant.clone(),
            w: None,
            detail: format!("constant function has energy {e0:e}"),
        });
        if osc(u) > 0.0 {
            q3.record(if eu > 0.0 { -eu } else { 1.0 }, || Witness {
                u: u.clone(),
                w: None,
                detail: format!("nonconstant function has energy {eu:e}"),
            });
        }

        // Clamp levels: the coordinates of u themselves and a random pair.
        let mut levels: Vec<f64> = u.clone();
        let (lo, hi) = (u.iter().copied().fold(f64::INFINITY, f64::min), u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let span = (hi - lo).max(1e-3);
        levels.push(rng.random_range(lo - 0.1 * span..hi + 0.1 * span));
        levels.push(rng.random_range(lo - 0.1 * span..hi + 0.1 * span));
        for &a in &levels {
            for &b in &levels {
                if a < b {
                    continue;
                }
                let cl = clamp(u, a, b);
                let ec = e.eval(&cl);
                let moved = u.iter().zip(&cl).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
                let excess = if moved >= 1e-6 {
                    // Strict decrease required.
                    ec - (eu - 1e-12 * eu.abs())
                } else {
                    ec - eu - 1e-12 * eu.abs().max(1e-300)
                };
                q4.record(excess, || Witness {
                    u: u.clone(),
                    w: Some(cl.clone()),
                    detail: format!("clamping to [{b}, {a}] gives energy {ec} against {eu}"),
                });
            }
        }

        for t in [1.5, 2.0, 5.0, 10.0] {
            let tu: Vec<f64> = u.iter().map(|x| t * x).collect();
            let etu = e.eval(&tu);
            let excess = t * eu - etu - 1e-12 * etu.abs().max(1.0);
            superadd.record(excess, || Witness {
                u: u.clone(),
                w: Some(tu.clone()),
                detail: format!("E({t} u) = {etu} is below {t} E(u) = {}", t * eu),
            });
        }
    }

    let mut coercivity = f64::INFINITY;
    for _ in 0..budget.max(1) * 4 {
        let u = slice_sample(&mut rng, n);
        let eu = e.eval(&u);
        coercivity = coercivity.min(eu);
        coercive.record(if eu > 0.0 { -eu } else { 1.0 }, || Witness {
            u: u.clone(),
            w: None,
            detail: format!("unit-oscillation function has energy {eu:e}"),
        });
    }

    AxiomReport { entries: vec![q1, q2, q3, q4, superadd, coercive], coercivity }
}

/// One-sided derivative `d+/dt E(u + t v)` at zero from forward differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneSided {
    /// Forward differences at steps 1e-4, 1e-6, 1e-8.
    pub differences: [f64; 3],
    /// Richardson combination of the two coarser steps.
    pub extrapolated: f64,
    /// Whether the three differences agree to first order.
    pub consistent: bool,
}

pub fn one_sided_derivative(e: &dyn Energy, u: &[f64], v: &[f64]) -> OneSided {
    let e0 = e.eval(u);
    let fd = |h: f64| {
        let moved: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + h * b).collect();
        (e.eval(&moved) - e0) / h
    };
    let differences = [fd(1e-4), fd(1e-6), fd(1e-8)];
    let extrapolated = (100.0 * differences[1] - differences[0]) / 99.0;
    let scale = differences.iter().fold(1.0_f64, |m, d| m.max(d.abs()));
    let consistent = (differences[0] - differences[1]).abs() <= 1e-2 * scale
        && (differences[1] - differences[2]).abs() <= 1e-4 * scale;
    OneSided { differences, extrapolated, consistent }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Q5Report {
    pub pass: bool,
    pub samples: usize,
    /// Largest one-sided derivative seen.
    pub worst: f64,
    pub witness: Option<Witness>,
    /// Constant samples skipped as vacuous.
    pub vacuous: usize,
}

/// Samples `u` and directions `v` that are nonnegative on the argmin of `u` and
/// zero elsewhere, checking `d+/dt E(u + t v) <= 0`.
pub fn audit_q5(e: &dyn Energy, budget: usize, seed: u64) -> Q5Report {
    let n = e.boundary_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut us = probes(n, budget.max(1), &mut rng);
    // Ties at the minimum make the direction set larger.
    for _ in 0..budget.max(1) / 2 + 1 {
        let mut u = normal_vec(&mut rng, n);
        let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
        let j = rng.random_range(0..n);
        u[j] = lo;
        us.push(u);
    }
    us.push(vec![0.5; n]);

    let mut report = Q5Report { pass: true, samples: 0, worst: f64::NEG_INFINITY, witness: None, vacuous: 0 };
    for u in &us {
        if osc(u) == 0.0 {
            report.vacuous += 1;
            continue;
        }
        let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
        let at_min: Vec<bool> = u.iter().map(|&x| x == lo).collect();
        let mut directions = vec![at_min.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect::<Vec<f64>>()];
        directions.push(at_min.iter().map(|&m| if m { rng.random_range(0.0..1.0) } else { 0.0 }).collect());
        for v in directions {
            let d = one_sided_derivative(e, u, &v);
            let value = if d.consistent { d.extrapolated } else { d.differences[1] };
            let scale = 1e-6 * e.eval(u).max(1e-12);
            report.samples += 1;
            if value > report.worst {
                report.worst = value;
            }
            if value > scale && report.pass {
                report.pass = false;
                report.witness = Some(Witness {
                    u: u.clone(),
                    w: Some(v.clone()),
                    detail: format!("one-sided derivative {value:e} is positive"),
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Report {
    pub p: f64,
    pub rho: f64,
    /// `max |E~(t u) - t^p E~(u)| / (t^p E~(u))`.
    pub homogeneity_residual: f64,
    /// `max |Lambda_1(E~)(u) - rho E~(u)| / E~(u)`.
    pub eigen_residual: f64,
    /// `|E(t u)/E~(t u) - 1|` at `t = 1e-1, ..., 1e-6` for the worst sample.
    pub ratio_deviation: Vec<f64>,
    pub pass: bool,
}

/// Checks the reference-form metadata of `model` on `samples` seeded inputs.
pub fn audit_a2(fractal: &Arc<Fractal>, model: &EnergyModel, samples: usize, seed: u64) -> Result<A2Report> {
    let meta = model.a2().ok_or(Error::MissingA2Metadata)?;
    let n = model.boundary_size();
    let reference = EnergyModel::new(Arc::clone(&meta.reference), "reference");
    let renorm = Renormalizer::new(Arc::clone(fractal), reference, SolverConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut homogeneity_residual: f64 = 0.0;
    let mut eigen_residual: f64 = 0.0;
    let mut ratio_deviation = vec![0.0; 6];
    for _ in 0..samples.max(1) {
        let u = slice_sample(&mut rng, n);
        let base = meta.reference.eval(&u);
        for t in [0.5, 2.0, 3.0] {
            let tu: Vec<f64> = u.iter().map(|x| t * x).collect();
            let expect = t.powf(meta.p) * base;
            homogeneity_residual = homogeneity_residual.max((meta.reference.eval(&tu) - expect).abs() / expect);
        }
        let lambda = renorm.lambda_theta(1.0, &u)?.value;
        eigen_residual = eigen_residual.max((lambda - meta.rho * base).abs() / base);
        for (slot, k) in ratio_deviation.iter_mut().zip(1..=6) {
            let t = 10f64.powi(-k);
            let tu: Vec<f64> = u.iter().map(|x| t * x).collect();
            *slot = f64::max(*slot, (model.eval(&tu) / meta.reference.eval(&tu) - 1.0).abs());
        }
    }
    let pass = homogeneity_residual <= 1e-9
        && eigen_residual <= 1e-8
        && ratio_deviation[5] <= 1e-3
        && ratio_deviation[5] <= ratio_deviation[0];
    Ok(A2Report { p: meta.p, rho: meta.rho, homogeneity_residual, eigen_residual, ratio_deviation, pass })
}
