//! Convex energies on boundary functions and the built-in families.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::topology::osc;

/// A convex functional on `R^{V(0)}`.
///
/// Implementations must be pure functions of `u`; solvers call them from
/// several threads.
pub trait Energy: Send + Sync + fmt::Debug {
    fn boundary_size(&self) -> usize;

    fn eval(&self, u: &[f64]) -> f64;

    /// Writes the gradient into `out` and returns `true`, or returns `false`
    /// when the energy has no derivative evaluator.
    fn gradient(&self, _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Degree `p` when `E(t u) = t^p E(u)` for all `t > 0`.
    fn homogeneity(&self) -> Option<f64> {
        None
    }

    fn as_dirichlet(&self) -> Option<&DirichletForm> {
        None
    }
}

/// Unordered boundary pairs `(a, b)`, `a < b`, in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
}

pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

fn check_coefficients(n: usize, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != pair_count(n) {
        return Err(Error::DimensionMismatch { expected: pair_count(n), got: coeffs.len() });
    }
    for ((a, b), &c) in pairs(n).zip(coeffs) {
        if !c.is_finite() {
            return Err(Error::NonFinite(format!("coefficient on ({a}, {b})")));
        }
        if c < 0.0 {
            return Err(Error::NegativeCoefficient { a, b, value: c });
        }
    }
    Ok(())
}

/// Whether the positive-coefficient graph on the boundary is connected.
pub fn coefficients_connected(n: usize, coeffs: &[f64]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for ((x, y), &c) in pairs(n).zip(coeffs) {
            if c <= 0.0 {
                continue;
            }
            let other = if x == a { y } else if y == a { x } else { continue };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `E(u) = sum c_{ab} (u_a - u_b)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletForm {
    n: usize,
    coeffs: Vec<f64>,
}

impl DirichletForm {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_coefficients(n, &coeffs)?;
        Ok(DirichletForm { n, coeffs })
    }

    /// All coefficients equal to one.
    pub fn unit(n: usize) -> Self {
        DirichletForm { n, coeffs: vec![1.0; pair_count(n)] }
    }

    /// Skips the sign check. Only useful for building counterexamples.
    pub fn new_unchecked(n: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), pair_count(n));
        DirichletForm { n, coeffs }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        // index of (a, b) in lexicographic pair order
        let idx = a * (2 * self.n - a - 1) / 2 + (b - a - 1);
        self.coeffs[idx]
    }

    pub fn is_irreducible(&self) -> bool {
        coefficients_connected(self.n, &self.coeffs)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DirichletForm { n: self.n, coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }
}

impl Energy for DirichletForm {
    fn boundary_size(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &[f64]) -> f64 {
        pairs(self.n)
            .zip(&self.coeffs)
            .map(|((a, b), c)| c * (u[a] - u[b]).powi(2))
            .sum()
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|g| *g = 0.0);
        for ((a, b), c) in pairs(self.n).zip(&self.coeffs) {
            let g = 2.0 * c * (u[a] - u[b]);
            out[a] += g;
            out[b] -= g;
        }
        true
    }

    fn homogeneity(&self) -> Option<f64> {
        Some(2.0)
    }

    fn as_dirichlet(&self) -> Option<&DirichletForm> {
        Some(self)
    }
}

/// `E(u) = sum c_{ab} |u_a - u_b|^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePower {
    n: usize,
    coeffs: Vec<f64>,
    exponent: f64,
}

impl EdgePower {
    /// Accepts any exponent `q >= 1` so that lower-order bumps can be expressed;
    /// `make_p_edge` enforces `p > 1`.
    pub fn new(n: usize, coeffs: Vec<f64>, exponent: f64) -> Result<Self> {
        check_coefficients(n, &coeffs)?;
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::BadExponent(exponent));
        }
        Ok(EdgePower { n, coeffs, exponent })
    }

    pub fn unit(n: usize, exponent: f64) -> Result<Self> {
        EdgePower::new(n, vec![1.0; pair_count(n)], exponent)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }
}

impl Energy for EdgePower {
    fn boundary_size(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let q = self.exponent;
        pairs(self.n)
            .zip(&self.coeffs)
            .map(|((a, b), c)| c * (u[a] - u[b]).abs().powf(q))
            .sum()
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|g| *g = 0.0);
        let q = self.exponent;
        for ((a, b), c) in pairs(self.n).zip(&self.coeffs) {
            let d = u[a] - u[b];
            // the |d| exponent-one case has a kink at zero; take the zero subgradient there
            let g = if d == 0.0 { 0.0 } else { c * q * d.abs().powf(q - 1.0) * d.signum() };
            out[a] += g;
            out[b] -= g;
        }
        true
    }

    fn homogeneity(&self) -> Option<f64> {
        Some(self.exponent)
    }
}

/// `base + bump`.
#[derive(Debug, Clone)]
pub struct SumEnergy {
    base: Arc<dyn Energy>,
    bump: Arc<dyn Energy>,
}

impl Energy for SumEnergy {
    fn boundary_size(&self) -> usize {
        self.base.boundary_size()
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.base.eval(u) + self.bump.eval(u)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> bool {
        let mut extra = vec![0.0; out.len()];
        if !self.base.gradient(u, out) || !self.bump.gradient(u, &mut extra) {
            return false;
        }
        out.iter_mut().zip(extra).for_each(|(g, e)| *g += e);
        true
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Energy given by an arbitrary closure, with no derivative.
#[derive(Clone)]
pub struct FnEnergy {
    n: usize,
    label: String,
    f: Arc<EvalFn>,
}

impl FnEnergy {
    pub fn new(n: usize, label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnEnergy { n, label: label.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for FnEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnEnergy").field("n", &self.n).field("label", &self.label).finish()
    }
}

impl Energy for FnEnergy {
    fn boundary_size(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &[f64]) -> f64 {
        (self.f)(u)
    }
}

/// Reference-form data: `E/E_ref -> 1` near zero, `E_ref` is `p`-homogeneous
/// and satisfies `Lambda_1(E_ref) = rho E_ref`.
#[derive(Debug, Clone)]
pub struct A2Metadata {
    pub reference: Arc<dyn Energy>,
    pub p: f64,
    pub rho: f64,
    /// Oscillation below which the ratio test is expected to be within 1e-3 of one.
    pub small_osc_radius: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyModel {
    inner: Arc<dyn Energy>,
    a2: Option<A2Metadata>,
    label: String,
}

impl EnergyModel {
    pub fn new(inner: Arc<dyn Energy>, label: impl Into<String>) -> Self {
        EnergyModel { inner, a2: None, label: label.into() }
    }

    pub fn from_energy(e: impl Energy + 'static, label: impl Into<String>) -> Self {
        EnergyModel::new(Arc::new(e), label)
    }

    pub fn energy(&self) -> &dyn Energy {
        self.inner.as_ref()
    }

    pub fn shared(&self) -> Arc<dyn Energy> {
        Arc::clone(&self.inner)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn a2(&self) -> Option<&A2Metadata> {
        self.a2.as_ref()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.inner.eval(u)
    }

    pub fn boundary_size(&self) -> usize {
        self.inner.boundary_size()
    }

    pub fn with_a2(mut self, a2: A2Metadata) -> Self {
        self.a2 = Some(a2);
        self
    }

    /// Records that this (homogeneous) energy is its own reference eigenform
    /// with eigenvalue `rho`.
    pub fn as_eigenform(self, rho: f64) -> Result<Self> {
        let p = self
            .inner
            .homogeneity()
            .ok_or_else(|| Error::HypothesisViolation("eigenform must be homogeneous".into()))?;
        let reference = self.shared();
        Ok(self.with_a2(A2Metadata { reference, p, rho, small_osc_radius: f64::INFINITY }))
    }
}

/// Quadratic form with the given pair coefficients.
pub fn make_dirichlet(n: usize, coeffs: Vec<f64>, require_irreducible: bool) -> Result<EnergyModel> {
    let form = DirichletForm::new(n, coeffs)?;
    if require_irreducible && !form.is_irreducible() {
        return Err(Error::ReducibleForm);
    }
    Ok(EnergyModel::from_energy(form, "dirichlet"))
}

/// `sum c |u_a - u_b|^p` with `p > 1` and a connected coefficient graph.
pub fn make_p_edge(n: usize, coeffs: Vec<f64>, p: f64) -> Result<EnergyModel> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadExponent(p));
    }
    let form = EdgePower::new(n, coeffs, p)?;
    if !coefficients_connected(n, form.coefficients()) {
        return Err(Error::ReducibleForm);
    }
    Ok(EnergyModel::from_energy(form, format!("p_edge(p={p})")))
}

/// `base + bump`, where `base` is an eigenform and `bump` vanishes faster than
/// `base` at zero. The result carries `base` as its reference form.
pub fn make_perturbed(base: &EnergyModel, bump: EdgePower) -> Result<EnergyModel> {
    let meta = base.a2().ok_or(Error::MissingA2Metadata)?.clone();
    let n = base.boundary_size();
    if bump.boundary_size() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bump.boundary_size() });
    }
    let label = format!("{}+bump(q={})", base.label(), bump.exponent());
    let sum = SumEnergy { base: base.shared(), bump: Arc::new(bump) };

    // Ratio test along t * u for the indicator probes and a fixed spread of
    // generic directions.
    let mut probes: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    probes.push((0..n).map(|i| (i as f64 * 0.7).sin()).collect());
    probes.push((0..n).map(|i| ((i * i) as f64 * 1.3).cos()).collect());
    let scales = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let mut radius = f64::INFINITY;
    for u in probes.iter().filter(|u| osc(u) > 0.0) {
        let deviation = |t: f64| {
            let tu: Vec<f64> = u.iter().map(|x| x * t).collect();
            (sum.eval(&tu) / meta.reference.eval(&tu) - 1.0).abs()
        };
        let first = deviation(scales[0]);
        let last = deviation(scales[scales.len() - 1]);
        if !(last <= 1e-3 && last <= first) {
            return Err(Error::RatioDivergence { deviation: last });
        }
        let fine = scales.iter().copied().filter(|&t| deviation(t) <= 1e-3).fold(0.0, f64::max);
        radius = radius.min(fine * osc(u));
    }

    Ok(EnergyModel::new(Arc::new(sum), label).with_a2(A2Metadata {
        reference: meta.reference,
        p: meta.p,
        rho: meta.rho,
        small_osc_radius: radius,
    }))
}
