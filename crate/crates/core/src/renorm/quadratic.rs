//! Exact renormalization of quadratic forms through the level-1 Laplacian.

use nalgebra::{DMatrix, DVector};

use crate::energy::{pairs, DirichletForm};
use crate::error::{Error, Result};
use crate::topology::{Fractal, LevelVertexSet};

const EIGEN_CAP: usize = 10_000;
const EIGEN_TOL: f64 = 1e-14;

/// Interior elimination data for one Dirichlet form on `V(1)`.
#[derive(Debug, Clone)]
pub(crate) struct Schur {
    boundary: Vec<usize>,
    interior: Vec<usize>,
    /// `-L_II^{-1} L_IB`, the harmonic extension matrix.
    extension: DMatrix<f64>,
    /// Schur complement `L_BB - L_BI L_II^{-1} L_IB`.
    trace: DMatrix<f64>,
}

fn laplacian(set: &LevelVertexSet, form: &DirichletForm) -> DMatrix<f64> {
    let n = set.boundary_size();
    let mut l = DMatrix::zeros(set.len(), set.len());
    for w in 0..set.word_count() {
        let ids = set.cell_ids(w);
        for ((a, b), &c) in pairs(n).zip(form.coefficients()) {
            let (x, y) = (ids[a], ids[b]);
            l[(x, x)] += c;
            l[(y, y)] += c;
            l[(x, y)] -= c;
            l[(y, x)] -= c;
        }
    }
    l
}

impl Schur {
    pub(crate) fn new(set: &LevelVertexSet, form: &DirichletForm) -> Result<Self> {
        let l = laplacian(set, form);
        let boundary = set.boundary_ids().to_vec();
        let interior: Vec<usize> = (0..set.len()).filter(|x| !boundary.contains(x)).collect();
        let pick = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| l[(rows[i], cols[j])])
        };
        let l_ii = pick(&interior, &interior);
        let l_ib = pick(&interior, &boundary);
        let l_bb = pick(&boundary, &boundary);
        let extension = if interior.is_empty() {
            DMatrix::zeros(0, boundary.len())
        } else {
            let lu = l_ii.lu();
            let solved = lu.solve(&l_ib).ok_or(Error::ReducibleForm)?;
            -solved
        };
        let trace = &l_bb + l_ib.transpose() * &extension;
        Ok(Schur { boundary, interior, extension, trace })
    }

    /// Harmonic extension of `u` to all of `V(1)`.
    pub(crate) fn extend(&self, u: &[f64], len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        for (&id, &x) in self.boundary.iter().zip(u) {
            v[id] = x;
        }
        if !self.interior.is_empty() {
            let inner = &self.extension * DVector::from_column_slice(u);
            for (&id, &x) in self.interior.iter().zip(inner.iter()) {
                v[id] = x;
            }
        }
        v
    }

    /// Pair coefficients of the trace form.
    pub(crate) fn trace_coefficients(&self) -> Vec<f64> {
        let n = self.boundary.len();
        pairs(n)
            .map(|(a, b)| (-0.5 * (self.trace[(a, b)] + self.trace[(b, a)])).max(0.0))
            .collect()
    }
}

/// `Lambda_(1)(D)` as a quadratic form on the boundary.
pub fn trace_form(fractal: &Fractal, form: &DirichletForm) -> Result<DirichletForm> {
    check_size(fractal, form)?;
    let schur = Schur::new(&fractal.level(1), form)?;
    DirichletForm::new(fractal.boundary_size(), schur.trace_coefficients())
}

fn check_size(fractal: &Fractal, form: &DirichletForm) -> Result<()> {
    use crate::energy::Energy;
    if form.boundary_size() != fractal.boundary_size() {
        return Err(Error::DimensionMismatch {
            expected: fractal.boundary_size(),
            got: form.boundary_size(),
        });
    }
    Ok(())
}

/// Result of the eigenform search for a quadratic form.
#[derive(Debug, Clone)]
pub struct EigenReport {
    pub rho: f64,
    /// The eigenform: the input itself when it was already proportional to
    /// its trace, otherwise the normalized fixed point.
    pub form: DirichletForm,
    /// `Lambda(form)`.
    pub image: DirichletForm,
    pub proportional: bool,
    pub iterations: usize,
    /// `max |Lambda(form) - rho form| / max form`.
    pub residual: f64,
}

fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |m, x| m.max(x.abs()))
}

fn eigen_residual(form: &[f64], image: &[f64], rho: f64) -> f64 {
    max_abs(form.iter().zip(image).map(|(d, l)| l - rho * d)) / max_abs(form.iter().copied())
}

/// Eigenvalue of `D` under the trace map, iterating `D -> Lambda(D)/|Lambda(D)|`
/// when `D` is not already an eigenform.
pub fn quadratic_eigen(fractal: &Fractal, form: &DirichletForm) -> Result<EigenReport> {
    check_size(fractal, form)?;
    if !form.is_irreducible() {
        return Err(Error::ReducibleForm);
    }
    let image = trace_form(fractal, form)?;
    let d = form.coefficients();
    let rho = image.coefficients().iter().sum::<f64>() / d.iter().sum::<f64>();
    let residual = eigen_residual(d, image.coefficients(), rho);
    if residual <= 1e-12 {
        return Ok(EigenReport {
            rho,
            form: form.clone(),
            image,
            proportional: true,
            iterations: 0,
            residual,
        });
    }

    let n = fractal.boundary_size();
    let normalize = |c: &[f64]| {
        let s: f64 = c.iter().sum();
        c.iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let mut current = normalize(d);
    let mut delta = f64::INFINITY;
    for it in 1..=EIGEN_CAP {
        let next = normalize(trace_form(fractal, &DirichletForm::new_unchecked(n, current.clone()))?.coefficients());
        delta = max_abs(next.iter().zip(&current).map(|(a, b)| a - b));
        current = next;
        if delta <= EIGEN_TOL {
            let form = DirichletForm::new(n, current)?;
            let image = trace_form(fractal, &form)?;
            let rho = image.coefficients().iter().sum::<f64>();
            let residual = eigen_residual(form.coefficients(), image.coefficients(), rho);
            if residual > 1e-10 {
                return Err(Error::NoConvergence { iterations: it, residual });
            }
            return Ok(EigenReport {
                rho,
                form,
                image,
                proportional: false,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence { iterations: EIGEN_CAP, residual: delta })
}
