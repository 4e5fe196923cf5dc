//! Cyclic coordinate descent for `S_(theta)(E)` over the free vertices of `V(1)`.

use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::topology::LevelVertexSet;

use super::SolverConfig;

const LINE_ITERS: usize = 200;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Cell layout of `V(1)` as seen by the solver.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub len: usize,
    pub cells: Vec<Vec<usize>>,
    pub boundary: Vec<usize>,
    pub free: Vec<usize>,
    /// For every vertex, the `(cell, position)` pairs containing it.
    pub incidence: Vec<Vec<(usize, usize)>>,
}

impl Geometry {
    pub(crate) fn new(set: &LevelVertexSet) -> Self {
        let cells: Vec<Vec<usize>> = (0..set.word_count()).map(|w| set.cell_ids(w).to_vec()).collect();
        let boundary = set.boundary_ids().to_vec();
        let free = (0..set.len()).filter(|x| !boundary.contains(x)).collect();
        let mut incidence = vec![Vec::new(); set.len()];
        for (c, ids) in cells.iter().enumerate() {
            for (pos, &x) in ids.iter().enumerate() {
                incidence[x].push((c, pos));
            }
        }
        Geometry { len: set.len(), cells, boundary, free, incidence }
    }

    /// `sum_i E(theta v o psi_i)`.
    pub(crate) fn total(&self, e: &dyn Energy, theta: f64, v: &[f64], buf: &mut [f64]) -> f64 {
        self.cells.iter().map(|ids| cell_value(e, theta, v, ids, buf)).sum()
    }
}

fn cell_value(e: &dyn Energy, theta: f64, v: &[f64], ids: &[usize], buf: &mut [f64]) -> f64 {
    for (slot, &x) in buf.iter_mut().zip(ids) {
        *slot = theta * v[x];
    }
    e.eval(buf)
}

pub(crate) struct Outcome {
    pub updates: usize,
    pub last_move: f64,
}

struct Local<'a> {
    e: &'a dyn Energy,
    geo: &'a Geometry,
    theta: f64,
    buf: Vec<f64>,
    grad: Vec<f64>,
}

impl Local<'_> {
    /// Part of the total that depends on vertex `x`, with `v[x] = t`.
    fn value(&mut self, v: &mut [f64], x: usize, t: f64) -> f64 {
        v[x] = t;
        let mut s = 0.0;
        for &(c, _) in &self.geo.incidence[x] {
            s += cell_value(self.e, self.theta, v, &self.geo.cells[c], &mut self.buf);
        }
        s
    }

    /// Derivative of `value` in `t`, or `None` when the energy has no gradient.
    fn slope(&mut self, v: &mut [f64], x: usize, t: f64) -> Option<f64> {
        v[x] = t;
        let mut s = 0.0;
        for &(c, pos) in &self.geo.incidence[x] {
            for (slot, &y) in self.buf.iter_mut().zip(&self.geo.cells[c]) {
                *slot = self.theta * v[y];
            }
            if !self.e.gradient(&self.buf, &mut self.grad) {
                return None;
            }
            s += self.theta * self.grad[pos];
        }
        Some(s)
    }
}

fn diverged(what: &str) -> Error {
    Error::SolverDivergence(what.to_string())
}

/// One-dimensional minimization by bisection on the derivative.
fn line_by_slope(
    local: &mut Local<'_>,
    v: &mut [f64],
    x: usize,
    t0: f64,
    step: f64,
    growth: f64,
) -> Result<Option<f64>> {
    let Some(d0) = local.slope(v, x, t0) else {
        return Ok(None);
    };
    if !d0.is_finite() {
        return Err(diverged("non-finite derivative"));
    }
    if d0 == 0.0 {
        return Ok(Some(t0));
    }
    let dir = -d0.signum();
    let (mut near, mut far) = (t0, t0 + dir * step);
    let mut width = step;
    let mut expansions = 0;
    loop {
        let d = local.slope(v, x, far).ok_or_else(|| diverged("gradient vanished"))?;
        if !d.is_finite() {
            return Err(diverged("non-finite derivative"));
        }
        if d * dir >= 0.0 {
            if d == 0.0 {
                return Ok(Some(far));
            }
            break;
        }
        expansions += 1;
        if expansions > LINE_ITERS {
            return Err(diverged("line search bracket expanded without bound"));
        }
        near = far;
        width *= growth;
        far += dir * width;
    }
    let (mut lo, mut hi) = if near < far { (near, far) } else { (far, near) };
    for _ in 0..LINE_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = local.slope(v, x, mid).ok_or_else(|| diverged("gradient vanished"))?;
        if d > 0.0 {
            hi = mid;
        } else if d < 0.0 {
            lo = mid;
        } else {
            return Ok(Some(mid));
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Golden-section search with bracket expansion, for energies without a gradient.
fn line_by_golden(
    local: &mut Local<'_>,
    v: &mut [f64],
    x: usize,
    t0: f64,
    step: f64,
    growth: f64,
    xtol: f64,
) -> Result<f64> {
    let f0 = local.value(v, x, t0);
    let fr = local.value(v, x, t0 + step);
    let dir = if fr < f0 { 1.0 } else { -1.0 };
    let (mut a, mut b) = (t0 - dir * step, t0);
    let mut fb = f0;
    let mut width = step;
    let mut c = t0 + dir * width;
    let mut fc = local.value(v, x, c);
    let mut expansions = 0;
    while fc < fb {
        if !fc.is_finite() {
            return Err(diverged("non-finite energy in line search"));
        }
        expansions += 1;
        if expansions > LINE_ITERS {
            return Err(diverged("line search bracket expanded without bound"));
        }
        a = b;
        b = c;
        fb = fc;
        width *= growth;
        c = b + dir * width;
        fc = local.value(v, x, c);
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let mut p = hi - GOLDEN * (hi - lo);
    let mut q = lo + GOLDEN * (hi - lo);
    let mut fp = local.value(v, x, p);
    let mut fq = local.value(v, x, q);
    for _ in 0..LINE_ITERS {
        if hi - lo <= xtol {
            break;
        }
        if fp <= fq {
            hi = q;
            q = p;
            fq = fp;
            p = hi - GOLDEN * (hi - lo);
            fp = local.value(v, x, p);
        } else {
            lo = p;
            p = q;
            fp = fq;
            q = lo + GOLDEN * (hi - lo);
            fq = local.value(v, x, q);
        }
    }
    Ok(if fp <= fq { p } else { q })
}

/// Minimizes the total over the free vertices of `v` in place. Moves are
/// measured against `scale`, the oscillation of the boundary data.
pub(crate) fn minimize(
    e: &dyn Energy,
    geo: &Geometry,
    theta: f64,
    v: &mut [f64],
    scale: f64,
    cfg: &SolverConfig,
) -> Result<Outcome> {
    let n = e.boundary_size();
    let mut local = Local { e, geo, theta, buf: vec![0.0; n], grad: vec![0.0; n] };
    let mut scratch = vec![0.0; n];
    let tol = cfg.tol_coord * scale;
    let mut current = geo.total(e, theta, v, &mut scratch);
    if !current.is_finite() {
        return Err(diverged("non-finite starting energy"));
    }
    let mut updates = 0;
    let mut step = scale;
    loop {
        let mut max_move: f64 = 0.0;
        for &x in &geo.free {
            if updates >= cfg.max_iters {
                return Err(Error::ToleranceUnreached { iterations: updates, last_move: max_move });
            }
            updates += 1;
            let t0 = v[x];
            let before = local.value(v, x, t0);
            let t = match line_by_slope(&mut local, v, x, t0, step, cfg.bracket_growth)? {
                Some(t) => t,
                None => line_by_golden(&mut local, v, x, t0, step, cfg.bracket_growth, tol.max(f64::EPSILON * scale) * 1e-2)?,
            };
            let after = local.value(v, x, t);
            if !after.is_finite() {
                return Err(diverged("non-finite energy after coordinate step"));
            }
            if after < before {
                max_move = max_move.max((t - t0).abs());
            } else {
                v[x] = t0;
            }
        }
        let total = geo.total(e, theta, v, &mut scratch);
        if !total.is_finite() {
            return Err(diverged("non-finite energy"));
        }
        if total > current + 1e-12 * current.abs() {
            return Err(diverged("energy increased during a sweep"));
        }
        current = total;
        if max_move <= tol {
            return Ok(Outcome { updates, last_move: max_move });
        }
        step = (2.0 * max_move).max(tol);
    }
}
