//! Bracketing and bisection for the scaling root `Lambda_(theta) = target`.

use crate::error::{Error, Result};

use super::SolverConfig;

const BRACKET_CAP: usize = 2_000;
const BISECTION_CAP: usize = 400;

/// Root of an increasing map together with the brackets visited on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSearch {
    pub theta: f64,
    pub brackets: Vec<(f64, f64)>,
    /// `|lambda(theta) - target| / target`.
    pub relative_residual: f64,
}

/// Solves `lambda(theta) = target` for an increasing `lambda` with `target > 0`,
/// starting at `theta = 1` and growing or shrinking the bracket geometrically.
pub fn theta_bar_with<F>(mut lambda: F, target: f64, cfg: &SolverConfig) -> Result<RootSearch>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::HypothesisViolation(format!("scaling target {target} must be positive")));
    }
    let growth = cfg.bracket_growth;
    if !(growth > 1.0) || !growth.is_finite() {
        return Err(Error::Config(format!("bracket_growth {growth} must exceed 1")));
    }
    let mut eval = |theta: f64| -> Result<f64> {
        let y = lambda(theta)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite(format!("renormalized value at theta = {theta}")))
        }
    };
    let rel = |y: f64| (y - target).abs() / target;

    let one = eval(1.0)?;
    let mut brackets = Vec::new();
    if rel(one) <= cfg.tol_theta {
        return Ok(RootSearch { theta: 1.0, brackets, relative_residual: rel(one) });
    }
    let (mut lo, mut flo, mut hi, mut fhi);
    if one < target {
        (lo, flo) = (1.0, one);
        let mut steps = 0;
        loop {
            let next = lo * growth;
            let y = eval(next)?;
            if !(y > flo) {
                return Err(Error::MonotonicityViolation { lo, hi: next });
            }
            brackets.push((lo, next));
            if y >= target {
                (hi, fhi) = (next, y);
                break;
            }
            (lo, flo) = (next, y);
            steps += 1;
            if steps > BRACKET_CAP {
                return Err(Error::SolverDivergence("scaling bracket grew without bound".into()));
            }
        }
    } else {
        (hi, fhi) = (1.0, one);
        let mut steps = 0;
        loop {
            let next = hi / growth;
            let y = eval(next)?;
            if !(y < fhi) {
                return Err(Error::MonotonicityViolation { lo: next, hi });
            }
            brackets.push((next, hi));
            if y <= target {
                (lo, flo) = (next, y);
                break;
            }
            (hi, fhi) = (next, y);
            steps += 1;
            if steps > BRACKET_CAP {
                return Err(Error::SolverDivergence("scaling bracket shrank without bound".into()));
            }
        }
    }

    let slack = |y: f64| 1e-12 * y.abs().max(target);
    let mut best = if rel(flo) < rel(fhi) { (lo, rel(flo)) } else { (hi, rel(fhi)) };
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        let y = eval(mid)?;
        if y < flo - slack(flo) || y > fhi + slack(fhi) {
            return Err(Error::MonotonicityViolation { lo, hi });
        }
        let r = rel(y);
        if r < best.1 {
            best = (mid, r);
        }
        if r <= cfg.tol_theta {
            return Ok(RootSearch { theta: mid, brackets, relative_residual: r });
        }
        if y < target {
            (lo, flo) = (mid, y);
        } else {
            (hi, fhi) = (mid, y);
        }
        brackets.push((lo, hi));
        if hi - lo <= 1e-12 * mid {
            break;
        }
    }
    Ok(RootSearch { theta: best.0, brackets, relative_residual: best.1 })
}
