//! End-to-end acceptance run. Prints one line per criterion and exits nonzero
//! if any of them fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fractal_energy::audit::audit_axioms;
use fractal_energy::diagnostics::convergence_certificate;
use fractal_energy::{
    energies, make_dirichlet, make_p_edge, make_perturbed, minimal_extension, quadratic_eigen,
    self_similarity_residual, theta_bar_with, DirichletForm, EdgePower, Energy, EnergyModel, Error,
    ExtensionOptions, ExtensionTrace, FnEnergy, Fractal, LevelFunction, Renormalizer, SolverConfig,
    Word,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn renorm(name: &str, e: EnergyModel) -> Renormalizer {
    Renormalizer::new(Arc::new(Fractal::builtin(name).unwrap()), e, SolverConfig::default()).unwrap()
}

fn unit(name: &str) -> Renormalizer {
    let n = Fractal::builtin(name).unwrap().boundary_size();
    let rho = match name {
        "interval" => 0.5,
        "gasket" => 0.6,
        _ => 1.0 / 3.0,
    };
    renorm(name, make_dirichlet(n, vec![1.0; n * (n - 1) / 2], true).unwrap().as_eigenform(rho).unwrap())
}

fn quartic() -> Renormalizer {
    renorm("gasket", make_p_edge(3, vec![1.0; 3], 4.0).unwrap())
}

fn perturbed() -> Renormalizer {
    let base = make_dirichlet(3, vec![1.0; 3], true).unwrap().as_eigenform(0.6).unwrap();
    renorm("gasket", make_perturbed(&base, EdgePower::unit(3, 4.0).unwrap()).unwrap())
}

fn random_level(r: &Renormalizer, level: usize, rng: &mut ChaCha8Rng) -> LevelFunction {
    let set = r.fractal().level(level);
    let values = (0..set.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    LevelFunction::new(set, values).unwrap()
}

fn relative_gap(trace: &ExtensionTrace) -> f64 {
    let e0 = trace.boundary_energy;
    trace.energies().iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max)
}

/// Traces produced by the other criteria, checked against the maximum principle.
#[derive(Default)]
struct Runs(Vec<(String, ExtensionTrace)>);

impl Runs {
    fn extend(&mut self, label: &str, r: &Renormalizer, sigma: f64, u: &[f64], depth: usize) -> ExtensionTrace {
        let trace = minimal_extension(r, sigma, u, depth, ExtensionOptions::default()).unwrap();
        self.0.push((label.to_string(), trace.clone()));
        trace
    }
}

fn interval_exactness() -> Outcome {
    let r = unit("interval");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for sigma in [0.25, 0.5, 1.0, 2.0] {
        for _ in 0..20 {
            let u = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let theta = r.theta_bar(sigma, &u).unwrap().theta;
            worst = worst.max((theta - (2.0 * sigma).sqrt()).abs());
        }
    }
    let at_two = r.theta_bar(2.0, &[0.0, 1.0]).unwrap().theta;
    outcome(worst <= 1e-8 && (at_two - 2.0).abs() <= 1e-8, format!("max error {worst:.2e}, sigma=2 gives {at_two}"))
}

fn gasket_eigenvalue() -> Outcome {
    let f = Fractal::builtin("gasket").unwrap();
    let rep = quadratic_eigen(&f, &DirichletForm::unit(3)).unwrap();
    let coeff_err = rep.image.coefficients().iter().map(|c| (c - 0.6).abs()).fold(0.0, f64::max);
    let err = (rep.rho - 0.6).abs();
    outcome(err <= 1e-12 && coeff_err <= 1e-12, format!("rho = {}, coefficient error {coeff_err:.2e}", rep.rho))
}

fn harmonic_midpoints(runs: &mut Runs) -> Outcome {
    let r = unit("gasket");
    let trace = runs.extend("gasket depth 1", &r, 1.0, &[1.0, 0.0, 0.0], 1);
    let v = trace.last();
    let set = v.vertices();
    let at = |w: usize, j: usize| v.values()[set.id_at(&Word::new(vec![w], 3).unwrap(), j).unwrap()];
    let got = [at(0, 1), at(0, 2), at(1, 2)];
    let want = [0.4, 0.4, 0.2];
    let err = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(err <= 1e-10, format!("midpoints {got:?}, error {err:.2e}"))
}

fn conservation(runs: &mut Runs) -> Outcome {
    let q = runs.extend("gasket quadratic depth 6", &unit("gasket"), 1.0, &[1.0, 0.0, 0.0], 6);
    let p = runs.extend("gasket perturbed depth 4", &perturbed(), 1.0, &[1.0, 0.0, 0.0], 4);
    let (gq, gp) = (relative_gap(&q), relative_gap(&p));
    outcome(gq <= 1e-7 && gp <= 1e-5, format!("quadratic drift {gq:.2e}, perturbed drift {gp:.2e}"))
}

fn monotonicity(runs: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for r in [unit("gasket"), quartic()] {
        for _ in 0..100 {
            let v = random_level(&r, 3, &mut rng);
            let e = energies(&r, 1.0, &v).unwrap();
            for w in e.windows(2) {
                worst = worst.max((w[0] - w[1]) / w[0].max(1.0));
            }
        }
    }
    let r = unit("gasket");
    let trace = runs.extend("gasket depth 3", &r, 1.0, &[0.3, -0.7, 1.1], 3);
    let chain = energies(&r, 1.0, trace.last()).unwrap();
    let flat = chain.iter().map(|e| (e - trace.boundary_energy).abs() / trace.boundary_energy).fold(0.0, f64::max);
    outcome(
        worst <= 1e-9 && flat <= 1e-9,
        format!("largest drop {:.2e}, chain spread on extension {flat:.2e}", worst.max(0.0)),
    )
}

fn maximum_principle(runs: &Runs) -> Outcome {
    let mut bad = Vec::new();
    for (label, trace) in &runs.0 {
        let u = &trace.boundary;
        let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let inside = trace.levels.iter().all(|l| l.function.values().iter().all(|&x| lo <= x && x <= hi));
        if !inside {
            bad.push(label.clone());
        }
    }
    outcome(bad.is_empty(), format!("{} runs checked, violations {bad:?}", runs.0.len()))
}

fn oscillation_decay(runs: &mut Runs) -> Outcome {
    let i = runs.extend("interval depth 6", &unit("interval"), 1.0, &[0.0, 1.0], 6);
    let g = runs.extend("gasket depth 6", &unit("gasket"), 1.0, &[1.0, 0.0, 0.0], 6);
    let q = runs.extend("quartic depth 4", &quartic(), 1.0, &[1.0, 0.0, 0.0], 4);
    let ri = convergence_certificate(&i).unwrap().rate;
    let rg = convergence_certificate(&g).unwrap().rate;
    let rq = convergence_certificate(&q).unwrap().rate;
    outcome(
        (ri - 0.5).abs() <= 1e-6 && (rg - 0.6).abs() <= 0.02 && rq < 1.0,
        format!("interval {ri:.9}, gasket {rg:.6}, quartic {rq:.6}"),
    )
}

fn theta_limit() -> Outcome {
    let r = perturbed();
    let target = (5.0f64 / 3.0).sqrt();
    let devs: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&t| (r.theta_bar(1.0, &[t, 0.0, 0.0]).unwrap().theta - target).abs())
        .collect();
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    outcome(devs[3] <= 1e-3 && decreasing, format!("deviations {:?}", devs.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()))
}

fn self_similarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let combos = [
        ("interval quadratic", unit("interval")),
        ("gasket quadratic", unit("gasket")),
        ("vicsek quadratic", unit("vicsek")),
        ("gasket quartic", quartic()),
        ("gasket perturbed", perturbed()),
    ];
    let mut worst: Vec<(String, f64)> = Vec::new();
    for (label, r) in &combos {
        let mut w: f64 = 0.0;
        for level in 1..=3 {
            for _ in 0..50 {
                let v = random_level(r, level, &mut rng);
                w = w.max(self_similarity_residual(r, 1.0, &v).unwrap());
            }
        }
        worst.push((label.to_string(), w));
    }
    let pass = worst.iter().all(|(_, w)| *w <= 1e-10);
    let detail = worst.iter().map(|(l, w)| format!("{l} {w:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(pass, detail)
}

fn falsification() -> Outcome {
    let q4 = audit_axioms(&DirichletForm::new_unchecked(3, vec![1.0, 1.0, -0.2]), 200, 3);
    let q4 = q4.entry("Q4 clamping").unwrap();
    let q4_caught = !q4.pass && q4.witness.as_ref().is_some_and(|w| w.w.is_some());

    let lifted = FnEnergy::new(3, "lifted", |u| DirichletForm::unit(3).eval(u) + 0.5);
    let q3 = audit_axioms(&lifted, 50, 4);
    let q3 = q3.entry("Q3 zero exactly on constants").unwrap();
    let q3_caught = !q3.pass && q3.witness.is_some();

    let fake = |t: f64| Ok(t * t + if (1.2..1.6).contains(&t) { -1.5 } else { 0.0 });
    let bisection = matches!(
        theta_bar_with(fake, 3.0, &SolverConfig::default()),
        Err(Error::MonotonicityViolation { .. })
    );
    outcome(
        q3_caught && q4_caught && bisection,
        format!("Q3 caught {q3_caught}, Q4 caught {q4_caught}, monotonicity violation raised {bisection}"),
    )
}

/// `S_1(E)(v)` for the quartic gasket form with `u = (1, 0, 0)`, written out by
/// hand over the three midpoints.
fn quartic_sum(a: f64, b: f64, c: f64) -> f64 {
    let e = |x: f64, y: f64, z: f64| (x - y).powi(4) + (x - z).powi(4) + (y - z).powi(4);
    e(1.0, a, b) + e(0.0, a, c) + e(0.0, b, c)
}

fn grid_min(center: [f64; 3], half: f64, step: f64) -> ([f64; 3], f64) {
    let k = (half / step).round() as i64;
    let mut best = (center, f64::INFINITY);
    for i in -k..=k {
        let a = center[0] + i as f64 * step;
        for j in -k..=k {
            let b = center[1] + j as f64 * step;
            for l in -k..=k {
                let c = center[2] + l as f64 * step;
                let s = quartic_sum(a, b, c);
                if s < best.1 {
                    best = ([a, b, c], s);
                }
            }
        }
    }
    best
}

fn brute_force() -> Outcome {
    let value = quartic().lambda_theta(1.0, &[1.0, 0.0, 0.0]).unwrap().value;
    let (mut center, mut best) = grid_min([0.5; 3], 0.5, 1e-2);
    for (half, step) in [(2e-2, 1e-3), (2e-3, 1e-4), (2e-4, 1e-5)] {
        (center, best) = grid_min(center, half, step);
    }
    let err = (value - best).abs();
    outcome(err <= 1e-6, format!("solver {value:.10}, grid {best:.10}, error {err:.2e}"))
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let limits = [Some(1.0), Some(1.0), None, Some(60.0), None, None, None, None, None, None, Some(60.0)];
    let mut results: Vec<(&str, Outcome, Duration)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut(&mut Runs) -> Outcome, runs: &mut Runs| {
        let start = Instant::now();
        let out = f(runs);
        results.push((name, out, start.elapsed()));
    };
    run("interval exactness", &mut |_| interval_exactness(), &mut runs);
    run("gasket eigenvalue", &mut |_| gasket_eigenvalue(), &mut runs);
    run("harmonic extension rule", &mut harmonic_midpoints, &mut runs);
    run("energy conservation", &mut conservation, &mut runs);
    run("monotonicity", &mut monotonicity, &mut runs);
    run("oscillation decay", &mut oscillation_decay, &mut runs);
    run("scaling root limit", &mut |_| theta_limit(), &mut runs);
    run("self-similarity residual", &mut |_| self_similarity(), &mut runs);
    run("axiom falsification", &mut |_| falsification(), &mut runs);
    run("brute-force equivalence", &mut |_| brute_force(), &mut runs);
    // The maximum principle covers every extension made above.
    let start = Instant::now();
    let mp = maximum_principle(&runs);
    results.insert(5, ("maximum principle", mp, start.elapsed()));

    let mut failed = 0;
    for (i, (name, out, elapsed)) in results.iter().enumerate() {
        let in_time = limits[i].is_none_or(|s| elapsed.as_secs_f64() < s);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        let late = if in_time { String::new() } else { format!(" (over {}s)", limits[i].unwrap()) };
        println!("{status} {:>2} {name}: {} [{:.2}s{late}]", i + 1, out.detail, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

