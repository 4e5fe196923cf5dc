use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use fractal_energy::audit::{audit_a2, audit_axioms, audit_q5};
use fractal_energy::diagnostics::{contraction_report, convergence_certificate};
use fractal_energy::{
    minimal_extension, quadratic_eigen, DirichletForm, EnergySpec, Error, ErrorKind,
    ExperimentConfig, ExtensionOptions, Family, Fractal, Renormalizer,
};

#[derive(Parser)]
#[command(name = "fractal-energy", version, about = "Renormalized energies and minimal extensions on fractals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a fractal label table.
    Validate(Common),
    /// Refine boundary data level by level and record the trace.
    Extend(Common),
    /// Scaling roots along `t * u`.
    Theta {
        #[command(flatten)]
        common: Common,
        /// Comma separated multipliers of `u`.
        #[arg(long, default_value = "1")]
        scales: String,
    },
    /// Eigenvalue of a quadratic form under renormalization.
    Eigen(Common),
    /// Sampling audit of the energy axioms.
    Axioms {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Contraction constants and the fitted decay rate of an extension.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 40)]
        budget: usize,
        /// Oscillation and scale window `a,b` for the alpha estimate.
        #[arg(long, default_value = "1,1")]
        window: String,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config in TOML; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in fractal: interval, gasket or vicsek.
    #[arg(long)]
    fractal: Option<String>,
    /// Fractal label table in TOML, used instead of `--fractal`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Energy, e.g. `dirichlet`, `p_edge p=4` or `perturbed bump=4`.
    #[arg(long)]
    energy: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Boundary values, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    u: Option<String>,
    #[arg(long)]
    tol_coord: Option<f64>,
    #[arg(long)]
    tol_theta: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for CSV and summary files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow `sigma > 1` for the extension.
    #[arg(long)]
    unsafe_sigma: bool,
}

enum Failure {
    Core(Error),
    Output(String),
    Audit(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Output(msg) => write!(f, "output error: {msg}"),
            Failure::Audit(msg) => write!(f, "audit failed: {msg}"),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Solver => 2,
                ErrorKind::Hypothesis => 3,
            },
            Failure::Output(_) => 1,
            Failure::Audit(_) => 3,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_list(s: &str, what: &str) -> Outcome<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad {what} entry `{x}`: {e}")).into()))
        .collect()
}

impl Common {
    fn resolve(&self) -> Outcome<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ExperimentConfig::from_toml_str(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(f) = &self.fractal {
            cfg.fractal = f.clone();
            cfg.spec = None;
        }
        if let Some(s) = &self.spec {
            cfg.spec = Some(s.clone());
        }
        if let Some(e) = &self.energy {
            cfg.energy = e.parse::<EnergySpec>()?;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(u) = &self.u {
            cfg.u = Some(parse_list(u, "u")?);
        }
        if let Some(t) = self.tol_coord {
            cfg.solver.tol_coord = t;
        }
        if let Some(t) = self.tol_theta {
            cfg.solver.tol_theta = t;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.unsafe_sigma |= self.unsafe_sigma;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Boundary data from the config, else the indicator of the first point.
fn boundary_data(cfg: &ExperimentConfig, fractal: &Fractal) -> Outcome<Vec<f64>> {
    let n = fractal.boundary_size();
    let u = cfg.u.clone().unwrap_or_else(|| (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect());
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() }.into());
    }
    Ok(u)
}

fn renormalizer(cfg: &ExperimentConfig) -> Outcome<Renormalizer> {
    let fractal = cfg.load_fractal()?;
    let model = cfg.energy.build(&fractal)?;
    Ok(Renormalizer::new(fractal, model, cfg.solver)?)
}

/// Files written under the output directory. Every file starts with the
/// resolved config as `#` comment lines; only `run.json` carries a timestamp.
struct Output {
    dir: Option<PathBuf>,
    header: String,
}

impl Output {
    fn new(command: &str, cfg: &ExperimentConfig) -> Outcome<Self> {
        let mut header = format!("# fractal-energy {command}\n");
        let placed = ExperimentConfig { out: None, ..cfg.clone() };
        for line in placed.to_toml_string().lines() {
            let _ = writeln!(header, "# {line}");
        }
        let dir = cfg.out.clone();
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::Output(format!("{}: {e}", d.display())))?;
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let meta = serde_json::json!({
                "command": command,
                "started_unix": stamp,
                "version": env!("CARGO_PKG_VERSION"),
                "config": cfg,
            });
            let text = serde_json::to_string_pretty(&meta).map_err(|e| Failure::Output(e.to_string()))?;
            write_file(&d.join("run.json"), &text)?;
        }
        Ok(Output { dir, header })
    }

    fn text(&self, name: &str, body: &str) -> Outcome<()> {
        match &self.dir {
            Some(d) => write_file(&d.join(name), &format!("{}{body}", self.header)),
            None => Ok(()),
        }
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Outcome<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Failure::Output(e.to_string());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Output(e.to_string()))?;
        self.text(name, &String::from_utf8_lossy(&bytes))
    }
}

fn write_file(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Output(format!("{}: {e}", path.display())))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn validate(cfg: &ExperimentConfig) -> Outcome<String> {
    let f = cfg.load_fractal()?;
    let mut s = format!(
        "OK {}: {} boundary points, {} maps, chain constant n = {}\n",
        f.name(),
        f.boundary_size(),
        f.maps(),
        f.chain_constant()
    );
    for n in 0..=2 {
        let _ = writeln!(s, "level {n}: {} vertices", f.level(n).len());
    }
    Ok(s)
}

fn extend(cfg: &ExperimentConfig, out: &Output) -> Outcome<String> {
    cfg.validate_extension()?;
    let renorm = renormalizer(cfg)?;
    let u = boundary_data(cfg, renorm.fractal())?;
    let opts = ExtensionOptions { allow_unsafe_sigma: cfg.unsafe_sigma };
    let trace = minimal_extension(&renorm, cfg.sigma, &u, cfg.depth, opts)?;

    let mut s = format!("energy {}, sigma {}, u = {:?}\n", renorm.energy().label(), cfg.sigma, u);
    let _ = writeln!(s, "E(u) = {}", trace.boundary_energy);
    let _ = writeln!(s, "level,vertices,energy,max_oscillation");
    let mut level_rows = Vec::new();
    let mut cell_rows = Vec::new();
    for l in &trace.levels {
        let row = vec![
            l.level.to_string(),
            l.function.values().len().to_string(),
            l.energy.to_string(),
            l.max_oscillation.to_string(),
        ];
        let _ = writeln!(s, "{}", row.join(","));
        level_rows.push(row);
        for c in &l.cells {
            cell_rows.push(vec![
                l.level.to_string(),
                c.word.clone(),
                c.oscillation.to_string(),
                c.factor.to_string(),
                c.energy.to_string(),
                opt(c.root),
                opt(c.residual),
            ]);
        }
    }
    let last = trace.levels.last().expect("trace has level 0");
    let _ = writeln!(s, "final energy {} at level {}", last.energy, last.level);
    let _ = writeln!(s, "max oscillation {}", last.max_oscillation);
    match convergence_certificate(&trace) {
        Ok(fit) => {
            let _ = writeln!(s, "fitted rate {} (r^2 {}, {} levels)", fit.rate, fit.r_squared, fit.levels);
        }
        Err(Error::InsufficientDepth { .. }) => {
            let _ = writeln!(s, "fitted rate unavailable below depth 3");
        }
        Err(e) => return Err(e.into()),
    }

    let set = trace.last().vertices();
    let value_rows: Vec<Vec<String>> = trace
        .last()
        .values()
        .iter()
        .enumerate()
        .map(|(id, v)| {
            let (w, j) = set.address(id);
            vec![id.to_string(), set.birth_level(id).to_string(), format!("{w}:{}", j + 1), v.to_string()]
        })
        .collect();
    out.csv("trace_levels.csv", &["level", "vertices", "energy", "max_oscillation"], &level_rows)?;
    out.csv(
        "trace_cells.csv",
        &["level", "word", "oscillation", "factor", "energy", "root", "root_residual"],
        &cell_rows,
    )?;
    out.csv("values.csv", &["vertex", "birth_level", "address", "value"], &value_rows)?;
    Ok(s)
}

fn theta(cfg: &ExperimentConfig, scales: &str, out: &Output) -> Outcome<String> {
    let renorm = renormalizer(cfg)?;
    let u = boundary_data(cfg, renorm.fractal())?;
    let scales = parse_list(scales, "scales")?;
    let mut s = format!("energy {}, sigma {}, u = {:?}\nt,theta,method,relative_residual\n", renorm.energy().label(), cfg.sigma, u);
    let mut rows = Vec::new();
    for t in scales {
        let ut: Vec<f64> = u.iter().map(|x| x * t).collect();
        let sol = renorm.theta_bar(cfg.sigma, &ut)?;
        let method = serde_json::to_value(sol.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let row = vec![t.to_string(), sol.theta.to_string(), method, sol.relative_residual.to_string()];
        let _ = writeln!(s, "{}", row.join(","));
        rows.push(row);
    }
    out.csv("theta.csv", &["t", "theta", "method", "relative_residual"], &rows)?;
    Ok(s)
}

fn eigen(cfg: &ExperimentConfig, out: &Output) -> Outcome<String> {
    if cfg.energy.family != Family::Dirichlet {
        return Err(Error::Config("eigen needs a dirichlet energy".into()).into());
    }
    let fractal = cfg.load_fractal()?;
    let n = fractal.boundary_size();
    let coeffs = cfg.energy.coeffs.clone().unwrap_or_else(|| vec![1.0; n * (n - 1) / 2]);
    let form = DirichletForm::new(n, coeffs)?;
    let rep = quadratic_eigen(&fractal, &form)?;
    let mut s = format!("rho = {}\n", rep.rho);
    let _ = writeln!(s, "proportional {}, iterations {}, residual {}", rep.proportional, rep.iterations, rep.residual);
    let _ = writeln!(s, "a,b,form,image");
    let mut rows = Vec::new();
    let mut k = 0;
    for a in 0..n {
        for b in a + 1..n {
            let row = vec![
                (a + 1).to_string(),
                (b + 1).to_string(),
                rep.form.coefficients()[k].to_string(),
                rep.image.coefficients()[k].to_string(),
            ];
            let _ = writeln!(s, "{}", row.join(","));
            rows.push(row);
            k += 1;
        }
    }
    out.csv("eigen.csv", &["a", "b", "form", "image"], &rows)?;
    Ok(s)
}

fn axioms(cfg: &ExperimentConfig, budget: usize, out: &Output) -> Outcome<String> {
    let fractal = cfg.load_fractal()?;
    let model = cfg.energy.build(&fractal)?;
    let report = audit_axioms(model.energy(), budget, cfg.seed);
    let q5 = audit_q5(model.energy(), budget, cfg.seed);
    let mut s = format!("energy {}\ncheck,pass,samples,worst,witness\n", model.label());
    let mut rows = Vec::new();
    let witness = |w: Option<&fractal_energy::audit::Witness>| w.map(|w| format!("{:?}", w.u)).unwrap_or_default();
    for e in &report.entries {
        rows.push(vec![e.name.to_string(), e.pass.to_string(), e.samples.to_string(), e.worst.to_string(), witness(e.witness.as_ref())]);
    }
    rows.push(vec!["Q5 one-sided derivative".into(), q5.pass.to_string(), q5.samples.to_string(), q5.worst.to_string(), witness(q5.witness.as_ref())]);
    let mut failed: Vec<String> = rows.iter().filter(|r| r[1] == "false").map(|r| r[0].clone()).collect();
    if model.a2().is_some() {
        let a2 = audit_a2(&fractal, &model, budget.min(50), cfg.seed)?;
        rows.push(vec!["reference form".into(), a2.pass.to_string(), budget.min(50).to_string(), a2.eigen_residual.to_string(), String::new()]);
        if !a2.pass {
            failed.push("reference form".into());
        }
    }
    for r in &rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    let _ = writeln!(s, "coercivity {}", report.coercivity);
    out.csv("axioms.csv", &["check", "pass", "samples", "worst", "witness"], &rows)?;
    if failed.is_empty() {
        Ok(s)
    } else {
        print!("{s}");
        Err(Failure::Audit(failed.join(", ")))
    }
}

fn diagnose(cfg: &ExperimentConfig, budget: usize, window: &str, out: &Output) -> Outcome<String> {
    cfg.validate_extension()?;
    let w = parse_list(window, "window")?;
    let window = match w[..] {
        [a, b] => (a, b),
        [a] => (a, a),
        _ => return Err(Error::Config("window needs one or two numbers".into()).into()),
    };
    let renorm = renormalizer(cfg)?;
    let u = boundary_data(cfg, renorm.fractal())?;
    let opts = ExtensionOptions { allow_unsafe_sigma: cfg.unsafe_sigma };
    let trace = minimal_extension(&renorm, cfg.sigma, &u, cfg.depth, opts)?;
    let rep = contraction_report(&renorm, &trace, window, budget, cfg.seed)?;

    let mut summary = vec![
        vec!["alpha".to_string(), rep.alpha.alpha.to_string()],
        vec!["alpha_samples".into(), rep.alpha.samples.to_string()],
        vec!["cascade_bound".into(), rep.cascade_bound.to_string()],
    ];
    if let Some(fit) = &rep.fit {
        summary.push(vec!["rate".into(), fit.rate.to_string()]);
        summary.push(vec!["r_squared".into(), fit.r_squared.to_string()]);
    }
    let mut s = format!("energy {}, sigma {}, u = {:?}\n", renorm.energy().label(), cfg.sigma, u);
    for r in &summary {
        let _ = writeln!(s, "{} {}", r[0], r[1]);
    }
    let mut small = Vec::new();
    if let Some(so) = &rep.small_osc {
        let _ = writeln!(s, "oscillation,ratio");
        for row in &so.rows {
            let r = vec![row.oscillation.to_string(), row.ratio.to_string()];
            let _ = writeln!(s, "{}", r.join(","));
            small.push(r);
        }
        if let Some(warn) = &so.warning {
            let _ = writeln!(s, "warning: {warn}");
        }
    }
    out.csv("diagnose.csv", &["quantity", "value"], &summary)?;
    if !small.is_empty() {
        out.csv("small_osc.csv", &["oscillation", "ratio"], &small)?;
    }
    Ok(s)
}

fn run(cmd: &Command) -> Outcome<()> {
    let (name, common) = match cmd {
        Command::Validate(c) => ("validate", c),
        Command::Extend(c) => ("extend", c),
        Command::Theta { common, .. } => ("theta", common),
        Command::Eigen(c) => ("eigen", c),
        Command::Axioms { common, .. } => ("axioms", common),
        Command::Diagnose { common, .. } => ("diagnose", common),
    };
    let cfg = common.resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let out = Output::new(name, &cfg)?;
    let text = match cmd {
        Command::Validate(_) => validate(&cfg)?,
        Command::Extend(_) => extend(&cfg, &out)?,
        Command::Theta { scales, .. } => theta(&cfg, scales, &out)?,
        Command::Eigen(_) => eigen(&cfg, &out)?,
        Command::Axioms { budget, .. } => axioms(&cfg, *budget, &out)?,
        Command::Diagnose { budget, window, .. } => diagnose(&cfg, *budget, window, &out)?,
    };
    print!("{text}");
    out.text("summary.txt", &text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
