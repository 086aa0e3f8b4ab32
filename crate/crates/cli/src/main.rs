use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use growthlab::bounds::{domination_check, growth_bound, lower_set_measure, BoundOptions};
use growthlab::config::{parse_config, parse_problem, ConfigFile};
use growthlab::funcs::{catalog, lookup_or_parse};
use growthlab::growth::{order_estimate, type_from_order, LimsupPolicy};
use growthlab::harness::{run, ScenarioName, ScenarioReport, Scenario};
use growthlab::ode::{closed_form_residual, eval_series, residual, solve_series, OdeProblem};
use growthlab::scale::{check_admissible, SampleSpec};
use growthlab::{Error, GrowthMode, GrowthOptions, RadialGrid, ScaleTriple};

#[derive(Parser)]
#[command(name = "growthlab", version, about = "Growth of analytic functions in the unit disc")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.5)]
    r0: f64,
    #[arg(long, default_value_t = 0.72)]
    q: f64,
    #[arg(long, default_value_t = 24)]
    n: usize,
}

impl GridArgs {
    fn grid(&self) -> Result<RadialGrid, Error> {
        RadialGrid::new(self.r0, self.q, self.n)
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Expression or catalog name.
    #[arg(long)]
    func: String,
    #[arg(long, default_value = "iterlog:1,id,id")]
    triple: String,
    /// M, T, M_log or T_log.
    #[arg(long, default_value = "M")]
    mode: String,
    /// slope or max.
    #[arg(long, default_value = "slope")]
    policy: String,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the sample table here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Order estimate on a radial grid.
    Order(EstimateArgs),
    /// Type estimate at a given order.
    Type {
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long)]
        rho: f64,
    },
    /// Power-series solution of a problem file.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Evaluate at this radius.
        #[arg(long)]
        eval: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Write the coefficients here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Relative defect of the series solution on a circle.
    Residual {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 64)]
        n_theta: usize,
    },
    /// Growth bound for the solution along a ray, or checked against the series on a grid.
    Bound {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, conflicts_with = "table")]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        /// Replace the computed log of the constant.
        #[arg(long)]
        log_c: Option<f64>,
        /// Compare with the series solution on the grid.
        #[arg(long)]
        table: bool,
        #[arg(long, default_value_t = 1024)]
        n_terms: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Log-measure of the set where the lower growth inequality holds.
    Measure {
        #[arg(long)]
        func: String,
        #[arg(long, default_value = "iterlog:1,id,id")]
        triple: String,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Typed variant: `omega` and `rho` together.
        #[arg(long, requires = "rho")]
        omega: Option<f64>,
        #[arg(long, requires = "omega")]
        rho: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Run a scenario (or `all`) and write its report bundle.
    Verify {
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bundle directory; one subdirectory per scenario.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Also write SVG plots.
        #[arg(long)]
        plot: bool,
    },
    /// List the named functions.
    Catalog,
    /// Admissibility checks for a scale triple.
    CheckTriple {
        #[arg(long, default_value = "iterlog:1,id,id")]
        triple: String,
        #[arg(long, default_value_t = 3)]
        p_max: u32,
    },
}

enum Fail {
    Verdict(String),
    Other(Error),
    Io(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Other(e)
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Io(e.to_string())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Argument(_) => 2,
        Error::Setup(_) => 1,
        _ => 3,
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::Other(Error::Parse(format!("{}: {e}", path.display()))))
}

fn load_problem(path: &Path) -> Result<OdeProblem, Fail> {
    Ok(parse_problem(&read(path)?)?)
}

fn options(policy: &str) -> Result<GrowthOptions, Error> {
    let policy = match policy {
        "slope" => LimsupPolicy::TailSlope,
        "max" => LimsupPolicy::TailMax,
        other => return Err(Error::Parse(format!("unknown policy '{other}' (slope or max)"))),
    };
    Ok(GrowthOptions {
        policy,
        ..GrowthOptions::default()
    })
}

fn estimate(a: &EstimateArgs) -> Result<growthlab::growth::OrderEstimate, Fail> {
    let f = lookup_or_parse(&a.func)?;
    let t: ScaleTriple = a.triple.parse()?;
    let mode: GrowthMode = a.mode.parse()?;
    let est = order_estimate(&f, &t, &a.grid.grid()?, mode, &options(&a.policy)?)?;
    if let Some(path) = &a.csv {
        fs::write(path, est.to_csv())?;
    }
    Ok(est)
}

fn print_report(rep: &ScenarioReport, out: &Path, plot: bool) -> Result<(), Fail> {
    print!("{}", rep.text());
    rep.write_bundle(&out.join(rep.name.as_str()), plot)?;
    Ok(())
}

fn verify(name: &str, config: Option<&Path>, out: &Path, plot: bool) -> Result<(), Fail> {
    let names: Vec<ScenarioName> = if name == "all" {
        ScenarioName::ALL.to_vec()
    } else {
        vec![name.parse()?]
    };
    let cfg = match config {
        Some(p) => parse_config(&read(p)?)?,
        None => ConfigFile::default(),
    };
    let mut failed = Vec::new();
    let mut numeric = false;
    for n in names {
        match Scenario::from_params(n, &cfg.for_section(n.as_str())) {
            Ok(s) => {
                let rep = run(&s);
                print_report(&rep, out, plot)?;
                if !rep.pass() {
                    numeric |= rep.failure.is_some();
                    failed.push(n.to_string());
                }
            }
            Err(Error::Setup(msg)) => {
                println!("scenario {n}: FAIL\n  [FAIL] setup: {msg}");
                failed.push(n.to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    if failed.is_empty() {
        Ok(())
    } else if numeric {
        Err(Fail::Other(Error::Estimation(format!("measurement failed in {}", failed.join(", ")))))
    } else {
        Err(Fail::Verdict(format!("failing: {}", failed.join(", "))))
    }
}

fn execute(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Order(a) => {
            let est = estimate(&a)?;
            println!("order = {:.6}", est.value);
            println!("tail_max = {:.6}", est.tail_max);
            println!("slope = {:.6}", est.slope);
            println!("mode = {}, policy = {:?}, radii = {}, gaps = {}", est.mode, est.policy, est.radii.len(), est.gap_count());
        }
        Cmd::Type { est, rho } => {
            let o = estimate(&est)?;
            let t = type_from_order(&o, rho)?;
            println!("type = {:.6}", t.value);
            println!("rho = {}", t.rho_used);
            println!("order = {:.6}", o.value);
        }
        Cmd::Solve { problem, n, eval, theta, csv } => {
            let p = load_problem(&problem)?;
            let s = solve_series(&p, n)?;
            println!("terms = {}", s.len());
            println!("r_reliable = {}", s.r_reliable);
            if let Some(path) = csv {
                fs::write(path, s.to_csv())?;
            }
            if let Some(r) = eval {
                let v = eval_series(&s, Complex64::from_polar(r, theta))?;
                println!("logmag = {}", v.logmag);
                println!("phase = {}", v.phase);
            }
        }
        Cmd::Residual { problem, n, r, n_theta } => {
            let p = load_problem(&problem)?;
            let s = solve_series(&p, n)?;
            println!("residual = {:e}", residual(&p, &s, r, n_theta)?);
            if p.solution.is_some() {
                println!("closed_form_residual = {:e}", closed_form_residual(&p, Complex64::new(r, 0.0))?);
            }
        }
        Cmd::Bound { problem, r, theta, nu, log_c, table, n_terms, grid } => {
            let p = load_problem(&problem)?;
            let opts = BoundOptions {
                nu,
                ln_c_override: log_c,
                ..BoundOptions::default()
            };
            if table {
                let s = solve_series(&p, n_terms)?;
                let rep = domination_check(&p, &s, &grid.grid()?, 16, &opts)?;
                print!("{}", rep.to_csv());
                for n in &rep.notes {
                    println!("# {n}");
                }
                if !rep.violations.is_empty() {
                    return Err(Fail::Verdict("series exceeds the bound".into()));
                }
            } else {
                let r = r.ok_or_else(|| Error::Parse("--r or --table is required".into()))?;
                let b = growth_bound(&p, r, theta, &opts)?;
                println!("log_bound = {}", b.log_bound.to_real());
                println!("log_c = {}", b.ln_c);
                println!("integral = {}", b.integral.to_real());
                println!("n_c = {}", b.n_c);
                println!("nodes = {}, converged = {}", b.nodes, b.converged);
            }
        }
        Cmd::Measure { func, triple, mu, omega, rho, grid } => {
            let f = lookup_or_parse(&func)?;
            let t: ScaleTriple = triple.parse()?;
            let typed = omega.zip(rho);
            let rep = lower_set_measure(&f, &t, mu, &grid.grid()?, typed, &GrowthOptions::default())?;
            println!("r,holds,cumulative_log_measure");
            for i in 0..rep.radii.len() {
                println!("{},{},{}", rep.radii[i], rep.holds[i], rep.cumulative[i]);
            }
            println!("# set: {}", rep.set);
            println!("# unbounded: {}", rep.unbounded);
        }
        Cmd::Verify { scenario, config, out, plot } => verify(&scenario, config.as_deref(), &out, plot)?,
        Cmd::Catalog => {
            for c in catalog() {
                println!("{:<12} {:<28} {}", c.name, c.source, c.note);
            }
        }
        Cmd::CheckTriple { triple, p_max } => {
            let t: ScaleTriple = triple.parse()?;
            let rep = check_admissible(&t, p_max, &SampleSpec::default())?;
            print!("{}", rep.summary());
            if !rep.pass() {
                return Err(Fail::Verdict(format!("triple {t} is not admissible")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Verdict(msg)) => {
            eprintln!("verdict: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Fail::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
