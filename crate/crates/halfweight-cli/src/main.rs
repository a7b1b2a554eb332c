//! Command-line front end: builds eigenform bundles, runs the verification
//! suites and evaluates L♭ on grids.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use halfweight::charsum;
use halfweight::hecke::{self, EigenformBundle, Family};
use halfweight::kernel::AfeConfig;
use halfweight::lfun;
use halfweight::par;
use halfweight::selftest::{self, SelftestConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

const CONFIG_ENV: &str = "HALFWEIGHT_CONFIG";

#[derive(Parser)]
#[command(name = "halfweight", version, about = "Half-integral weight cusp forms on Γ0(4) and the squarefree series L♭(s)")]
struct Cli {
    /// JSON run configuration (falls back to $HALFWEIGHT_CONFIG).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the default eigenform and write its bundle as JSON.
    Eigenform {
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coefficient tables of f, 𝔤 and 𝔥 as CSV.
    Cusps {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed form against brute force for every admissible modulus.
    CharsumVerify {
        #[arg(long, default_value_t = 400)]
        d_max: u64,
        #[arg(long, default_value_t = 60)]
        m_max: u64,
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized T versus 4T consistency of the approximate functional equation.
    FeVerify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate L♭ on a σ × τ grid; also writes a gnuplot script.
    LflatGrid {
        #[arg(long = "in")]
        input: PathBuf,
        /// a:b:step or a single value.
        #[arg(long)]
        sigma: String,
        /// a:b:step or a single value.
        #[arg(long)]
        tau: String,
        #[arg(long, default_value_t = 40)]
        r_max: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Riesz means of the squarefree partial sums.
    Riesz(ExperimentArgs),
    /// Sign changes of λ_f on squarefree indices.
    Signs(ExperimentArgs),
    /// Run the acceptance criteria and print a JSON report.
    Selftest {
        /// Comma-separated criterion ids; all twelve by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    x: usize,
    /// Bundle to use; built from the run configuration when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Exponent θ of the bound C·x^θ (riesz only).
    #[arg(long, default_value_t = 0.6)]
    exponent: f64,
    /// C is fitted over x ≤ x_fit (riesz only).
    #[arg(long, default_value_t = 1000)]
    x_fit: usize,
}

/// Settings shared by all subcommands.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    ell: u32,
    n_max: usize,
    primes: Vec<u64>,
    afe: AfeConfig,
    threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ell: 6,
            n_max: 20_000,
            primes: vec![3, 5, 7],
            afe: AfeConfig::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.ell >= 2, "ell must be at least 2");
        ensure!(!self.primes.is_empty(), "primes must not be empty");
        self.afe.validate()?;
        Ok(())
    }

    fn parallel(&self) -> bool {
        self.threads != Some(1)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(n) = cfg.threads {
        par::set_threads(n)?;
    }
    match cli.cmd {
        Cmd::Eigenform { ell, n_max, out } => eigenform(&cfg, ell, n_max, &out),
        Cmd::Cusps { input, n_max, out } => cusps(&input, n_max, out.as_deref()),
        Cmd::CharsumVerify { d_max, m_max, ell, out } => charsum_verify(&cfg, ell.unwrap_or(cfg.ell), d_max, m_max, out.as_deref()),
        Cmd::FeVerify { input, trials, seed, out } => fe_verify(&cfg, &input, trials, seed, out.as_deref()),
        Cmd::LflatGrid { input, sigma, tau, r_max, out } => lflat_grid(&cfg, &input, &sigma, &tau, r_max, &out),
        Cmd::Riesz(a) => riesz(&cfg, &a),
        Cmd::Signs(a) => signs(&cfg, &a),
        Cmd::Selftest { only } => run_selftest(&cfg, &only),
    }
}

fn print_json(v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(io::stdout().lock(), "{text}") {
        // A closed pipe (e.g. `| head`) is not a failure.
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn load_bundle(path: &Path) -> Result<EigenformBundle> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading bundle {}", path.display()))?;
    EigenformBundle::from_json(&text).with_context(|| format!("parsing bundle {}", path.display()))
}

fn bundle_or_build(cfg: &RunConfig, input: Option<&Path>, n_min: usize) -> Result<EigenformBundle> {
    match input {
        Some(p) => load_bundle(p),
        None => Ok(hecke::extract_eigenform(cfg.ell, &cfg.primes, cfg.n_max.max(n_min), cfg.parallel())?),
    }
}

/// Open `path` (or stdout) and write the `# {json}` echo line.
fn csv_sink(path: Option<&Path>, echo: &Value) -> Result<csv::Writer<Box<dyn Write>>> {
    let mut w: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout()),
    };
    writeln!(w, "# {}", serde_json::to_string(echo)?)?;
    Ok(csv::Writer::from_writer(w))
}

fn eigenform(cfg: &RunConfig, ell: Option<u32>, n_max: Option<usize>, out: &Path) -> Result<()> {
    let ell = ell.unwrap_or(cfg.ell);
    ensure!(ell >= 2, "ell must be at least 2");
    let n_max = n_max.unwrap_or(cfg.n_max);
    let t0 = Instant::now();
    let b = hecke::extract_eigenform(ell, &cfg.primes, n_max, cfg.parallel())?;
    for (&p, &w) in &b.omega {
        ensure!(w.abs() <= 2.0 + 1e-9, "|ω_{p}| = {w} exceeds 2");
    }
    let mut checks = Vec::new();
    for p in cfg.primes.iter().copied().filter(|&p| p == 3 || p == 5) {
        let r = hecke::companion_residuals(&b, p)?;
        ensure!(r.max_residual() < 1e-6, "T({p}²) eigen-residual {:.3e}", r.max_residual());
        checks.push(json!({"p": p, "max_residual": r.max_residual()}));
    }
    let mut doc = serde_json::to_value(&b)?;
    let echo = json!({"ell": ell, "n_max": n_max, "primes": cfg.primes});
    doc.as_object_mut().expect("bundle is an object").insert("config".into(), echo.clone());
    let f = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    serde_json::to_writer(BufWriter::new(f), &doc)?;
    print_json(&json!({
        "config": echo,
        "out": out,
        "omega": b.omega,
        "c4": [b.c4.re, b.c4.im],
        "niwa_mu": b.niwa_mu,
        "eigen_checks": checks,
        "seconds": t0.elapsed().as_secs_f64(),
    }))
}

#[derive(Serialize)]
struct CuspRow {
    n: usize,
    f_re: f64,
    f_im: f64,
    g_re: f64,
    g_im: f64,
    h_re: f64,
    h_im: f64,
}

fn cusps(input: &Path, n_max: usize, out: Option<&Path>) -> Result<()> {
    let b = load_bundle(input)?;
    ensure!(n_max <= b.n_max, "bundle holds {} coefficients, {n_max} requested", b.n_max);
    let echo = json!({"ell": b.ell, "bundle_n_max": b.n_max, "n_max": n_max, "normalization": "lambda(n) = a(n) n^(1/4 - ell/2)"});
    let mut w = csv_sink(out, &echo)?;
    for n in 1..=n_max {
        let (f, g, h) = (b.lambda(Family::F)[n], b.lambda(Family::G)[n], b.lambda(Family::H)[n]);
        w.serialize(CuspRow {
            n,
            f_re: f.re,
            f_im: f.im,
            g_re: g.re,
            g_im: g.im,
            h_re: h.re,
            h_im: h.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn charsum_verify(cfg: &RunConfig, ell: u32, d_max: u64, m_max: u64, out: Option<&Path>) -> Result<()> {
    let t0 = Instant::now();
    let rows = charsum::verify_grid(ell, d_max, m_max, cfg.parallel())?;
    let echo = json!({"ell": ell, "d_max": d_max, "m_max": m_max});
    let mut w = csv_sink(out, &echo)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let weil = rows.iter().all(|r| r.weil_ok);
    let gb = rows.iter().all(|r| r.g_bound_ok);
    let pass = worst < 1e-9 && weil && gb;
    let summary = json!({
        "config": echo,
        "rows": rows.len(),
        "max_abs_diff": worst,
        "weil_ok": weil,
        "g_bound_ok": gb,
        "pass": pass,
        "seconds": t0.elapsed().as_secs_f64(),
    });
    if out.is_some() {
        print_json(&summary)?;
    } else {
        eprintln!("{summary}");
    }
    if !pass {
        bail!("character-sum verification failed");
    }
    Ok(())
}

fn fe_verify(cfg: &RunConfig, input: &Path, trials: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let b = load_bundle(input)?;
    let rows = lfun::fe_trials(&b, trials, seed, &cfg.afe, cfg.parallel())
        .context("the 4T side needs more coefficients; rebuild the bundle with a larger --n-max")?;
    let echo = json!({"ell": b.ell, "n_max": b.n_max, "trials": trials, "seed": seed, "afe": cfg.afe});
    if let Some(p) = out {
        let mut w = csv_sink(Some(p), &echo)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let pass = rows.iter().all(|r| r.pass);
    let worst = rows.iter().map(|r| r.diff / r.budget).fold(0.0, f64::max);
    print_json(&json!({"config": echo, "pass": pass, "max_diff_over_budget": worst, "trials": rows}))?;
    if !pass {
        bail!("T-independence failed");
    }
    Ok(())
}

/// Parse "a:b:step" (inclusive) or a single number.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number {p:?} in range {s:?}")))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [a] => Ok(vec![*a]),
        [a, b, step] => {
            ensure!(*step > 0.0 && b >= a, "range {s:?} needs a ≤ b and step > 0");
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * step).collect())
        }
        _ => bail!("range {s:?} must be a or a:b:step"),
    }
}

fn gnuplot_script(csv_name: &str, sigmas: &[f64]) -> String {
    let list: Vec<String> = sigmas.iter().map(|s| format!("{s}")).collect();
    format!(
        "# |L_flat(sigma + i tau)| against tau, one curve per sigma\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'tau'\n\
         set ylabel '|L_flat|'\n\
         set logscale y\n\
         plot for [s in \"{}\"] '{}' using (abs($1 - real(s)) < 1e-9 ? $2 : NaN):5 with linespoints title sprintf('sigma = %s', s)\n",
        list.join(" "),
        csv_name
    )
}

fn lflat_grid(cfg: &RunConfig, input: &Path, sigma: &str, tau: &str, r_max: u64, out: &Path) -> Result<()> {
    let b = load_bundle(input)?;
    let sigmas = parse_range(sigma)?;
    let taus = parse_range(tau)?;
    ensure!(sigmas.iter().all(|&s| s > 0.5), "every σ must exceed 1/2");
    let points: Vec<Complex64> = sigmas
        .iter()
        .flat_map(|&s| taus.iter().map(move |&t| Complex64::new(s, t)))
        .collect();
    let mut need = 0;
    for &s in &points {
        need = need.max(lfun::lflat_demand(b.ell, s, r_max, &cfg.afe)?);
    }
    ensure!(
        need <= b.n_max,
        "bundle holds {} coefficients; r_max = {r_max} on this grid needs n_max ≥ {need}",
        b.n_max
    );
    let t0 = Instant::now();
    let grid = lfun::lflat_grid(&b, &points, r_max, &cfg.afe, cfg.parallel())?;
    let echo = json!({"ell": b.ell, "n_max": b.n_max, "r_max": r_max, "afe": cfg.afe});
    let mut w = csv_sink(Some(out), &echo)?;
    for g in &grid {
        w.serialize(g)?;
    }
    w.flush()?;
    let plot = out.with_extension("gp");
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    std::fs::write(&plot, gnuplot_script(&name, &sigmas)).with_context(|| format!("writing {}", plot.display()))?;
    print_json(&json!({
        "config": echo,
        "points": grid.len(),
        "out": out,
        "plot": plot,
        "max_err": grid.iter().map(|g| g.err()).fold(0.0, f64::max),
        "seconds": t0.elapsed().as_secs_f64(),
    }))
}

fn riesz(cfg: &RunConfig, a: &ExperimentArgs) -> Result<()> {
    ensure!(a.x >= 1, "x must be positive");
    let b = bundle_or_build(cfg, a.input.as_deref(), a.x)?;
    let mean = lfun::riesz_mean(&b, a.x)?;
    let fit = lfun::riesz_check(&b, a.exponent, a.x_fit.min(a.x), a.x)?;
    print_json(&json!({
        "config": {"ell": b.ell, "n_max": b.n_max},
        "x": a.x,
        "riesz_mean": [mean.re, mean.im],
        "bound": fit,
    }))
}

fn signs(cfg: &RunConfig, a: &ExperimentArgs) -> Result<()> {
    let b = bundle_or_build(cfg, a.input.as_deref(), a.x)?;
    let rep = lfun::sign_changes(&b, a.x)?;
    print_json(&json!({"config": {"ell": b.ell, "n_max": b.n_max}, "report": rep}))
}

fn run_selftest(cfg: &RunConfig, only: &[u8]) -> Result<()> {
    let st = SelftestConfig {
        parallel: cfg.parallel(),
        afe: cfg.afe.clone(),
        ..SelftestConfig::default()
    };
    let ids: Vec<u8> = if only.is_empty() { (1..=12).collect() } else { only.to_vec() };
    for &id in &ids {
        ensure!((1..=12).contains(&id), "no criterion {id}");
    }
    let t0 = Instant::now();
    let mut ctx = selftest::Context::new(st.clone())?;
    let setup = t0.elapsed().as_secs_f64();
    let mut results = Vec::new();
    for id in ids {
        results.push(ctx.run(id)?);
    }
    let all = results.iter().all(|r| r.pass);
    print_json(&json!({"config": st, "setup_seconds": setup, "all_pass": all, "criteria": results}))?;
    if !all {
        bail!("selftest failed");
    }
    Ok(())
}
