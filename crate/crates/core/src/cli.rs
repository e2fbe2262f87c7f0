//! Command-line front end. `main_cli` parses arguments, merges an optional
//! `key = value` config file (flags win), runs the requested subcommand and
//! maps failures to exit codes: 1 for invalid input, 2 for runtime failures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    self, convergence_check, oracle_report, run_quench, run_sweep, Backend, RunConfig, DEFAULT_CONVERGENCE_TOL,
};
use crate::linalg::TruncationPolicy;
use crate::model::{ChainParams, QuenchSpec};

#[derive(Parser, Debug)]
#[command(name = "xxz-dynamics", version, about = "Quench dynamics of two-spin correlations in the XXZ chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single quench; one CSV row per report time.
    Quench(Flags),
    /// One quench per Δ_F on a grid, sampled at --t-star.
    Sweep(Flags),
    /// Repeat a quench over bond dimensions and time steps.
    Converge(Flags),
    /// Run both backends and report their deviation.
    Oracle(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    delta_i: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_f: Option<f64>,
    /// Δ_F grid as lo:hi:step.
    #[arg(long)]
    delta_grid: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    d_beta: Option<f64>,
    #[arg(long)]
    max_bond: Option<usize>,
    #[arg(long)]
    sv_floor: Option<f64>,
    /// Sampling time of a sweep; defaults to --t-max.
    #[arg(long)]
    t_star: Option<f64>,
    /// Defaults to --dt.
    #[arg(long)]
    report_interval: Option<f64>,
    /// exact or mps.
    #[arg(long)]
    backend: Option<String>,
    /// Accumulated discarded weight that aborts a run.
    #[arg(long)]
    weight_cap: Option<f64>,
    /// Comma-separated bond dimensions for `converge`.
    #[arg(long)]
    m_list: Option<String>,
    /// Comma-separated time steps for `converge`.
    #[arg(long)]
    dt_list: Option<String>,
    /// Convergence tolerance for `converge`.
    #[arg(long)]
    tolerance: Option<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of `key = value` lines using the flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 18] = [
    "sites",
    "delta-i",
    "delta-f",
    "delta-grid",
    "temperature",
    "t-max",
    "dt",
    "d-beta",
    "max-bond",
    "sv-floor",
    "t-star",
    "report-interval",
    "backend",
    "weight-cap",
    "m-list",
    "dt-list",
    "tolerance",
    "out",
];

/// Parses a config file body. Keys may use `-` or `_`.
fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key '{}'", i + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn merge<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match (flag, file.get(key)) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(s)) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad value '{s}' for {key}"))),
        (None, None) => Ok(None),
    }
}

impl Flags {
    /// Fills unset flags from the config file, if any.
    fn resolve(self) -> Result<Flags> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Flags {
            sites: merge(self.sites, &file, "sites")?,
            delta_i: merge(self.delta_i, &file, "delta-i")?,
            delta_f: merge(self.delta_f, &file, "delta-f")?,
            delta_grid: merge(self.delta_grid, &file, "delta-grid")?,
            temperature: merge(self.temperature, &file, "temperature")?,
            t_max: merge(self.t_max, &file, "t-max")?,
            dt: merge(self.dt, &file, "dt")?,
            d_beta: merge(self.d_beta, &file, "d-beta")?,
            max_bond: merge(self.max_bond, &file, "max-bond")?,
            sv_floor: merge(self.sv_floor, &file, "sv-floor")?,
            t_star: merge(self.t_star, &file, "t-star")?,
            report_interval: merge(self.report_interval, &file, "report-interval")?,
            backend: merge(self.backend, &file, "backend")?,
            weight_cap: merge(self.weight_cap, &file, "weight-cap")?,
            m_list: merge(self.m_list, &file, "m-list")?,
            dt_list: merge(self.dt_list, &file, "dt-list")?,
            tolerance: merge(self.tolerance, &file, "tolerance")?,
            out: merge(self.out, &file, "out")?,
            config: self.config,
        })
    }

    fn run_config(&self) -> Result<RunConfig<f64>> {
        let chain = ChainParams::xxz(self.sites.unwrap_or(16), 0.0)?;
        let dt = self.dt.unwrap_or(0.1);
        let quench = QuenchSpec {
            delta_initial: self.delta_i.unwrap_or(0.0),
            delta_final: self.delta_f.unwrap_or(1.0),
            temperature: self.temperature.unwrap_or(0.0),
            t_max: self.t_max.unwrap_or(10.0),
            dt,
            d_beta: self.d_beta.unwrap_or(0.05),
        };
        let truncation = TruncationPolicy::new(self.max_bond.unwrap_or(128), self.sv_floor.unwrap_or(1e-10), true)?;
        let backend = match &self.backend {
            Some(b) => b.parse()?,
            None => Backend::Mps,
        };
        let mut config = RunConfig::new(chain, quench, truncation, backend);
        config.report_interval = self.report_interval.unwrap_or(dt);
        config.output_path = self.out.clone();
        if let Some(cap) = self.weight_cap {
            if !(cap > 0.0) {
                return Err(Error::param("weight cap must be positive"));
            }
            config.weight_cap = Some(cap);
        }
        config.validate()?;
        Ok(config)
    }

    /// Rejects flags that belong to other subcommands.
    fn forbid(&self, command: &str, flags: &[(&str, bool)]) -> Result<()> {
        match flags.iter().find(|(_, set)| *set) {
            Some((name, _)) => Err(Error::param(format!("--{name} is not accepted by '{command}'"))),
            None => Ok(()),
        }
    }

    fn converge_only(&self) -> [(&'static str, bool); 3] {
        [
            ("m-list", self.m_list.is_some()),
            ("dt-list", self.dt_list.is_some()),
            ("tolerance", self.tolerance.is_some()),
        ]
    }

    fn sweep_only(&self) -> [(&'static str, bool); 2] {
        [("delta-grid", self.delta_grid.is_some()), ("t-star", self.t_star.is_some())]
    }
}

/// Grid `lo, lo + step, …, hi`; `hi - lo` must be a whole number of steps.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::param(format!("delta grid '{spec}' is not lo:hi:step"));
    let [lo, hi, step] = parts.as_slice() else {
        return Err(bad());
    };
    let (lo, hi, step): (f64, f64, f64) = (
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
        step.trim().parse().map_err(|_| bad())?,
    );
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && step.is_finite() && hi >= lo) {
        return Err(bad());
    }
    let n = crate::model::whole_steps(hi - lo, step)
        .ok_or_else(|| Error::param(format!("delta grid '{spec}': (hi - lo) is not a multiple of step")))?;
    // Rounded to 12 digits so that 0.2 * 3 prints as 0.6.
    Ok((0..=n).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect())
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::param(format!("bad entry '{}' in {what}", x.trim())))
        })
        .collect()
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

fn classify(e: &Error) -> Failure {
    match e {
        Error::InvalidParameter(_) | Error::Size { .. } | Error::Config(_) => Failure::Invalid(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn quench(flags: Flags) -> std::result::Result<(), Failure> {
    let check = flags
        .forbid("quench", &flags.sweep_only())
        .and_then(|_| flags.forbid("quench", &flags.converge_only()));
    check.map_err(|e| classify(&e))?;
    let config = flags.run_config().map_err(|e| classify(&e))?;
    match run_quench(&config) {
        Ok(records) => emit(&harness::records_to_csv(&records), &config.output_path).map_err(|e| classify(&e)),
        Err(e) => {
            // Keep what was computed before the failure.
            let _ = emit(&harness::records_to_csv(&e.partial), &config.output_path);
            Err(match classify(&e.source) {
                Failure::Invalid(m) => Failure::Invalid(m),
                Failure::Runtime(_) => Failure::Runtime(e.to_string()),
            })
        }
    }
}

fn sweep(flags: Flags) -> std::result::Result<(), Failure> {
    let prepare = || -> Result<(RunConfig<f64>, Vec<f64>, f64)> {
        flags.forbid("sweep", &flags.converge_only())?;
        if flags.delta_f.is_some() {
            return Err(Error::param("--delta-f and --delta-grid are mutually exclusive"));
        }
        let grid = parse_grid(
            flags
                .delta_grid
                .as_deref()
                .ok_or_else(|| Error::param("sweep requires --delta-grid"))?,
        )?;
        let config = flags.run_config()?;
        let t_star = flags.t_star.unwrap_or(config.quench.t_max);
        Ok((config, grid, t_star))
    };
    let (config, grid, t_star) = prepare().map_err(|e| classify(&e))?;
    let result = run_sweep(&config, &grid, t_star).map_err(|e| classify(&e))?;
    for p in result.points.iter().filter(|p| p.error.is_some()) {
        eprintln!("delta_f = {}: {}", p.delta_final, p.error.as_deref().unwrap_or(""));
    }
    emit(&harness::sweep_to_csv(&result), &config.output_path).map_err(|e| classify(&e))?;
    if result.points.iter().all(|p| p.record.is_none()) {
        return Err(Failure::Runtime("every sweep point failed".into()));
    }
    Ok(())
}

fn converge(flags: Flags) -> std::result::Result<(), Failure> {
    let prepare = || -> Result<_> {
        flags.forbid("converge", &flags.sweep_only())?;
        let config = flags.run_config()?;
        let m_list: Vec<usize> = match &flags.m_list {
            Some(s) => parse_list(s, "--m-list")?,
            None => vec![config.truncation.max_bond / 2, config.truncation.max_bond],
        };
        let dt_list: Vec<f64> = match &flags.dt_list {
            Some(s) => parse_list(s, "--dt-list")?,
            None => vec![config.quench.dt, config.quench.dt / 2.0],
        };
        let tol = flags.tolerance.unwrap_or(DEFAULT_CONVERGENCE_TOL);
        if !(tol > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        Ok((config, m_list, dt_list, tol))
    };
    let (config, m_list, dt_list, tol) = prepare().map_err(|e| classify(&e))?;
    let report = convergence_check(&config, &m_list, &dt_list, tol).map_err(|e| classify(&e))?;

    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.11e}"));
    let mut s = String::from("kind,value,final_discarded_weight,deviation_from_previous,deviation_from_exact,error\n");
    for r in &report.bond_runs {
        let _ = writeln!(
            s,
            "max_bond,{},{:.11e},{},,{}",
            r.max_bond,
            r.final_discarded_weight,
            opt(r.deviation_from_previous),
            r.error.as_deref().unwrap_or("").replace(['\n', ','], " ")
        );
    }
    for r in &report.step_runs {
        let _ = writeln!(
            s,
            "dt,{:.11e},,{},{},{}",
            r.dt,
            opt(r.deviation_from_previous),
            opt(r.deviation_from_exact),
            r.error.as_deref().unwrap_or("").replace(['\n', ','], " ")
        );
    }
    let _ = writeln!(s, "# converged={},tolerance={:.11e}", report.converged as u8, report.tolerance);
    emit(&s, &config.output_path).map_err(|e| classify(&e))?;
    if !report.converged {
        eprintln!("not converged in bond dimension at tolerance {tol:e}");
    }
    Ok(())
}

fn oracle(flags: Flags) -> std::result::Result<(), Failure> {
    let prepare = || -> Result<RunConfig<f64>> {
        flags.forbid("oracle", &flags.sweep_only())?;
        flags.forbid("oracle", &flags.converge_only())?;
        if flags.backend.is_some() {
            return Err(Error::param("oracle runs both backends; --backend is not accepted"));
        }
        let mut config = flags.run_config()?;
        config.backend = Backend::Exact;
        config.validate()?;
        Ok(config)
    };
    let config = prepare().map_err(|e| classify(&e))?;
    let report = oracle_report(&config).map_err(|e| match classify(&e.source) {
        Failure::Invalid(m) => Failure::Invalid(m),
        Failure::Runtime(_) => Failure::Runtime(e.to_string()),
    })?;

    let names: Vec<&str> = report
        .exact
        .first()
        .map(|r| r.observables().iter().map(|(n, _)| *n).collect())
        .unwrap_or_default();
    let mut s = String::from("t");
    for n in &names {
        let _ = write!(s, ",{n}_exact,{n}_mps,{n}_abs_diff");
    }
    s.push('\n');
    for (a, b) in report.exact.iter().zip(&report.mps) {
        let _ = write!(s, "{:.11e}", a.t);
        for ((_, x), (_, y)) in a.observables().iter().zip(b.observables().iter()) {
            let _ = write!(s, ",{x:.11e},{y:.11e},{:.11e}", (x - y).abs());
        }
        s.push('\n');
    }
    for (n, d) in &report.deviation.per_observable {
        let _ = writeln!(s, "# max_abs_diff,{n},{d:.11e}");
    }
    emit(&s, &config.output_path).map_err(|e| classify(&e))?;
    eprintln!("max deviation over all observables: {:.3e}", report.deviation.max);
    Ok(())
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn main_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, flags): (fn(Flags) -> std::result::Result<(), Failure>, Flags) = match cli.command {
        Command::Quench(f) => (quench, f),
        Command::Sweep(f) => (sweep, f),
        Command::Converge(f) => (converge, f),
        Command::Oracle(f) => (oracle, f),
    };
    let outcome = flags.resolve().map_err(|e| classify(&e)).and_then(command);
    match outcome {
        Ok(()) => 0,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}\n\nRun with --help for usage.");
            1
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}
