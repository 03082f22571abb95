//! Command-line front end: `simulate`, `fit`, `diagnose` and `summarize`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{load_anchors, load_covariates, load_groups, load_votes, validate_anchors, Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::oracle::{generate, Scenario};
use crate::runner::diagnose::{monitored_rhat, worst};
use crate::runner::{load_run, run_chains, write_run, RunConfig};
use crate::summary::{export_report, summarize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "BRIDGEIRT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bridgeirt", version, about = "Two-domain ideal points with bridge-legislator selection")]
pub struct Cli {
    /// Worker threads for running chains in parallel.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic chamber with known truth.
    Simulate(SimulateArgs),
    /// Run the sampler and write a run directory.
    Fit(FitArgs),
    /// Gelman-Rubin diagnostics for a run directory.
    Diagnose(DiagnoseArgs),
    /// Posterior summaries and plot-ready tables for a run directory.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One of: smoke, recovery, recovery-null, paperlike.
    #[arg(long, default_value = "smoke")]
    pub scenario: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub types: PathBuf,
    /// Legislator covariates; without it the bridge regression has only an intercept.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Anchor file; overrides the one named in the config.
    #[arg(long)]
    pub anchors: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named run length used when no config file is given: default, long, desk, smoke.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub kept: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Leave missing votes out of the likelihood instead of imputing them.
    #[arg(long)]
    pub no_impute: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Run directory written by `fit`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value_t = 1.1)]
    pub rhat_max: f64,
    /// Print every series, not only those at or above the threshold.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Output directory; defaults to `<run>/summary`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV with columns `legislator_id,<group>` for per-group bridging.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// `covariate=increment` in original units; repeatable.
    #[arg(long = "odds-increment", value_parser = parse_increment)]
    pub odds_increment: Vec<(String, f64)>,
    /// Also write each chain's draws as a wide CSV.
    #[arg(long)]
    pub export_draws: bool,
}

fn parse_increment(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected covariate=value, got {s:?}"))?;
    let v: f64 = value.trim().parse().map_err(|_| format!("bad increment {value:?}"))?;
    if !v.is_finite() {
        return Err(format!("increment for {name} must be finite"));
    }
    Ok((name.trim().to_string(), v))
}

/// Exit status for an error: numeric breakdowns get their own code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        // Fails only if the pool is already built, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut out = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &mut out).map(|_| EXIT_OK),
        Command::Fit(a) => cmd_fit(a, &mut out).map(|_| EXIT_OK),
        Command::Diagnose(a) => cmd_diagnose(a, &mut out),
        Command::Summarize(a) => cmd_summarize(a, &mut out).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Chain {
                snapshot: Some(snap), ..
            } = &e
            {
                eprintln!("chain state at failure: {snap}");
            }
            exit_code(&e)
        }
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    let _ = writeln!(out, "{line}");
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let scenario = Scenario::preset(&a.scenario).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "unknown scenario {:?}; expected one of {}",
            a.scenario,
            Scenario::PRESETS.join(", ")
        ))
    })?;
    let truth = generate(&scenario, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    truth.write(&a.out)?;
    say(
        out,
        format_args!(
            "wrote {} legislators ({} bridges), {} bills, {} covariates to {}",
            truth.dataset.n_legislators(),
            truth.ideal.n_bridges(),
            truth.dataset.n_bills(),
            truth.dataset.n_covariates(),
            a.out.display()
        ),
    );
    Ok(())
}

/// Config file or preset, then command-line overrides, validated before any
/// data is read.
pub fn resolve_config(a: &FitArgs) -> Result<RunConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown preset {name:?}; expected one of {}",
                RunConfig::PRESETS.join(", ")
            ))
        })?,
        (None, None) => RunConfig::default(),
    };
    if let Some(v) = a.chains {
        cfg.n_chains = v;
    }
    if let Some(v) = a.burnin {
        cfg.n_burnin = v;
    }
    if let Some(v) = a.kept {
        cfg.n_kept = v;
    }
    if let Some(v) = a.thin {
        cfg.thin = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.no_impute {
        cfg.impute_missing = false;
    }
    if let Some(p) = &a.anchors {
        cfg.anchors.file = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads and cross-checks the inputs of a fit.
pub fn load_inputs(
    votes: &Path,
    types: &Path,
    covariates: Option<&Path>,
    cfg: &RunConfig,
) -> Result<(Dataset, crate::data::AnchorSpec)> {
    let anchor_path = cfg
        .anchors
        .file
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("an anchors file is required (--anchors or [anchors] file)".into()))?;
    let (v, t) = load_votes(votes, types)?;
    let x = match covariates {
        Some(p) => load_covariates(p, v.legislator_ids())?,
        None => DesignMatrix::empty(v.n_legislators()),
    };
    let mut anchors = load_anchors(anchor_path, &v)?;
    if let Some(values) = cfg.anchors.values {
        anchors.anchor_values = values;
        anchors = validate_anchors(anchors, &v)?;
    }
    let data = Dataset::new(v, t, x)?;
    data.check_domain_coverage()?;
    Ok((data, anchors))
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(a)?;
    let (data, anchors) = load_inputs(&a.votes, &a.types, a.covariates.as_deref(), &cfg)?;
    say(
        out,
        format_args!(
            "fitting {} legislators, {} bills, {} covariates: {} chains x {} sweeps",
            data.n_legislators(),
            data.n_bills(),
            data.n_covariates(),
            cfg.n_chains,
            cfg.total_sweeps()
        ),
    );
    let results = run_chains(&data, Some(&anchors), &cfg)?;
    let manifest = write_run(&a.out, &data, Some(&anchors), &cfg, &results)?;
    for (_, s) in &results {
        say(
            out,
            format_args!(
                "chain {}: {:.1}s, eta0 acceptance {:.3}, model acceptance {}",
                s.chain,
                s.runtime_seconds,
                s.eta0_acceptance,
                s.model_acceptance.map_or("n/a".to_string(), |r| format!("{r:.3}"))
            ),
        );
    }
    say(out, format_args!("wrote {}", manifest.display()));
    Ok(())
}

/// Prints R̂ and returns exit 0 when every monitored series is below the
/// threshold, 1 otherwise.
pub fn cmd_diagnose(a: &DiagnoseArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.rhat_max > 1.0) {
        return Err(Error::InvalidConfig("--rhat-max must exceed 1".into()));
    }
    let (_, chains) = load_run(&a.run)?;
    let entries = monitored_rhat(&chains)?;
    let failing: Vec<_> = entries.iter().filter(|e| !(e.rhat < a.rhat_max)).collect();
    for e in &entries {
        if a.all || e.element.is_none() || !(e.rhat < a.rhat_max) {
            say(out, format_args!("{:<28} {:.4}", e.label(), e.rhat));
        }
    }
    if let Some(w) = worst(&entries) {
        say(out, format_args!("worst: {} = {:.4}", w.label(), w.rhat));
    }
    say(
        out,
        format_args!(
            "{} of {} series have R-hat >= {}",
            failing.len(),
            entries.len(),
            a.rhat_max
        ),
    );
    Ok(if failing.is_empty() { EXIT_OK } else { EXIT_DIAGNOSTIC })
}

pub fn cmd_summarize(a: &SummarizeArgs, out: &mut dyn Write) -> Result<()> {
    let (manifest, chains) = load_run(&a.run)?;
    let groups = a
        .groups
        .as_deref()
        .map(|p| load_groups(p, &manifest.legislator_ids))
        .transpose()?;
    let increments: BTreeMap<String, f64> = a.odds_increment.iter().cloned().collect();
    let report = summarize(&chains, &manifest, groups.as_deref(), &increments)?;
    let dir = a.out.clone().unwrap_or_else(|| a.run.join("summary"));
    export_report(&report, &chains, &manifest, groups.as_deref(), &dir)?;
    if a.export_draws {
        for c in &chains {
            c.write_csv(&dir.join(format!("draws_chain_{}.csv", c.chain)))?;
        }
    }
    for p in &report.pips {
        say(out, format_args!("PIP {:<20} {:.3}", p.covariate, p.pip));
    }
    let f = &report.bridging.frequency;
    say(
        out,
        format_args!("bridging frequency {:.3} [{:.3}, {:.3}]", f.mean, f.lo, f.hi),
    );
    say(out, format_args!("wrote {}", dir.display()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_parse() {
        assert_eq!(parse_increment("prcnt=5").unwrap(), ("prcnt".to_string(), 5.0));
        assert!(parse_increment("prcnt").is_err());
        assert!(parse_increment("prcnt=x").is_err());
        assert!(parse_increment("prcnt=inf").is_err());
    }

    #[test]
    fn overrides_are_validated() {
        let cli = Cli::try_parse_from([
            "bridgeirt", "fit", "--votes", "v", "--types", "t", "--out", "o", "--preset", "smoke", "--thin", "0",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        assert!(matches!(resolve_config(&a), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let cli = Cli::try_parse_from([
            "bridgeirt", "fit", "--votes", "v", "--types", "t", "--out", "o", "--preset", "desk", "--chains", "3",
            "--seed", "9", "--anchors", "a.json",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        let cfg = resolve_config(&a).unwrap();
        assert_eq!((cfg.n_chains, cfg.n_burnin, cfg.seed), (3, 1000, 9));
        assert_eq!(cfg.anchors.file.as_deref(), Some(Path::new("a.json")));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_from_args(["bridgeirt", "fit"]), EXIT_USAGE);
        assert_eq!(run_from_args(["bridgeirt", "simulate", "--scenario", "nope", "--out", "/nonexistent/x"]), EXIT_USAGE);
    }
}
