//! The `ipdma` command line.
//!
//! Every run first writes `manifest.toml` to the output directory: the
//! fully resolved configuration, which can be passed back with `--config`
//! to regenerate the same outputs. Outputs carry no timestamps, so reruns
//! are byte-identical.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ipdma_core::posterior::{flag_moderators, kde, prior_curve, summarize, Grid, PriorCurve};
use ipdma_core::priors::tuning_f;
use ipdma_core::sampler::dic;
use ipdma_core::simulation::{
    dataset_seed, fit_replicate, generate_dataset, run_study, ScenarioSpec, StudyConfig,
};
use ipdma_core::{
    run_mcmc_with, ChainConfig, IpdDataset, ModelSpec, PriorMethod, SamplerOptions, ShrinkLevel, Tuning,
};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::exec::Pool;
use crate::io::{self, publish, slug, DrawsFile, MethodOutput};

#[derive(Parser, Debug)]
#[command(name = "ipdma", version, about = "Bayesian IPD meta-analysis of treatment effect moderation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one or more priors to a participant-level CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Participant-level CSV (overrides data.path).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the simulation study and write risk metrics and rankings.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// All 36 scenarios.
        #[arg(long)]
        full_grid: bool,
        /// Scenario grid file (overrides simulate.grid_file).
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Also write every replicate's estimates.
        #[arg(long)]
        audit: bool,
    },
    /// Rebuild summaries, p_gamma tables and densities from saved draws.
    Report {
        #[command(flatten)]
        common: Common,
        /// Draws files (override report.draws).
        #[arg(long, num_args = 1..)]
        draws: Vec<PathBuf>,
    },
    /// Tabulate prior densities of g and of the shrinkage factor, and the
    /// growth of the tuning functions.
    PriorCurves {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method names, e.g. `Flat,HG(a=4),CMG-S3-pow`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `literal` or `conventional`.
    #[arg(long)]
    metric_variant: Option<String>,
    /// Flag moderators with p_gamma below this value.
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

/// Parse `args` (program name first), run the command and return the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(common: &Common, command: &str) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.chains.seed = s;
    }
    if let Some(m) = &common.methods {
        cfg.methods = m.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        cfg.prior = None;
    }
    if let Some(o) = &common.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    if let Some(v) = &common.metric_variant {
        cfg.metric_variant = v.clone();
    }
    if let Some(t) = common.threshold {
        cfg.threshold = t;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.command = Some(command.to_string());
    cfg.version = Some(io::VERSION.to_string());
    Ok(cfg)
}

fn execute(command: Command) -> Result<()> {
    let cfg = match command {
        Command::Fit { common, data } => {
            let mut cfg = resolve(&common, "fit")?;
            if let Some(d) = data {
                cfg.data.path = Some(d.to_string_lossy().into_owned());
            }
            cfg
        }
        Command::Simulate { common, full_grid, scenarios, replicates, audit } => {
            let mut cfg = resolve(&common, "simulate")?;
            cfg.simulate.full_grid |= full_grid;
            cfg.simulate.audit |= audit;
            if let Some(s) = scenarios {
                cfg.simulate.grid_file = Some(s.to_string_lossy().into_owned());
            }
            if let Some(r) = replicates {
                cfg.simulate.replicates = r;
            }
            cfg
        }
        Command::Report { common, draws } => {
            let mut cfg = resolve(&common, "report")?;
            if !draws.is_empty() {
                cfg.report.draws = draws.iter().map(|d| d.to_string_lossy().into_owned()).collect();
            }
            cfg
        }
        Command::PriorCurves { common } => resolve(&common, "prior-curves")?,
    };
    let out = PathBuf::from(&cfg.out);
    publish(&out.join("manifest.toml"), cfg.to_toml()?.as_bytes())?;
    match cfg.command.as_deref() {
        Some("fit") => fit(&cfg, &out),
        Some("simulate") => simulate(&cfg, &out),
        Some("report") => report(&cfg, &out),
        _ => prior_curves(&cfg, &out),
    }
}

fn moderator_indices(data: &IpdDataset, names: &[String]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Ok((0..data.p()).collect());
    }
    names
        .iter()
        .map(|n| {
            data.covariate_names().iter().position(|c| c == n).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown moderator `{n}`; covariates are {}",
                    data.covariate_names().join(", ")
                ))
            })
        })
        .collect()
}

/// Write the summary, p_gamma table and densities of `mu`, `alpha` and
/// every `gamma_k` into `dir`.
fn write_method(dir: &Path, file: &DrawsFile, out: &MethodOutput) -> Result<()> {
    publish(&dir.join("summary.json"), &io::summary_json(out)?)?;
    publish(&dir.join("p_gamma.csv"), &io::p_gamma_csv(out)?)?;
    for name in file.draws.names() {
        if name == "mu" || name == "alpha" || name.starts_with("gamma[") {
            let x = file.draws.pooled(name)?;
            let grid = Grid::around(&x, 256)?;
            let curve = kde(&x, &grid)?;
            publish(&dir.join("density").join(format!("{}.csv", slug(name))), &io::density_csv(&curve)?)?;
        }
    }
    Ok(())
}

fn print_flags(out: &MethodOutput) {
    let list = |ks: &[usize]| {
        if ks.is_empty() {
            "none".to_string()
        } else {
            ks.iter().map(|&k| out.moderators.get(k).cloned().unwrap_or_default()).collect::<Vec<_>>().join(", ")
        }
    };
    println!(
        "{}: p_gamma < {}: {}; 95% CI excludes 0: {}",
        out.label,
        out.threshold,
        list(&out.flags.neighborhood),
        list(&out.flags.ci_excludes_zero)
    );
}

fn write_tables(out: &Path, outputs: &[MethodOutput]) -> Result<()> {
    publish(&out.join("comparison.csv"), &io::comparison_csv(outputs)?)?;
    publish(&out.join("p_gamma.csv"), &io::p_gamma_table_csv(outputs)?)?;
    Ok(())
}

fn fit(cfg: &Config, out: &Path) -> Result<()> {
    let methods = cfg.resolve_methods(&[])?;
    let threshold = cfg.check_threshold()?;
    let chain = cfg.chains.to_config()?;
    let variants = cfg.data.random_effect_variants()?;
    let centering = cfg.data.centering()?;
    let path = cfg.data.path.as_ref().ok_or_else(|| CliError::Usage("no data file (use --data or data.path)".into()))?;
    let data = io::read_dataset(Path::new(path), &cfg.columns)?.center_with(centering);
    let moderators = moderator_indices(&data, &cfg.data.moderators)?;
    let names: Vec<String> = moderators.iter().map(|&k| data.covariate_names()[k].clone()).collect();
    let pool = Pool::new(cfg.workers)?;

    let mut outputs = Vec::new();
    for method in &methods {
        for &re in &variants {
            let mut spec = ModelSpec::new(*method, moderators.clone());
            spec.moderator_random_effects = re;
            let (label, dir) = if re {
                (method.name(), out.join(slug(&method.name())))
            } else {
                (format!("{} (no moderator RE)", method.name()), out.join(format!("{}-no-mre", slug(&method.name()))))
            };
            let draws = run_mcmc_with(&data, &spec, &chain, &SamplerOptions::default(), &pool)?;
            let file = DrawsFile { draws, moderators: names.clone() };
            publish(&dir.join("draws.csv"), &io::write_draws(&file)?)?;
            let summary = summarize(&file.draws)?;
            let output = MethodOutput {
                label,
                method: method.name(),
                moderator_random_effects: Some(re),
                flags: flag_moderators(&summary, threshold),
                summary,
                moderators: names.clone(),
                threshold,
                dic: Some(dic(&file.draws, &data, &spec)?),
            };
            write_method(&dir, &file, &output)?;
            print_flags(&output);
            outputs.push(output);
        }
    }
    write_tables(out, &outputs)?;
    publish(&out.join("dic.csv"), &io::dic_csv(&outputs)?)?;
    Ok(())
}

fn report(cfg: &Config, out: &Path) -> Result<()> {
    let threshold = cfg.check_threshold()?;
    if cfg.report.draws.is_empty() {
        return Err(CliError::Usage("no draws files (use --draws or report.draws)".into()));
    }
    let mut outputs: Vec<MethodOutput> = Vec::new();
    for path in &cfg.report.draws {
        let file = io::read_draws(Path::new(path))?;
        let summary = summarize(&file.draws)?;
        let method = file.draws.provenance().method.clone();
        let mut label = method.clone();
        let mut n = 1;
        while outputs.iter().any(|o| o.label == label) {
            n += 1;
            label = format!("{method}#{n}");
        }
        let output = MethodOutput {
            label: label.clone(),
            method,
            moderator_random_effects: None,
            flags: flag_moderators(&summary, threshold),
            summary,
            moderators: file.moderators.clone(),
            threshold,
            dic: None,
        };
        write_method(&out.join(slug(&label)), &file, &output)?;
        print_flags(&output);
        outputs.push(output);
    }
    write_tables(out, &outputs)
}

fn scenarios(cfg: &Config) -> Result<Vec<ScenarioSpec>> {
    if cfg.simulate.full_grid {
        return Ok(ScenarioSpec::full_grid());
    }
    if let Some(f) = &cfg.simulate.grid_file {
        return io::read_grid(Path::new(f));
    }
    if cfg.simulate.scenarios.is_empty() {
        return Err(CliError::Usage(
            "no scenarios (use --full-grid, --scenarios FILE or simulate.scenarios)".into(),
        ));
    }
    cfg.simulate.scenarios.iter().map(|s| s.parse::<ScenarioSpec>().map_err(CliError::from)).collect()
}

/// Sweeps timed per method to extrapolate the run time.
const PILOT_SWEEPS: usize = 60;

/// Time a short fit of every method on one dataset and scale up.
fn estimate_seconds(grid: &[ScenarioSpec], methods: &[PriorMethod], study: &StudyConfig, workers: usize) -> f64 {
    let (data, truth) = generate_dataset(&grid[0], dataset_seed(study.master_seed, 0, 0));
    let pilot = ChainConfig { n_chains: 1, n_iter: PILOT_SWEEPS, burn_in: PILOT_SWEEPS / 2, thin: 1, seed: study.master_seed };
    let per_sweep: f64 = methods
        .iter()
        .map(|m| {
            let start = Instant::now();
            let _ = fit_replicate(&data, &truth, *m, &pilot, &ipdma_core::exec::Sequential);
            start.elapsed().as_secs_f64() / PILOT_SWEEPS as f64
        })
        .sum();
    let sweeps = (study.chain.n_iter * study.chain.n_chains * grid.len() * study.replicates) as f64;
    per_sweep * sweeps / workers.max(1) as f64
}

fn format_duration(secs: f64) -> String {
    let s = secs.round() as u64;
    match s {
        0..=59 => format!("{s}s"),
        60..=3599 => format!("{}m {:02}s", s / 60, s % 60),
        _ => format!("{}h {:02}m", s / 3600, (s % 3600) / 60),
    }
}

fn simulate(cfg: &Config, out: &Path) -> Result<()> {
    let methods = cfg.resolve_methods(&PriorMethod::roster())?;
    let variant = cfg.metric_variant()?;
    let chain = cfg.chains.to_config()?;
    if cfg.simulate.replicates == 0 {
        return Err(CliError::Usage("replicates must be at least 1".into()));
    }
    let grid = scenarios(cfg)?;
    let pool = Pool::new(cfg.workers)?;
    let study = StudyConfig { replicates: cfg.simulate.replicates, chain, master_seed: chain.seed, variant };
    eprintln!(
        "estimated wall clock: {} ({} scenarios x {} replicates x {} methods on {} workers)",
        format_duration(estimate_seconds(&grid, &methods, &study, pool.workers())),
        grid.len(),
        study.replicates,
        methods.len(),
        pool.workers()
    );
    let report = run_study(&grid, &methods, &study, &pool)?;
    publish(&out.join("report.csv"), &io::report_csv(&report)?)?;
    publish(&out.join("ranking.csv"), &io::ranking_csv(&report)?)?;
    if cfg.simulate.audit {
        let s: Vec<String> = grid.iter().map(ToString::to_string).collect();
        let m: Vec<String> = methods.iter().map(PriorMethod::name).collect();
        publish(&out.join("replicates.csv"), &io::audit_csv(&report, &s, &m)?)?;
    }
    for (s, ranked) in report.rankings() {
        let list: Vec<String> = ranked.iter().map(PriorMethod::name).collect();
        println!("{s}: {}", list.join(" < "));
    }
    let failed: Vec<_> = report.replicates.iter().filter(|r| r.outcome.is_err()).collect();
    for r in &failed {
        if let Err(e) = &r.outcome {
            eprintln!(
                "warning: {} / {} / replicate {}: {e}",
                grid[r.scenario],
                methods[r.method].name(),
                r.replicate
            );
        }
    }
    if !failed.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} of {} fits failed; metrics use the remaining replicates",
            failed.len(),
            report.replicates.len()
        )));
    }
    Ok(())
}

fn needs_b(m: &PriorMethod) -> bool {
    matches!(m, PriorMethod::Cmg { level: ShrinkLevel::S1 | ShrinkLevel::S3, .. })
}

fn prior_curves(cfg: &Config, out: &Path) -> Result<()> {
    let c = &cfg.curves;
    let in_range = c.g_max > 0.0 && c.points >= 2 && c.b > 0.0 && c.b <= 2.0 && c.p > 0.0 && c.p <= 1.0;
    if !in_range {
        return Err(CliError::Usage("curves needs g_max > 0, points >= 2, b in (0, 2] and p in (0, 1]".into()));
    }
    let methods: Vec<PriorMethod> = cfg
        .resolve_methods(&PriorMethod::roster())?
        .into_iter()
        .filter(|m| {
            let ok = m.has_proper_g_hyperprior();
            if !ok {
                eprintln!("warning: skipping {m}: no proper hyperprior on g");
            }
            ok
        })
        .collect();
    let h = 0.5 / c.points as f64;
    let g_grid = Grid::new(c.g_max * h * 2.0, c.g_max, c.points)?;
    let s_grid = Grid::new(h, 1.0 - h, c.points)?;

    let mut g_rows = Vec::new();
    let mut s_rows = Vec::new();
    let mut cond_rows = Vec::new();
    for m in &methods {
        for (x, y) in prior_curve(m, PriorCurve::G, None, c.n_total, &g_grid)? {
            g_rows.push([m.name(), x.to_string(), y.to_string()]);
        }
        for (x, y) in prior_curve(m, PriorCurve::Factor, None, c.n_total, &s_grid)? {
            s_rows.push([m.name(), x.to_string(), y.to_string()]);
        }
        if needs_b(m) {
            for (x, y) in prior_curve(m, PriorCurve::Factor, Some(c.b), c.n_total, &s_grid)? {
                cond_rows.push([m.name(), c.b.to_string(), x.to_string(), y.to_string()]);
            }
        }
    }
    let mut growth = Vec::new();
    for kind in [Tuning::N, Tuning::Log, Tuning::Pow] {
        for &n in &c.n_values {
            if let Ok(f) = tuning_f(kind, n, c.p) {
                growth.push([kind.suffix().to_string(), n.to_string(), c.p.to_string(), f.to_string()]);
            }
        }
    }
    let table = |header: &[&str], rows: &[Vec<String>]| -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Data(e.to_string()))
    };
    let v = |rows: Vec<[String; 3]>| rows.into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let v4 = |rows: Vec<[String; 4]>| rows.into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    publish(&out.join("g_density.csv"), &table(&["method", "g", "density"], &v(g_rows))?)?;
    publish(&out.join("factor_density.csv"), &table(&["method", "factor", "density"], &v(s_rows))?)?;
    publish(
        &out.join("factor_density_conditional.csv"),
        &table(&["method", "b", "factor", "density"], &v4(cond_rows))?,
    )?;
    publish(&out.join("tuning_growth.csv"), &table(&["kind", "n", "p", "f"], &v4(growth))?)?;
    println!("wrote prior curves for {} methods to {}", methods.len(), out.display());
    Ok(())
}
