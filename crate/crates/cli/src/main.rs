mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use driftval::chart::render_charts;
use driftval::curves::{
    equivalent_size, estimate_learning_curve, fit_power_law, write_curve_csv,
    write_equivalence_csv, Evaluation, Experiment, InversionOrder, LearningCurveFit,
};
use driftval::ingest::{build_reports, ingest, read_period_order, LossTable};
use driftval::numeric::derive_seed;
use driftval::offload::{flow_scaling_analysis, sequential_offload, FlowScenario};
use driftval::sampling::{empirical_loss, fit_mle, sample_dataset, write_losses_csv, LossRecord};
use driftval::substitution::{equivalent_time, substitution_curve};
use driftval::{DriftPath, Error, LossUnit, Result, SamplingDensity, Window};
use rayon::prelude::*;

use crate::config::RunConfig;

/// Value of data under distribution drift.
#[derive(Debug, Parser)]
#[command(name = "driftval", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config (default 0).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory, created if missing (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Unit for reported losses.
    #[arg(long, global = true, value_parser = ["nats", "bits"])]
    units: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dataset and replicate losses: dataset.csv, losses.csv.
    Simulate,
    /// Estimate and fit a learning curve: curve.csv, fit.json.
    Curves,
    /// Equivalent sizes and effectiveness: equivalence.csv, fit.json.
    Equivalence,
    /// Substitution curve and equivalent time: substitution.csv, equivalent_time.json.
    Substitute,
    /// Sequential offloading: offload.json, offload.csv, and flow.json with a multiplier.
    Offload,
    /// Validate a loss table and write it back in the chosen unit: table.csv.
    Ingest(TableArgs),
    /// Fit, invert and chart a loss table: reports.csv, fits.json, fig4.svg to fig7.svg.
    Report(TableArgs),
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Loss table CSV (`train_period,test_period,train_size,loss,unit,replicate`).
    input: PathBuf,
    /// Sidecar CSV `period,period_index` giving the chronological order.
    #[arg(long, value_name = "PATH")]
    periods: Option<PathBuf>,
    /// Invert each replicate (when at least 3) instead of the mean loss.
    #[arg(long)]
    per_replicate: bool,
}

struct Context {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
    units: LossUnit,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let usage = e.is_validation() || matches!(e, Error::Io(_));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.global.seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let units = LossUnit::parse(cli.global.units.as_deref().or(cfg.units.as_deref()).unwrap_or("nats"))?;
    fs::create_dir_all(&out)?;
    let ctx = Context { cfg, seed, out, units };
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Curves => curves(&ctx),
        Command::Equivalence => equivalence(&ctx),
        Command::Substitute => substitute(&ctx),
        Command::Offload => offload(&ctx),
        Command::Ingest(args) => ingest_cmd(&ctx, &args),
        Command::Report(args) => report(&ctx, &args),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

impl Context {
    fn experiment<'a>(&self, path: &'a DriftPath) -> Experiment<'a> {
        Experiment {
            path,
            test_time: self.cfg.test_time,
            evaluation: self.cfg.evaluation(),
            seed: self.seed,
        }
    }

    /// The configured fit, the analytic curve for non-sampling modes, or a
    /// fit of the test-time curve.
    fn fit(&self, exp: &Experiment) -> Result<LearningCurveFit> {
        if let Some(f) = self.cfg.fit {
            return Ok(f);
        }
        match exp.evaluation {
            Evaluation::Analytic | Evaluation::Limit => {
                Ok(LearningCurveFit::analytic(&exp.path.at(exp.test_time)?, exp.test_time))
            }
            Evaluation::MonteCarlo { .. } => {
                let own = SamplingDensity::point(exp.test_time);
                let pts = estimate_learning_curve(exp, &own, &self.cfg.fit_sizes())?;
                Ok(fit_power_law(&pts)?.with_test_time(exp.test_time))
            }
        }
    }

    fn save_config(&self) -> Result<()> {
        write_text(&self.out, "config.json", &serde_json::to_string_pretty(&self.cfg)?)
    }
}

fn simulate(ctx: &Context) -> Result<()> {
    let path = ctx.cfg.drift_path()?;
    let density = ctx.cfg.density(&path)?;
    let sizes = ctx.cfg.sizes();
    let n_max = *sizes.iter().max().unwrap_or(&1);
    let data = sample_dataset(&path, &density, n_max as usize, derive_seed(ctx.seed, &[1]))?;
    data.write_csv(create(&ctx.out, "dataset.csv")?)?;

    let replicates = ctx.cfg.evaluation().replicates();
    let pseudo = ctx.cfg.pseudo_count.unwrap_or(driftval::sampling::DEFAULT_SMOOTHING);
    let test_size = ctx.cfg.test_size.unwrap_or(driftval::curves::DEFAULT_TEST_SIZE);
    let test_density = SamplingDensity::point(ctx.cfg.test_time);
    let records: Vec<Vec<LossRecord>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let test = sample_dataset(&path, &test_density, test_size, derive_seed(ctx.seed, &[3, r as u64]))?;
            sizes
                .iter()
                .map(|&n| {
                    let train = sample_dataset(&path, &density, n as usize, derive_seed(ctx.seed, &[2, r as u64, n]))?;
                    let loss = empirical_loss(&fit_mle(&train, pseudo)?, &test)?;
                    Ok(LossRecord { replicate: r, n, loss_nats: loss })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<LossRecord> = records.into_iter().flatten().collect();
    write_losses_csv(&flat, ctx.units, create(&ctx.out, "losses.csv")?)?;
    ctx.save_config()
}

fn curves(ctx: &Context) -> Result<()> {
    let path = ctx.cfg.drift_path()?;
    let exp = ctx.experiment(&path);
    let train = ctx
        .cfg
        .density
        .clone()
        .unwrap_or(SamplingDensity::point(ctx.cfg.test_time));
    let pts = estimate_learning_curve(&exp, &train, &ctx.cfg.sizes())?;
    write_curve_csv(&pts, ctx.units, create(&ctx.out, "curve.csv")?)?;
    let fit = fit_power_law(&pts)?.with_test_time(ctx.cfg.test_time);
    write_text(&ctx.out, "fit.json", &fit.to_json()?)?;
    ctx.save_config()
}

fn equivalence(ctx: &Context) -> Result<()> {
    let path = ctx.cfg.drift_path()?;
    let exp = ctx.experiment(&path);
    let fit = ctx.fit(&exp)?;
    write_text(&ctx.out, "fit.json", &fit.to_json()?)?;
    let trains = if ctx.cfg.trains.is_empty() {
        vec![ctx.cfg.density(&path)?]
    } else {
        ctx.cfg.trains.clone()
    };
    let mut reports = Vec::new();
    for train in &trains {
        for &n in &ctx.cfg.sizes() {
            reports.push(equivalent_size(&exp, train, n, &fit, ctx.cfg.inversion)?);
        }
    }
    write_equivalence_csv(&reports, create(&ctx.out, "equivalence.csv")?)?;
    ctx.save_config()
}

fn substitute(ctx: &Context) -> Result<()> {
    let path = ctx.cfg.drift_path()?;
    let exp = ctx.experiment(&path);
    let fit = ctx.fit(&exp)?;
    let h = path.horizon();
    let t2 = ctx.cfg.t2.unwrap_or(h);
    let t1s = if ctx.cfg.t1s.is_empty() {
        (0..=4).map(|k| h * k as f64 / 4.0).collect()
    } else {
        ctx.cfg.t1s.clone()
    };
    let curve = substitution_curve(&exp, t2, &t1s, &ctx.cfg.sizes(), &fit)?;
    curve.write_csv(create(&ctx.out, "substitution.csv")?)?;
    for (t1, n) in curve.monotonicity_violations() {
        eprintln!("warning: f_n({t1}, {t2}) moves away from its frontier at n = {n}");
    }
    let density = ctx.cfg.density(&path)?;
    let window = Window::new(0.0, density.support().1)?;
    let et = equivalent_time(&path, &density, window)?;
    write_text(&ctx.out, "equivalent_time.json", &et.to_json()?)?;
    ctx.save_config()
}

fn offload(ctx: &Context) -> Result<()> {
    let path = ctx.cfg.drift_path()?;
    let exp = ctx.experiment(&path);
    let fit = ctx.fit(&exp)?;
    let density = ctx.cfg.density(&path)?;
    let end = density.support().1;
    let opts = ctx.cfg.offload_options();
    let trace = sequential_offload(&exp, &density, Window::new(0.0, end)?, ctx.cfg.n(), &fit, &opts)?;
    write_text(&ctx.out, "offload.json", &trace.to_json()?)?;
    trace.write_csv(create(&ctx.out, "offload.csv")?)?;
    if let Some(m) = ctx.cfg.offload.multiplier {
        let scenario = FlowScenario::new(density, m, end)?;
        let cmp = flow_scaling_analysis(&exp, &scenario, &fit, &opts)?;
        write_text(&ctx.out, "flow.json", &serde_json::to_string_pretty(&cmp)?)?;
    }
    ctx.save_config()
}

fn load_table(args: &TableArgs) -> Result<LossTable> {
    let order = match &args.periods {
        Some(p) => Some(read_period_order(File::open(p)?)?),
        None => None,
    };
    ingest(File::open(&args.input)?, order.as_ref())
}

fn ingest_cmd(ctx: &Context, args: &TableArgs) -> Result<()> {
    let table = load_table(args)?;
    table.write_csv(ctx.units, create(&ctx.out, "table.csv")?)?;
    println!(
        "{} rows, {} periods ({})",
        table.rows().len(),
        table.periods().len(),
        table.periods().join(", ")
    );
    Ok(())
}

fn report(ctx: &Context, args: &TableArgs) -> Result<()> {
    let table = load_table(args)?;
    let order = if args.per_replicate {
        InversionOrder::PerReplicate
    } else {
        InversionOrder::OfMean
    };
    let reports = build_reports(&table, order)?;
    reports.write_csv(create(&ctx.out, "reports.csv")?)?;
    write_text(&ctx.out, "fits.json", &reports.fits_json()?)?;
    for (name, svg) in render_charts(&table, &reports)? {
        write_text(&ctx.out, &name, &svg)?;
    }
    Ok(())
}
