use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use electrolyzer_sched::curve::{eval_pwl, fit_concave_pwl, load_curve_points, reference_curve, ProductionCurve};
use electrolyzer_sched::scenario::{
    compare_configurations, emit_comparison, emit_outputs, hour_detail, run_configurations, run_scenario, OutputFormat,
    ScenarioConfig, ScenarioResult,
};

#[derive(Parser)]
#[command(name = "electrolyzer-sched", version, about = "Schedule a wind plant feeding electrolyzer modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the concave piecewise-linear production model and report its error.
    FitCurve(FitArgs),
    /// Solve one scenario and write its schedule and metrics.
    Schedule {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve several module counts at fixed total capacity and tabulate
    /// percent increases over the fewest-module configuration.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare one hour across module and segment counts.
    HourDetail {
        #[arg(long)]
        hour: usize,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value_t = 88)]
    segments: usize,
    /// Curve CSV (load_fraction, h_norm_kg_per_hour_per_mw); reference curve if absent.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[command(flatten)]
    reference: ReferenceArgs,
    /// Module capacity used to express the error in kg/h.
    #[arg(long, default_value_t = 100.0)]
    capacity: f64,
    /// Write the segments as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ReferenceArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    x_min: Option<f64>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Market CSV; the bundled synthetic week if absent.
    #[arg(long)]
    market: Option<PathBuf>,
    #[arg(long)]
    curve: Option<PathBuf>,
    #[command(flatten)]
    reference: ReferenceArgs,
    #[arg(long)]
    modules: Option<usize>,
    /// MW per module
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long)]
    segments: Option<usize>,
    /// USD/kg
    #[arg(long)]
    hydrogen_price: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Seconds; runs stopped by time are not reproducible.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    improvement_passes: Option<usize>,
    #[arg(long)]
    improvement_window: Option<usize>,
    #[arg(long)]
    improvement_nodes: Option<usize>,
    /// Solve day by day with a one-day look-ahead instead of the whole horizon.
    #[arg(long)]
    day_split: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Module counts to compare.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 10])]
    module_counts: Vec<usize>,
    /// Segment counts to run.
    #[arg(long, value_delimiter = ',', default_values_t = [88])]
    segment_counts: Vec<usize>,
    /// MW shared by all modules.
    #[arg(long, default_value_t = 100.0)]
    total_capacity: f64,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

impl ReferenceArgs {
    fn apply(&self, p: &mut electrolyzer_sched::curve::ReferenceParams) {
        for (field, value) in [
            (&mut p.alpha, self.alpha),
            (&mut p.beta, self.beta),
            (&mut p.gamma, self.gamma),
            (&mut p.x_min, self.x_min),
        ] {
            if let Some(v) = value {
                *field = v;
            }
        }
    }
}

impl ScenarioArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if self.market.is_some() {
            c.market_file = self.market.clone();
        }
        if self.curve.is_some() {
            c.curve_file = self.curve.clone();
        }
        self.reference.apply(&mut c.reference);
        if let Some(m) = self.modules {
            c.modules = m;
        }
        if let Some(v) = self.capacity {
            c.module_capacity_mw = v;
        }
        if let Some(v) = self.segments {
            c.segments = v;
        }
        if self.hydrogen_price.is_some() {
            c.electrolyzer.hydrogen_price = self.hydrogen_price;
        }
        if self.node_limit.is_some() {
            c.solver.node_limit = self.node_limit;
        }
        if self.time_limit.is_some() {
            c.solver.time_limit = self.time_limit;
        }
        if let Some(v) = self.gap {
            c.solver.gap_tolerance = v;
        }
        if let Some(v) = self.improvement_passes {
            c.solver.improvement_passes = v;
        }
        if let Some(v) = self.improvement_window {
            c.solver.improvement_window = v;
        }
        if let Some(v) = self.improvement_nodes {
            c.solver.improvement_nodes = v;
        }
        c.day_split |= self.day_split;
        Ok(c)
    }
}

/// One config per (segments, modules) pair sharing the total capacity.
fn grid_configs(base: &ScenarioConfig, grid: &GridArgs) -> Result<Vec<Vec<ScenarioConfig>>> {
    if grid.module_counts.contains(&0) {
        bail!("module counts must be positive");
    }
    Ok(grid
        .segment_counts
        .iter()
        .map(|&segments| {
            grid.module_counts
                .iter()
                .map(|&modules| ScenarioConfig {
                    name: Some(format!("m{modules}_s{segments}")),
                    modules,
                    module_capacity_mw: grid.total_capacity / modules as f64,
                    segments,
                    initial: None,
                    ..base.clone()
                })
                .collect()
        })
        .collect())
}

fn summary(r: &ScenarioResult) {
    let m = &r.metrics;
    println!(
        "{}: {} x {:.2} MW, {} segments: power {:.2} MWh, hydrogen {:.2} kg, revenue ${:.2} \
         ({:?}, bound ${:.2}, gap {:.4}%, {} nodes, max residual {:.1e})",
        m.name,
        m.modules,
        m.module_capacity_mw,
        m.segments,
        m.total_power_mwh,
        m.total_hydrogen_kg,
        m.total_revenue_usd,
        m.solve.status,
        m.solve.best_bound_usd,
        100.0 * m.solve.gap,
        m.solve.nodes,
        m.max_residual
    );
}

fn fit_curve(args: &FitArgs) -> Result<()> {
    let curve: ProductionCurve = match &args.curve {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            load_curve_points(file).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            let mut p = electrolyzer_sched::curve::ReferenceParams::default();
            args.reference.apply(&mut p);
            reference_curve(p)?
        }
    };
    let c = args.capacity;
    let pwl = fit_concave_pwl(&curve, args.segments, c)?;
    let n = 10_000;
    let (x0, x1) = (curve.x_min(), curve.x_max());
    let max_err = (0..=n)
        .map(|k| x0 + (x1 - x0) * k as f64 / n as f64)
        .map(|x| Ok(c * curve.value(x) - eval_pwl(&pwl, x * c, c)?))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("{:>4} {:>14} {:>16} {:>10} {:>10}", "seg", "slope (kg/MWh)", "intercept (kg/h/MW)", "from", "to");
    let bp = pwl.breakpoints();
    for (i, s) in pwl.segments().iter().enumerate() {
        println!("{:>4} {:>14.6} {:>16.6} {:>10.4} {:>10.4}", i, s.slope, s.intercept, bp[i], bp[i + 1]);
    }
    println!("max underestimate at {c} MW: {max_err:.6} kg/h");
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record([
            "segment",
            "slope_kg_per_mwh",
            "intercept_kg_per_h_per_mw",
            "from_load_fraction",
            "to_load_fraction",
        ])?;
        for (i, s) in pwl.segments().iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.slope.to_string(),
                s.intercept.to_string(),
                bp[i].to_string(),
                bp[i + 1].to_string(),
            ])?;
        }
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitCurve(args) => fit_curve(&args),
        Command::Schedule { scenario, output } => {
            let config = scenario.config()?;
            let result = run_scenario(&config)?;
            summary(&result);
            for path in emit_outputs(&result, &output.out_dir, output.format.into())? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Compare { scenario, grid, output } => {
            let base = scenario.config()?;
            for configs in grid_configs(&base, &grid)? {
                let results = run_configurations(&configs)?;
                for r in &results {
                    summary(r);
                    emit_outputs(r, &output.out_dir, output.format.into())?;
                }
                let table = compare_configurations(&results)?;
                println!("\n{} segments\n{table}", table.segments);
                println!("wrote {}", emit_comparison(&table, &output.out_dir, output.format.into())?.display());
            }
            Ok(())
        }
        Command::HourDetail { hour, scenario, grid } => {
            let base = scenario.config()?;
            let mut all = Vec::new();
            for configs in grid_configs(&base, &grid)? {
                all.extend(run_configurations(&configs)?);
            }
            print!("{}", hour_detail(&all, hour)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
