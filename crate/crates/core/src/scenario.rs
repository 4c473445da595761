//! Scenario runs: configuration, solve, audit and the reports built from
//! solved schedules.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curve::{fit_concave_pwl, load_curve_points, reference_curve, CurveError, PwlCurve, ReferenceParams};
use crate::market::{parse_market_csv, MarketError, MarketSeries};
use crate::model::{
    build_milp, build_problem, verify_schedule, ElectrolyzerSpec, FleetConfig, ModelError, Schedule, ScheduleProblem,
};
use crate::solver::{relative_gap, solve_milp_from, warm_start_heuristic, MipOptions, MipStatus, SolverError};

/// Largest constraint residual accepted before results are emitted.
pub const VERIFY_TOL: f64 = 1e-6;

/// Hours per sub-problem in day-split mode.
pub const DAY_HOURS: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: toml::de::Error },
    #[error("market data {path}: {source}")]
    Market { path: String, source: MarketError },
    #[error("curve {path}: {source}")]
    Curve { path: String, source: CurveError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("scenario `{name}`: solver finished with status {status:?} and no schedule")]
    NoSchedule { name: String, status: MipStatus },
    #[error("scenario `{name}`: schedule fails verification (max residual {residual:e})")]
    Verification { name: String, residual: f64 },
    #[error("results cannot be compared: {0}")]
    Mismatch(String),
    #[error("hour {hour} outside the horizon of {horizon} hours")]
    HourOutOfRange { hour: usize, horizon: usize },
}

/// Optional overrides of the per-module parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModuleOverrides {
    pub c_min_fraction: Option<f64>,
    pub ramp_fraction: Option<f64>,
    pub startup_energy_fraction: Option<f64>,
    /// USD/kg
    pub hydrogen_price: Option<f64>,
}

/// State of each module in the hour before the horizon.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub on: Vec<bool>,
    pub power_mw: Vec<f64>,
}

/// One scenario, read from TOML. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub modules: usize,
    pub module_capacity_mw: f64,
    pub segments: usize,
    /// Market CSV; the bundled synthetic week when absent.
    pub market_file: Option<PathBuf>,
    /// Curve CSV; the reference curve when absent.
    pub curve_file: Option<PathBuf>,
    pub reference: ReferenceParams,
    pub electrolyzer: ModuleOverrides,
    /// Cold start when absent.
    pub initial: Option<InitialState>,
    /// Solve consecutive days separately, carrying the module state over.
    pub day_split: bool,
    pub solver: MipOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: None,
            modules: 1,
            module_capacity_mw: 100.0,
            segments: 88,
            market_file: None,
            curve_file: None,
            reference: ReferenceParams::default(),
            electrolyzer: ModuleOverrides::default(),
            initial: None,
            day_split: false,
            solver: default_solver_options(),
        }
    }
}

/// Search settings used for scenarios unless overridden: a short tree search
/// for the bound and early incumbents, then neighborhood passes.
pub fn default_solver_options() -> MipOptions {
    MipOptions {
        node_limit: Some(20),
        improvement_passes: 4,
        improvement_window: 8,
        improvement_nodes: 100,
        ..MipOptions::default()
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        let mut config =
            Self::from_toml(&text).map_err(|source| ScenarioError::Config { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for file in [&mut config.market_file, &mut config.curve_file].into_iter().flatten() {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(config)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("m{}_s{}", self.modules, self.segments))
    }

    pub fn spec(&self) -> ElectrolyzerSpec {
        let mut spec = ElectrolyzerSpec::new(self.module_capacity_mw);
        let o = &self.electrolyzer;
        if let Some(v) = o.c_min_fraction {
            spec.c_min_fraction = v;
        }
        if let Some(v) = o.ramp_fraction {
            spec.ramp_fraction = v;
        }
        if let Some(v) = o.startup_energy_fraction {
            spec.startup_energy_fraction = v;
        }
        if let Some(v) = o.hydrogen_price {
            spec.hydrogen_price = v;
        }
        spec
    }

    pub fn fleet(&self) -> FleetConfig {
        let mut fleet = FleetConfig::cold(self.modules, self.spec());
        if let Some(init) = &self.initial {
            fleet.initial_on = init.on.clone();
            fleet.initial_power = init.power_mw.clone();
        }
        fleet
    }

    pub fn load_market(&self) -> Result<MarketSeries, ScenarioError> {
        match &self.market_file {
            None => Ok(MarketSeries::demo_week()),
            Some(path) => {
                let file = fs::File::open(path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                parse_market_csv(file)
                    .map_err(|source| ScenarioError::Market { path: path.display().to_string(), source })
            }
        }
    }

    /// Fits the configured curve for this module capacity.
    pub fn pwl(&self) -> Result<PwlCurve, ScenarioError> {
        let (label, curve) = match &self.curve_file {
            None => ("reference".to_string(), reference_curve(self.reference)),
            Some(path) => {
                let file = fs::File::open(path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                (path.display().to_string(), load_curve_points(file))
            }
        };
        let wrap = |source| ScenarioError::Curve { path: label.clone(), source };
        let curve = curve.map_err(wrap)?;
        fit_concave_pwl(&curve, self.segments, self.module_capacity_mw).map_err(wrap)
    }

    pub fn problem(&self) -> Result<ScheduleProblem, ScenarioError> {
        Ok(build_problem(self.load_market()?, self.fleet(), self.pwl()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    pub hour: usize,
    pub price_usd_mwh: f64,
    pub availability_mw: f64,
    pub p_grid_mw: f64,
    pub p_e_total_mw: f64,
    pub p_su_total_mw: f64,
    pub h_total_kg: f64,
    pub module_p_e_mw: Vec<f64>,
    pub module_h_kg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: MipStatus,
    pub best_bound_usd: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Wall clock; the only field that varies between identical runs.
    pub seconds: f64,
}

/// Headline figures of one scenario, as written to the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub name: String,
    pub modules: usize,
    pub module_capacity_mw: f64,
    pub segments: usize,
    pub day_split: bool,
    pub hours: usize,
    /// MWh, excluding startup energy
    pub total_power_mwh: f64,
    pub total_startup_mwh: f64,
    pub total_hydrogen_kg: f64,
    pub grid_revenue_usd: f64,
    pub hydrogen_revenue_usd: f64,
    /// Grid revenue plus hydrogen value: the objective.
    pub total_revenue_usd: f64,
    pub max_residual: f64,
    pub solve: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub metrics: Metrics,
    pub hydrogen_price_usd_kg: f64,
    pub hourly: Vec<HourRecord>,
    pub schedule: Schedule,
}

impl ScenarioResult {
    fn new(
        config: &ScenarioConfig,
        problem: &ScheduleProblem,
        schedule: Schedule,
        solve: SolveStats,
        residual: f64,
    ) -> Self {
        let prices = problem.prices();
        let hydrogen_price = problem.spec().hydrogen_price;
        let hourly: Vec<HourRecord> = (0..problem.horizon())
            .map(|t| {
                let row = &schedule.modules[t];
                HourRecord {
                    hour: t,
                    price_usd_mwh: prices[t],
                    availability_mw: problem.availability[t],
                    p_grid_mw: schedule.p_grid[t],
                    p_e_total_mw: row.iter().map(|m| m.p_e).sum(),
                    p_su_total_mw: row.iter().map(|m| m.p_su).sum(),
                    h_total_kg: row.iter().map(|m| m.h).sum(),
                    module_p_e_mw: row.iter().map(|m| m.p_e).collect(),
                    module_h_kg: row.iter().map(|m| m.h).collect(),
                }
            })
            .collect();
        let total_hydrogen_kg: f64 = hourly.iter().map(|h| h.h_total_kg).sum();
        let grid_revenue_usd: f64 = hourly.iter().map(|h| h.price_usd_mwh * h.p_grid_mw).sum();
        let hydrogen_revenue_usd = hydrogen_price * total_hydrogen_kg;
        let metrics = Metrics {
            name: config.display_name(),
            modules: config.modules,
            module_capacity_mw: config.module_capacity_mw,
            segments: config.segments,
            day_split: config.day_split,
            hours: problem.horizon(),
            total_power_mwh: hourly.iter().map(|h| h.p_e_total_mw).sum(),
            total_startup_mwh: hourly.iter().map(|h| h.p_su_total_mw).sum(),
            total_hydrogen_kg,
            grid_revenue_usd,
            hydrogen_revenue_usd,
            total_revenue_usd: grid_revenue_usd + hydrogen_revenue_usd,
            max_residual: residual,
            solve,
        };
        Self { metrics, hydrogen_price_usd_kg: hydrogen_price, hourly, schedule }
    }

    pub fn total_capacity_mw(&self) -> f64 {
        self.metrics.modules as f64 * self.metrics.module_capacity_mw
    }

    /// Mean distance, in load fraction, between a producing module's power
    /// and the load fraction `peak` of best specific production.
    pub fn mean_peak_distance(&self, peak: f64) -> f64 {
        let c = self.metrics.module_capacity_mw;
        let (sum, n) = self
            .hourly
            .iter()
            .flat_map(|h| h.module_p_e_mw.iter())
            .filter(|&&p| p > 0.0)
            .fold((0.0, 0usize), |(s, n), &p| (s + (p / c - peak).abs(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Builds, solves and audits one scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult, ScenarioError> {
    run_scenario_from(config, &[])
}

/// As [`run_scenario`], with extra starting schedules for the solver.
/// Starts of the wrong shape are ignored.
pub fn run_scenario_from(config: &ScenarioConfig, starts: &[Schedule]) -> Result<ScenarioResult, ScenarioError> {
    let problem = config.problem()?;
    let started = Instant::now();
    let (schedule, mut stats) =
        if config.day_split { solve_by_day(config, &problem, starts)? } else { solve_whole(config, &problem, starts)? };
    stats.seconds = started.elapsed().as_secs_f64();
    let report = verify_schedule(&problem, &schedule)?;
    let residual = report.max_residual();
    if !report.is_feasible(VERIFY_TOL) {
        return Err(ScenarioError::Verification { name: config.display_name(), residual });
    }
    Ok(ScenarioResult::new(config, &problem, schedule, stats, residual))
}

fn fits(problem: &ScheduleProblem, s: &Schedule) -> bool {
    s.p_grid.len() == problem.horizon() && s.modules.iter().all(|row| row.len() == problem.n_modules())
}

fn solve_whole(
    config: &ScenarioConfig,
    problem: &ScheduleProblem,
    starts: &[Schedule],
) -> Result<(Schedule, SolveStats), ScenarioError> {
    let instance = build_milp(problem);
    let mut all = vec![warm_start_heuristic(problem)];
    all.extend(starts.iter().filter(|s| fits(problem, s)).cloned());
    let r = solve_milp_from(&instance, &config.solver, &all)?;
    let stats = SolveStats {
        status: r.status,
        best_bound_usd: r.best_bound,
        gap: r.gap,
        nodes: r.nodes,
        lp_iterations: r.lp_iterations,
        seconds: 0.0,
    };
    match r.incumbent {
        Some(s) => Ok((s, stats)),
        None => Err(ScenarioError::NoSchedule { name: config.display_name(), status: r.status }),
    }
}

/// Rolling daily solves: each day is planned together with the following
/// day, then only the first day is kept and its final module state carries
/// into the next solve. Without the look-ahead a day can end at a power the
/// ramp limit cannot bring down before the next day's wind drops. The bound
/// reported is the sum of the per-solve bounds.
fn solve_by_day(
    config: &ScenarioConfig,
    problem: &ScheduleProblem,
    starts: &[Schedule],
) -> Result<(Schedule, SolveStats), ScenarioError> {
    let hours = problem.horizon();
    let mut fleet = problem.fleet.clone();
    let mut schedule = Schedule::idle(0, problem.n_modules());
    let mut stats = SolveStats {
        status: MipStatus::Optimal,
        best_bound_usd: 0.0,
        gap: 0.0,
        nodes: 0,
        lp_iterations: 0,
        seconds: 0.0,
    };
    let mut previous: Option<Schedule> = None;
    let mut day = 0;
    while day < hours {
        let keep = DAY_HOURS.min(hours - day);
        let len = (2 * DAY_HOURS).min(hours - day);
        let market = problem
            .market
            .window(day, len)
            .map_err(|source| ScenarioError::Market { path: format!("hours {day}..{}", day + len), source })?;
        let sub = build_problem(market, fleet.clone(), problem.pwl.clone())?;
        let mut day_starts: Vec<Schedule> =
            starts.iter().filter(|s| fits(problem, s)).map(|s| s.hours_range(day, day + len)).collect();
        if let Some(prev) = &previous {
            // the unused look-ahead of the previous solve, idle afterwards
            let mut carried = prev.hours_range(DAY_HOURS, prev.hours());
            let pad = Schedule::idle(len - carried.hours(), problem.n_modules());
            carried.p_grid.extend(pad.p_grid);
            carried.modules.extend(pad.modules);
            day_starts.push(carried);
        }
        let (part, st) = solve_whole(config, &sub, &day_starts)?;
        for m in 0..fleet.n_modules {
            let last = &part.modules[keep - 1][m];
            fleet.initial_on[m] = last.on;
            fleet.initial_power[m] = last.p_e;
        }
        stats.status = worse(stats.status, st.status);
        stats.best_bound_usd += st.best_bound_usd;
        stats.nodes += st.nodes;
        stats.lp_iterations += st.lp_iterations;
        schedule.p_grid.extend_from_slice(&part.p_grid[..keep]);
        schedule.modules.extend_from_slice(&part.modules[..keep]);
        previous = Some(part);
        day += keep;
    }
    schedule.objective_value = schedule.compute_objective(problem);
    stats.gap = relative_gap(schedule.objective_value, stats.best_bound_usd);
    Ok((schedule, stats))
}

fn worse(a: MipStatus, b: MipStatus) -> MipStatus {
    let rank = |s| match s {
        MipStatus::Optimal => 0,
        MipStatus::GapReached => 1,
        MipStatus::LimitHit => 2,
        MipStatus::Infeasible => 3,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// Runs configurations in order of module count. A solved schedule seeds
/// every later configuration whose module count it divides, when both share
/// market, curve and total capacity: splitting each module into equal parts
/// keeps the schedule feasible, so more modules never score worse.
pub fn run_configurations(configs: &[ScenarioConfig]) -> Result<Vec<ScenarioResult>, ScenarioError> {
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by_key(|&i| (configs[i].modules, i));
    let mut results: Vec<Option<ScenarioResult>> = vec![None; configs.len()];
    let mut solved: Vec<usize> = Vec::new();
    for i in order {
        let c = &configs[i];
        let starts: Vec<Schedule> = solved
            .iter()
            .filter(|&&k| splits_into(&configs[k], c))
            .filter_map(|&k| results[k].as_ref().map(|r| r.schedule.split_modules(c.modules / configs[k].modules)))
            .collect();
        log::info!("solving {} with {} seed schedule(s)", c.display_name(), starts.len());
        results[i] = Some(run_scenario_from(c, &starts)?);
        solved.push(i);
    }
    Ok(results.into_iter().flatten().collect())
}

fn splits_into(from: &ScenarioConfig, to: &ScenarioConfig) -> bool {
    let same_total = (from.modules as f64 * from.module_capacity_mw - to.modules as f64 * to.module_capacity_mw).abs()
        <= 1e-9 * to.module_capacity_mw;
    from.modules < to.modules
        && to.modules.is_multiple_of(from.modules)
        && same_total
        && from.segments == to.segments
        && from.market_file == to.market_file
        && from.curve_file == to.curve_file
        && from.reference == to.reference
        && from.electrolyzer == to.electrolyzer
        && from.initial.is_none()
        && to.initial.is_none()
        && from.day_split == to.day_split
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub modules: usize,
    pub module_capacity_mw: f64,
    pub total_power_mwh: f64,
    pub power_increase_pct: f64,
    pub total_hydrogen_kg: f64,
    pub hydrogen_increase_pct: f64,
    pub total_revenue_usd: f64,
    pub revenue_increase_pct: f64,
}

/// Totals per configuration with percent increases over the configuration
/// with the fewest modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub segments: usize,
    pub rows: Vec<ComparisonRow>,
}

pub fn percent_increase(value: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(value)
        }
    } else {
        100.0 * (value - baseline) / baseline
    }
}

fn same_series(a: &ScenarioResult, b: &ScenarioResult) -> bool {
    a.hourly.len() == b.hourly.len()
        && a.hourly
            .iter()
            .zip(&b.hourly)
            .all(|(x, y)| x.price_usd_mwh == y.price_usd_mwh && x.availability_mw == y.availability_mw)
}

pub fn compare_configurations(results: &[ScenarioResult]) -> Result<ComparisonTable, ScenarioError> {
    let Some(first) = results.first() else {
        return Err(ScenarioError::Mismatch("no results".into()));
    };
    for r in results {
        if r.metrics.segments != first.metrics.segments {
            return Err(ScenarioError::Mismatch(format!(
                "segment counts differ ({} vs {})",
                r.metrics.segments, first.metrics.segments
            )));
        }
        let (a, b) = (r.total_capacity_mw(), first.total_capacity_mw());
        if (a - b).abs() > 1e-9 * b.abs().max(1.0) {
            return Err(ScenarioError::Mismatch(format!("total capacities differ ({a} vs {b} MW)")));
        }
        if !same_series(r, first) {
            return Err(ScenarioError::Mismatch("results use different market data".into()));
        }
    }
    let mut sorted: Vec<&ScenarioResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.metrics.modules);
    let base = &sorted[0].metrics;
    let rows = sorted
        .iter()
        .map(|r| {
            let m = &r.metrics;
            ComparisonRow {
                modules: m.modules,
                module_capacity_mw: m.module_capacity_mw,
                total_power_mwh: m.total_power_mwh,
                power_increase_pct: percent_increase(m.total_power_mwh, base.total_power_mwh),
                total_hydrogen_kg: m.total_hydrogen_kg,
                hydrogen_increase_pct: percent_increase(m.total_hydrogen_kg, base.total_hydrogen_kg),
                total_revenue_usd: m.total_revenue_usd,
                revenue_increase_pct: percent_increase(m.total_revenue_usd, base.total_revenue_usd),
            }
        })
        .collect();
    Ok(ComparisonTable { segments: base.segments, rows })
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>7} {:>13} {:>12} {:>8} {:>13} {:>8} {:>13} {:>8}",
            "Modules", "Capacity (MW)", "Power (MWh)", "Incr %", "Hydrogen (kg)", "Incr %", "Revenue ($)", "Incr %"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>7} {:>13.2} {:>12.2} {:>8.2} {:>13.2} {:>8.2} {:>13.2} {:>8.2}",
                r.modules,
                r.module_capacity_mw,
                r.total_power_mwh,
                r.power_increase_pct,
                r.total_hydrogen_kg,
                r.hydrogen_increase_pct,
                r.total_revenue_usd,
                r.revenue_increase_pct
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourDetailRow {
    pub segments: usize,
    pub modules: usize,
    pub power_mw: f64,
    pub hydrogen_kg: f64,
    /// Hydrogen value alone.
    pub hydrogen_profit_usd: f64,
    pub grid_revenue_usd: f64,
    /// Hydrogen value plus grid sales.
    pub total_profit_usd: f64,
}

/// One hour of several solved configurations side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourDetail {
    pub hour: usize,
    pub rows: Vec<HourDetailRow>,
}

pub fn hour_detail(results: &[ScenarioResult], hour: usize) -> Result<HourDetail, ScenarioError> {
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let Some(h) = r.hourly.get(hour) else {
            return Err(ScenarioError::HourOutOfRange { hour, horizon: r.hourly.len() });
        };
        let hydrogen_profit_usd = r.hydrogen_price_usd_kg * h.h_total_kg;
        let grid_revenue_usd = h.price_usd_mwh * h.p_grid_mw;
        rows.push(HourDetailRow {
            segments: r.metrics.segments,
            modules: r.metrics.modules,
            power_mw: h.p_e_total_mw,
            hydrogen_kg: h.h_total_kg,
            hydrogen_profit_usd,
            grid_revenue_usd,
            total_profit_usd: hydrogen_profit_usd + grid_revenue_usd,
        });
    }
    rows.sort_by_key(|r| (r.segments, r.modules));
    Ok(HourDetail { hour, rows })
}

impl fmt::Display for HourDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hour {}", self.hour)?;
        writeln!(
            f,
            "{:>8} {:>7} {:>10} {:>13} {:>12} {:>10} {:>12}",
            "Segments", "Modules", "Power (MW)", "Hydrogen (kg)", "H2 profit", "Grid ($)", "Total ($)"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8} {:>7} {:>10.2} {:>13.2} {:>12.2} {:>10.2} {:>12.2}",
                r.segments,
                r.modules,
                r.power_mw,
                r.hydrogen_kg,
                r.hydrogen_profit_usd,
                r.grid_revenue_usd,
                r.total_profit_usd
            )?;
        }
        Ok(())
    }
}

/// Hours at which every result consumes the same total power (within
/// `tol` MW), mapped to the spread of total hydrogen across results
/// relative to the largest value.
pub fn equal_power_spread(results: &[ScenarioResult], tol: f64) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    let Some(first) = results.first() else { return out };
    for t in 0..first.hourly.len() {
        let powers: Vec<f64> = results.iter().filter_map(|r| r.hourly.get(t).map(|h| h.p_e_total_mw)).collect();
        if powers.len() != results.len() {
            continue;
        }
        let (lo, hi) = min_max(&powers);
        if hi <= 0.0 || hi - lo > tol {
            continue;
        }
        let h: Vec<f64> = results.iter().map(|r| r.hourly[t].h_total_kg).collect();
        let (hlo, hhi) = min_max(&h);
        out.insert(t, if hhi > 0.0 { (hhi - hlo) / hhi } else { 0.0 });
    }
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    let io = |source| ScenarioError::Io { path: path.to_path_buf(), source };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

/// Schedule series (`<name>_schedule`) and metrics (`<name>_metrics`) in
/// `dir`. The CSV schedule has one row per hour: `hour, p_grid_mw,
/// p_e_total_mw`, then `p_e_m<k>_mw, h_m<k>_kg` for every module `k`.
pub fn emit_outputs(result: &ScenarioResult, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Io { path: dir.into(), source })?;
    let name = &result.metrics.name;
    let ext = format.extension();
    let schedule_path = dir.join(format!("{name}_schedule.{ext}"));
    let metrics_path = dir.join(format!("{name}_metrics.{ext}"));
    let (schedule, metrics) = match format {
        OutputFormat::Json => (
            serde_json::to_vec_pretty(&result.hourly).expect("serializable"),
            serde_json::to_vec_pretty(&result.metrics).expect("serializable"),
        ),
        OutputFormat::Csv => {
            let mut header: Vec<String> = ["hour", "p_grid_mw", "p_e_total_mw"].map(String::from).to_vec();
            for k in 0..result.metrics.modules {
                header.push(format!("p_e_m{k}_mw"));
                header.push(format!("h_m{k}_kg"));
            }
            let rows = result.hourly.iter().map(|h| {
                let mut row = vec![h.hour.to_string(), h.p_grid_mw.to_string(), h.p_e_total_mw.to_string()];
                for (p, kg) in h.module_p_e_mw.iter().zip(&h.module_h_kg) {
                    row.push(p.to_string());
                    row.push(kg.to_string());
                }
                row
            });
            (csv_bytes(&header, rows), metrics_csv(&result.metrics))
        }
    };
    write_atomic(&schedule_path, &schedule)?;
    write_atomic(&metrics_path, &metrics)?;
    Ok(vec![schedule_path, metrics_path])
}

fn metrics_csv(m: &Metrics) -> Vec<u8> {
    let value = serde_json::to_value(m).expect("serializable");
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    csv_bytes(&["key".into(), "value".into()], rows.into_iter().map(|(k, v)| vec![k, v]))
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, inner, out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.into(), s.clone())),
        other => out.push((prefix.into(), other.to_string())),
    }
}

/// Writes `comparison.<ext>` in `dir`.
pub fn emit_comparison(table: &ComparisonTable, dir: &Path, format: OutputFormat) -> Result<PathBuf, ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Io { path: dir.into(), source })?;
    let path = dir.join(format!("comparison_s{}.{}", table.segments, format.extension()));
    let bytes = match format {
        OutputFormat::Json => serde_json::to_vec_pretty(table).expect("serializable"),
        OutputFormat::Csv => {
            let header = [
                "modules",
                "module_capacity_mw",
                "total_power_mwh",
                "power_increase_pct",
                "total_hydrogen_kg",
                "hydrogen_increase_pct",
                "total_revenue_usd",
                "revenue_increase_pct",
            ]
            .map(String::from);
            let rows = table.rows.iter().map(|r| {
                vec![
                    r.modules.to_string(),
                    r.module_capacity_mw.to_string(),
                    r.total_power_mwh.to_string(),
                    r.power_increase_pct.to_string(),
                    r.total_hydrogen_kg.to_string(),
                    r.hydrogen_increase_pct.to_string(),
                    r.total_revenue_usd.to_string(),
                    r.revenue_increase_pct.to_string(),
                ]
            });
            csv_bytes(&header, rows)
        }
    };
    write_atomic(&path, &bytes)?;
    Ok(path)
}
