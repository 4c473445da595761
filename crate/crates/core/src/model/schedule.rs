use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::milp::{MilpInstance, RowFamily};
use super::{ModelError, ScheduleProblem, VarLayout, BINARY_TOLERANCE};
use crate::curve::eval_pwl;

/// Decision values of one module in one hour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModuleHour {
    /// MW
    pub p_e: f64,
    /// kg
    pub h: f64,
    /// MWh
    pub p_su: f64,
    pub on: bool,
    pub startup: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// MW sold, per hour
    pub p_grid: Vec<f64>,
    /// `modules[t][m]`
    pub modules: Vec<Vec<ModuleHour>>,
    /// USD
    pub objective_value: f64,
}

impl Schedule {
    /// All modules off, nothing sold.
    pub fn idle(hours: usize, modules: usize) -> Self {
        Self {
            p_grid: vec![0.0; hours],
            modules: vec![vec![ModuleHour::default(); modules]; hours],
            objective_value: 0.0,
        }
    }

    pub fn hours(&self) -> usize {
        self.p_grid.len()
    }

    pub fn n_modules(&self) -> usize {
        self.modules.first().map_or(0, Vec::len)
    }

    pub fn total_power(&self, t: usize) -> f64 {
        self.modules[t].iter().map(|s| s.p_e).sum()
    }

    pub fn total_hydrogen(&self, t: usize) -> f64 {
        self.modules[t].iter().map(|s| s.h).sum()
    }

    /// Grid revenue plus hydrogen revenue.
    pub fn compute_objective(&self, problem: &ScheduleProblem) -> f64 {
        let prices = problem.prices();
        let lh = problem.spec().hydrogen_price;
        (0..self.hours()).map(|t| prices[t] * self.p_grid[t] + lh * self.total_hydrogen(t)).sum()
    }

    /// Hours `start..end`; the objective is left for the caller to price.
    pub fn hours_range(&self, start: usize, end: usize) -> Self {
        Self {
            p_grid: self.p_grid[start..end].to_vec(),
            modules: self.modules[start..end].to_vec(),
            objective_value: 0.0,
        }
    }

    /// Each module replaced by `factor` copies carrying `1/factor` of its
    /// power, hydrogen and startup energy. Feasible for
    /// [`ScheduleProblem::split_modules`] whenever `self` is feasible.
    pub fn split_modules(&self, factor: usize) -> Self {
        let k = factor as f64;
        let modules = self
            .modules
            .iter()
            .map(|row| {
                row.iter()
                    .flat_map(|s| {
                        std::iter::repeat_n(ModuleHour { p_e: s.p_e / k, h: s.h / k, p_su: s.p_su / k, ..*s }, factor)
                    })
                    .collect()
            })
            .collect();
        Self { p_grid: self.p_grid.clone(), modules, objective_value: self.objective_value }
    }
}

/// Reads a solution vector of [`crate::model::build_milp`] into a schedule.
///
/// Binaries are rounded (they must already be within tolerance of 0 or 1),
/// tiny negative continuous values are clipped, values fixed by the binaries
/// (no output while off or starting, the startup energy) are set exactly, and
/// the objective is recomputed from the result.
pub fn extract_schedule(problem: &ScheduleProblem, x: &[f64]) -> Result<Schedule, ModelError> {
    let layout = VarLayout { hours: problem.horizon(), modules: problem.n_modules() };
    let energy = problem.spec().startup_energy();
    let mut schedule = read_vector(layout, x, |_, _| Some(energy))?;
    schedule.objective_value = schedule.compute_objective(problem);
    Ok(schedule)
}

fn read_vector(
    layout: VarLayout,
    x: &[f64],
    startup_energy: impl Fn(usize, usize) -> Option<f64>,
) -> Result<Schedule, ModelError> {
    if x.len() != layout.n_vars() {
        return Err(ModelError::SolutionLength { expected: layout.n_vars(), got: x.len() });
    }
    let binary = |j: usize| -> Result<bool, ModelError> {
        let v = x[j];
        if v.abs() <= BINARY_TOLERANCE {
            Ok(false)
        } else if (v - 1.0).abs() <= BINARY_TOLERANCE {
            Ok(true)
        } else {
            Err(ModelError::FractionalBinary { index: j, value: v })
        }
    };
    let nonneg = |v: f64| v.max(0.0);
    let mut schedule = Schedule::idle(layout.hours, layout.modules);
    for t in 0..layout.hours {
        schedule.p_grid[t] = nonneg(x[layout.grid(t)]);
        for m in 0..layout.modules {
            let (on, startup) = (binary(layout.on(t, m))?, binary(layout.su(t, m))?);
            let producing = on && !startup;
            let p_su = match (startup, startup_energy(t, m)) {
                (false, _) => 0.0,
                (true, Some(e)) => e,
                (true, None) => nonneg(x[layout.psu(t, m)]),
            };
            schedule.modules[t][m] = ModuleHour {
                p_e: if producing { nonneg(x[layout.p(t, m)]) } else { 0.0 },
                h: if producing { nonneg(x[layout.h(t, m)]) } else { 0.0 },
                p_su,
                on,
                startup,
            };
        }
    }
    Ok(schedule)
}

impl MilpInstance {
    /// Like [`extract_schedule`], with the objective priced from the
    /// instance's own coefficients.
    pub fn schedule_from_vector(&self, x: &[f64]) -> Result<Schedule, ModelError> {
        let l = self.layout;
        let mut energy = vec![None; l.hours * l.modules];
        for row in self.rows.iter().filter(|r| r.family == RowFamily::StartupCost) {
            let Some(m) = row.module else { continue };
            let su = l.su(row.hour, m);
            if let Some(&(_, c)) = row.coeffs.iter().find(|&&(j, _)| j == su) {
                energy[row.hour * l.modules + m] = Some(-c);
            }
        }
        let mut s = read_vector(l, x, |t, m| energy[t * l.modules + m])?;
        s.objective_value = (0..l.hours)
            .map(|t| {
                self.objective[l.grid(t)] * s.p_grid[t]
                    + (0..l.modules).map(|m| self.objective[l.h(t, m)] * s.modules[t][m].h).sum::<f64>()
            })
            .sum();
        Ok(s)
    }
}

/// Independent feasibility audit of a schedule against the model equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest violation per constraint family (0 when satisfied).
    pub families: BTreeMap<RowFamily, f64>,
    /// Largest negative continuous value, as a positive number.
    pub negativity: f64,
    pub objective: f64,
    /// Largest `|h - eval_pwl(p_e)|` over producing hours.
    pub hydrogen_gap: f64,
    pub producing_hours: usize,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.families.values().copied().fold(self.negativity, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }

    pub fn is_tight(&self, tol: f64) -> bool {
        self.hydrogen_gap <= tol
    }
}

pub fn verify_schedule(problem: &ScheduleProblem, schedule: &Schedule) -> Result<ResidualReport, ModelError> {
    let hours = problem.horizon();
    let modules = problem.n_modules();
    if schedule.hours() != hours || schedule.modules.iter().any(|r| r.len() != modules) {
        return Err(ModelError::ShapeMismatch);
    }
    let spec = problem.spec();
    let c = spec.c_max;
    let b = |v: bool| f64::from(u8::from(v));
    let mut fam: BTreeMap<RowFamily, f64> = RowFamily::ALL.iter().map(|f| (*f, 0.0)).collect();
    let mut bump = |f: RowFamily, v: f64| {
        let e = fam.get_mut(&f).expect("all families present");
        *e = e.max(v);
    };
    let mut negativity: f64 = 0.0;
    let mut hydrogen_gap: f64 = 0.0;
    let mut producing_hours = 0;

    for t in 0..hours {
        negativity = negativity.max(-schedule.p_grid[t]);
        bump(RowFamily::ExportLimit, schedule.p_grid[t] - problem.export_limits[t]);
        let consumed: f64 = schedule.modules[t].iter().map(|s| s.p_e + s.p_su).sum();
        bump(RowFamily::PowerBalance, schedule.p_grid[t] + consumed - problem.availability[t]);
        for m in 0..modules {
            let s = schedule.modules[t][m];
            negativity = negativity.max(-s.p_e).max(-s.h).max(-s.p_su);
            let producing = b(s.on) - b(s.startup);
            for seg in problem.pwl.segments() {
                bump(RowFamily::HydrogenCurve, s.h - seg.slope * s.p_e - seg.intercept * c * producing);
            }
            bump(RowFamily::OperatingRange, spec.c_min() * producing - s.p_e);
            bump(RowFamily::OperatingRange, s.p_e - c * producing);
            let (prev_p, prev_on) = if t == 0 {
                (problem.fleet.initial_power[m], problem.fleet.initial_on[m])
            } else {
                let prev = schedule.modules[t - 1][m];
                (prev.p_e, prev.on)
            };
            bump(RowFamily::RampUp, s.p_e - prev_p - spec.ramp());
            bump(RowFamily::RampDown, prev_p - s.p_e - spec.ramp());
            bump(RowFamily::StartupLogicA, b(s.startup) - (1.0 - b(prev_on)));
            bump(RowFamily::StartupLogicB, b(s.startup) - b(s.on));
            bump(RowFamily::StartupLogicC, b(s.on) - b(prev_on) - b(s.startup));
            bump(RowFamily::StartupCost, (s.p_su - spec.startup_energy() * b(s.startup)).abs());
            if s.p_e > 0.0 && s.on && !s.startup {
                producing_hours += 1;
                let p = s.p_e.min(c);
                let best = eval_pwl(&problem.pwl, p, c).unwrap_or(0.0);
                hydrogen_gap = hydrogen_gap.max((s.h - best).abs());
            }
        }
    }
    Ok(ResidualReport {
        families: fam,
        negativity,
        objective: schedule.compute_objective(problem),
        hydrogen_gap,
        producing_hours,
    })
}

impl MilpInstance {
    /// Residual of `x` per constraint family, computed from the rows.
    pub fn family_residuals(&self, x: &[f64]) -> BTreeMap<RowFamily, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            let e = out.entry(r.family).or_insert(0.0f64);
            *e = e.max(r.violation(x));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketRecord, MarketSeries};
    use crate::model::tests::pwl;
    use crate::model::{build_milp, build_problem, ElectrolyzerSpec, FleetConfig};

    fn problem(hours: usize, modules: usize) -> ScheduleProblem {
        let records = (0..hours)
            .map(|hour| MarketRecord {
                hour,
                bid_price: 0.0,
                cleared_price: 20.0,
                hsl: 60.0,
                lsl: 0.0,
                cleared_power: 10.0,
            })
            .collect();
        build_problem(
            MarketSeries::new(records).unwrap(),
            FleetConfig::cold(modules, ElectrolyzerSpec::new(20.0)),
            pwl(8),
        )
        .unwrap()
    }

    #[test]
    fn zero_vector_gives_idle_schedule() {
        let p = problem(3, 2);
        let inst = build_milp(&p);
        let s = extract_schedule(&p, &vec![0.0; inst.n_vars()]).unwrap();
        assert_eq!(s.objective_value, 0.0);
        assert!(s.modules.iter().flatten().all(|m| !m.on && m.p_e == 0.0));
        let report = verify_schedule(&p, &s).unwrap();
        assert_eq!(report.max_residual(), 0.0);
    }

    #[test]
    fn startup_values_set_exactly() {
        let p = problem(2, 1);
        let inst = build_milp(&p);
        let l = inst.layout;
        let mut x = vec![0.0; inst.n_vars()];
        x[l.on(0, 0)] = 1.0;
        x[l.su(0, 0)] = 1.0 - 1e-9;
        x[l.psu(0, 0)] = 0.2 - 1e-15;
        x[l.p(0, 0)] = 3e-15;
        x[l.psu(1, 0)] = 1e-15;
        for s in [extract_schedule(&p, &x).unwrap(), inst.schedule_from_vector(&x).unwrap()] {
            let (start, idle) = (&s.modules[0][0], &s.modules[1][0]);
            assert!(start.startup && start.p_e == 0.0 && start.h == 0.0);
            assert_eq!(start.p_su, 0.01 * 20.0);
            assert_eq!(idle.p_su, 0.0);
        }
    }

    #[test]
    fn fractional_binary_rejected() {
        let p = problem(2, 1);
        let inst = build_milp(&p);
        let mut x = vec![0.0; inst.n_vars()];
        x[inst.layout.on(1, 0)] = 0.5;
        let err = extract_schedule(&p, &x).unwrap_err();
        assert!(matches!(err, ModelError::FractionalBinary { .. }));
        assert!(err.to_string().contains("fractional binary"));
        assert!(matches!(extract_schedule(&p, &x[1..]), Err(ModelError::SolutionLength { .. })));
    }

    /// A hand-built feasible schedule: start at hour 0, ramp up, hold.
    fn running(p: &ScheduleProblem) -> Schedule {
        let spec = p.spec();
        let mut s = Schedule::idle(p.horizon(), p.n_modules());
        for t in 0..p.horizon() {
            let pe = if t == 0 { 0.0 } else { (spec.ramp() * t as f64).min(spec.c_max) };
            let h = if t == 0 { 0.0 } else { eval_pwl(&p.pwl, pe, spec.c_max).unwrap() };
            s.modules[t][0] = ModuleHour {
                p_e: pe,
                h,
                p_su: if t == 0 { spec.startup_energy() } else { 0.0 },
                on: true,
                startup: t == 0,
            };
            s.p_grid[t] = p.export_limits[t].min(p.availability[t] - pe - s.modules[t][0].p_su);
        }
        s.objective_value = s.compute_objective(p);
        s
    }

    #[test]
    fn feasible_schedule_has_no_residual() {
        let p = problem(4, 1);
        let s = running(&p);
        let r = verify_schedule(&p, &s).unwrap();
        assert!(r.is_feasible(1e-9), "{r:?}");
        assert!(r.is_tight(1e-9));
        assert_eq!(r.producing_hours, 3);
        // agrees with the row-based check
        let inst = build_milp(&p);
        let x = inst.vector_from_schedule(&s).unwrap();
        assert!(inst.max_violation(&x) <= 1e-9);
        assert!((inst.objective_value(&x) - s.objective_value).abs() < 1e-9);
    }

    #[test]
    fn ramp_jump_residual() {
        let p = problem(4, 1);
        let mut s = running(&p);
        let r = p.spec().ramp();
        // hour 2 -> 3 jumps by 2R instead of R
        s.modules[3][0].p_e = s.modules[2][0].p_e + 2.0 * r;
        s.modules[3][0].h = eval_pwl(&p.pwl, s.modules[3][0].p_e, p.spec().c_max).unwrap();
        s.p_grid[3] = 0.0;
        let report = verify_schedule(&p, &s).unwrap();
        assert!((report.families[&RowFamily::RampUp] - r).abs() < 1e-12);
    }

    #[test]
    fn slack_hydrogen_is_reported() {
        let p = problem(3, 1);
        let mut s = running(&p);
        s.modules[2][0].h -= 1.0;
        let r = verify_schedule(&p, &s).unwrap();
        assert!(r.is_feasible(1e-9));
        assert!((r.hydrogen_gap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn split_schedule_stays_feasible() {
        let p = problem(4, 1);
        let s = running(&p);
        let q = p.split_modules(4).unwrap();
        let split = s.split_modules(4);
        let r = verify_schedule(&q, &split).unwrap();
        assert!(r.is_feasible(1e-9), "{r:?}");
        assert!((r.objective - s.objective_value).abs() < 1e-9);
    }
}
