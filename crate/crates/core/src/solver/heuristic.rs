//! Greedy construction of a feasible starting schedule.

use crate::curve::eval_pwl;
use crate::model::{verify_schedule, ModuleHour, Schedule, ScheduleProblem};

/// Residual accepted when checking the constructed schedule.
const CHECK_TOL: f64 = 1e-7;

/// Runs every module at an equal share of the wind whenever hydrogen at the
/// curve's best efficiency is worth more than the grid price, or when wind
/// beyond the export limit would otherwise be spilled. Each producing block
/// is preceded by a startup hour and respects the ramp limits. Falls back to
/// the all-off schedule if the construction does not verify.
pub fn warm_start_heuristic(problem: &ScheduleProblem) -> Schedule {
    let built = construct(problem);
    if verify_schedule(problem, &built).is_ok_and(|r| r.is_feasible(CHECK_TOL)) {
        return built;
    }
    log::debug!("greedy schedule failed verification, using the all-off schedule");
    let mut idle = Schedule::idle(problem.horizon(), problem.n_modules());
    fill_grid(problem, &mut idle);
    idle
}

fn best_efficiency(problem: &ScheduleProblem) -> f64 {
    let c = problem.spec().c_max;
    problem
        .pwl
        .breakpoints()
        .iter()
        .filter(|&&x| x > 0.0)
        .filter_map(|&x| eval_pwl(&problem.pwl, (x * c).min(c), c).ok().map(|h| h / (x * c)))
        .fold(0.0, f64::max)
}

fn fill_grid(problem: &ScheduleProblem, s: &mut Schedule) {
    let prices = problem.prices();
    for t in 0..problem.horizon() {
        let used: f64 = s.modules[t].iter().map(|m| m.p_e + m.p_su).sum();
        let room = (problem.availability[t] - used).max(0.0);
        s.p_grid[t] = if prices[t] > 0.0 { problem.export_limits[t].min(room) } else { 0.0 };
    }
    s.objective_value = s.compute_objective(problem);
}

fn construct(problem: &ScheduleProblem) -> Schedule {
    let hours = problem.horizon();
    let modules = problem.n_modules();
    let spec = *problem.spec();
    let (c, cmin, ramp, su) = (spec.c_max, spec.c_min(), spec.ramp(), spec.startup_energy());
    let prices = problem.prices();
    let h2_value = spec.hydrogen_price * best_efficiency(problem);
    let share: Vec<f64> = problem.availability.iter().map(|a| a / modules as f64).collect();
    let surplus: Vec<f64> =
        (0..hours).map(|t| ((problem.availability[t] - problem.export_limits[t]) / modules as f64).max(0.0)).collect();
    let wanted: Vec<bool> =
        (0..hours).map(|t| share[t] >= cmin && (h2_value > prices[t] || surplus[t] >= cmin)).collect();

    let mut schedule = Schedule::idle(hours, modules);
    if ramp < cmin {
        // a module could never reach its minimum after a startup
        fill_grid(problem, &mut schedule);
        return schedule;
    }
    for m in 0..modules {
        let on0 = problem.fleet.initial_on[m];
        let p0 = problem.fleet.initial_power[m];
        let mut producing = wanted.clone();
        // A warm module above the ramp limit cannot stop at once.
        if on0 {
            let mut p = p0;
            let mut t = 0;
            while p > ramp && t < hours {
                producing[t] = true;
                p -= ramp;
                t += 1;
            }
        }
        // Startup hours and ramp-feasible upper limits, repaired until stable.
        let (startup, ub) = loop {
            let mut startup = vec![false; hours];
            let mut changed = false;
            for t in 0..hours {
                if !producing[t] {
                    continue;
                }
                let continues = if t == 0 { on0 } else { producing[t - 1] };
                if continues {
                    continue;
                }
                if t == 0 || startup[t - 1] || share[t - 1] < su {
                    producing[t] = false;
                    changed = true;
                    continue;
                }
                startup[t - 1] = true;
            }
            if changed {
                continue;
            }
            let mut ub = vec![0.0; hours];
            for t in (0..hours).rev() {
                if !producing[t] {
                    continue;
                }
                let mut u = c.min(share[t]);
                if t + 1 < hours {
                    u = if producing[t + 1] { u.min(ub[t + 1] + ramp) } else { u.min(ramp) };
                }
                ub[t] = u;
            }
            let bad: Vec<usize> = (0..hours).filter(|&t| producing[t] && ub[t] < cmin).collect();
            if bad.is_empty() {
                break (startup, ub);
            }
            for t in bad {
                producing[t] = false;
            }
        };

        let mut prev = if on0 { p0 } else { 0.0 };
        for t in 0..hours {
            let slot = &mut schedule.modules[t][m];
            if startup[t] {
                *slot = ModuleHour { p_e: 0.0, h: 0.0, p_su: su, on: true, startup: true };
                prev = 0.0;
            } else if producing[t] {
                let target = if h2_value > prices[t] { share[t] } else { surplus[t] };
                let lo = cmin.max(prev - ramp);
                let hi = ub[t].min(prev + ramp);
                let p = target.clamp(lo, hi.max(lo));
                let h = eval_pwl(&problem.pwl, p, c).unwrap_or(0.0);
                *slot = ModuleHour { p_e: p, h, p_su: 0.0, on: true, startup: false };
                prev = p;
            } else {
                prev = 0.0;
            }
        }
    }
    fill_grid(problem, &mut schedule);
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketRecord, MarketSeries};
    use crate::model::tests::pwl;
    use crate::model::{build_problem, ElectrolyzerSpec, FleetConfig};

    fn flat(hours: usize, modules: usize, hsl: f64, price: f64) -> ScheduleProblem {
        let records = (0..hours)
            .map(|hour| MarketRecord { hour, bid_price: 0.0, cleared_price: price, hsl, lsl: 0.0, cleared_power: 0.0 })
            .collect();
        build_problem(
            MarketSeries::new(records).unwrap(),
            FleetConfig::cold(modules, ElectrolyzerSpec::new(10.0)),
            pwl(8),
        )
        .unwrap()
    }

    #[test]
    fn zero_wind_is_all_off() {
        let p = flat(24, 2, 0.0, 30.0);
        let s = warm_start_heuristic(&p);
        assert_eq!(s.objective_value, 0.0);
        assert!(s.modules.iter().flatten().all(|m| !m.on));
    }

    #[test]
    fn abundant_wind_starts_at_hour_zero() {
        let p = flat(12, 3, 100.0, 10.0);
        let s = warm_start_heuristic(&p);
        assert!(s.modules[0].iter().all(|m| m.on && m.startup));
        for t in 1..12 {
            assert!(s.modules[t].iter().all(|m| m.on && !m.startup && m.p_e > 0.0), "hour {t}");
        }
        let r = verify_schedule(&p, &s).unwrap();
        assert!(r.is_feasible(1e-9));
        assert!(r.is_tight(1e-9));
    }
}
