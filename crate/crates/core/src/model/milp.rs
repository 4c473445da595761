use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ModelError, Schedule, ScheduleProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    HydrogenCurve,
    OperatingRange,
    ExportLimit,
    RampUp,
    RampDown,
    StartupLogicA,
    StartupLogicB,
    StartupLogicC,
    StartupCost,
    PowerBalance,
}

impl RowFamily {
    pub const ALL: [RowFamily; 10] = [
        RowFamily::HydrogenCurve,
        RowFamily::OperatingRange,
        RowFamily::ExportLimit,
        RowFamily::RampUp,
        RowFamily::RampDown,
        RowFamily::StartupLogicA,
        RowFamily::StartupLogicB,
        RowFamily::StartupLogicC,
        RowFamily::StartupCost,
        RowFamily::PowerBalance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RowFamily::HydrogenCurve => "hydrogen_curve",
            RowFamily::OperatingRange => "operating_range",
            RowFamily::ExportLimit => "export_limit",
            RowFamily::RampUp => "ramp_up",
            RowFamily::RampDown => "ramp_down",
            RowFamily::StartupLogicA => "startup_logic_a",
            RowFamily::StartupLogicB => "startup_logic_b",
            RowFamily::StartupLogicC => "startup_logic_c",
            RowFamily::StartupCost => "startup_cost",
            RowFamily::PowerBalance => "power_balance",
        }
    }
}

impl fmt::Display for RowFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub family: RowFamily,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
    /// Hour and module the row belongs to (module is `None` for hourly rows).
    pub hour: usize,
    pub module: Option<usize>,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            RowSense::Le => (a - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - a).max(0.0),
            RowSense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Hydrogen { hour: usize, module: usize },
    Power { hour: usize, module: usize },
    StartupPower { hour: usize, module: usize },
    On { hour: usize, module: usize },
    Startup { hour: usize, module: usize },
    Grid { hour: usize },
}

impl VarKind {
    pub fn hour(&self) -> usize {
        match *self {
            VarKind::Hydrogen { hour, .. }
            | VarKind::Power { hour, .. }
            | VarKind::StartupPower { hour, .. }
            | VarKind::On { hour, .. }
            | VarKind::Startup { hour, .. }
            | VarKind::Grid { hour } => hour,
        }
    }

    /// Hour shifted back by `by`, module renumbered through `module_of`.
    fn relabel(self, by: usize, module_of: &[usize]) -> Self {
        match self {
            VarKind::Hydrogen { hour, module } => VarKind::Hydrogen { hour: hour - by, module: module_of[module] },
            VarKind::Power { hour, module } => VarKind::Power { hour: hour - by, module: module_of[module] },
            VarKind::StartupPower { hour, module } => {
                VarKind::StartupPower { hour: hour - by, module: module_of[module] }
            }
            VarKind::On { hour, module } => VarKind::On { hour: hour - by, module: module_of[module] },
            VarKind::Startup { hour, module } => VarKind::Startup { hour: hour - by, module: module_of[module] },
            VarKind::Grid { hour } => VarKind::Grid { hour: hour - by },
        }
    }

    pub fn name(&self) -> String {
        match *self {
            VarKind::Hydrogen { hour, module } => format!("h[{hour},{module}]"),
            VarKind::Power { hour, module } => format!("pe[{hour},{module}]"),
            VarKind::StartupPower { hour, module } => format!("psu[{hour},{module}]"),
            VarKind::On { hour, module } => format!("zon[{hour},{module}]"),
            VarKind::Startup { hour, module } => format!("zsu[{hour},{module}]"),
            VarKind::Grid { hour } => format!("pgrid[{hour}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

/// Index map from (hour, module) to variable columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarLayout {
    pub hours: usize,
    pub modules: usize,
}

impl VarLayout {
    const PER_MODULE: usize = 5;

    fn base(&self, t: usize, m: usize) -> usize {
        debug_assert!(t < self.hours && m < self.modules);
        (t * self.modules + m) * Self::PER_MODULE
    }
    pub fn h(&self, t: usize, m: usize) -> usize {
        self.base(t, m)
    }
    pub fn p(&self, t: usize, m: usize) -> usize {
        self.base(t, m) + 1
    }
    pub fn psu(&self, t: usize, m: usize) -> usize {
        self.base(t, m) + 2
    }
    pub fn on(&self, t: usize, m: usize) -> usize {
        self.base(t, m) + 3
    }
    pub fn su(&self, t: usize, m: usize) -> usize {
        self.base(t, m) + 4
    }
    pub fn grid(&self, t: usize) -> usize {
        Self::PER_MODULE * self.hours * self.modules + t
    }
    pub fn n_vars(&self) -> usize {
        (Self::PER_MODULE * self.modules + 1) * self.hours
    }
}

/// Solver-facing form of a [`ScheduleProblem`]; the objective is maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub layout: VarLayout,
    pub variables: Vec<Variable>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl MilpInstance {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn family_counts(&self) -> BTreeMap<RowFamily, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.family).or_insert(0) += 1;
        }
        counts
    }

    /// Row count implied by the family formulas for `(T, M, |I|)`.
    pub fn expected_rows(hours: usize, modules: usize, segments: usize) -> usize {
        let tm = hours * modules;
        segments * tm + 2 * tm + hours + 2 * tm + 3 * tm + tm + hours
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds =
            self.variables.iter().zip(x).map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0)).fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables.iter().enumerate().filter(|(_, v)| v.integer).map(|(j, _)| j)
    }

    /// Restriction to hours `start..=last` of the listed modules, every
    /// other variable held at its value in `x`; grid sales of those hours stay
    /// free. Variables of hour `last` are fixed as well unless it is the final
    /// hour, so a solution of the restriction patched into `x` keeps the rows
    /// linking `last` to later hours. Returns the restriction and the global
    /// index of each of its variables.
    pub fn restrict(&self, start: usize, last: usize, modules: &[usize], x: &[f64]) -> (MilpInstance, Vec<usize>) {
        let l = self.layout;
        let last = last.min(l.hours.saturating_sub(1));
        let hours = last + 1 - start;
        let layout = VarLayout { hours, modules: modules.len() };
        let mut global = vec![0; layout.n_vars()];
        for t in 0..hours {
            global[layout.grid(t)] = l.grid(start + t);
            for (k, &m) in modules.iter().enumerate() {
                for (local, g) in [
                    (layout.h(t, k), l.h(start + t, m)),
                    (layout.p(t, k), l.p(start + t, m)),
                    (layout.psu(t, k), l.psu(start + t, m)),
                    (layout.on(t, k), l.on(start + t, m)),
                    (layout.su(t, k), l.su(start + t, m)),
                ] {
                    global[local] = g;
                }
            }
        }
        let mut local = vec![usize::MAX; self.n_vars()];
        for (k, &g) in global.iter().enumerate() {
            local[g] = k;
        }
        let mut module_of = vec![usize::MAX; l.modules];
        for (k, &m) in modules.iter().enumerate() {
            module_of[m] = k;
        }
        let pin_last = last + 1 < l.hours;
        let variables = global
            .iter()
            .map(|&g| {
                let v = &self.variables[g];
                let (lower, upper) = if pin_last && v.kind.hour() == last { (x[g], x[g]) } else { (v.lower, v.upper) };
                Variable { kind: v.kind.relabel(start, &module_of), lower, upper, integer: v.integer }
            })
            .collect();
        let objective = global.iter().map(|&g| self.objective[g]).collect();
        let rows = self
            .rows
            .iter()
            .filter(|r| r.hour >= start && r.hour <= last && r.coeffs.iter().any(|&(j, _)| local[j] != usize::MAX))
            .map(|r| {
                let mut rhs = r.rhs;
                let mut coeffs = Vec::with_capacity(r.coeffs.len());
                for &(j, a) in &r.coeffs {
                    match local[j] {
                        usize::MAX => rhs -= a * x[j],
                        k => coeffs.push((k, a)),
                    }
                }
                let module = r.module.map(|m| module_of[m]);
                Row { family: r.family, coeffs, sense: r.sense, rhs, hour: r.hour - start, module }
            })
            .collect();
        (MilpInstance { layout, variables, objective, rows }, global)
    }

    /// Column vector holding the values of `schedule`.
    pub fn vector_from_schedule(&self, schedule: &Schedule) -> Result<Vec<f64>, ModelError> {
        let l = self.layout;
        if schedule.p_grid.len() != l.hours || schedule.modules.iter().any(|row| row.len() != l.modules) {
            return Err(ModelError::ShapeMismatch);
        }
        let mut x = vec![0.0; l.n_vars()];
        for t in 0..l.hours {
            x[l.grid(t)] = schedule.p_grid[t];
            for m in 0..l.modules {
                let s = &schedule.modules[t][m];
                x[l.h(t, m)] = s.h;
                x[l.p(t, m)] = s.p_e;
                x[l.psu(t, m)] = s.p_su;
                x[l.on(t, m)] = f64::from(u8::from(s.on));
                x[l.su(t, m)] = f64::from(u8::from(s.startup));
            }
        }
        Ok(x)
    }

    /// Plain-text dump: one line per variable, then the objective, then one
    /// line per row.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# milp-instance v1")?;
        writeln!(out, "sense maximize")?;
        writeln!(out, "vars {}", self.variables.len())?;
        for (j, v) in self.variables.iter().enumerate() {
            let ty = if v.integer { "int" } else { "cont" };
            writeln!(out, "var {j} {} {ty} {} {}", v.kind.name(), v.lower, v.upper)?;
        }
        let nz: Vec<_> = self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).collect();
        write!(out, "obj {}", nz.len())?;
        for (j, c) in nz {
            write!(out, " {j}:{c}")?;
        }
        writeln!(out)?;
        writeln!(out, "rows {}", self.rows.len())?;
        for (i, r) in self.rows.iter().enumerate() {
            let sense = match r.sense {
                RowSense::Le => "<=",
                RowSense::Ge => ">=",
                RowSense::Eq => "=",
            };
            write!(out, "row {i} {} {sense} {}", r.family, r.rhs)?;
            for &(j, a) in &r.coeffs {
                write!(out, " {j}:{a}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Translates the scheduling problem into a MILP.
///
/// The producing indicator `z_on - z_su` scales both the operating range and
/// the hydrogen-curve intercepts, so a module makes no hydrogen while off or
/// starting up. Grid revenue is counted once per hour and the power balance
/// sums consumption over all modules.
pub fn build_milp(problem: &ScheduleProblem) -> MilpInstance {
    let hours = problem.horizon();
    let modules = problem.n_modules();
    let layout = VarLayout { hours, modules };
    let spec = problem.fleet.spec;
    let c = spec.c_max;
    let prices = problem.prices();
    let h_cap = c * problem.pwl.max_normalized_output();

    let mut variables =
        vec![Variable { kind: VarKind::Grid { hour: 0 }, lower: 0.0, upper: 0.0, integer: false }; layout.n_vars()];
    let mut objective = vec![0.0; layout.n_vars()];
    for t in 0..hours {
        variables[layout.grid(t)] =
            Variable { kind: VarKind::Grid { hour: t }, lower: 0.0, upper: problem.availability[t], integer: false };
        objective[layout.grid(t)] = prices[t];
        for m in 0..modules {
            let (hour, module) = (t, m);
            let cont = |kind, upper| Variable { kind, lower: 0.0, upper, integer: false };
            variables[layout.h(t, m)] = cont(VarKind::Hydrogen { hour, module }, h_cap);
            variables[layout.p(t, m)] = cont(VarKind::Power { hour, module }, c);
            variables[layout.psu(t, m)] = cont(VarKind::StartupPower { hour, module }, spec.startup_energy());
            variables[layout.on(t, m)] =
                Variable { kind: VarKind::On { hour, module }, lower: 0.0, upper: 1.0, integer: true };
            variables[layout.su(t, m)] =
                Variable { kind: VarKind::Startup { hour, module }, lower: 0.0, upper: 1.0, integer: true };
            objective[layout.h(t, m)] = spec.hydrogen_price;
        }
    }

    let mut rows = Vec::with_capacity(MilpInstance::expected_rows(hours, modules, problem.pwl.n_segments()));
    let mut push = |family, hour, module, coeffs: Vec<(usize, f64)>, sense, rhs| {
        rows.push(Row { family, coeffs, sense, rhs, hour, module });
    };
    let tm = || (0..hours).flat_map(|t| (0..modules).map(move |m| (t, m)));

    for (t, m) in tm() {
        for seg in problem.pwl.segments() {
            let b = seg.intercept * c;
            push(
                RowFamily::HydrogenCurve,
                t,
                Some(m),
                vec![(layout.h(t, m), 1.0), (layout.p(t, m), -seg.slope), (layout.on(t, m), -b), (layout.su(t, m), b)],
                RowSense::Le,
                0.0,
            );
        }
    }
    for (t, m) in tm() {
        let (p, on, su) = (layout.p(t, m), layout.on(t, m), layout.su(t, m));
        let cmin = spec.c_min();
        push(RowFamily::OperatingRange, t, Some(m), vec![(p, 1.0), (on, -cmin), (su, cmin)], RowSense::Ge, 0.0);
        push(RowFamily::OperatingRange, t, Some(m), vec![(p, 1.0), (on, -c), (su, c)], RowSense::Le, 0.0);
    }
    for t in 0..hours {
        push(RowFamily::ExportLimit, t, None, vec![(layout.grid(t), 1.0)], RowSense::Le, problem.export_limits[t]);
    }
    let ramp = spec.ramp();
    for (t, m) in tm() {
        let p = layout.p(t, m);
        if t == 0 {
            let p0 = problem.fleet.initial_power[m];
            push(RowFamily::RampUp, t, Some(m), vec![(p, 1.0)], RowSense::Le, ramp + p0);
            push(RowFamily::RampDown, t, Some(m), vec![(p, -1.0)], RowSense::Le, ramp - p0);
        } else {
            let prev = layout.p(t - 1, m);
            push(RowFamily::RampUp, t, Some(m), vec![(p, 1.0), (prev, -1.0)], RowSense::Le, ramp);
            push(RowFamily::RampDown, t, Some(m), vec![(prev, 1.0), (p, -1.0)], RowSense::Le, ramp);
        }
    }
    for (t, m) in tm() {
        let (on, su) = (layout.on(t, m), layout.su(t, m));
        if t == 0 {
            let z0 = f64::from(u8::from(problem.fleet.initial_on[m]));
            push(RowFamily::StartupLogicA, t, Some(m), vec![(su, 1.0)], RowSense::Le, 1.0 - z0);
            push(RowFamily::StartupLogicB, t, Some(m), vec![(su, 1.0), (on, -1.0)], RowSense::Le, 0.0);
            push(RowFamily::StartupLogicC, t, Some(m), vec![(su, 1.0), (on, -1.0)], RowSense::Ge, -z0);
        } else {
            let prev = layout.on(t - 1, m);
            push(RowFamily::StartupLogicA, t, Some(m), vec![(su, 1.0), (prev, 1.0)], RowSense::Le, 1.0);
            push(RowFamily::StartupLogicB, t, Some(m), vec![(su, 1.0), (on, -1.0)], RowSense::Le, 0.0);
            push(RowFamily::StartupLogicC, t, Some(m), vec![(su, 1.0), (on, -1.0), (prev, 1.0)], RowSense::Ge, 0.0);
        }
    }
    for (t, m) in tm() {
        push(
            RowFamily::StartupCost,
            t,
            Some(m),
            vec![(layout.psu(t, m), 1.0), (layout.su(t, m), -spec.startup_energy())],
            RowSense::Eq,
            0.0,
        );
    }
    for t in 0..hours {
        let mut coeffs = vec![(layout.grid(t), 1.0)];
        for m in 0..modules {
            coeffs.push((layout.p(t, m), 1.0));
            coeffs.push((layout.psu(t, m), 1.0));
        }
        push(RowFamily::PowerBalance, t, None, coeffs, RowSense::Le, problem.availability[t]);
    }

    MilpInstance { layout, variables, objective, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketRecord, MarketSeries};
    use crate::model::tests::pwl;
    use crate::model::{build_problem, ElectrolyzerSpec, FleetConfig};

    fn tiny(hours: usize, modules: usize, segments: usize) -> ScheduleProblem {
        let records = (0..hours)
            .map(|hour| MarketRecord {
                hour,
                bid_price: 0.0,
                cleared_price: 30.0 + hour as f64,
                hsl: 50.0,
                lsl: 0.0,
                cleared_power: 20.0,
            })
            .collect();
        let market = MarketSeries::new(records).unwrap();
        build_problem(market, FleetConfig::cold(modules, ElectrolyzerSpec::new(20.0)), pwl(segments)).unwrap()
    }

    #[test]
    fn family_counts_for_two_hours_one_module() {
        let inst = build_milp(&tiny(2, 1, 2));
        let c = inst.family_counts();
        assert_eq!(c[&RowFamily::HydrogenCurve], 4);
        assert_eq!(c[&RowFamily::OperatingRange], 4);
        assert_eq!(c[&RowFamily::ExportLimit], 2);
        assert_eq!(c[&RowFamily::RampUp] + c[&RowFamily::RampDown], 4);
        assert_eq!(c[&RowFamily::StartupLogicA] + c[&RowFamily::StartupLogicB] + c[&RowFamily::StartupLogicC], 6);
        assert_eq!(c[&RowFamily::StartupCost], 2);
        assert_eq!(c[&RowFamily::PowerBalance], 2);
        assert_eq!(inst.rows.len(), MilpInstance::expected_rows(2, 1, 2));
    }

    #[test]
    fn counts_match_formula() {
        for (t, m, i) in [(1, 1, 1), (3, 2, 8), (5, 3, 4), (2, 4, 88)] {
            let inst = build_milp(&tiny(t, m, i));
            assert_eq!(inst.rows.len(), MilpInstance::expected_rows(t, m, i));
            assert_eq!(inst.n_vars(), t * (5 * m + 1));
            let mut used = vec![false; inst.n_vars()];
            for r in &inst.rows {
                for &(j, _) in &r.coeffs {
                    used[j] = true;
                }
            }
            assert!(used.iter().all(|u| *u));
        }
    }

    #[test]
    fn objective_coefficients() {
        let p = tiny(3, 2, 8);
        let inst = build_milp(&p);
        for t in 0..3 {
            assert_eq!(inst.objective[inst.layout.grid(t)], 30.0 + t as f64);
            for m in 0..2 {
                assert_eq!(inst.objective[inst.layout.h(t, m)], 2.0);
                assert_eq!(inst.objective[inst.layout.p(t, m)], 0.0);
            }
        }
    }

    #[test]
    fn off_module_is_forced_to_zero() {
        // with z_on = z_su = 0 every module-level continuous value must be 0
        let p = tiny(2, 1, 8);
        let inst = build_milp(&p);
        let l = inst.layout;
        let mut x = vec![0.0; inst.n_vars()];
        assert_eq!(inst.max_violation(&x), 0.0);
        x[l.h(0, 0)] = 1e-3;
        assert!(inst.max_violation(&x) > 0.0);
        x[l.h(0, 0)] = 0.0;
        x[l.p(1, 0)] = 1e-3;
        assert!(inst.max_violation(&x) > 0.0);
        x[l.p(1, 0)] = 0.0;
        x[l.psu(1, 0)] = 1e-3;
        assert!(inst.max_violation(&x) > 0.0);
    }

    #[test]
    fn startup_is_forced_on_transition() {
        let p = tiny(2, 1, 1);
        let inst = build_milp(&p);
        let l = inst.layout;
        let mut x = vec![0.0; inst.n_vars()];
        x[l.on(1, 0)] = 1.0;
        // z_su[1] = 0 violates startup_logic_c
        let bad: Vec<_> = inst.rows.iter().filter(|r| r.violation(&x) > 0.0).map(|r| r.family).collect();
        assert!(bad.contains(&RowFamily::StartupLogicC));
        x[l.su(1, 0)] = 1.0;
        x[l.psu(1, 0)] = p.spec().startup_energy();
        assert_eq!(inst.max_violation(&x), 0.0);
    }

    #[test]
    fn dump_lists_everything() {
        let inst = build_milp(&tiny(1, 1, 2));
        let mut buf = Vec::new();
        inst.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("var ")).count(), inst.n_vars());
        assert_eq!(text.lines().filter(|l| l.starts_with("row ")).count(), inst.rows.len());
        assert!(text.contains("hydrogen_curve"));
    }
}
