use std::collections::BTreeMap;

use super::milp::{BaselineReference, MilpModel, Sense, Tag, VarId, VarKind};
use crate::grid::{Network, Objective, PolicyConstraint, ScenarioSpec};
use crate::risk::{Category, RiskProfile};
use crate::{Error, Result};

/// Required share for both policy constraints.
pub const POLICY_SHARE: f64 = 0.4;

/// Variable naming scheme shared by the builder, reports and backends.
pub mod names {
    pub fn z(line: &str, day: u32) -> String {
        format!("z_{line}_{day}")
    }
    pub fn y(line: &str) -> String {
        format!("y_{line}")
    }
    pub fn ps(bus: &str, day: u32, t: usize) -> String {
        format!("ps_{bus}_{day}_{t}")
    }
    pub fn pg(gen: &str, day: u32, t: usize) -> String {
        format!("pg_{gen}_{day}_{t}")
    }
    pub fn theta(bus: &str, day: u32, t: usize) -> String {
        format!("theta_{bus}_{day}_{t}")
    }
    pub fn f(line: &str, day: u32, t: usize) -> String {
        format!("f_{line}_{day}_{t}")
    }
    pub const ALPHA: &str = "alpha";
}

/// Inputs a scenario needs beyond the network and risk profile.
#[derive(Debug, Clone, Default)]
pub struct BuildContext {
    /// Required by load-shed-reduction policy models.
    pub baseline: Option<BaselineReference>,
    /// Groups entering the max-min objective; all network groups when `None`.
    pub equity_groups: Option<Vec<String>>,
}

fn check_alignment(net: &Network, risk: &RiskProfile) -> Result<Vec<usize>> {
    if risk.days != net.horizon.days {
        return Err(Error::Build(format!(
            "risk days {:?} differ from horizon days {:?}",
            risk.days, net.horizon.days
        )));
    }
    net.lines
        .iter()
        .map(|l| {
            risk.line_idx(&l.id)
                .ok_or_else(|| Error::Build(format!("line {} has no risk entry", l.id)))
        })
        .collect()
}

/// Switching variables, bounds and the DC optimal transmission switching rows.
pub fn build_dcots(net: &Network, risk: &RiskProfile, spec: &ScenarioSpec) -> Result<MilpModel> {
    spec.validate()?;
    let risk_of = check_alignment(net, risk)?;
    let inc = net.incidence();
    let days = &net.horizon.days;
    let periods = net.horizon.periods_per_day;
    let (m_hi, m_lo) = (spec.big_m_upper, spec.big_m_lower);
    let mut m = MilpModel::new(spec.label());
    m.meta.model_id = Some(spec.model_id);
    m.meta.budget = spec.budget;
    m.meta.total_demand = net.total_demand();

    // Angles enter only through differences along lines, and every line bounds
    // its difference (angle limits when energized, big-M when not), so within
    // each connected component a shift puts all angles inside this box.
    let angle_box: f64 = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let w = line.angle_min.abs().max(line.angle_max.abs());
            let switchable = (0..days.len()).any(|d| risk.category(risk_of[l], d).switchable());
            if switchable {
                w.max(m_hi.abs()).max(m_lo.abs())
            } else {
                w
            }
        })
        .sum();

    let mut z: BTreeMap<(usize, usize), VarId> = BTreeMap::new();
    for (l, line) in net.lines.iter().enumerate() {
        for (d, &day) in days.iter().enumerate() {
            if risk.category(risk_of[l], d).switchable() {
                let id = m.add_var(names::z(&line.id, day), VarKind::Binary, 0.0, 1.0, None)?;
                z.insert((l, d), id);
            }
        }
    }
    for (l, line) in net.lines.iter().enumerate() {
        if risk.in_harden_set(risk_of[l]) {
            let cost = line.underground_cost();
            // A line costing more than the whole budget can never be hardened.
            let (ub, tag) = if cost <= spec.budget {
                (1.0, None)
            } else {
                (0.0, Some(Tag::Budget))
            };
            m.add_var(names::y(&line.id), VarKind::Binary, 0.0, ub, tag)?;
        }
    }

    for (d, &day) in days.iter().enumerate() {
        for t in 0..periods {
            let pg: Vec<VarId> = net
                .generators
                .iter()
                .map(|g| {
                    m.add_var(
                        names::pg(&g.id, day, t),
                        VarKind::Continuous,
                        g.p_min,
                        g.p_max,
                        Some(Tag::GenLimits),
                    )
                })
                .collect::<Result<_>>()?;
            let theta: Vec<VarId> = net
                .buses
                .iter()
                .map(|b| {
                    m.add_var(
                        names::theta(&b.id, day, t),
                        VarKind::Continuous,
                        -angle_box,
                        angle_box,
                        Some(Tag::AngleBox),
                    )
                })
                .collect::<Result<_>>()?;
            let ps: Vec<VarId> = net
                .buses
                .iter()
                .map(|b| {
                    let pl = b.demand_at(d, t);
                    m.add_var(
                        names::ps(&b.id, day, t),
                        VarKind::Continuous,
                        0.0,
                        pl,
                        Some(Tag::ShedLimits),
                    )
                })
                .collect::<Result<_>>()?;
            let mut flow = Vec::with_capacity(net.lines.len());
            for (l, line) in net.lines.iter().enumerate() {
                let id = if z.contains_key(&(l, d)) {
                    m.add_var(
                        names::f(&line.id, day, t),
                        VarKind::Continuous,
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                        None,
                    )?
                } else {
                    m.add_var(
                        names::f(&line.id, day, t),
                        VarKind::Continuous,
                        -line.flow_limit,
                        line.flow_limit,
                        Some(Tag::FlowLimit),
                    )?
                };
                flow.push(id);
            }

            for (l, line) in net.lines.iter().enumerate() {
                let fr = theta[net.bus_idx(&line.from_bus).expect("validated")];
                let to = theta[net.bus_idx(&line.to_bus).expect("validated")];
                let f = flow[l];
                let b = line.susceptance;
                let sfx = format!("{}_{}_{}", line.id, day, t);
                match z.get(&(l, d)) {
                    Some(&zv) => {
                        let fmax = line.flow_limit;
                        m.add_row(
                            format!("flowsw_up_{sfx}"),
                            Tag::FlowLimitSwitch,
                            vec![(f, 1.0), (zv, -fmax)],
                            Sense::Le,
                            0.0,
                        );
                        m.add_row(
                            format!("flowsw_lo_{sfx}"),
                            Tag::FlowLimitSwitch,
                            vec![(f, 1.0), (zv, fmax)],
                            Sense::Ge,
                            0.0,
                        );
                        m.add_row(
                            format!("anglesw_lo_{sfx}"),
                            Tag::AngleSwitchLower,
                            vec![(fr, 1.0), (to, -1.0), (zv, -(line.angle_min - m_lo))],
                            Sense::Ge,
                            m_lo,
                        );
                        m.add_row(
                            format!("anglesw_up_{sfx}"),
                            Tag::AngleSwitchUpper,
                            vec![(fr, 1.0), (to, -1.0), (zv, -(line.angle_max - m_hi))],
                            Sense::Le,
                            m_hi,
                        );
                        m.add_row(
                            format!("dcsw_lo_{sfx}"),
                            Tag::FlowSwitchLower,
                            vec![(f, 1.0), (fr, b), (to, -b), (zv, b.abs() * m_lo)],
                            Sense::Ge,
                            b.abs() * m_lo,
                        );
                        m.add_row(
                            format!("dcsw_up_{sfx}"),
                            Tag::FlowSwitchUpper,
                            vec![(f, 1.0), (fr, b), (to, -b), (zv, b.abs() * m_hi)],
                            Sense::Le,
                            b.abs() * m_hi,
                        );
                    }
                    None => {
                        m.add_row(
                            format!("angle_lo_{sfx}"),
                            Tag::AngleLimit,
                            vec![(fr, 1.0), (to, -1.0)],
                            Sense::Ge,
                            line.angle_min,
                        );
                        m.add_row(
                            format!("angle_up_{sfx}"),
                            Tag::AngleLimit,
                            vec![(fr, 1.0), (to, -1.0)],
                            Sense::Le,
                            line.angle_max,
                        );
                        m.add_row(
                            format!("dc_{sfx}"),
                            Tag::DcFlow,
                            vec![(f, 1.0), (fr, b), (to, -b)],
                            Sense::Eq,
                            0.0,
                        );
                    }
                }
            }

            for (n, bus) in net.buses.iter().enumerate() {
                let mut coeffs = Vec::new();
                coeffs.extend(inc.lines_from[n].iter().map(|&l| (flow[l], 1.0)));
                coeffs.extend(inc.lines_to[n].iter().map(|&l| (flow[l], -1.0)));
                coeffs.extend(inc.generators[n].iter().map(|&g| (pg[g], -1.0)));
                coeffs.push((ps[n], -1.0));
                m.add_row(
                    format!("balance_{}_{}_{}", bus.id, day, t),
                    Tag::PowerBalance,
                    coeffs,
                    Sense::Eq,
                    -bus.demand_at(d, t),
                );
            }
        }
    }
    Ok(m)
}

/// Links switching to hardening: high-risk lines are energized exactly when
/// hardened, medium-risk lines may only be de-energized when not hardened.
pub fn add_hardening(m: &mut MilpModel, net: &Network, risk: &RiskProfile) -> Result<()> {
    let risk_of = check_alignment(net, risk)?;
    for (l, line) in net.lines.iter().enumerate() {
        let Some(y) = m.var_id(&names::y(&line.id)) else {
            continue;
        };
        for (d, &day) in net.horizon.days.iter().enumerate() {
            let cat = risk.category(risk_of[l], d);
            if !cat.switchable() {
                continue;
            }
            let z = m.require(&names::z(&line.id, day))?;
            let name = format!("harden_{}_{}", line.id, day);
            match cat {
                Category::High => m.add_row(name, Tag::HighRiskLink, vec![(z, 1.0), (y, -1.0)], Sense::Eq, 0.0),
                Category::Med => m.add_row(name, Tag::MedRiskLink, vec![(y, 1.0), (z, -1.0)], Sense::Le, 0.0),
                Category::Low => unreachable!(),
            }
        }
    }
    Ok(())
}

pub fn add_budget(m: &mut MilpModel, net: &Network, spec: &ScenarioSpec) -> Result<()> {
    let coeffs: Vec<(VarId, f64)> = net
        .lines
        .iter()
        .filter_map(|line| m.var_id(&names::y(&line.id)).map(|y| (y, line.underground_cost())))
        .collect();
    m.add_row("budget".into(), Tag::Budget, coeffs, Sense::Le, spec.budget);
    Ok(())
}

/// Name, terms and right-hand side of a daily risk row.
pub type ThresholdRow = (String, Vec<(VarId, f64)>, f64);

fn risk_rows(m: &MilpModel, net: &Network, risk: &RiskProfile, with_hardening: bool) -> Result<Vec<ThresholdRow>> {
    let risk_of = check_alignment(net, risk)?;
    let mut out = Vec::new();
    for (d, &day) in net.horizon.days.iter().enumerate() {
        let mut coeffs = Vec::new();
        let mut rhs = risk.thresholds.r_psps;
        for (l, line) in net.lines.iter().enumerate() {
            let r = risk.risk(risk_of[l], d);
            if r == 0.0 {
                continue;
            }
            match m.var_id(&names::z(&line.id, day)) {
                Some(z) => coeffs.push((z, r)),
                None => rhs -= r,
            }
            if with_hardening {
                if let Some(y) = m.var_id(&names::y(&line.id)) {
                    coeffs.push((y, -r));
                }
            }
        }
        out.push((format!("risk_{day}"), coeffs, rhs));
    }
    Ok(out)
}

/// Daily energized-risk rows without hardening credit.
pub fn switching_threshold_rows(m: &MilpModel, net: &Network, risk: &RiskProfile) -> Result<Vec<ThresholdRow>> {
    risk_rows(m, net, risk, false)
}

/// Daily cap on risk carried by energized, non-hardened lines. Lines that
/// cannot switch contribute their risk as a constant.
pub fn add_risk_cap(m: &mut MilpModel, net: &Network, risk: &RiskProfile) -> Result<()> {
    for (name, coeffs, rhs) in risk_rows(m, net, risk, true)? {
        m.add_row(name, Tag::RiskCap, coeffs, Sense::Le, rhs);
    }
    Ok(())
}

fn index_of(spec: &ScenarioSpec) -> Result<&str> {
    spec.vulnerability_index
        .as_deref()
        .ok_or_else(|| Error::Build("policy constraint without a vulnerability index".into()))
}

/// At least [`POLICY_SHARE`] of the budget is spent on lines attributed to
/// vulnerable populations (half of a line's cost to each end bus).
pub fn add_policy_budget(m: &mut MilpModel, net: &Network, spec: &ScenarioSpec) -> Result<()> {
    let index = index_of(spec)?;
    let mut coeffs = Vec::new();
    for line in &net.lines {
        let Some(y) = m.var_id(&names::y(&line.id)) else {
            continue;
        };
        let share = line_vuln_share(net, line, index);
        let c = line.underground_cost() * share;
        if c != 0.0 {
            coeffs.push((y, c));
        }
    }
    m.add_row(
        "policy_budget".into(),
        Tag::PolicyBudget,
        coeffs,
        Sense::Ge,
        POLICY_SHARE * spec.budget,
    );
    Ok(())
}

/// Mean of the vulnerable fractions at a line's two end buses.
pub fn line_vuln_share(net: &Network, line: &crate::grid::Line, index: &str) -> f64 {
    let fr = net.bus(&line.from_bus).map_or(0.0, |b| b.vuln(index));
    let to = net.bus(&line.to_bus).map_or(0.0, |b| b.vuln(index));
    0.5 * (fr + to)
}

fn shed_vars(m: &MilpModel, net: &Network) -> Result<Vec<(usize, VarId)>> {
    let mut out = Vec::new();
    for &day in &net.horizon.days {
        for t in 0..net.horizon.periods_per_day {
            for (n, bus) in net.buses.iter().enumerate() {
                out.push((n, m.require(&names::ps(&bus.id, day, t))?));
            }
        }
    }
    Ok(out)
}

/// Vulnerable populations see at least [`POLICY_SHARE`] of the shed
/// reduction relative to the baseline. Linear form:
/// `sum (share - v_n) ps >= share * P0 - Pv0`, plus `sum ps <= P0`.
pub fn add_policy_loadshed(
    m: &mut MilpModel,
    net: &Network,
    spec: &ScenarioSpec,
    baseline: Option<&BaselineReference>,
) -> Result<()> {
    let index = index_of(spec)?;
    let base = baseline.ok_or_else(|| Error::Build(format!("{} needs the BL-M0 baseline", spec.model_id)))?;
    base.check()?;
    let p0 = base.total_shed;
    if p0 <= 0.0 {
        return Err(Error::Build(
            "baseline has no load shed: no reduction to allocate".into(),
        ));
    }
    let pv0 = base
        .vuln_shed
        .get(index)
        .copied()
        .ok_or_else(|| Error::Build(format!("baseline lacks vulnerable shed for {index}")))?;
    let vars = shed_vars(m, net)?;
    let coeffs: Vec<(VarId, f64)> = vars
        .iter()
        .map(|&(n, v)| (v, POLICY_SHARE - net.buses[n].vuln(index)))
        .filter(|(_, c)| *c != 0.0)
        .collect();
    m.add_row(
        "policy_loadshed".into(),
        Tag::PolicyLoadShed,
        coeffs,
        Sense::Ge,
        POLICY_SHARE * p0 - pv0,
    );
    let all: Vec<(VarId, f64)> = vars.iter().map(|&(_, v)| (v, 1.0)).collect();
    m.add_row("policy_loadshed_cap".into(), Tag::PolicyLoadShedCap, all, Sense::Le, p0);
    m.meta.baseline = Some(base.clone());
    Ok(())
}

/// Adds `alpha` and one row per group with positive demand:
/// `sum gamma ps - P^l_m alpha <= 0`.
pub fn add_equity(m: &mut MilpModel, net: &Network, groups: &[String]) -> Result<VarId> {
    let alpha = m.add_var(names::ALPHA.into(), VarKind::Continuous, 0.0, 1.0, None)?;
    let vars = shed_vars(m, net)?;
    for g in groups {
        let demand: f64 = net.buses.iter().map(|b| b.group_fraction(g) * b.total_demand()).sum();
        if demand <= 0.0 {
            m.meta.excluded_groups.push(g.clone());
            continue;
        }
        let mut coeffs: Vec<(VarId, f64)> = vars
            .iter()
            .map(|&(n, v)| (v, net.buses[n].group_fraction(g)))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        coeffs.push((alpha, -demand));
        m.add_row(format!("group_{g}"), Tag::GroupShare, coeffs, Sense::Le, 0.0);
        m.meta.group_demand.insert(g.clone(), demand);
    }
    Ok(alpha)
}

pub fn set_objective(m: &mut MilpModel, net: &Network, objective: Objective) -> Result<()> {
    m.objective = match objective {
        Objective::TotalLoadShed => {
            let total = net.total_demand();
            if total <= 0.0 {
                return Err(Error::Build("network has no demand".into()));
            }
            shed_vars(m, net)?.into_iter().map(|(_, v)| (v, 1.0 / total)).collect()
        }
        Objective::MaxGroupPercentShed => vec![(m.require(names::ALPHA)?, 1.0)],
    };
    Ok(())
}

/// Full model for one catalog scenario.
pub fn build_scenario(net: &Network, risk: &RiskProfile, spec: &ScenarioSpec, ctx: &BuildContext) -> Result<MilpModel> {
    let mut m = build_dcots(net, risk, spec)?;
    add_hardening(&mut m, net, risk)?;
    add_budget(&mut m, net, spec)?;
    add_risk_cap(&mut m, net, risk)?;
    match spec.policy_constraint {
        PolicyConstraint::None => {}
        PolicyConstraint::Budget => add_policy_budget(&mut m, net, spec)?,
        PolicyConstraint::LoadShedReduction => add_policy_loadshed(&mut m, net, spec, ctx.baseline.as_ref())?,
    }
    if spec.objective == Objective::MaxGroupPercentShed {
        let groups = ctx.equity_groups.clone().unwrap_or_else(|| net.group_names());
        add_equity(&mut m, net, &groups)?;
    }
    set_objective(&mut m, net, spec.objective)?;
    Ok(m)
}

impl BaselineReference {
    /// Total and per-index vulnerable shed from a solved model's values.
    pub fn from_values(net: &Network, values: &BTreeMap<String, f64>) -> Self {
        let mut total = 0.0;
        let mut vuln: BTreeMap<String, f64> = BTreeMap::new();
        for b in &net.buses {
            for k in b.vuln_fraction.keys() {
                vuln.entry(k.clone()).or_insert(0.0);
            }
        }
        for &day in &net.horizon.days {
            for t in 0..net.horizon.periods_per_day {
                for b in &net.buses {
                    let ps = values.get(&names::ps(&b.id, day, t)).copied().unwrap_or(0.0);
                    total += ps;
                    for (k, acc) in vuln.iter_mut() {
                        *acc += b.vuln(k) * ps;
                    }
                }
            }
        }
        BaselineReference {
            total_shed: total,
            vuln_shed: vuln,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::triangle;
    use crate::grid::ModelId;
    use crate::risk::Thresholds;

    fn profile(net: &Network, risk: Vec<Vec<f64>>) -> RiskProfile {
        RiskProfile::from_line_risk(
            net.lines.iter().map(|l| l.id.clone()).collect(),
            net.horizon.days.clone(),
            risk,
            Thresholds {
                r_psps: 10.0,
                r_high: 1e6,
                r_low: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn variable_counts_match_catalog() {
        let net = triangle();
        // ab high on day 1, bc medium, ca low.
        let days = net.horizon.num_days();
        let risk = profile(&net, vec![vec![2e6; days], vec![5.0; days], vec![0.0; days]]);
        let spec = ScenarioSpec::new(ModelId::BlM1, 100.0);
        let m = build_scenario(&net, &risk, &spec, &BuildContext::default()).unwrap();
        let dt = days * net.horizon.periods_per_day;
        let cont = dt * (net.generators.len() + 2 * net.buses.len() + net.lines.len());
        assert_eq!(m.num_continuous(), cont);
        assert_eq!(m.num_binaries(), 2 * days + 2);
    }

    #[test]
    fn zero_budget_fixes_hardening() {
        let net = triangle();
        let days = net.horizon.num_days();
        let risk = profile(&net, vec![vec![2e6; days], vec![5.0; days], vec![0.0; days]]);
        let m = build_scenario(
            &net,
            &risk,
            &ScenarioSpec::new(ModelId::BlM0, 0.0),
            &BuildContext::default(),
        )
        .unwrap();
        for v in m.vars.iter().filter(|v| v.name.starts_with("y_")) {
            assert_eq!(v.upper, 0.0);
        }
    }

    #[test]
    fn loadshed_policy_requires_baseline() {
        let net = triangle();
        let days = net.horizon.num_days();
        let risk = profile(&net, vec![vec![0.0; days]; 3]);
        let spec = ScenarioSpec::new(ModelId::M3, 1.0);
        let err = build_scenario(&net, &risk, &spec, &BuildContext::default()).unwrap_err();
        assert!(err.to_string().contains("baseline"), "{err}");
        let ctx = BuildContext {
            baseline: Some(BaselineReference {
                total_shed: 0.0,
                vuln_shed: [("CEJST".into(), 0.0)].into(),
            }),
            equity_groups: None,
        };
        let err = build_scenario(&net, &risk, &spec, &ctx).unwrap_err();
        assert!(err.to_string().contains("no reduction to allocate"), "{err}");
    }

    #[test]
    fn constant_risk_moves_to_rhs() {
        let net = triangle();
        let days = net.horizon.num_days();
        let risk = profile(&net, vec![vec![0.5; days]; 3]);
        let m = build_scenario(
            &net,
            &risk,
            &ScenarioSpec::new(ModelId::BlM1, 0.0),
            &BuildContext::default(),
        )
        .unwrap();
        let rows: Vec<_> = m.rows_tagged(Tag::RiskCap).collect();
        assert_eq!(rows.len(), days);
        assert!(rows[0].coeffs.is_empty());
        assert_eq!(rows[0].rhs, 10.0 - 1.5);
    }
}
