use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{svec_index, ConeProgram, ProgramBuilder};
use crate::error::{Error, Result};
use crate::grid::{NetworkCase, TerminalMap};
use crate::scenario::ScenarioSet;
use crate::sime::TscConstraint;

use super::{expected_cost_coeff, wind_shortfall};

/// How branch terminals map onto rows/columns of the voltage matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalMode {
    /// One node per bus standing for all its unity-ratio terminals, plus
    /// one node per PFR terminal.
    Aggregated,
    /// One node per branch terminal and a separate scalar `|V_i|^2` per
    /// bus; unity-ratio terminals are pinned by degenerate PFR limits.
    PerTerminal,
}

/// Objective term that steers the relaxation toward rank-one solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "weight")]
pub enum ExactnessPenalty {
    None,
    /// Weight ($/h per p.u.) on total active plus reactive generation,
    /// which equals the network's active plus reactive loss up to a
    /// constant.
    Loss(f64),
    /// Weight ($/h per p.u.) on total reactive generation.
    ReactiveGeneration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub penalty: ExactnessPenalty,
    pub terminal_mode: TerminalMode,
    /// Right-hand side of every stability cut (0 for the plain cut).
    pub margin_safety: f64,
    /// When the relaxation is not rank one, fix the PFR ratios read off
    /// the solution and solve again.
    pub pin_pfr_on_inexact: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            penalty: ExactnessPenalty::Loss(1.0),
            terminal_mode: TerminalMode::Aggregated,
            margin_safety: 0.0,
            pin_pfr_on_inexact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Bus(usize),
    Terminal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintTag {
    Balance { bus: usize, reactive: bool },
    Voltage { bus: usize },
    /// Compensated active output; `scenario: None` is the interval extreme.
    GenActive { gen: usize, scenario: Option<usize> },
    GenReactive { gen: usize },
    PfrMagnitude { node: usize },
    PfrAngle { bus: usize, a: usize, b: usize },
    PfrCoupling { bus: usize, a: usize, b: usize },
    Stability { cut: usize },
}

impl ConstraintTag {
    pub fn label(&self) -> &'static str {
        match self {
            ConstraintTag::Balance { reactive: false, .. } => "balance_p",
            ConstraintTag::Balance { reactive: true, .. } => "balance_q",
            ConstraintTag::Voltage { .. } => "voltage",
            ConstraintTag::GenActive { .. } => "gen_active",
            ConstraintTag::GenReactive { .. } => "gen_reactive",
            ConstraintTag::PfrMagnitude { .. } => "pfr_magnitude",
            ConstraintTag::PfrAngle { .. } => "pfr_angle",
            ConstraintTag::PfrCoupling { .. } => "pfr_coupling",
            ConstraintTag::Stability { .. } => "stability",
        }
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConstraintTag::Balance { bus, .. } | ConstraintTag::Voltage { bus } => write!(f, "{}:bus={bus}", self.label()),
            ConstraintTag::GenActive { gen, scenario } => match scenario {
                Some(s) => write!(f, "{}:gen={gen}:scenario={s}", self.label()),
                None => write!(f, "{}:gen={gen}:interval", self.label()),
            },
            ConstraintTag::GenReactive { gen } => write!(f, "{}:gen={gen}", self.label()),
            ConstraintTag::PfrMagnitude { node } => write!(f, "{}:node={node}", self.label()),
            ConstraintTag::PfrAngle { bus, a, b } | ConstraintTag::PfrCoupling { bus, a, b } => {
                write!(f, "{}:bus={bus}:nodes={a},{b}", self.label())
            }
            ConstraintTag::Stability { cut } => write!(f, "{}:cut={cut}", self.label()),
        }
    }
}

/// Source of `W_i = |V_i|^2` for a bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BusSquare {
    Node(usize),
    Var(usize),
}

/// Node ratio limits: magnitude and angle (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NodeLimits {
    pub mag: (f64, f64),
    pub angle: (f64, f64),
}

const UNITY: NodeLimits = NodeLimits {
    mag: (1.0, 1.0),
    angle: (0.0, 0.0),
};

#[derive(Debug, Clone)]
pub struct SdpModel {
    pub program: ConeProgram,
    /// Tag of every box row, in row order. PSD rows follow untagged.
    pub tags: Vec<ConstraintTag>,
    pub nodes: Vec<NodeKind>,
    pub node_bus: Vec<usize>,
    /// Node carrying each branch terminal.
    pub terminal_node: Vec<usize>,
    /// Line index of each branch terminal.
    pub terminal_line: Vec<usize>,
    pub(crate) bus_square: Vec<BusSquare>,
    pub(crate) node_limits: Vec<NodeLimits>,
    pub x_start: usize,
    pub pg_start: usize,
    pub qg_start: usize,
    pub rho: Vec<f64>,
    /// Fuel-cost constants plus the expected recourse cost, $/h.
    pub objective_constant: f64,
    pub options: ModelOptions,
    pub case: NetworkCase,
    pub scenario_ids: Vec<usize>,
    pub scenarios: ScenarioSet,
    pub cuts: Vec<TscConstraint>,
    pub n_cuts: usize,
    /// Terminal ratios fixed by the caller, keyed by terminal index.
    pub pinned: BTreeMap<usize, Complex64>,
}

impl SdpModel {
    /// Number of voltage nodes (half the realified matrix dimension).
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn x_var(&self, r: usize, c: usize) -> usize {
        self.x_start + svec_index(2 * self.n_nodes(), r, c)
    }

    pub fn count(&self, label: &str) -> usize {
        self.tags.iter().filter(|t| t.label() == label).count()
    }

    /// True if some PFR node still has a ratio range to choose from.
    pub fn has_free_pfr(&self) -> bool {
        self.nodes.iter().zip(&self.node_limits).any(|(n, l)| {
            matches!(n, NodeKind::Terminal(_)) && (l.mag.0 != l.mag.1 || l.angle.0 != l.angle.1)
        })
    }
}

type Lin = Vec<(usize, f64)>;

fn merge(lin: Lin) -> Lin {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, v) in lin {
        *m.entry(j).or_insert(0.0) += v;
    }
    m.into_iter().filter(|(_, v)| *v != 0.0).collect()
}

struct Layout {
    k: usize,
    x_start: usize,
}

impl Layout {
    fn x(&self, r: usize, c: usize) -> usize {
        self.x_start + svec_index(2 * self.k, r, c)
    }

    /// `Re W_ab` scaled by `s`.
    fn re(&self, a: usize, b: usize, s: f64) -> Lin {
        vec![(self.x(a, b), 0.5 * s), (self.x(self.k + a, self.k + b), 0.5 * s)]
    }

    /// `Im W_ab` scaled by `s`.
    fn im(&self, a: usize, b: usize, s: f64) -> Lin {
        if a == b {
            return Vec::new();
        }
        vec![(self.x(self.k + a, b), 0.5 * s), (self.x(a, self.k + b), -0.5 * s)]
    }
}

fn square(layout: &Layout, sq: BusSquare, s: f64) -> Lin {
    match sq {
        BusSquare::Node(n) => layout.re(n, n, s),
        BusSquare::Var(v) => vec![(v, s)],
    }
}

/// Assembles the relaxation over the given scenarios.
///
/// Decision variables: the realified voltage matrix `X` (PSD, `2K x 2K`
/// for `K` nodes), generator outputs `P_G`, `Q_G` (p.u.) and, where a bus
/// has no node of its own, a scalar `W_i`. Power balance and reactive
/// limits are imposed at the forecast; active limits are imposed on the
/// compensated output at both extremes of the interval and at every
/// scenario; each non-stable cut adds one row.
pub fn build_model(
    case: &NetworkCase,
    scenarios: &ScenarioSet,
    cuts: &[TscConstraint],
    rho: &[f64],
    options: &ModelOptions,
) -> Result<SdpModel> {
    build_model_pinned(case, scenarios, cuts, rho, options, &BTreeMap::new())
}

/// Same as [`build_model`] with the listed PFR terminals fixed at the
/// given complex ratios.
pub fn build_model_pinned(
    case: &NetworkCase,
    scenarios: &ScenarioSet,
    cuts: &[TscConstraint],
    rho: &[f64],
    options: &ModelOptions,
    pinned: &BTreeMap<usize, Complex64>,
) -> Result<SdpModel> {
    if scenarios.is_empty() {
        return Err(Error::EmptySupport);
    }
    let ng = case.n_gen();
    if rho.len() != ng {
        return Err(Error::Dimension(format!("{} participation factors for {ng} generators", rho.len())));
    }
    let forecast = case.wind_forecast();
    if scenarios.interval.dim() != forecast.len() {
        return Err(Error::Dimension("scenario farm count differs from case".into()));
    }
    for c in cuts {
        if c.phi.len() != ng || c.p0_mw.len() != ng {
            return Err(Error::Dimension("cut sized for a different generator count".into()));
        }
        if !scenarios.parent_indices.contains(&c.scenario) {
            return Err(Error::UnknownScenario(c.scenario));
        }
    }

    let base = case.base_mva;
    let nb = case.n_bus();
    let terms = TerminalMap::new(case)?;
    for &t in pinned.keys() {
        if t >= terms.len() || case.pfr_for_line(terms.terminal(t).line).is_none() {
            return Err(Error::Domain(format!("terminal {t} carries no PFR to pin")));
        }
    }
    let pfr_limits = |t: usize| -> Option<NodeLimits> {
        case.pfr_for_line(terms.terminal(t).line).map(|p| match pinned.get(&t) {
            Some(g) => NodeLimits {
                mag: (g.norm(), g.norm()),
                angle: (g.arg(), g.arg()),
            },
            None => NodeLimits {
                mag: p.gamma_mag,
                angle: p.gamma_angle,
            },
        })
    };

    // voltage nodes
    let mut nodes = Vec::new();
    let mut node_bus = Vec::new();
    let mut node_limits = Vec::new();
    let mut terminal_node = vec![usize::MAX; terms.len()];
    let mut bus_node = vec![None; nb];
    match options.terminal_mode {
        TerminalMode::Aggregated => {
            for (i, slot) in bus_node.iter_mut().enumerate() {
                let at = terms.at_bus(i);
                if at.is_empty() || at.iter().any(|&t| pfr_limits(t).is_none()) {
                    *slot = Some(nodes.len());
                    nodes.push(NodeKind::Bus(i));
                    node_bus.push(i);
                    node_limits.push(UNITY);
                }
            }
            for (t, term) in terms.iter() {
                match pfr_limits(t) {
                    Some(lim) => {
                        terminal_node[t] = nodes.len();
                        nodes.push(NodeKind::Terminal(t));
                        node_bus.push(term.bus);
                        node_limits.push(lim);
                    }
                    None => terminal_node[t] = bus_node[term.bus].expect("bus node exists"),
                }
            }
        }
        TerminalMode::PerTerminal => {
            for (t, term) in terms.iter() {
                terminal_node[t] = nodes.len();
                nodes.push(NodeKind::Terminal(t));
                node_bus.push(term.bus);
                node_limits.push(pfr_limits(t).unwrap_or(UNITY));
            }
        }
    }
    let k = nodes.len();

    let mut b = ProgramBuilder::new();
    let x_start = b.add_psd_matrix(2 * k);
    let pg_start = b.add_vars(ng).start;
    let qg_start = b.add_vars(ng).start;
    let mut bus_square = Vec::with_capacity(nb);
    for slot in &bus_node {
        bus_square.push(match slot {
            Some(n) => BusSquare::Node(*n),
            None => BusSquare::Var(b.add_vars(1).start),
        });
    }
    let lay = Layout { k, x_start };
    let mut tags = Vec::new();
    let mut push = |b: &mut ProgramBuilder, tag: ConstraintTag, lin: Lin, l: f64, u: f64| {
        b.add_box(merge(lin), l, u);
        tags.push(tag);
    };

    // objective
    let mut constant = 0.0;
    for (i, g) in case.generators.iter().enumerate() {
        let p = pg_start + i;
        if g.cost.c2 != 0.0 {
            b.add_quad(p, p, 2.0 * g.cost.c2 * base * base);
        }
        b.add_linear(p, g.cost.c1 * base);
        constant += g.cost.c0;
        match options.penalty {
            ExactnessPenalty::None => {}
            ExactnessPenalty::Loss(w) => {
                b.add_linear(p, w);
                b.add_linear(qg_start + i, w);
            }
            ExactnessPenalty::ReactiveGeneration(w) => b.add_linear(qg_start + i, w),
        }
    }
    constant += expected_cost_coeff(case, &scenarios.interval).value(rho);

    // power balance at the forecast
    let wind = case.wind_injection_pu(&forecast);
    let gen_bus = case.gen_bus_indices()?;
    for i in 0..nb {
        let bus = &case.buses[i];
        let mut p_lin: Lin = Vec::new();
        let mut q_lin: Lin = Vec::new();
        for t in terms.at_bus(i) {
            let line = &case.lines[terms.terminal(t).line];
            let (a, r) = (terminal_node[t], terminal_node[terms.remote(t)]);
            let yy = line.series_admittance + line.shunt_admittance;
            // (y + ysh)^* W_aa
            p_lin.extend(lay.re(a, a, yy.re));
            q_lin.extend(lay.re(a, a, -yy.im));
            // - y^* W_ar
            let (g, bb) = (line.series_admittance.re, line.series_admittance.im);
            p_lin.extend(lay.re(a, r, -g));
            p_lin.extend(lay.im(a, r, -bb));
            q_lin.extend(lay.im(a, r, -g));
            q_lin.extend(lay.re(a, r, bb));
        }
        p_lin.extend(square(&lay, bus_square[i], bus.gs / base));
        q_lin.extend(square(&lay, bus_square[i], -bus.bs / base));
        for (gi, &gb) in gen_bus.iter().enumerate() {
            if gb == i {
                p_lin.push((pg_start + gi, -1.0));
                q_lin.push((qg_start + gi, -1.0));
            }
        }
        let p_rhs = wind[i] - bus.pd / base;
        let q_rhs = -bus.qd / base;
        push(&mut b, ConstraintTag::Balance { bus: i, reactive: false }, p_lin, p_rhs, p_rhs);
        push(&mut b, ConstraintTag::Balance { bus: i, reactive: true }, q_lin, q_rhs, q_rhs);
    }

    for i in 0..nb {
        let bus = &case.buses[i];
        push(
            &mut b,
            ConstraintTag::Voltage { bus: i },
            square(&lay, bus_square[i], 1.0),
            bus.v_min * bus.v_min,
            bus.v_max * bus.v_max,
        );
    }

    // compensated active limits over the whole interval
    let (dev_lo, dev_hi) = scenarios.interval.total_deviation_range(&forecast);
    let (s_min, s_max) = (-dev_hi, -dev_lo);
    for (i, g) in case.generators.iter().enumerate() {
        let (lo_shift, hi_shift) = if rho[i] >= 0.0 {
            (rho[i] * s_min, rho[i] * s_max)
        } else {
            (rho[i] * s_max, rho[i] * s_min)
        };
        push(
            &mut b,
            ConstraintTag::GenActive { gen: i, scenario: None },
            vec![(pg_start + i, 1.0)],
            (g.p_min - lo_shift) / base,
            (g.p_max - hi_shift) / base,
        );
    }
    // per-scenario blocks
    let blocks: Vec<Vec<(ConstraintTag, Lin, f64, f64)>> = scenarios
        .scenarios
        .par_iter()
        .zip(scenarios.parent_indices.par_iter())
        .map(|(sc, &sid)| {
            let s = wind_shortfall(&forecast, &sc.p_w);
            case.generators
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    (
                        ConstraintTag::GenActive { gen: i, scenario: Some(sid) },
                        vec![(pg_start + i, 1.0)],
                        (g.p_min - rho[i] * s) / base,
                        (g.p_max - rho[i] * s) / base,
                    )
                })
                .collect()
        })
        .collect();
    for block in blocks {
        for (tag, lin, l, u) in block {
            push(&mut b, tag, lin, l, u);
        }
    }

    for (i, g) in case.generators.iter().enumerate() {
        push(
            &mut b,
            ConstraintTag::GenReactive { gen: i },
            vec![(qg_start + i, 1.0)],
            g.q_min / base,
            g.q_max / base,
        );
    }

    // terminal ratio magnitudes
    for (n, lim) in node_limits.iter().enumerate() {
        if matches!(nodes[n], NodeKind::Bus(_)) {
            continue;
        }
        let bus = node_bus[n];
        let (gl, gu) = lim.mag;
        let mut lo = lay.re(n, n, 1.0);
        lo.extend(square(&lay, bus_square[bus], -gl * gl));
        if gl == gu {
            push(&mut b, ConstraintTag::PfrMagnitude { node: n }, lo, 0.0, 0.0);
        } else {
            push(&mut b, ConstraintTag::PfrMagnitude { node: n }, lo, 0.0, f64::INFINITY);
            let mut hi = lay.re(n, n, 1.0);
            hi.extend(square(&lay, bus_square[bus], -gu * gu));
            push(&mut b, ConstraintTag::PfrMagnitude { node: n }, hi, f64::NEG_INFINITY, 0.0);
        }
    }

    // angle and coupling between node pairs at the same bus
    for i in 0..nb {
        let at: Vec<usize> = (0..k).filter(|&n| node_bus[n] == i).collect();
        for (x, &na) in at.iter().enumerate() {
            for &nb_ in &at[x + 1..] {
                let (la, lb) = (node_limits[na], node_limits[nb_]);
                let th_lo = la.angle.0 - lb.angle.1;
                let th_hi = la.angle.1 - lb.angle.0;
                let tag = ConstraintTag::PfrAngle { bus: i, a: na, b: nb_ };
                if th_lo == th_hi {
                    let mut e = lay.im(na, nb_, 1.0);
                    e.extend(lay.re(na, nb_, -th_lo.tan()));
                    push(&mut b, tag, e, 0.0, 0.0);
                } else {
                    let mut up = lay.im(na, nb_, 1.0);
                    up.extend(lay.re(na, nb_, -th_hi.tan()));
                    push(&mut b, tag, up, f64::NEG_INFINITY, 0.0);
                    let mut dn = lay.im(na, nb_, 1.0);
                    dn.extend(lay.re(na, nb_, -th_lo.tan()));
                    push(&mut b, tag, dn, 0.0, f64::INFINITY);
                }
                let worst = th_lo.abs().max(th_hi.abs());
                let mut cpl = lay.re(na, nb_, 1.0);
                cpl.extend(square(&lay, bus_square[i], -la.mag.0 * lb.mag.0 * worst.cos()));
                push(&mut b, ConstraintTag::PfrCoupling { bus: i, a: na, b: nb_ }, cpl, 0.0, f64::INFINITY);
            }
        }
    }

    // stability cuts
    let mut n_cuts = 0;
    for (ci, c) in cuts.iter().enumerate() {
        if c.stable {
            continue;
        }
        let lin: Lin = c.phi.iter().enumerate().map(|(i, &f)| (pg_start + i, f * base)).collect();
        let rhs = options.margin_safety - c.eta0 + c.phi.iter().zip(&c.p0_mw).map(|(f, p)| f * p).sum::<f64>();
        push(&mut b, ConstraintTag::Stability { cut: ci }, lin, rhs, f64::INFINITY);
        n_cuts += 1;
    }

    Ok(SdpModel {
        program: b.build(),
        tags,
        nodes,
        node_bus,
        terminal_node,
        terminal_line: terms.iter().map(|(_, t)| t.line).collect(),
        bus_square,
        node_limits,
        x_start,
        pg_start,
        qg_start,
        rho: rho.to_vec(),
        objective_constant: constant,
        options: *options,
        case: case.clone(),
        scenario_ids: scenarios.parent_indices.clone(),
        scenarios: scenarios.clone(),
        cuts: cuts.to_vec(),
        n_cuts,
        pinned: pinned.clone(),
    })
}

/// Text dump of the program as constraint-tagged sparse triplets.
pub fn write_model_dump(model: &SdpModel) -> String {
    let p = &model.program;
    let mut s = String::new();
    writeln!(s, "rtsc-sdp-dump v1").unwrap();
    writeln!(
        s,
        "variables {} box_rows {} psd_dims {}",
        p.n,
        p.n_box(),
        p.psd_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
    )
    .unwrap();
    writeln!(s, "objective_constant {}", model.objective_constant).unwrap();
    for (j, v) in p.q.iter().enumerate() {
        if *v != 0.0 {
            writeln!(s, "q {j} {v}").unwrap();
        }
    }
    for (i, j, v) in p.p.triplet_iter() {
        writeln!(s, "p {i} {j} {v}").unwrap();
    }
    for (r, tag) in model.tags.iter().enumerate() {
        writeln!(s, "row {r} {tag} {} {}", p.l[r], p.u[r]).unwrap();
    }
    for (i, j, v) in p.a.triplet_iter() {
        let tag = model.tags.get(i).map(|t| t.label()).unwrap_or("psd");
        writeln!(s, "a {i} {j} {v} {tag}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::grid::{parse_case, PfrLimits};
    use crate::opf::equal_participation;
    use crate::scenario::{sample_uniform, Horizon, PredictionInterval};

    fn cut(scenario: usize, stable: bool) -> TscConstraint {
        TscConstraint {
            contingency: 0,
            scenario,
            eta0: -1.0,
            phi: vec![0.1, 0.0, -0.1],
            p0_mw: vec![50.0, 100.0, 60.0],
            stable,
            reliable: true,
        }
    }

    #[test]
    fn row_counts_follow_network_shape() {
        let case = parse_case(cases::DESK9).unwrap();
        let iv = PredictionInterval::from_case(&case, Horizon::DayAhead);
        let set = sample_uniform(&iv, 7, 3).unwrap();
        let cuts = [cut(0, false), cut(4, true), cut(6, false)];
        let m = build_model(&case, &set, &cuts, &equal_participation(3), &ModelOptions::default()).unwrap();
        let (nb, ng) = (9, 3);
        assert_eq!(m.count("balance_p") + m.count("balance_q"), 2 * nb);
        assert_eq!(m.count("voltage"), nb);
        assert_eq!(m.count("gen_active"), ng * (1 + 7));
        assert_eq!(m.count("gen_reactive"), ng);
        // four PFR terminals, each at a bus that also has a plain node
        assert_eq!(m.n_nodes(), 9 + 4);
        assert_eq!(m.count("pfr_magnitude"), 2 * 4);
        // bus 4 carries two PFR terminals and its own node: three pairs;
        // buses 5 and 9 one pair each
        assert_eq!(m.count("pfr_coupling"), 5);
        assert_eq!(m.count("pfr_angle"), 2 * 5);
        assert_eq!(m.count("stability"), 2);
        assert_eq!(m.n_cuts, 2);
        assert_eq!(m.program.psd_dims, vec![2 * 13]);
        assert_eq!(m.tags.len(), m.program.n_box());

        let fixed = case.with_pfr_limits(PfrLimits::fixed);
        let mf = build_model(&fixed, &set, &[], &equal_participation(3), &ModelOptions::default()).unwrap();
        assert_eq!(mf.count("pfr_magnitude"), 4);
        assert_eq!(mf.count("pfr_angle"), 5);
        assert!(!mf.has_free_pfr());
        assert!(m.has_free_pfr());
    }

    #[test]
    fn per_terminal_mode_adds_bus_squares() {
        let case = parse_case(cases::DESK9).unwrap().without_pfr();
        let iv = PredictionInterval::from_case(&case, Horizon::DayAhead);
        let set = ScenarioSet::single(case.wind_forecast(), iv);
        let opts = ModelOptions {
            terminal_mode: TerminalMode::PerTerminal,
            ..Default::default()
        };
        let m = build_model(&case, &set, &[], &equal_participation(3), &opts).unwrap();
        assert_eq!(m.n_nodes(), 2 * case.lines.len());
        assert!(m.bus_square.iter().all(|s| matches!(s, BusSquare::Var(_))));
        // every terminal is pinned to unity
        assert_eq!(m.count("pfr_magnitude"), 2 * case.lines.len());
        assert!(!m.has_free_pfr());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let case = parse_case(cases::DESK9).unwrap();
        let iv = PredictionInterval::from_case(&case, Horizon::DayAhead);
        let set = ScenarioSet::single(case.wind_forecast(), iv.clone());
        let rho = equal_participation(3);
        let opts = ModelOptions::default();
        assert!(matches!(
            build_model(&case, &set, &[cut(3, false)], &rho, &opts),
            Err(Error::UnknownScenario(3))
        ));
        let mut short = cut(0, false);
        short.phi.pop();
        assert!(matches!(build_model(&case, &set, &[short], &rho, &opts), Err(Error::Dimension(_))));
        assert!(matches!(build_model(&case, &set, &[], &rho[..2], &opts), Err(Error::Dimension(_))));
        let mut empty = set.clone();
        empty.scenarios.clear();
        empty.parent_indices.clear();
        assert!(matches!(build_model(&case, &empty, &[], &rho, &opts), Err(Error::EmptySupport)));
        let mut pins = BTreeMap::new();
        pins.insert(0, Complex64::new(1.0, 0.0));
        // terminal 0 sits on line 1, which has no PFR
        assert!(matches!(build_model_pinned(&case, &set, &[], &rho, &opts, &pins), Err(Error::Domain(_))));
    }

    #[test]
    fn dump_lists_every_row() {
        let case = parse_case(cases::DESK9).unwrap().without_pfr();
        let iv = PredictionInterval::from_case(&case, Horizon::DayAhead);
        let set = ScenarioSet::single(case.wind_forecast(), iv);
        let m = build_model(&case, &set, &[cut(0, false)], &equal_participation(3), &ModelOptions::default()).unwrap();
        let dump = write_model_dump(&m);
        assert!(dump.starts_with("rtsc-sdp-dump v1\n"));
        assert_eq!(dump.lines().filter(|l| l.starts_with("row ")).count(), m.program.n_box());
        assert!(dump.contains("stability:cut=0"));
        assert_eq!(dump, write_model_dump(&m));
    }
}
