//! Grid case model: parsing, validation, and admittance construction.
//!
//! The case file is UTF-8 text with `%` comments and whitespace-separated
//! numeric rows, organized in sections:
//!
//! ```text
//! baseMVA <mva>
//! bus
//! % id  kind(3=slack,2=pv,1=pq)  Pd_MW  Qd_MVAr  Vset  Vmin  Vmax  angmin_rad  angmax_rad
//! branch
//! % id  from  to  r_pu  x_pu  b_shunt_pu  limit_MVA(0=unlimited)  status(1=in service)
//! gen
//! % bus  Pg_MW  Qg_MVAr  Pmin  Pmax  Qmin  Qmax
//! flexcost            (optional)
//! % bus  a1  a2  b2  c2  r_down_MW  r_up_MW  shed_cap_MW
//! ```
//!
//! All stored quantities keep the units above; solvers convert to per-unit
//! internally on `base_mva`.

use crate::numerics::DenseMatrix;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("duplicate branch id {0}")]
    DuplicateBranch(u32),
    #[error("branch {branch} references unknown bus {bus}")]
    UnknownEndpoint { branch: u32, bus: u32 },
    #[error("flexcost row references unknown bus {0}")]
    UnknownCostBus(u32),
    #[error("generator references unknown bus {0}")]
    UnknownGenBus(u32),
    #[error("case has no slack bus")]
    MissingSlack,
    #[error("case has {0} slack buses, expected exactly one")]
    MultipleSlack(usize),
    #[error("branch {0} has zero reactance")]
    ZeroReactance(u32),
    #[error("bus {0}: {1}")]
    InvalidBus(u32, String),
    #[error("branch {0}: {1}")]
    InvalidBranch(u32, String),
    #[error("flexibility cost at bus {0}: {1}")]
    InvalidCost(u32, String),
    #[error("unknown bus id {0}")]
    UnknownBus(u32),
    #[error("unknown branch id {0}")]
    UnknownBranchId(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub p_demand: f64,
    pub q_demand: f64,
    pub v_setpoint: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub angle_min: f64,
    pub angle_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    pub b_shunt: f64,
    /// Thermal limit in MVA; `None` means unlimited.
    pub flow_limit: Option<f64>,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub p_out: f64,
    pub q_out: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// Piecewise-quadratic flexibility cost: a cheap reserve segment
/// `a1·p²` on `[r_down, r_up]` followed by a shedding segment
/// `a2·p² + b2·p + c2` on `[r_up, r_up + shed_cap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexibilityCost {
    pub bus: u32,
    pub a1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub reserve_down: f64,
    pub reserve_up: f64,
    pub sheddable_cap: f64,
    /// Stored for completeness; the DC solver has no reactive decisions.
    pub q_reserve_down: f64,
    pub q_reserve_up: f64,
}

impl FlexibilityCost {
    /// Marginal cost of the piecewise curve at total flexibility `p` (MW).
    pub fn marginal(&self, p: f64) -> f64 {
        if p > self.reserve_up {
            2.0 * self.a2 * p + self.b2
        } else {
            2.0 * self.a1 * p
        }
    }

    /// Total cost of the piecewise curve at `p` (MW).
    pub fn total(&self, p: f64) -> f64 {
        if p > self.reserve_up {
            self.a2 * p * p + self.b2 * p + self.c2
        } else {
            self.a1 * p * p
        }
    }

    fn validate(&self, p_demand: f64) -> Result<(), CaseError> {
        let err = |msg: String| CaseError::InvalidCost(self.bus, msg);
        if !(self.a1 > 0.0) {
            return Err(err(format!("a1 must be positive, got {}", self.a1)));
        }
        if !(self.a2 > 0.0) {
            return Err(err(format!("a2 must be positive, got {}", self.a2)));
        }
        if self.reserve_down > 0.0 {
            return Err(err(format!("reserve_down must be <= 0, got {}", self.reserve_down)));
        }
        if self.reserve_up < 0.0 {
            return Err(err(format!("reserve_up must be >= 0, got {}", self.reserve_up)));
        }
        if self.sheddable_cap < 0.0 {
            return Err(err(format!("shed_cap must be >= 0, got {}", self.sheddable_cap)));
        }
        if self.sheddable_cap > p_demand + 1e-9 {
            return Err(err(format!(
                "shed_cap {} exceeds bus demand {}",
                self.sheddable_cap, p_demand
            )));
        }
        let r = self.reserve_up;
        let lhs = self.a1 * r * r;
        let rhs = self.a2 * r * r + self.b2 * r + self.c2;
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        if (lhs - rhs).abs() > 1e-9 * scale {
            return Err(err(format!(
                "cost segments discontinuous at reserve_up: {lhs} vs {rhs}"
            )));
        }
        if 2.0 * self.a1 * r > 2.0 * self.a2 * r + self.b2 + 1e-12 {
            return Err(err(
                "shedding marginal cost below reserve marginal cost at the segment break".into(),
            ));
        }
        Ok(())
    }
}

/// Defaults used to synthesize a `FlexibilityCost` for buses the case file
/// leaves uncosted. The shedding segment is pinned to the reserve segment by
/// `a2 = shed_cost_ratio·a1`, `b2 = 0`, and `c2` solved from continuity.
#[derive(Debug, Clone)]
pub struct CostDefaults {
    pub a1: f64,
    pub shed_cost_ratio: f64,
    /// Reserve band as a fraction of bus demand (load buses).
    pub load_reserve_fraction: f64,
    /// Reserve band as a fraction of generator headroom (generator buses).
    pub gen_reserve_fraction: f64,
    /// Sheddable cap as a fraction of bus demand.
    pub shed_cap_fraction: f64,
}

impl Default for CostDefaults {
    fn default() -> Self {
        CostDefaults {
            a1: 0.02,
            shed_cost_ratio: 4.0,
            load_reserve_fraction: 0.05,
            gen_reserve_fraction: 0.15,
            shed_cap_fraction: 0.9,
        }
    }
}

impl CostDefaults {
    fn build(&self, bus: &Bus, gen_headroom_up: f64, gen_headroom_down: f64) -> FlexibilityCost {
        let mut r_up = self.load_reserve_fraction * bus.p_demand.max(0.0);
        let mut r_down = -r_up;
        if gen_headroom_up > 0.0 || gen_headroom_down < 0.0 {
            r_up += self.gen_reserve_fraction * gen_headroom_up;
            r_down += self.gen_reserve_fraction * gen_headroom_down;
        }
        let a1 = self.a1;
        let a2 = self.shed_cost_ratio * a1;
        let c2 = (a1 - a2) * r_up * r_up;
        FlexibilityCost {
            bus: bus.id,
            a1,
            a2,
            b2: 0.0,
            c2,
            reserve_down: r_down,
            reserve_up: r_up,
            sheddable_cap: self.shed_cap_fraction * bus.p_demand.max(0.0),
            q_reserve_down: 0.0,
            q_reserve_up: 0.0,
        }
    }
}

/// Immutable parsed network; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub costs: Vec<FlexibilityCost>,
    /// Per-bus incident branch ids, ascending, indexed like `buses`.
    pub adjacency: Vec<Vec<u32>>,
    bus_index: HashMap<u32, usize>,
    branch_index: HashMap<u32, usize>,
}

impl NetworkCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn bus_index(&self, id: u32) -> Result<usize, CaseError> {
        self.bus_index.get(&id).copied().ok_or(CaseError::UnknownBus(id))
    }

    pub fn branch_index(&self, id: u32) -> Result<usize, CaseError> {
        self.branch_index
            .get(&id)
            .copied()
            .ok_or(CaseError::UnknownBranchId(id))
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    /// Indices of buses with nonzero active demand.
    pub fn load_bus_indices(&self) -> Vec<usize> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.p_demand > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cost_for_bus(&self, bus_id: u32) -> Option<&FlexibilityCost> {
        self.costs.iter().find(|c| c.bus == bus_id)
    }

    /// Total nominal generation at a bus, MW.
    pub fn gen_at_bus(&self, bus_id: u32) -> f64 {
        self.generators
            .iter()
            .filter(|g| g.bus == bus_id)
            .map(|g| g.p_out)
            .sum()
    }

    pub fn q_gen_at_bus(&self, bus_id: u32) -> f64 {
        self.generators
            .iter()
            .filter(|g| g.bus == bus_id)
            .map(|g| g.q_out)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Bus,
    Branch,
    Gen,
    FlexCost,
}

/// Parse a case file with the default cost synthesis for uncosted buses.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    parse_case_with(text, &CostDefaults::default())
}

pub fn parse_case_with(text: &str, defaults: &CostDefaults) -> Result<NetworkCase, CaseError> {
    let mut base_mva: Option<f64> = None;
    let mut buses: Vec<Bus> = Vec::new();
    let mut branches: Vec<Branch> = Vec::new();
    let mut generators: Vec<Generator> = Vec::new();
    let mut costs: Vec<FlexibilityCost> = Vec::new();
    let mut section = Section::None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('%').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "baseMVA" => {
                let v = parse_f64(fields.get(1).copied(), line, "baseMVA value")?;
                if !(v > 0.0) {
                    return Err(CaseError::Syntax {
                        line,
                        msg: format!("baseMVA must be positive, got {v}"),
                    });
                }
                base_mva = Some(v);
                continue;
            }
            "bus" if fields.len() == 1 => {
                section = Section::Bus;
                continue;
            }
            "branch" if fields.len() == 1 => {
                section = Section::Branch;
                continue;
            }
            "gen" if fields.len() == 1 => {
                section = Section::Gen;
                continue;
            }
            "flexcost" if fields.len() == 1 => {
                section = Section::FlexCost;
                continue;
            }
            _ => {}
        }
        let nums = parse_row(&fields, line)?;
        match section {
            Section::None => {
                return Err(CaseError::Syntax {
                    line,
                    msg: "data row before any section header".into(),
                })
            }
            Section::Bus => {
                expect_cols(&nums, 9, line, "bus")?;
                let kind = match nums[1] as i64 {
                    3 => BusKind::Slack,
                    2 => BusKind::Pv,
                    1 => BusKind::Pq,
                    other => {
                        return Err(CaseError::Syntax {
                            line,
                            msg: format!("unknown bus kind {other} (expected 1, 2, or 3)"),
                        })
                    }
                };
                buses.push(Bus {
                    id: parse_id(nums[0], line, "bus id")?,
                    kind,
                    p_demand: nums[2],
                    q_demand: nums[3],
                    v_setpoint: nums[4],
                    v_min: nums[5],
                    v_max: nums[6],
                    angle_min: nums[7],
                    angle_max: nums[8],
                });
            }
            Section::Branch => {
                expect_cols(&nums, 8, line, "branch")?;
                let limit = if nums[6] == 0.0 { None } else { Some(nums[6]) };
                branches.push(Branch {
                    id: parse_id(nums[0], line, "branch id")?,
                    from_bus: parse_id(nums[1], line, "from bus")?,
                    to_bus: parse_id(nums[2], line, "to bus")?,
                    r: nums[3],
                    x: nums[4],
                    b_shunt: nums[5],
                    flow_limit: limit,
                    in_service: nums[7] != 0.0,
                });
            }
            Section::Gen => {
                expect_cols(&nums, 7, line, "gen")?;
                generators.push(Generator {
                    bus: parse_id(nums[0], line, "gen bus")?,
                    p_out: nums[1],
                    q_out: nums[2],
                    p_min: nums[3],
                    p_max: nums[4],
                    q_min: nums[5],
                    q_max: nums[6],
                });
            }
            Section::FlexCost => {
                expect_cols(&nums, 8, line, "flexcost")?;
                costs.push(FlexibilityCost {
                    bus: parse_id(nums[0], line, "flexcost bus")?,
                    a1: nums[1],
                    a2: nums[2],
                    b2: nums[3],
                    c2: nums[4],
                    reserve_down: nums[5],
                    reserve_up: nums[6],
                    sheddable_cap: nums[7],
                    q_reserve_down: 0.0,
                    q_reserve_up: 0.0,
                });
            }
        }
    }

    let base_mva = base_mva.ok_or(CaseError::Syntax {
        line: 0,
        msg: "missing baseMVA section".into(),
    })?;
    build_case(base_mva, buses, branches, generators, costs, defaults)
}

fn parse_row(fields: &[&str], line: usize) -> Result<Vec<f64>, CaseError> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| CaseError::Syntax {
                line,
                msg: format!("expected a number, got '{f}'"),
            })
        })
        .collect()
}

fn parse_f64(field: Option<&str>, line: usize, what: &str) -> Result<f64, CaseError> {
    field
        .ok_or_else(|| CaseError::Syntax {
            line,
            msg: format!("missing {what}"),
        })?
        .parse::<f64>()
        .map_err(|_| CaseError::Syntax {
            line,
            msg: format!("invalid {what}"),
        })
}

fn parse_id(v: f64, line: usize, what: &str) -> Result<u32, CaseError> {
    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(CaseError::Syntax {
            line,
            msg: format!("{what} must be a positive integer, got {v}"),
        });
    }
    Ok(v as u32)
}

fn expect_cols(nums: &[f64], want: usize, line: usize, section: &str) -> Result<(), CaseError> {
    if nums.len() != want {
        return Err(CaseError::Syntax {
            line,
            msg: format!("{section} row has {} columns, expected {want}", nums.len()),
        });
    }
    Ok(())
}

fn build_case(
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    mut costs: Vec<FlexibilityCost>,
    defaults: &CostDefaults,
) -> Result<NetworkCase, CaseError> {
    let mut bus_index = HashMap::new();
    for (i, b) in buses.iter().enumerate() {
        if bus_index.insert(b.id, i).is_some() {
            return Err(CaseError::DuplicateBus(b.id));
        }
        if b.v_min > b.v_max {
            return Err(CaseError::InvalidBus(b.id, "v_min exceeds v_max".into()));
        }
        if !b.p_demand.is_finite() || !b.q_demand.is_finite() {
            return Err(CaseError::InvalidBus(b.id, "non-finite demand".into()));
        }
    }
    let slack_count = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
    match slack_count {
        0 => return Err(CaseError::MissingSlack),
        1 => {}
        n => return Err(CaseError::MultipleSlack(n)),
    }

    let mut branch_index = HashMap::new();
    for (i, br) in branches.iter().enumerate() {
        if branch_index.insert(br.id, i).is_some() {
            return Err(CaseError::DuplicateBranch(br.id));
        }
        if br.from_bus == br.to_bus {
            return Err(CaseError::InvalidBranch(br.id, "self-loop".into()));
        }
        if br.x == 0.0 {
            return Err(CaseError::ZeroReactance(br.id));
        }
        for end in [br.from_bus, br.to_bus] {
            if !bus_index.contains_key(&end) {
                return Err(CaseError::UnknownEndpoint {
                    branch: br.id,
                    bus: end,
                });
            }
        }
        if let Some(limit) = br.flow_limit {
            if !(limit > 0.0) {
                return Err(CaseError::InvalidBranch(
                    br.id,
                    format!("flow limit must be positive, got {limit}"),
                ));
            }
        }
    }

    for g in &generators {
        if !bus_index.contains_key(&g.bus) {
            return Err(CaseError::UnknownGenBus(g.bus));
        }
        if g.p_min > g.p_out || g.p_out > g.p_max {
            return Err(CaseError::InvalidBus(
                g.bus,
                format!("generator output {} outside [{}, {}]", g.p_out, g.p_min, g.p_max),
            ));
        }
    }

    // fill in default costs for any bus with demand or generation that the
    // file leaves uncosted; pure transit buses get no cost entry at all
    for bus in &buses {
        if costs.iter().any(|c| c.bus == bus.id) {
            continue;
        }
        let up: f64 = generators
            .iter()
            .filter(|g| g.bus == bus.id)
            .map(|g| (g.p_max - g.p_out).max(0.0))
            .sum();
        let down: f64 = generators
            .iter()
            .filter(|g| g.bus == bus.id)
            .map(|g| (g.p_min - g.p_out).min(0.0))
            .sum();
        if bus.p_demand > 0.0 || up > 0.0 || down < 0.0 {
            costs.push(defaults.build(bus, up, down));
        }
    }
    for c in &costs {
        let idx = *bus_index
            .get(&c.bus)
            .ok_or(CaseError::UnknownCostBus(c.bus))?;
        c.validate(buses[idx].p_demand.max(0.0))?;
    }
    costs.sort_by_key(|c| bus_index[&c.bus]);

    let mut adjacency = vec![Vec::new(); buses.len()];
    for br in &branches {
        adjacency[bus_index[&br.from_bus]].push(br.id);
        adjacency[bus_index[&br.to_bus]].push(br.id);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    Ok(NetworkCase {
        base_mva,
        buses,
        branches,
        generators,
        costs,
        adjacency,
        bus_index,
        branch_index,
    })
}

/// Serialize a case back to the file format. `parse_case(serialize_case(c))`
/// reproduces `c` exactly (floats are written in shortest round-trip form).
pub fn serialize_case(case: &NetworkCase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "baseMVA {}", case.base_mva);
    let _ = writeln!(out, "bus");
    let _ = writeln!(out, "% id kind Pd Qd Vset Vmin Vmax angmin angmax");
    for b in &case.buses {
        let kind = match b.kind {
            BusKind::Slack => 3,
            BusKind::Pv => 2,
            BusKind::Pq => 1,
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            b.id, kind, b.p_demand, b.q_demand, b.v_setpoint, b.v_min, b.v_max, b.angle_min,
            b.angle_max
        );
    }
    let _ = writeln!(out, "branch");
    let _ = writeln!(out, "% id from to r x b limit status");
    for br in &case.branches {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            br.id,
            br.from_bus,
            br.to_bus,
            br.r,
            br.x,
            br.b_shunt,
            br.flow_limit.unwrap_or(0.0),
            if br.in_service { 1 } else { 0 }
        );
    }
    let _ = writeln!(out, "gen");
    let _ = writeln!(out, "% bus Pg Qg Pmin Pmax Qmin Qmax");
    for g in &case.generators {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            g.bus, g.p_out, g.q_out, g.p_min, g.p_max, g.q_min, g.q_max
        );
    }
    let _ = writeln!(out, "flexcost");
    let _ = writeln!(out, "% bus a1 a2 b2 c2 r_down r_up shed_cap");
    for c in &case.costs {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            c.bus, c.a1, c.a2, c.b2, c.c2, c.reserve_down, c.reserve_up, c.sheddable_cap
        );
    }
    out
}

/// Real and imaginary parts of the bus admittance matrix.
pub struct Admittance {
    pub g: DenseMatrix,
    pub b: DenseMatrix,
}

/// Bus admittance matrix from standard branch stamping (series r+jx plus
/// total line charging `b_shunt` split across both ends).
pub fn build_admittance(case: &NetworkCase) -> Admittance {
    build_admittance_outaged(case, &[])
}

/// Admittance with the given branch ids additionally removed.
pub fn build_admittance_outaged(case: &NetworkCase, outages: &[u32]) -> Admittance {
    let n = case.n_buses();
    let mut g = DenseMatrix::zeros(n, n);
    let mut b = DenseMatrix::zeros(n, n);
    for br in &case.branches {
        if !br.in_service || outages.contains(&br.id) {
            continue;
        }
        let f = case.bus_index(br.from_bus).unwrap();
        let t = case.bus_index(br.to_bus).unwrap();
        let denom = br.r * br.r + br.x * br.x;
        let gs = br.r / denom;
        let bs = -br.x / denom;
        g.add_to(f, f, gs);
        g.add_to(t, t, gs);
        g.add_to(f, t, -gs);
        g.add_to(t, f, -gs);
        b.add_to(f, f, bs + br.b_shunt / 2.0);
        b.add_to(t, t, bs + br.b_shunt / 2.0);
        b.add_to(f, t, -bs);
        b.add_to(t, f, -bs);
    }
    Admittance { g, b }
}

/// DC susceptance matrix `B` (1/x Laplacian stamping) and the flow matrix
/// `K` with `f = K·θ`, rows in branch-list order. Outaged and out-of-service
/// branches contribute nothing; their `K` rows are zero.
pub fn build_bbus(case: &NetworkCase, outages: &[u32]) -> (DenseMatrix, DenseMatrix) {
    let n = case.n_buses();
    let l = case.n_branches();
    let mut b = DenseMatrix::zeros(n, n);
    let mut k = DenseMatrix::zeros(l, n);
    for (row, br) in case.branches.iter().enumerate() {
        if !br.in_service || outages.contains(&br.id) {
            continue;
        }
        let f = case.bus_index(br.from_bus).unwrap();
        let t = case.bus_index(br.to_bus).unwrap();
        let y = 1.0 / br.x;
        b.add_to(f, f, y);
        b.add_to(t, t, y);
        b.add_to(f, t, -y);
        b.add_to(t, f, -y);
        k.set(row, f, y);
        k.set(row, t, -y);
    }
    (b, k)
}
