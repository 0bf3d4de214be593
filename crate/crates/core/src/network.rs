//! Radial feeder data model.
//!
//! A [`Network`] is validated on construction: one slack bus, unique ids,
//! a spanning tree rooted at the slack with every line oriented parent to
//! child. A [`Study`] bundles a network with its load and insolation
//! profiles and the list of solar-ready buses, and caches the per-unit
//! demand at every timestep.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

/// Power factor applied to profiles that do not declare one.
pub const DEFAULT_POWER_FACTOR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum BusKind {
    Slack,
    Load,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub load_profile: Option<String>,
    pub nominal_kv: f64,
}

/// Series branch between a parent bus (nearer the substation) and a child.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Line {
    pub id: u32,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub resistance_ohm: f64,
    pub reactance_ohm: f64,
}

/// Depth-ordered traversal of a radial network from the slack bus.
///
/// Indices are positions in [`Network::buses`] and [`Network::lines`].
/// Siblings are visited in ascending bus id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialOrder {
    /// Bus indices, slack first, every bus after its parent.
    pub buses: Vec<usize>,
    /// Parent bus index of each bus (`None` for the slack).
    pub parent: Vec<Option<usize>>,
    /// Index of the line feeding each bus (`None` for the slack).
    pub parent_line: Vec<Option<usize>>,
    /// Line indices in traversal order; each line appears once.
    pub lines: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    base_mva: f64,
    base_kv: f64,
    index: BTreeMap<BusId, usize>,
    slack: usize,
    order: RadialOrder,
    z_pu: Vec<Complex64>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.buses == other.buses
            && self.lines == other.lines
            && self.base_mva == other.base_mva
            && self.base_kv == other.base_kv
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {value}")))
    }
}

impl Network {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>, base_mva: f64, base_kv: f64) -> Result<Self> {
        positive("base_mva", base_mva)?;
        positive("base_kv", base_kv)?;

        let mut index = BTreeMap::new();
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::DuplicateBus(bus.id));
            }
            positive(&format!("bus {} nominal_kv", bus.id), bus.nominal_kv)?;
        }
        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack)
            .map(|(i, _)| i)
            .collect();
        if slacks.len() != 1 {
            return Err(Error::SlackCount(slacks.len()));
        }
        let slack = slacks[0];

        let mut line_ids = BTreeSet::new();
        for line in &lines {
            if !line_ids.insert(line.id) {
                return Err(Error::DuplicateLine(line.id));
            }
            for end in [line.from_bus, line.to_bus] {
                if !index.contains_key(&end) {
                    return Err(Error::DanglingReference {
                        what: "line endpoint bus",
                        reference: end.to_string(),
                    });
                }
            }
            let (r, x) = (line.resistance_ohm, line.reactance_ohm);
            if !(r.is_finite() && x.is_finite() && r >= 0.0 && x >= 0.0) {
                return Err(Error::invalid(
                    format!("line {} impedance", line.id),
                    format!("r and x must be finite and nonnegative, got ({r}, {x})"),
                ));
            }
            if r == 0.0 && x == 0.0 {
                return Err(Error::ZeroImpedance(line.id));
            }
        }
        if lines.len() + 1 != buses.len() {
            return Err(Error::NonRadial(format!(
                "{} buses need {} lines, found {}",
                buses.len(),
                buses.len().saturating_sub(1),
                lines.len()
            )));
        }

        let order = traverse(&buses, &lines, &index, slack)?;

        let z_base = base_kv * base_kv / base_mva;
        let z_pu = lines
            .iter()
            .map(|l| Complex64::new(l.resistance_ohm / z_base, l.reactance_ohm / z_base))
            .collect();

        Ok(Network { buses, lines, base_mva, base_kv, index, slack, order, z_pu })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn base_kv(&self) -> f64 {
        self.base_kv
    }

    /// Base impedance in ohms.
    pub fn base_impedance(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    /// kW per unit of per-unit power.
    pub fn kw_per_pu(&self) -> f64 {
        self.base_mva * 1000.0
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn slack_index(&self) -> usize {
        self.slack
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Series impedance of every line, per-unit.
    pub fn line_impedance_pu(&self) -> &[Complex64] {
        &self.z_pu
    }

    pub fn radial_order(&self) -> &RadialOrder {
        &self.order
    }
}

/// Breadth-first traversal from the slack, siblings by ascending id.
fn traverse(
    buses: &[Bus],
    lines: &[Line],
    index: &BTreeMap<BusId, usize>,
    slack: usize,
) -> Result<RadialOrder> {
    let n = buses.len();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (li, line) in lines.iter().enumerate() {
        let a = index[&line.from_bus];
        let b = index[&line.to_bus];
        adjacency[a].push((b, li));
        adjacency[b].push((a, li));
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|&(bus, line)| (buses[bus].id, line));
    }

    let mut parent = vec![None; n];
    let mut parent_line = vec![None; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([slack]);
    visited[slack] = true;
    while let Some(bus) = queue.pop_front() {
        order.push(bus);
        for &(next, li) in &adjacency[bus] {
            if visited[next] {
                continue;
            }
            visited[next] = true;
            parent[next] = Some(bus);
            parent_line[next] = Some(li);
            queue.push_back(next);
        }
    }
    if order.len() != n {
        let missing = buses
            .iter()
            .zip(&visited)
            .find(|(_, v)| !**v)
            .map(|(b, _)| b.id)
            .expect("unvisited bus exists");
        return Err(Error::NonRadial(format!("bus {missing} is not connected to the slack bus")));
    }
    for (bus, pl) in parent_line.iter().enumerate() {
        if let Some(li) = *pl {
            let line = &lines[li];
            if index[&line.to_bus] != bus {
                return Err(Error::LineOrientation {
                    line: line.id,
                    from: line.from_bus,
                    to: line.to_bus,
                });
            }
        }
    }
    let line_order = order.iter().filter_map(|&b| parent_line[b]).collect();
    Ok(RadialOrder { buses: order, parent, parent_line, lines: line_order })
}

/// Dense complex admittance matrix, per-unit, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct YBus {
    n: usize,
    data: Vec<Complex64>,
}

impl YBus {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    /// Current injections `Y v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(y, v)| y * v).sum())
            .collect()
    }
}

/// Series-branch admittance matrix; shunts are not modelled.
///
/// Zero-impedance lines are rejected by [`Network::new`], so every branch
/// admittance is finite.
pub fn build_ybus(network: &Network) -> YBus {
    let n = network.bus_count();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for (line, z) in network.lines.iter().zip(&network.z_pu) {
        let y = Complex64::new(1.0, 0.0) / z;
        let i = network.index[&line.from_bus];
        let j = network.index[&line.to_bus];
        data[i * n + j] -= y;
        data[j * n + i] -= y;
        data[i * n + i] += y;
        data[j * n + j] += y;
    }
    YBus { n, data }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoadProfile {
    pub id: String,
    pub p_kw: Vec<f64>,
    pub power_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InsolationProfile {
    pub i_kw_per_m2: Vec<f64>,
}

/// A bus eligible for PV with its installation ceiling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolarReadyBus {
    pub bus: BusId,
    pub p_max_kw: f64,
}

/// Fully cross-referenced study inputs.
#[derive(Debug, Clone)]
pub struct Study {
    network: Network,
    profiles: Vec<LoadProfile>,
    insolation: InsolationProfile,
    candidates: Vec<SolarReadyBus>,
    bus_profile: Vec<Option<usize>>,
    candidate_bus: Vec<usize>,
    demand_pu: Vec<Vec<Complex64>>,
    total_load_kw: Vec<f64>,
    peak_load_kw: f64,
}

impl PartialEq for Study {
    fn eq(&self, other: &Self) -> bool {
        self.network == other.network
            && self.profiles == other.profiles
            && self.insolation == other.insolation
            && self.candidates == other.candidates
    }
}

impl Study {
    pub fn new(
        network: Network,
        profiles: Vec<LoadProfile>,
        insolation: InsolationProfile,
        candidates: Vec<SolarReadyBus>,
    ) -> Result<Self> {
        let horizon = insolation.i_kw_per_m2.len();
        if horizon == 0 {
            return Err(Error::invalid("insolation", "profile is empty"));
        }
        for (t, &i) in insolation.i_kw_per_m2.iter().enumerate() {
            if !(i.is_finite() && i >= 0.0) {
                return Err(Error::invalid(format!("insolation[{t}]"), format!("must be >= 0, got {i}")));
            }
        }

        let mut profile_index = BTreeMap::new();
        for (k, p) in profiles.iter().enumerate() {
            if profile_index.insert(p.id.as_str(), k).is_some() {
                return Err(Error::invalid(format!("profile {}", p.id), "duplicate profile id"));
            }
            if !(p.power_factor > 0.0 && p.power_factor <= 1.0) {
                return Err(Error::invalid(
                    format!("profile {} power_factor", p.id),
                    format!("must lie in (0, 1], got {}", p.power_factor),
                ));
            }
            if p.p_kw.len() != horizon {
                return Err(Error::DimensionMismatch {
                    what: "load profile length",
                    expected: horizon,
                    actual: p.p_kw.len(),
                });
            }
            for (t, &v) in p.p_kw.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("profile {} p_kw[{t}]", p.id), format!("must be >= 0, got {v}")));
                }
            }
        }

        let mut bus_profile = Vec::with_capacity(network.bus_count());
        for bus in network.buses() {
            let k = match &bus.load_profile {
                None => None,
                Some(id) => {
                    if bus.kind == BusKind::Slack {
                        return Err(Error::invalid(format!("bus {}", bus.id), "slack bus cannot carry load"));
                    }
                    let k = profile_index.get(id.as_str()).copied().ok_or_else(|| {
                        Error::DanglingReference { what: "load profile", reference: id.clone() }
                    })?;
                    Some(k)
                }
            };
            bus_profile.push(k);
        }

        let mut seen = BTreeSet::new();
        let mut candidate_bus = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let idx = network.bus_index(c.bus).ok_or_else(|| Error::DanglingReference {
                what: "solar-ready bus",
                reference: c.bus.to_string(),
            })?;
            if network.buses()[idx].kind != BusKind::Load {
                return Err(Error::invalid(format!("solar-ready bus {}", c.bus), "must be a load bus"));
            }
            if !seen.insert(c.bus) {
                return Err(Error::invalid(format!("solar-ready bus {}", c.bus), "listed twice"));
            }
            positive(&format!("solar-ready bus {} p_max_kw", c.bus), c.p_max_kw)?;
            candidate_bus.push(idx);
        }

        let kw_per_pu = network.kw_per_pu();
        let q_ratio: Vec<f64> = profiles.iter().map(|p| math::q_over_p(p.power_factor)).collect();
        let mut demand_pu = Vec::with_capacity(horizon);
        let mut total_load_kw = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mut total = 0.0;
            let row = bus_profile
                .iter()
                .map(|k| match *k {
                    None => Complex64::new(0.0, 0.0),
                    Some(k) => {
                        let p = profiles[k].p_kw[t];
                        total += p;
                        Complex64::new(p, p * q_ratio[k]) / kw_per_pu
                    }
                })
                .collect();
            demand_pu.push(row);
            total_load_kw.push(total);
        }
        let peak_load_kw = total_load_kw.iter().copied().fold(0.0, f64::max);

        Ok(Study {
            network,
            profiles,
            insolation,
            candidates,
            bus_profile,
            candidate_bus,
            demand_pu,
            total_load_kw,
            peak_load_kw,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn profiles(&self) -> &[LoadProfile] {
        &self.profiles
    }

    pub fn insolation(&self) -> &InsolationProfile {
        &self.insolation
    }

    pub fn candidates(&self) -> &[SolarReadyBus] {
        &self.candidates
    }

    /// Number of timesteps.
    pub fn horizon(&self) -> usize {
        self.insolation.i_kw_per_m2.len()
    }

    /// Bus index of solar-ready candidate `i`.
    pub fn candidate_bus_index(&self, i: usize) -> usize {
        self.candidate_bus[i]
    }

    /// Profile index referenced by each bus.
    pub fn bus_profile(&self) -> &[Option<usize>] {
        &self.bus_profile
    }

    /// Complex demand (P + jQ) of every bus at timestep `t`, per-unit.
    pub fn demand_pu(&self, t: usize) -> &[Complex64] {
        &self.demand_pu[t]
    }

    /// System real load per timestep, kW.
    pub fn total_load_kw(&self) -> &[f64] {
        &self.total_load_kw
    }

    /// Substation peak load, kW.
    pub fn peak_load_kw(&self) -> f64 {
        self.peak_load_kw
    }

    /// Sum of all candidate ceilings, kW.
    pub fn total_capacity_kw(&self) -> f64 {
        self.candidates.iter().map(|c| c.p_max_kw).sum()
    }
}
