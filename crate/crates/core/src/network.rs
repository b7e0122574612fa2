//! Two-level multi-commodity network simulation.
//!
//! The aggregate level advances vehicle counts per zone with the discrete
//! lane-inhomogeneous LWR conservation form. The disaggregated level moves
//! macroparticles (groups of vehicles sharing a destination) through boundary
//! connectors in FIFO order, using exactly the aggregate fluxes.
//!
//! Vehicle counts are fixed-point integers ([`Vehicles`]) so both levels agree
//! exactly and conservation holds without rounding drift.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagrams::FundamentalDiagram;
use crate::num::Real;
use crate::resonant::{self, ResonantState};

/// Name of the generator used for merge tie-breaks.
pub const RNG_NAME: &str = "ChaCha8";

/// Fixed-point vehicle count in units of 1e-9 vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Vehicles(pub i64);

impl Vehicles {
    pub const ZERO: Vehicles = Vehicles(0);
    pub const SCALE: i64 = 1_000_000_000;

    /// Rounds down to the nearest representable count.
    pub fn from_f64(x: f64) -> Self {
        Vehicles((x * Self::SCALE as f64).floor() as i64)
    }

    pub fn from_real<T: Real>(x: T) -> Self {
        Self::from_f64(x.to_f64().unwrap_or(0.0))
    }

    pub fn whole(n: i64) -> Self {
        Vehicles(n * Self::SCALE)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub fn to_real<T: Real>(self) -> T {
        T::from_f64(self.to_f64()).unwrap()
    }
}

impl Add for Vehicles {
    type Output = Vehicles;
    fn add(self, o: Vehicles) -> Vehicles {
        Vehicles(self.0 + o.0)
    }
}

impl Sub for Vehicles {
    type Output = Vehicles;
    fn sub(self, o: Vehicles) -> Vehicles {
        Vehicles(self.0 - o.0)
    }
}

impl AddAssign for Vehicles {
    fn add_assign(&mut self, o: Vehicles) {
        self.0 += o.0;
    }
}

impl SubAssign for Vehicles {
    fn sub_assign(&mut self, o: Vehicles) {
        self.0 -= o.0;
    }
}

impl std::iter::Sum for Vehicles {
    fn sum<I: Iterator<Item = Vehicles>>(iter: I) -> Vehicles {
        Vehicles(iter.map(|v| v.0).sum())
    }
}

impl fmt::Display for Vehicles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Macroparticle {
    pub dest: usize,
    pub count: Vehicles,
    /// Attach order; non-decreasing from head to tail within a zone.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OriginMode<T> {
    /// Refilled to jam density after every step.
    Jammed,
    /// Constant arrival rate in vehicles per unit time.
    Rate(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginSpec<T> {
    /// Repeating platoons `(destination, vehicles)`.
    pub platoons: Vec<(usize, T)>,
    pub mode: OriginMode<T>,
}

/// Receiving capacity of a destination zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinkPolicy {
    Infinite,
    /// Behaves as if holding as many vehicles as `zone`.
    MirrorZone { zone: usize },
    /// Behaves as if holding the vehicles in `zone` bound for `dest`.
    MirrorDestination { zone: usize, dest: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ZoneRole<T> {
    Interior,
    Origin(OriginSpec<T>),
    Destination { dest: usize, sink: SinkPolicy },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSpec<T> {
    pub lanes: T,
    pub length: T,
    /// Per-lane diagram.
    pub fd: FundamentalDiagram<T>,
    pub role: ZoneRole<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectorSpec<T> {
    pub upstream: Vec<usize>,
    pub downstream: Vec<usize>,
    /// Merge supply split; defaults to proportional to upstream lane counts.
    pub fractions: Option<Vec<T>>,
    /// Cap on total flow in vehicles per unit time.
    pub metering: Option<T>,
}

impl<T> ConnectorSpec<T> {
    pub fn new(upstream: Vec<usize>, downstream: Vec<usize>) -> Self {
        Self {
            upstream,
            downstream,
            fractions: None,
            metering: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec<T> {
    pub zones: Vec<ZoneSpec<T>>,
    pub connectors: Vec<ConnectorSpec<T>>,
    pub dt: T,
    pub seed: u64,
    /// Let diverge traffic bound for an open branch pass a blocked head particle.
    pub diverge_skip_blocked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectorKind {
    Linear,
    Merge,
    Diverge,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("merge fractions at connector {connector} sum to {sum}")]
    FractionSum { connector: usize, sum: f64 },
    #[error("zone {zone}: {reason}")]
    InvalidZone { zone: usize, reason: String },
    #[error("network CFL number {cfl} exceeds 1")]
    Cfl { cfl: f64 },
    #[error("negative vehicle count in zone {zone}")]
    NegativeCount { zone: usize },
    #[error("no route to destination {dest} from connector {connector}")]
    Unroutable { connector: usize, dest: usize },
}

#[derive(Debug, Clone)]
struct Zone<T> {
    spec: ZoneSpec<T>,
    queue: VecDeque<Macroparticle>,
    count: Vehicles,
    by_dest: Vec<Vehicles>,
    upstream: Option<usize>,
    downstream: Option<usize>,
    /// Destinations reachable from this zone.
    reach: Vec<bool>,
    /// Platoon cursor for origins: (index, vehicles left in that platoon).
    cursor: (usize, Vehicles),
}

#[derive(Debug, Clone)]
struct Connector<T> {
    spec: ConnectorSpec<T>,
    kind: ConnectorKind,
    fractions: Vec<T>,
}

/// Vehicles to take from one upstream queue: `(queue index, amount, downstream zone)`.
type Plan = Vec<(usize, Vehicles, usize)>;

/// Aggregate output of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRecord {
    pub step: usize,
    pub t: f64,
    pub zone_counts: Vec<Vehicles>,
    pub dest_counts: Vec<Vec<Vehicles>>,
    /// Total vehicles through each connector during the step.
    pub connector_flux: Vec<Vehicles>,
    pub source_input: Vehicles,
    pub sink_output: Vehicles,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    zones: Vec<Zone<T>>,
    connectors: Vec<Connector<T>>,
    dt: T,
    skip_blocked: bool,
    rng: ChaCha8Rng,
    seed: u64,
    next_seq: u64,
    steps: usize,
    n_dest: usize,
    source_input: Vehicles,
    sink_output: Vehicles,
    sink_by_dest: Vec<Vehicles>,
    /// Cumulative vehicles per connector, downstream zone and destination.
    moved: Vec<Vec<(usize, usize, Vehicles)>>,
}

/// `max |λ|·dt/Δx` over all zones.
pub fn network_cfl<T: Real>(spec: &NetworkSpec<T>) -> T {
    spec.zones
        .iter()
        .map(|z| {
            let speed = z.fd.lambda(T::zero()).abs().max(z.fd.lambda(z.fd.rho_max()).abs());
            speed * spec.dt / z.length
        })
        .fold(T::zero(), T::max)
}

impl<T: Real> Network<T> {
    pub fn new(spec: NetworkSpec<T>) -> Result<Self, NetworkError> {
        let n = spec.zones.len();
        let cfl = network_cfl(&spec);
        if cfl > T::one() {
            return Err(NetworkError::Cfl {
                cfl: cfl.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut n_dest = 0;
        for (i, z) in spec.zones.iter().enumerate() {
            if !(z.lanes > T::zero() && z.length > T::zero()) {
                return Err(NetworkError::InvalidZone {
                    zone: i,
                    reason: "lanes and length must be positive".into(),
                });
            }
            match &z.role {
                ZoneRole::Destination { dest, sink } => {
                    n_dest = n_dest.max(dest + 1);
                    let mirrored = match sink {
                        SinkPolicy::Infinite => None,
                        SinkPolicy::MirrorZone { zone } => Some(*zone),
                        SinkPolicy::MirrorDestination { zone, .. } => Some(*zone),
                    };
                    if mirrored.is_some_and(|m| m >= n) {
                        return Err(NetworkError::InvalidZone {
                            zone: i,
                            reason: "sink mirrors a missing zone".into(),
                        });
                    }
                }
                ZoneRole::Origin(o) => {
                    if o.platoons.is_empty() || o.platoons.iter().any(|p| !(p.1 > T::zero())) {
                        return Err(NetworkError::InvalidZone {
                            zone: i,
                            reason: "origin needs positive platoons".into(),
                        });
                    }
                    for p in &o.platoons {
                        n_dest = n_dest.max(p.0 + 1);
                    }
                }
                ZoneRole::Interior => {}
            }
        }

        let mut zones: Vec<Zone<T>> = spec
            .zones
            .into_iter()
            .map(|spec| Zone {
                spec,
                queue: VecDeque::new(),
                count: Vehicles::ZERO,
                by_dest: vec![Vehicles::ZERO; n_dest],
                upstream: None,
                downstream: None,
                reach: vec![false; n_dest],
                cursor: (0, Vehicles::ZERO),
            })
            .collect();

        let mut connectors = Vec::with_capacity(spec.connectors.len());
        for (c, cs) in spec.connectors.into_iter().enumerate() {
            let topo = |m: &str| NetworkError::Topology(format!("connector {c}: {m}"));
            if cs.upstream.is_empty() || cs.downstream.is_empty() {
                return Err(topo("needs upstream and downstream zones"));
            }
            if cs.upstream.len() > 1 && cs.downstream.len() > 1 {
                return Err(topo("cannot both merge and diverge"));
            }
            for &u in &cs.upstream {
                let z = zones.get_mut(u).ok_or_else(|| topo("unknown upstream zone"))?;
                if z.downstream.replace(c).is_some() {
                    return Err(topo("zone already has a downstream connector"));
                }
                if matches!(z.spec.role, ZoneRole::Destination { .. }) {
                    return Err(topo("destination zones cannot send"));
                }
            }
            for &d in &cs.downstream {
                let z = zones.get_mut(d).ok_or_else(|| topo("unknown downstream zone"))?;
                if z.upstream.replace(c).is_some() {
                    return Err(topo("zone already has an upstream connector"));
                }
                if matches!(z.spec.role, ZoneRole::Origin(_)) {
                    return Err(topo("origin zones cannot receive"));
                }
            }
            let kind = if cs.upstream.len() > 1 {
                ConnectorKind::Merge
            } else if cs.downstream.len() > 1 {
                ConnectorKind::Diverge
            } else {
                ConnectorKind::Linear
            };
            let fractions = match &cs.fractions {
                Some(f) => {
                    if f.len() != cs.upstream.len() {
                        return Err(topo("one fraction per upstream zone required"));
                    }
                    let sum: T = f.iter().copied().sum();
                    if (sum - T::one()).abs() > T::lit(1e-9) {
                        return Err(NetworkError::FractionSum {
                            connector: c,
                            sum: sum.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    f.clone()
                }
                None => {
                    let total: T = cs.upstream.iter().map(|&u| zones[u].spec.lanes).sum();
                    cs.upstream.iter().map(|&u| zones[u].spec.lanes / total).collect()
                }
            };
            connectors.push(Connector {
                spec: cs,
                kind,
                fractions,
            });
        }

        // Reachability by repeated relaxation; networks are small and acyclic in practice.
        for z in zones.iter_mut() {
            if let ZoneRole::Destination { dest, .. } = z.spec.role {
                z.reach[dest] = true;
            }
        }
        loop {
            let mut changed = false;
            for c in &connectors {
                let mut down = vec![false; n_dest];
                for &d in &c.spec.downstream {
                    for (k, r) in zones[d].reach.iter().enumerate() {
                        down[k] |= *r;
                    }
                }
                for &u in &c.spec.upstream {
                    for k in 0..n_dest {
                        if down[k] && !zones[u].reach[k] {
                            zones[u].reach[k] = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let n_conn = connectors.len();
        let mut net = Network {
            zones,
            connectors,
            dt: spec.dt,
            skip_blocked: spec.diverge_skip_blocked,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            seed: spec.seed,
            next_seq: 0,
            steps: 0,
            n_dest,
            source_input: Vehicles::ZERO,
            sink_output: Vehicles::ZERO,
            sink_by_dest: vec![Vehicles::ZERO; n_dest],
            moved: vec![Vec::new(); n_conn],
        };
        for i in 0..net.zones.len() {
            net.replenish(i);
        }
        Ok(net)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn time(&self) -> T {
        self.dt * T::from_usize(self.steps).unwrap()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn n_connectors(&self) -> usize {
        self.connectors.len()
    }

    pub fn n_destinations(&self) -> usize {
        self.n_dest
    }

    pub fn connector_kind(&self, c: usize) -> ConnectorKind {
        self.connectors[c].kind
    }

    pub fn zone_count(&self, z: usize) -> Vehicles {
        self.zones[z].count
    }

    pub fn zone_dest_counts(&self, z: usize) -> &[Vehicles] {
        &self.zones[z].by_dest
    }

    pub fn zone_particles(&self, z: usize) -> impl Iterator<Item = &Macroparticle> {
        self.zones[z].queue.iter()
    }

    /// Vehicles per lane per unit length.
    pub fn zone_density_per_lane(&self, z: usize) -> T {
        let zone = &self.zones[z];
        zone.count.to_real::<T>() / zone.spec.length / zone.spec.lanes
    }

    /// Equilibrium speed at the zone's density.
    pub fn zone_speed(&self, z: usize) -> T {
        let zone = &self.zones[z];
        zone.spec.fd.v(self.zone_density_per_lane(z).min(zone.spec.fd.rho_max()))
    }

    pub fn is_overcritical(&self, z: usize) -> bool {
        self.zone_density_per_lane(z) > self.zones[z].spec.fd.critical_density()
    }

    pub fn source_input(&self) -> Vehicles {
        self.source_input
    }

    pub fn sink_output(&self) -> Vehicles {
        self.sink_output
    }

    pub fn sink_output_for(&self, dest: usize) -> Vehicles {
        self.sink_by_dest[dest]
    }

    /// Cumulative vehicles bound for `dest` that crossed connector `c` into `downstream`.
    pub fn moved_through(&self, c: usize, downstream: usize, dest: usize) -> Vehicles {
        self.moved[c]
            .iter()
            .filter(|m| m.0 == downstream && m.1 == dest)
            .map(|m| m.2)
            .sum()
    }

    /// `Σ N + sink output − source input`; zero for an exactly conservative run.
    pub fn conservation_residual(&self) -> Vehicles {
        let held: Vehicles = self.zones.iter().map(|z| z.count).sum();
        held + self.sink_output - self.source_input
    }

    /// Jam count `ρ_j·a·Δx` of a zone.
    pub fn zone_capacity_count(&self, z: usize) -> Vehicles {
        let s = &self.zones[z].spec;
        Vehicles::from_real(s.fd.rho_max() * s.lanes * s.length)
    }

    fn state(&self, z: usize) -> ResonantState<T> {
        let s = &self.zones[z].spec;
        let rho = self.zones[z].count.to_real::<T>() / s.length;
        ResonantState::new(s.lanes, rho.min(s.fd.rho_max() * s.lanes))
    }

    /// Sending flow rate of a zone.
    pub fn zone_demand(&self, z: usize) -> T {
        let zone = &self.zones[z];
        match zone.spec.role {
            ZoneRole::Origin(_) => {
                let queued = zone.count.to_real::<T>() / self.dt;
                queued.min(resonant::capacity(zone.spec.lanes, &zone.spec.fd))
            }
            _ => resonant::demand(self.state(z), &zone.spec.fd),
        }
    }

    /// Receiving flow rate of a zone.
    pub fn zone_supply(&self, z: usize) -> T {
        let zone = &self.zones[z];
        let s = &zone.spec;
        let mirror = |count: Vehicles| {
            let rho = (count.to_real::<T>() / s.length).min(s.fd.rho_max() * s.lanes);
            resonant::supply(ResonantState::new(s.lanes, rho), &s.fd)
        };
        match zone.spec.role {
            ZoneRole::Destination { sink, .. } => match sink {
                SinkPolicy::Infinite => T::infinity(),
                SinkPolicy::MirrorZone { zone } => mirror(self.zones[zone].count),
                SinkPolicy::MirrorDestination { zone, dest } => {
                    mirror(self.zones[zone].by_dest.get(dest).copied().unwrap_or_default())
                }
            },
            _ => resonant::supply(self.state(z), &zone.spec.fd),
        }
    }

    fn route(&self, c: usize, dest: usize) -> Result<usize, NetworkError> {
        self.connectors[c]
            .spec
            .downstream
            .iter()
            .copied()
            .find(|&d| self.zones[d].reach.get(dest).copied().unwrap_or(false))
            .ok_or(NetworkError::Unroutable { connector: c, dest })
    }

    fn to_count(&self, rate: T) -> Vehicles {
        if rate.is_infinite() {
            return Vehicles(i64::MAX / 4);
        }
        Vehicles::from_real(rate * self.dt)
    }

    /// Head-first plan taking `total` vehicles from zone `u` through connector `c`.
    fn prefix_plan(&self, c: usize, u: usize, total: Vehicles) -> Result<Plan, NetworkError> {
        let mut plan = Vec::new();
        let mut left = total.min(self.zones[u].count);
        for (i, p) in self.zones[u].queue.iter().enumerate() {
            if left <= Vehicles::ZERO {
                break;
            }
            let take = p.count.min(left);
            plan.push((i, take, self.route(c, p.dest)?));
            left -= take;
        }
        Ok(plan)
    }

    fn diverge_plan(&self, c: usize) -> Result<Plan, NetworkError> {
        let conn = &self.connectors[c];
        let u = conn.spec.upstream[0];
        let branches = &conn.spec.downstream;
        let demand = self.to_count(self.zone_demand(u)).min(self.zones[u].count);
        // Destination composition of the vehicles that could leave this step.
        let mut reachable = vec![Vehicles::ZERO; branches.len()];
        let mut left = demand;
        for p in &self.zones[u].queue {
            if left <= Vehicles::ZERO {
                break;
            }
            let take = p.count.min(left);
            let d = self.route(c, p.dest)?;
            let b = branches.iter().position(|&x| x == d).unwrap();
            reachable[b] += take;
            left -= take;
        }
        let mut budget: Vec<Vehicles> = branches
            .iter()
            .enumerate()
            .map(|(b, &d)| reachable[b].min(self.to_count(self.zone_supply(d))))
            .collect();
        if let Some(rate) = conn.spec.metering {
            let mut cap = self.to_count(rate);
            for b in budget.iter_mut() {
                *b = (*b).min(cap);
                cap -= *b;
            }
        }
        let mut blocked = vec![false; branches.len()];
        let mut plan = Vec::new();
        for (i, p) in self.zones[u].queue.iter().enumerate() {
            if budget.iter().all(|b| *b <= Vehicles::ZERO) {
                break;
            }
            let d = self.route(c, p.dest)?;
            let b = branches.iter().position(|&x| x == d).unwrap();
            if blocked[b] {
                continue;
            }
            let take = p.count.min(budget[b]);
            if take > Vehicles::ZERO {
                plan.push((i, take, d));
                budget[b] -= take;
            }
            if take < p.count {
                if !self.skip_blocked {
                    break;
                }
                blocked[b] = true;
            }
        }
        Ok(plan)
    }

    /// Per-upstream plans for connector `c` from the frozen state.
    fn connector_plans(&self, c: usize) -> Result<Vec<(usize, Plan)>, NetworkError> {
        let conn = &self.connectors[c];
        match conn.kind {
            ConnectorKind::Diverge => Ok(vec![(conn.spec.upstream[0], self.diverge_plan(c)?)]),
            ConnectorKind::Linear | ConnectorKind::Merge => {
                let d = conn.spec.downstream[0];
                let supply = self.zone_supply(d);
                let mut cap = conn.spec.metering.map(|r| self.to_count(r));
                conn.spec
                    .upstream
                    .iter()
                    .zip(&conn.fractions)
                    .map(|(&u, &frac)| {
                        let share = if conn.kind == ConnectorKind::Merge {
                            supply * frac
                        } else {
                            supply
                        };
                        let mut f = self.to_count(self.zone_demand(u)).min(self.to_count(share));
                        if let Some(cap) = cap.as_mut() {
                            f = f.min(*cap);
                            *cap -= f;
                        }
                        Ok((u, self.prefix_plan(c, u, f)?))
                    })
                    .collect()
            }
        }
    }

    /// Connector fluxes for the current state, `(upstream, downstream, vehicles)` per pair.
    pub fn connector_flux(&self, c: usize) -> Result<Vec<(usize, usize, Vehicles)>, NetworkError> {
        let mut out: Vec<(usize, usize, Vehicles)> = Vec::new();
        for (u, plan) in self.connector_plans(c)? {
            for (_, amount, d) in plan {
                match out.iter_mut().find(|e| e.0 == u && e.1 == d) {
                    Some(e) => e.2 += amount,
                    None => out.push((u, d, amount)),
                }
            }
        }
        Ok(out)
    }

    fn attach(&mut self, z: usize, dest: usize, count: Vehicles) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let zone = &mut self.zones[z];
        zone.by_dest[dest] += count;
        match zone.queue.back_mut() {
            // Adjacent vehicles with the same destination stay one particle.
            Some(tail) if tail.dest == dest => tail.count += count,
            _ => zone.queue.push_back(Macroparticle { dest, count, seq }),
        }
    }

    /// Tops up an origin according to its mode.
    fn replenish(&mut self, z: usize) {
        let ZoneRole::Origin(origin) = self.zones[z].spec.role.clone() else {
            return;
        };
        let mut need = match origin.mode {
            OriginMode::Jammed => self.zone_capacity_count(z) - self.zones[z].count,
            OriginMode::Rate(r) => self.to_count(r),
        };
        while need > Vehicles::ZERO {
            let (idx, left) = self.zones[z].cursor;
            let (dest, size) = origin.platoons[idx];
            let left = if left <= Vehicles::ZERO {
                Vehicles::from_real(size)
            } else {
                left
            };
            let take = left.min(need);
            self.attach(z, dest, take);
            self.zones[z].count += take;
            self.source_input += take;
            need -= take;
            self.zones[z].cursor = if take == left {
                ((idx + 1) % origin.platoons.len(), Vehicles::ZERO)
            } else {
                (idx, left - take)
            };
        }
    }

    /// Advances one time step: fluxes from the frozen state, counts, then particles.
    pub fn step(&mut self) -> Result<NetworkRecord, NetworkError> {
        let plans: Vec<Vec<(usize, Plan)>> = (0..self.connectors.len())
            .map(|c| self.connector_plans(c))
            .collect::<Result<_, _>>()?;

        let mut delta = vec![Vehicles::ZERO; self.zones.len()];
        let mut flux = vec![Vehicles::ZERO; self.connectors.len()];
        for (c, per_up) in plans.iter().enumerate() {
            for (u, plan) in per_up {
                for &(_, amount, d) in plan {
                    delta[*u] -= amount;
                    delta[d] += amount;
                    flux[c] += amount;
                }
            }
        }
        for (z, d) in delta.iter().enumerate() {
            if matches!(self.zones[z].spec.role, ZoneRole::Destination { .. }) {
                continue;
            }
            let next = self.zones[z].count + *d;
            if next < Vehicles::ZERO {
                return Err(NetworkError::NegativeCount { zone: z });
            }
            self.zones[z].count = next;
        }

        // Detach everything first so no particle moves twice in a step.
        let mut in_transit: Vec<Vec<Vec<(Macroparticle, usize)>>> = Vec::with_capacity(plans.len());
        for per_up in &plans {
            let mut lists = Vec::with_capacity(per_up.len());
            for (u, plan) in per_up {
                let zone = &mut self.zones[*u];
                let mut list = Vec::with_capacity(plan.len());
                for &(i, amount, d) in plan {
                    let p = &mut zone.queue[i];
                    p.count -= amount;
                    zone.by_dest[p.dest] -= amount;
                    list.push((
                        Macroparticle {
                            dest: p.dest,
                            count: amount,
                            seq: p.seq,
                        },
                        d,
                    ));
                }
                zone.queue.retain(|p| p.count > Vehicles::ZERO);
                lists.push(list);
            }
            in_transit.push(lists);
        }

        for (c, lists) in in_transit.into_iter().enumerate() {
            let mut lists: Vec<VecDeque<(Macroparticle, usize)>> =
                lists.into_iter().map(VecDeque::from).collect();
            loop {
                let open: Vec<usize> = (0..lists.len()).filter(|&k| !lists[k].is_empty()).collect();
                let k = match open.len() {
                    0 => break,
                    1 => open[0],
                    n => open[self.rng.gen_range(0..n)],
                };
                let (p, d) = lists[k].pop_front().unwrap();
                match self.moved[c].iter_mut().find(|m| m.0 == d && m.1 == p.dest) {
                    Some(m) => m.2 += p.count,
                    None => self.moved[c].push((d, p.dest, p.count)),
                }
                if matches!(self.zones[d].spec.role, ZoneRole::Destination { .. }) {
                    self.sink_output += p.count;
                    self.sink_by_dest[p.dest] += p.count;
                } else {
                    self.attach(d, p.dest, p.count);
                }
            }
        }

        for z in 0..self.zones.len() {
            self.replenish(z);
        }
        self.steps += 1;
        Ok(self.record(flux))
    }

    fn record(&self, connector_flux: Vec<Vehicles>) -> NetworkRecord {
        NetworkRecord {
            step: self.steps,
            t: self.time().to_f64().unwrap_or(f64::NAN),
            zone_counts: self.zones.iter().map(|z| z.count).collect(),
            dest_counts: self.zones.iter().map(|z| z.by_dest.clone()).collect(),
            connector_flux,
            source_input: self.source_input,
            sink_output: self.sink_output,
        }
    }

    /// Record of the current state with zero connector fluxes.
    pub fn snapshot(&self) -> NetworkRecord {
        self.record(vec![Vehicles::ZERO; self.connectors.len()])
    }

    pub fn run(&mut self, steps: usize) -> Result<Vec<NetworkRecord>, NetworkError> {
        (0..steps).map(|_| self.step()).collect()
    }
}

/// Freeway corridor with an on-ramp merge and an off-ramp diverge.
///
/// Zones 1–20 form the mainline between origin zone 0 and destination zone 21
/// (destination 1). Zone 22 is a one-lane on-ramp origin merging at connector 2
/// into four-lane zone 2; zone 18 has four lanes and diverges at connector 19
/// into zone 19 and the one-lane off-ramp destination zone 23 (destination 2).
/// Connector index `k - 1` feeds zone `k` (see [`corridor_connector`]). Units are miles and hours.
pub fn example_corridor(seed: u64) -> NetworkSpec<f64> {
    let fd = FundamentalDiagram::newell(60.0, -10.0, 250.0).expect("valid diagram");
    let lanes = |z: usize| match z {
        2 | 18 => 4.0,
        22 | 23 => 1.0,
        _ => 3.0,
    };
    let zones = (0..24)
        .map(|z| ZoneSpec {
            lanes: lanes(z),
            length: 0.6,
            fd,
            role: match z {
                0 => ZoneRole::Origin(OriginSpec {
                    platoons: vec![(1, 25.0), (2, 10.0)],
                    mode: OriginMode::Jammed,
                }),
                22 => ZoneRole::Origin(OriginSpec {
                    platoons: vec![(1, 5.0), (2, 2.0)],
                    mode: OriginMode::Jammed,
                }),
                21 => ZoneRole::Destination {
                    dest: 1,
                    sink: SinkPolicy::MirrorZone { zone: 20 },
                },
                23 => ZoneRole::Destination {
                    dest: 2,
                    sink: SinkPolicy::MirrorDestination { zone: 18, dest: 2 },
                },
                _ => ZoneRole::Interior,
            },
        })
        .collect();
    let mut connectors = Vec::new();
    for k in 1..=21 {
        let c = match k {
            2 => ConnectorSpec::new(vec![1, 22], vec![2]),
            19 => ConnectorSpec::new(vec![18], vec![19, 23]),
            _ => ConnectorSpec::new(vec![k - 1], vec![k]),
        };
        connectors.push(c);
    }
    NetworkSpec {
        zones,
        connectors,
        dt: 30.0 / 3600.0,
        seed,
        diverge_skip_blocked: false,
    }
}

/// Index of the connector feeding zone `k` in [`example_corridor`].
pub fn corridor_connector(k: usize) -> usize {
    k - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, origin: OriginMode<f64>) -> NetworkSpec<f64> {
        let fd = FundamentalDiagram::newell(60.0, -10.0, 250.0).unwrap();
        let zones = (0..n)
            .map(|z| ZoneSpec {
                lanes: 1.0,
                length: 0.6,
                fd,
                role: if z == 0 {
                    ZoneRole::Origin(OriginSpec {
                        platoons: vec![(0, 10.0)],
                        mode: origin.clone(),
                    })
                } else if z == n - 1 {
                    ZoneRole::Destination {
                        dest: 0,
                        sink: SinkPolicy::Infinite,
                    }
                } else {
                    ZoneRole::Interior
                },
            })
            .collect();
        NetworkSpec {
            zones,
            connectors: (1..n).map(|k| ConnectorSpec::new(vec![k - 1], vec![k])).collect(),
            dt: 30.0 / 3600.0,
            seed: 1,
            diverge_skip_blocked: false,
        }
    }

    #[test]
    fn vehicles_arithmetic() {
        assert_eq!(Vehicles::whole(3) + Vehicles::whole(2), Vehicles::whole(5));
        assert_eq!(Vehicles::from_f64(1.5).to_f64(), 1.5);
    }

    #[test]
    fn zero_demand_is_static() {
        let mut net = Network::new(line(5, OriginMode::Rate(0.0))).unwrap();
        net.run(10).unwrap();
        assert!((0..5).all(|z| net.zone_count(z) == Vehicles::ZERO));
    }

    #[test]
    fn line_conserves() {
        let mut net = Network::new(line(8, OriginMode::Jammed)).unwrap();
        for _ in 0..100 {
            net.step().unwrap();
            assert_eq!(net.conservation_residual(), Vehicles::ZERO);
        }
        assert!(net.sink_output() > Vehicles::ZERO);
    }

    #[test]
    fn bad_fractions_rejected() {
        let mut spec = example_corridor(0);
        spec.connectors[1].fractions = Some(vec![0.5, 0.6]);
        assert!(matches!(Network::new(spec), Err(NetworkError::FractionSum { .. })));
    }

    #[test]
    fn corridor_cfl() {
        let cfl = network_cfl(&example_corridor(0));
        assert!((cfl - 60.0 * (30.0 / 3600.0) / 0.6).abs() < 1e-12);
    }
}
