//! Fleet sizing and a discrete-event simulation of the hub swap protocol.
//!
//! Event times are integer milliseconds. Simultaneous events run in
//! (time, actor, sequence) order where the hub is actor 0 and rover `i` is
//! actor `i + 1`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ValidationError;
use crate::rng::SimRng;
use crate::scenario::{check, non_negative, positive, probability, FleetSpec, Scenario};

/// One event-queue tick, s.
pub const TICK: f64 = 1e-3;

const CHARGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FleetError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("work site at {distance} m is out of range: {reason}")]
    Infeasible { distance: f64, reason: String },
    #[error("{terminals} terminals cannot serve {rovers} rovers; at least {required} needed")]
    TooFewTerminals {
        terminals: usize,
        rovers: usize,
        required: usize,
    },
    #[error("hub surplus {surplus} W cannot charge a module at {needed} W")]
    NoChargingPower { surplus: f64, needed: f64 },
    #[error("invariant violated at t = {time} s: {message}")]
    Invariant { time: f64, message: String },
}

/// Rovers a hub can sustain: ⌊(P_gen − P_h) / max(Q_b·V_b/C, P_m)⌋.
pub fn fleet_size(spec: &FleetSpec) -> usize {
    let q = (spec.p_gen - spec.p_hub) / spec.charge_power().max(spec.p_rover);
    (q * (1.0 + 1e-12)).floor().max(0.0) as usize
}

/// A free terminal is needed to receive each depleted module.
pub fn required_terminals(n_rovers: usize) -> usize {
    n_rovers + 1
}

/// Charge a rover needs before heading back: the travel charge for
/// `distance` plus `reserve_margin`·Q_b, Ah.
pub fn return_threshold(
    spec: &FleetSpec,
    distance: f64,
    reserve_margin: f64,
) -> Result<f64, FleetError> {
    non_negative(distance, "distance")?;
    probability(reserve_margin, "reserve_margin")?;
    let travel = travel_charge(spec, distance);
    if travel > spec.q_b {
        return Err(FleetError::Infeasible {
            distance,
            reason: format!("needs {travel} Ah of a {} Ah module", spec.q_b),
        });
    }
    Ok(travel + reserve_margin * spec.q_b)
}

fn travel_charge(spec: &FleetSpec, distance: f64) -> f64 {
    spec.discharge_rate() * distance / spec.v_rover
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoverState {
    Field,
    Approach,
    /// Waiting for a docking port.
    Queued,
    Entry,
    Lift,
    ContinuityCheck,
    IndexEmpty,
    ShiftOut,
    IndexFull,
    ShiftIn,
    Lower,
    Exit,
    /// Driving back out to the work site.
    Depart,
    Stranded,
}

impl RoverState {
    pub fn name(self) -> &'static str {
        match self {
            Self::Field => "FIELD",
            Self::Approach => "APPROACH",
            Self::Queued => "QUEUED",
            Self::Entry => "ENTRY",
            Self::Lift => "LIFT",
            Self::ContinuityCheck => "CONTINUITY_CHECK",
            Self::IndexEmpty => "INDEX_EMPTY",
            Self::ShiftOut => "SHIFT_OUT",
            Self::IndexFull => "INDEX_FULL",
            Self::ShiftIn => "SHIFT_IN",
            Self::Lower => "LOWER",
            Self::Exit => "EXIT",
            Self::Depart => "DEPART",
            Self::Stranded => "STRANDED",
        }
    }

    fn drains(self) -> bool {
        matches!(self, Self::Field | Self::Approach | Self::Depart)
    }

    fn is_shift(self) -> bool {
        matches!(self, Self::ShiftOut | Self::ShiftIn)
    }
}

impl fmt::Display for RoverState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Location {
    Rover(usize),
    HubTerminal(usize),
    InTransfer { rover: usize, terminal: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rover(r) => write!(f, "ROVER({r})"),
            Self::HubTerminal(t) => write!(f, "HUB_TERMINAL({t})"),
            Self::InTransfer { rover, terminal } => write!(f, "IN_TRANSFER({rover}<->{terminal})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryState {
    /// Ah.
    pub charge: f64,
    pub location: Location,
    pub charging: bool,
}

/// Per-step failure probabilities and retry policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureModel {
    pub p_entry_fail: f64,
    /// Failed continuity check sends the rover back to ENTRY.
    pub p_continuity_fail: f64,
    /// Module jam per shift attempt; the motors reverse and retry.
    pub p_jam: f64,
    /// Retries after the first jammed attempt before the rover is stranded.
    pub jam_retry_cap: u32,
    /// ENTRY attempts per swap, including retries after continuity failures.
    pub max_entry_attempts: u32,
    /// Auxiliary power loss during LIFT, once per swap.
    pub p_aux_power_fail: f64,
    /// s.
    pub aux_reboot_delay: f64,
    /// Ground slope at the hub, degrees.
    pub hub_gradient: f64,
    /// Steepest slope docking tolerates, degrees.
    pub max_gradient: f64,
    /// Port 0 goes out of service at this time, s.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub port_failure_time: Option<f64>,
}

impl Default for FailureModel {
    fn default() -> Self {
        Self {
            p_entry_fail: 0.0,
            p_continuity_fail: 0.0,
            p_jam: 0.0,
            jam_retry_cap: 3,
            max_entry_attempts: 3,
            p_aux_power_fail: 0.0,
            aux_reboot_delay: 60.0,
            hub_gradient: 0.0,
            max_gradient: 10.0,
            port_failure_time: None,
        }
    }
}

impl FailureModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        probability(self.p_entry_fail, "p_entry_fail")?;
        probability(self.p_continuity_fail, "p_continuity_fail")?;
        probability(self.p_jam, "p_jam")?;
        probability(self.p_aux_power_fail, "p_aux_power_fail")?;
        non_negative(self.aux_reboot_delay, "aux_reboot_delay")?;
        check(
            self.max_entry_attempts >= 1,
            "max_entry_attempts",
            "at least 1",
        )?;
        non_negative(self.hub_gradient.abs(), "hub_gradient")?;
        non_negative(self.max_gradient, "max_gradient")?;
        if let Some(t) = self.port_failure_time {
            non_negative(t, "port_failure_time")?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let m: FailureModel = toml::from_str(text).map_err(|e| e.to_string())?;
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_rovers: usize,
    /// s.
    pub duration: f64,
    /// `None` means `required_terminals(n_rovers)`.
    pub terminals: Option<usize>,
    pub ports: usize,
}

impl SimConfig {
    pub fn new(n_rovers: usize, duration: f64) -> Self {
        Self {
            n_rovers,
            duration,
            terminals: None,
            ports: 1,
        }
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals
            .unwrap_or_else(|| required_terminals(self.n_rovers))
    }

    pub fn validate(&self) -> Result<(), FleetError> {
        check(self.n_rovers >= 1, "n_rovers", "at least one rover")?;
        positive(self.duration, "duration")?;
        check(self.ports >= 1, "ports", "at least one port")?;
        let terminals = self.terminal_count();
        let required = required_terminals(self.n_rovers);
        if terminals < required {
            return Err(FleetError::TooFewTerminals {
                terminals,
                rovers: self.n_rovers,
                required,
            });
        }
        check(
            self.ports <= terminals,
            "ports",
            "cannot exceed the terminal count",
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Transition {
        from: RoverState,
        to: RoverState,
    },
    ModuleMove {
        module: usize,
        from: Location,
        to: Location,
    },
    ModuleCharged {
        module: usize,
    },
    PortFailed {
        port: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapEvent {
    /// s.
    pub time: f64,
    pub rover: Option<usize>,
    pub kind: EventKind,
    pub detail: String,
}

impl SwapEvent {
    pub fn transition(&self) -> String {
        match &self.kind {
            EventKind::Transition { from, to } => format!("{from}->{to}"),
            EventKind::ModuleMove { module, from, to } => format!("MODULE {module}: {from}->{to}"),
            EventKind::ModuleCharged { module } => format!("MODULE {module}: CHARGED"),
            EventKind::PortFailed { port } => format!("PORT {port}: FAILED"),
        }
    }
}

pub fn event_log_csv(log: &[SwapEvent]) -> String {
    let mut s = String::from("time_s,rover,transition,detail\n");
    for e in log {
        let rover = e.rover.map(|r| r.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{:.3},{},{},\"{}\"\n",
            e.time,
            rover,
            e.transition(),
            e.detail.replace('"', "'")
        ));
    }
    s
}

/// Discrete end state of a run; exactly reproducible from the event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FleetState {
    pub rover_states: Vec<RoverState>,
    pub module_locations: Vec<Location>,
    pub swaps_completed: usize,
    pub swap_failures: usize,
    pub failed_ports: Vec<usize>,
}

impl FleetState {
    /// Rover `i` carries module `i`; terminals `0..terminals − ports` hold the
    /// next modules, leaving one free terminal per port.
    pub fn initial(config: &SimConfig) -> Self {
        let n = config.n_rovers;
        let stocked = config.terminal_count() - config.ports;
        let mut module_locations: Vec<Location> = (0..n).map(Location::Rover).collect();
        module_locations.extend((0..stocked).map(Location::HubTerminal));
        Self {
            rover_states: vec![RoverState::Field; n],
            module_locations,
            swaps_completed: 0,
            swap_failures: 0,
            failed_ports: Vec::new(),
        }
    }
}

/// Rebuild the discrete end state by applying `log` to the initial layout.
pub fn replay(config: &SimConfig, log: &[SwapEvent]) -> FleetState {
    let mut s = FleetState::initial(config);
    for e in log {
        match (&e.kind, e.rover) {
            (EventKind::Transition { from, to }, Some(r)) => {
                s.rover_states[r] = *to;
                if *from == RoverState::Exit && *to == RoverState::Depart {
                    s.swaps_completed += 1;
                }
                if *to == RoverState::Stranded {
                    s.swap_failures += 1;
                }
            }
            (EventKind::ModuleMove { module, to, .. }, _) => s.module_locations[*module] = *to,
            (EventKind::PortFailed { port }, _) => s.failed_ports.push(*port),
            _ => {}
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    /// Fleet work time over fleet time. Travel, queueing and swaps are
    /// downtime.
    pub rover_uptime_fraction: f64,
    pub per_rover_uptime: Vec<f64>,
    pub swaps_completed: usize,
    /// Swaps abandoned with the rover stranded.
    pub swap_failures: usize,
    /// Over completed swaps only, from first ENTRY to end of EXIT, s.
    pub mean_service_time: Option<f64>,
    pub service_times: Vec<f64>,
    pub entry_failures: usize,
    pub continuity_failures: usize,
    pub jams: usize,
    pub aux_power_failures: usize,
    pub stranded: Vec<usize>,
    /// W.
    pub max_charging_power: f64,
    pub max_concurrent_charging: usize,
    /// Invariant audits performed (one per processed event).
    pub audits: usize,
    pub final_state: FleetState,
    pub final_charges: Vec<f64>,
    pub event_log: Vec<SwapEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    ChargeCheck(u64),
    PortFailure(usize),
    StageDone(usize),
}

#[derive(Debug, Clone)]
struct Rover {
    state: RoverState,
    since: u64,
    module: Option<usize>,
    field_ms: u64,
    port: Option<usize>,
    transfer: Option<(usize, usize)>,
    waiting_for_module: bool,
    swap_start: u64,
    swap_elapsed: f64,
    entry_attempts: u32,
    jam_attempts: u32,
    rng: SimRng,
}

#[derive(Debug, Clone, Copy)]
struct Port {
    occupant: Option<usize>,
    failed: bool,
}

struct Sim<'a> {
    fleet: &'a FleetSpec,
    failure: &'a FailureModel,
    stage: [f64; 9],
    travel_ms: u64,
    threshold: f64,
    max_charging: usize,
    end: u64,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<(u64, usize, u64, Ev)>>,
    rovers: Vec<Rover>,
    modules: Vec<BatteryState>,
    terminals: Vec<Option<usize>>,
    ports: Vec<Port>,
    waiting: VecDeque<usize>,
    hub_clock: u64,
    charge_gen: u64,
    log: Vec<SwapEvent>,
    service_times: Vec<f64>,
    swaps_completed: usize,
    swap_failures: usize,
    entry_failures: usize,
    continuity_failures: usize,
    jams: usize,
    aux_power_failures: usize,
    max_charging_power: f64,
    max_concurrent: usize,
    audits: usize,
}

fn to_ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round() as u64
}

fn secs(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

fn stage_index(s: RoverState) -> usize {
    match s {
        RoverState::Entry => 0,
        RoverState::Lift => 1,
        RoverState::ContinuityCheck => 2,
        RoverState::IndexEmpty => 3,
        RoverState::ShiftOut => 4,
        RoverState::IndexFull => 5,
        RoverState::ShiftIn => 6,
        RoverState::Lower => 7,
        RoverState::Exit => 8,
        _ => unreachable!("{s} is not a swap stage"),
    }
}

impl Sim<'_> {
    fn push(&mut self, at: u64, actor: usize, ev: Ev) {
        self.seq += 1;
        self.queue.push(Reverse((at, actor, self.seq, ev)));
    }

    fn record(&mut self, rover: Option<usize>, kind: EventKind, detail: impl Into<String>) {
        self.log.push(SwapEvent {
            time: secs(self.now),
            rover,
            kind,
            detail: detail.into(),
        });
    }

    fn rate_out(&self) -> f64 {
        self.fleet.discharge_rate()
    }

    /// Move rover `id` to `to`, settling battery drain and field time for the
    /// state it leaves.
    fn set_state(&mut self, id: usize, to: RoverState, detail: impl Into<String>) {
        let rate = self.rate_out();
        let now = self.now;
        let r = &mut self.rovers[id];
        let from = r.state;
        if from.drains() {
            let dt = now - r.since;
            if let Some(m) = r.module {
                let c = &mut self.modules[m].charge;
                *c = (*c - rate * secs(dt)).max(0.0);
            }
            if from == RoverState::Field {
                r.field_ms += dt;
            }
        }
        r.state = to;
        r.since = now;
        self.record(Some(id), EventKind::Transition { from, to }, detail);
    }

    fn move_module(&mut self, module: usize, to: Location, rover: usize) {
        let from = self.modules[module].location;
        match from {
            Location::Rover(r) => self.rovers[r].module = None,
            Location::HubTerminal(t) => self.terminals[t] = None,
            Location::InTransfer { rover, .. } => self.rovers[rover].transfer = None,
        }
        match to {
            Location::Rover(r) => self.rovers[r].module = Some(module),
            Location::HubTerminal(t) => self.terminals[t] = Some(module),
            Location::InTransfer { rover, terminal } => {
                self.rovers[rover].transfer = Some((module, terminal))
            }
        }
        let b = &mut self.modules[module];
        b.location = to;
        b.charging = false;
        self.record(Some(rover), EventKind::ModuleMove { module, from, to }, "");
    }

    /// Run swap stage `s` for rover `id`, keeping stage ends on the exact
    /// cumulative schedule so rounding never accumulates.
    fn start_stage(&mut self, id: usize, s: RoverState, extra: f64, detail: impl Into<String>) {
        self.set_state(id, s, detail);
        let r = &mut self.rovers[id];
        r.swap_elapsed += self.stage[stage_index(s)] + extra;
        let at = r.swap_start + to_ms(r.swap_elapsed);
        self.push(at.max(self.now), id + 1, Ev::StageDone(id));
    }

    fn start_field(&mut self, id: usize) {
        self.set_state(id, RoverState::Field, "");
        let charge = self.rovers[id]
            .module
            .map_or(0.0, |m| self.modules[m].charge);
        let spare = (charge - self.threshold).max(0.0);
        let at = self.now + (spare / self.rate_out() * 1000.0).ceil() as u64;
        self.push(at, id + 1, Ev::StageDone(id));
    }

    fn advance_hub(&mut self) {
        let dt = secs(self.now - self.hub_clock);
        let rate = self.fleet.charge_rate();
        let q = self.fleet.q_b;
        for b in self.modules.iter_mut().filter(|b| b.charging) {
            b.charge = (b.charge + rate * dt).min(q);
        }
        self.hub_clock = self.now;
    }

    fn is_full(&self, m: usize) -> bool {
        self.modules[m].charge >= self.fleet.q_b * (1.0 - CHARGE_EPS)
    }

    /// Charge the fullest non-full hub modules, as many as the power surplus
    /// allows, and schedule a check at the earliest completion.
    fn allocate_charging(&mut self) {
        let mut candidates: Vec<usize> = self
            .terminals
            .iter()
            .flatten()
            .copied()
            .filter(|&m| !self.is_full(m))
            .collect();
        candidates.sort_by(|&a, &b| {
            self.modules[b]
                .charge
                .total_cmp(&self.modules[a].charge)
                .then(a.cmp(&b))
        });
        candidates.truncate(self.max_charging);
        for b in &mut self.modules {
            b.charging = false;
        }
        let rate = self.fleet.charge_rate();
        let mut next: Option<u64> = None;
        for &m in &candidates {
            self.modules[m].charging = true;
            let left = (self.fleet.q_b - self.modules[m].charge) / rate;
            let at = self.now + (left * 1000.0).ceil().max(1.0) as u64;
            next = Some(next.map_or(at, |n| n.min(at)));
        }
        self.charge_gen += 1;
        if let Some(at) = next {
            self.push(at, 0, Ev::ChargeCheck(self.charge_gen));
        }
        let power = candidates.len() as f64 * self.fleet.charge_power();
        self.max_charging_power = self.max_charging_power.max(power);
        self.max_concurrent = self.max_concurrent.max(candidates.len());
    }

    fn dispatch(&mut self) {
        for p in 0..self.ports.len() {
            if self.ports[p].failed || self.ports[p].occupant.is_some() {
                continue;
            }
            let Some(id) = self.waiting.pop_front() else {
                return;
            };
            self.ports[p].occupant = Some(id);
            let r = &mut self.rovers[id];
            r.port = Some(p);
            r.swap_start = self.now;
            r.swap_elapsed = 0.0;
            r.entry_attempts = 0;
            r.jam_attempts = 0;
            r.waiting_for_module = false;
            self.start_stage(id, RoverState::Entry, 0.0, format!("port {p}"));
        }
    }

    fn release_port(&mut self, id: usize) {
        if let Some(p) = self.rovers[id].port.take() {
            self.ports[p].occupant = None;
        }
        self.dispatch();
    }

    fn strand(&mut self, id: usize, keep_port: bool, detail: String) {
        self.swap_failures += 1;
        self.set_state(id, RoverState::Stranded, detail);
        if !keep_port {
            self.release_port(id);
        }
    }

    fn retry_entry(&mut self, id: usize, why: &str) {
        let r = &mut self.rovers[id];
        r.entry_attempts += 1;
        let attempts = r.entry_attempts;
        if attempts >= self.failure.max_entry_attempts {
            self.strand(id, false, format!("{why}; {attempts} entry attempts used"));
        } else {
            self.start_stage(
                id,
                RoverState::Entry,
                0.0,
                format!("{why}; attempt {}", attempts + 1),
            );
        }
    }

    fn jammed(&mut self, id: usize) -> bool {
        let p = self.failure.p_jam;
        if !self.rovers[id].rng.chance(p) {
            return false;
        }
        self.jams += 1;
        self.rovers[id].jam_attempts += 1;
        true
    }

    fn try_take_module(&mut self, id: usize) -> bool {
        let best = self
            .terminals
            .iter()
            .enumerate()
            .filter_map(|(t, m)| m.map(|m| (t, m)))
            .max_by(|a, b| {
                self.modules[a.1]
                    .charge
                    .total_cmp(&self.modules[b.1].charge)
                    .then(b.0.cmp(&a.0))
            });
        match best {
            Some((t, m)) if self.is_full(m) => {
                let r = &mut self.rovers[id];
                if r.waiting_for_module {
                    r.waiting_for_module = false;
                    r.swap_elapsed +=
                        secs(self.now - r.since) - self.stage[stage_index(RoverState::IndexFull)];
                }
                self.move_module(
                    m,
                    Location::InTransfer {
                        rover: id,
                        terminal: t,
                    },
                    id,
                );
                self.rovers[id].jam_attempts = 0;
                self.start_stage(
                    id,
                    RoverState::ShiftIn,
                    0.0,
                    format!("module {m} from terminal {t}"),
                );
                true
            }
            _ => false,
        }
    }

    fn stage_done(&mut self, id: usize) -> Result<(), FleetError> {
        let state = self.rovers[id].state;
        match state {
            RoverState::Field => {
                self.set_state(id, RoverState::Approach, "return threshold reached");
                self.push(self.now + self.travel_ms, id + 1, Ev::StageDone(id));
            }
            RoverState::Approach => {
                self.set_state(id, RoverState::Queued, "");
                self.waiting.push_back(id);
                self.dispatch();
            }
            RoverState::Entry => {
                let f = self.failure;
                if f.hub_gradient.abs() > f.max_gradient {
                    self.entry_failures += 1;
                    self.retry_entry(
                        id,
                        &format!(
                            "hub gradient {} deg exceeds {} deg",
                            f.hub_gradient, f.max_gradient
                        ),
                    );
                } else if self.rovers[id].rng.chance(f.p_entry_fail) {
                    self.entry_failures += 1;
                    self.retry_entry(id, "entry failed");
                } else {
                    let (extra, detail) = if self.rovers[id].rng.chance(f.p_aux_power_fail) {
                        self.aux_power_failures += 1;
                        (
                            f.aux_reboot_delay,
                            "auxiliary power lost; reboot".to_string(),
                        )
                    } else {
                        (0.0, String::new())
                    };
                    self.start_stage(id, RoverState::Lift, extra, detail);
                }
            }
            RoverState::Lift => self.start_stage(id, RoverState::ContinuityCheck, 0.0, ""),
            RoverState::ContinuityCheck => {
                if self.rovers[id].rng.chance(self.failure.p_continuity_fail) {
                    self.continuity_failures += 1;
                    self.retry_entry(id, "continuity check failed");
                } else {
                    self.start_stage(id, RoverState::IndexEmpty, 0.0, "");
                }
            }
            RoverState::IndexEmpty => {
                let reserved = |t: usize| {
                    self.rovers
                        .iter()
                        .any(|r| r.transfer.is_some_and(|(_, rt)| rt == t))
                };
                let free = (0..self.terminals.len())
                    .find(|&t| self.terminals[t].is_none() && !reserved(t));
                let Some(t) = free else {
                    return Err(self.violation("no free terminal when SHIFT_OUT begins".into()));
                };
                let Some(m) = self.rovers[id].module else {
                    return Err(self.violation(format!("rover {id} docked without a module")));
                };
                self.move_module(
                    m,
                    Location::InTransfer {
                        rover: id,
                        terminal: t,
                    },
                    id,
                );
                self.rovers[id].jam_attempts = 0;
                self.start_stage(
                    id,
                    RoverState::ShiftOut,
                    0.0,
                    format!("module {m} to terminal {t}"),
                );
            }
            RoverState::ShiftOut | RoverState::ShiftIn => {
                let (m, t) = self.rovers[id]
                    .transfer
                    .expect("shift has a module in transfer");
                if self.jammed(id) {
                    let n = self.rovers[id].jam_attempts;
                    if n > self.failure.jam_retry_cap {
                        let back = if state == RoverState::ShiftOut {
                            Location::Rover(id)
                        } else {
                            Location::HubTerminal(t)
                        };
                        self.move_module(m, back, id);
                        self.strand(
                            id,
                            true,
                            format!("module {m} jammed; {} retries used", n - 1),
                        );
                    } else {
                        self.start_stage(
                            id,
                            state,
                            0.0,
                            format!("jam; overcurrent reversal, retry {n}"),
                        );
                    }
                } else if state == RoverState::ShiftOut {
                    self.move_module(m, Location::HubTerminal(t), id);
                    self.start_stage(id, RoverState::IndexFull, 0.0, "");
                } else {
                    self.move_module(m, Location::Rover(id), id);
                    self.start_stage(id, RoverState::Lower, 0.0, "");
                }
            }
            RoverState::IndexFull => {
                if !self.try_take_module(id) {
                    self.rovers[id].waiting_for_module = true;
                }
            }
            RoverState::Lower => self.start_stage(id, RoverState::Exit, 0.0, ""),
            RoverState::Exit => {
                let service = secs(self.now - self.rovers[id].swap_start);
                self.service_times.push(service);
                self.swaps_completed += 1;
                self.set_state(id, RoverState::Depart, format!("service {service:.3} s"));
                self.push(self.now + self.travel_ms, id + 1, Ev::StageDone(id));
                self.release_port(id);
            }
            RoverState::Depart => self.start_field(id),
            RoverState::Queued | RoverState::Stranded => {}
        }
        Ok(())
    }

    fn charge_check(&mut self) {
        for m in 0..self.modules.len() {
            if self.modules[m].charging && self.is_full(m) {
                self.modules[m].charge = self.fleet.q_b;
                self.modules[m].charging = false;
                self.record(None, EventKind::ModuleCharged { module: m }, "");
            }
        }
        let waiting: Vec<usize> = (0..self.rovers.len())
            .filter(|&i| self.rovers[i].waiting_for_module)
            .collect();
        for id in waiting {
            self.try_take_module(id);
        }
    }

    fn violation(&self, message: String) -> FleetError {
        FleetError::Invariant {
            time: secs(self.now),
            message,
        }
    }

    fn audit(&mut self) -> Result<(), FleetError> {
        self.audits += 1;
        let q = self.fleet.q_b;
        for (m, b) in self.modules.iter().enumerate() {
            if !(-CHARGE_EPS..=q * (1.0 + CHARGE_EPS)).contains(&b.charge) {
                return Err(
                    self.violation(format!("module {m} charge {} outside [0, {q}]", b.charge))
                );
            }
            let consistent = match b.location {
                Location::Rover(r) => self.rovers[r].module == Some(m),
                Location::HubTerminal(t) => self.terminals[t] == Some(m),
                Location::InTransfer { rover, terminal } => {
                    self.rovers[rover].transfer == Some((m, terminal))
                        && self.rovers[rover].state.is_shift()
                }
            };
            if !consistent {
                return Err(self.violation(format!(
                    "module {m} location {} is inconsistent",
                    b.location
                )));
            }
            if b.charging && !matches!(b.location, Location::HubTerminal(_)) {
                return Err(self.violation(format!("module {m} charging away from a terminal")));
            }
        }
        for (r, rover) in self.rovers.iter().enumerate() {
            if let Some(m) = rover.module {
                if self.modules[m].location != Location::Rover(r) {
                    return Err(self.violation(format!("rover {r} claims module {m}")));
                }
            }
        }
        for (t, slot) in self.terminals.iter().enumerate() {
            if let Some(m) = *slot {
                if self.modules[m].location != Location::HubTerminal(t) {
                    return Err(self.violation(format!("terminal {t} claims module {m}")));
                }
            }
        }
        let drawn =
            self.modules.iter().filter(|b| b.charging).count() as f64 * self.fleet.charge_power();
        let budget = self.fleet.p_gen - self.fleet.p_hub;
        if drawn > budget * (1.0 + CHARGE_EPS) {
            return Err(self.violation(format!("charging draws {drawn} W of {budget} W")));
        }
        Ok(())
    }
}

/// Simulate `config.n_rovers` rovers sharing one hub for `config.duration`
/// seconds.
///
/// Rovers work at the site `des.work_distance` from the hub until their
/// charge drops to the return threshold, drive in, queue FIFO for a port, run
/// the swap stages, take the fullest fully charged module and drive back out.
pub fn run_sim(
    scenario: &Scenario,
    config: &SimConfig,
    failure: &FailureModel,
    rng: &SimRng,
) -> Result<SimMetrics, FleetError> {
    let fleet = &scenario.fleet;
    fleet.validate()?;
    config.validate()?;
    failure.validate()?;
    let distance = scenario.des.work_distance;
    let threshold = return_threshold(fleet, distance, scenario.des.reserve_margin)?;
    let travel = travel_charge(fleet, distance);
    if threshold + travel > fleet.q_b {
        return Err(FleetError::Infeasible {
            distance,
            reason: "a full module cannot cover the round trip plus reserve".into(),
        });
    }
    let surplus = fleet.p_gen - fleet.p_hub;
    let max_charging = (surplus / fleet.charge_power() * (1.0 + 1e-12)).floor() as usize;
    if max_charging == 0 {
        return Err(FleetError::NoChargingPower {
            surplus,
            needed: fleet.charge_power(),
        });
    }

    let initial = FleetState::initial(config);
    let stages = scenario.stages();
    let root = rng.derive("fleetsim");
    let mut sim = Sim {
        fleet,
        failure,
        stage: stages.as_array(),
        travel_ms: to_ms(distance / fleet.v_rover),
        threshold,
        max_charging,
        end: to_ms(config.duration),
        now: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        rovers: (0..config.n_rovers)
            .map(|i| Rover {
                state: RoverState::Field,
                since: 0,
                module: Some(i),
                field_ms: 0,
                port: None,
                transfer: None,
                waiting_for_module: false,
                swap_start: 0,
                swap_elapsed: 0.0,
                entry_attempts: 0,
                jam_attempts: 0,
                rng: root.derive_indexed("fleetsim.rover", i as u64),
            })
            .collect(),
        modules: initial
            .module_locations
            .iter()
            .map(|&location| BatteryState {
                charge: fleet.q_b,
                location,
                charging: false,
            })
            .collect(),
        terminals: vec![None; config.terminal_count()],
        ports: vec![
            Port {
                occupant: None,
                failed: false,
            };
            config.ports
        ],
        waiting: VecDeque::new(),
        hub_clock: 0,
        charge_gen: 0,
        log: Vec::new(),
        service_times: Vec::new(),
        swaps_completed: 0,
        swap_failures: 0,
        entry_failures: 0,
        continuity_failures: 0,
        jams: 0,
        aux_power_failures: 0,
        max_charging_power: 0.0,
        max_concurrent: 0,
        audits: 0,
    };
    for (m, loc) in initial.module_locations.iter().enumerate() {
        if let Location::HubTerminal(t) = loc {
            sim.terminals[*t] = Some(m);
        }
    }
    for id in 0..config.n_rovers {
        let spare = fleet.q_b - threshold;
        let at = (spare / fleet.discharge_rate() * 1000.0).ceil() as u64;
        sim.push(at, id + 1, Ev::StageDone(id));
    }
    if let Some(t) = failure.port_failure_time {
        sim.push(to_ms(t), 0, Ev::PortFailure(0));
    }
    sim.audit()?;

    while let Some(&Reverse((at, _, _, ev))) = sim.queue.peek() {
        if at > sim.end {
            break;
        }
        sim.queue.pop();
        sim.now = at;
        sim.advance_hub();
        match ev {
            Ev::StageDone(id) => sim.stage_done(id)?,
            Ev::ChargeCheck(gen) => {
                if gen != sim.charge_gen {
                    continue;
                }
                sim.charge_check();
            }
            Ev::PortFailure(p) => {
                sim.ports[p].failed = true;
                sim.record(
                    None,
                    EventKind::PortFailed { port: p },
                    "port out of service",
                );
            }
        }
        sim.allocate_charging();
        sim.audit()?;
    }

    sim.now = sim.end;
    sim.advance_hub();
    let end = sim.end;
    let rate = fleet.discharge_rate();
    for r in &mut sim.rovers {
        if r.state.drains() {
            let dt = end - r.since;
            if let Some(m) = r.module {
                let c = &mut sim.modules[m].charge;
                *c = (*c - rate * secs(dt)).max(0.0);
            }
            if r.state == RoverState::Field {
                r.field_ms += dt;
            }
            r.since = end;
        }
    }
    sim.audit()?;

    let per_rover_uptime: Vec<f64> = sim
        .rovers
        .iter()
        .map(|r| r.field_ms as f64 / end as f64)
        .collect();
    let rover_uptime_fraction =
        per_rover_uptime.iter().sum::<f64>() / per_rover_uptime.len() as f64;
    let mean_service_time = (!sim.service_times.is_empty())
        .then(|| sim.service_times.iter().sum::<f64>() / sim.service_times.len() as f64);
    let final_state = FleetState {
        rover_states: sim.rovers.iter().map(|r| r.state).collect(),
        module_locations: sim.modules.iter().map(|b| b.location).collect(),
        swaps_completed: sim.swaps_completed,
        swap_failures: sim.swap_failures,
        failed_ports: sim
            .ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.failed)
            .map(|(i, _)| i)
            .collect(),
    };
    Ok(SimMetrics {
        rover_uptime_fraction,
        per_rover_uptime,
        swaps_completed: sim.swaps_completed,
        swap_failures: sim.swap_failures,
        mean_service_time,
        service_times: sim.service_times,
        entry_failures: sim.entry_failures,
        continuity_failures: sim.continuity_failures,
        jams: sim.jams,
        aux_power_failures: sim.aux_power_failures,
        stranded: final_state
            .rover_states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == RoverState::Stranded)
            .map(|(i, _)| i)
            .collect(),
        max_charging_power: sim.max_charging_power,
        max_concurrent_charging: sim.max_concurrent,
        audits: sim.audits,
        final_state,
        final_charges: sim.modules.iter().map(|b| b.charge).collect(),
        event_log: sim.log,
    })
}

/// Seconds a rover spends working per cycle with no queueing or failures.
pub fn ideal_field_time(
    spec: &FleetSpec,
    distance: f64,
    reserve_margin: f64,
) -> Result<f64, FleetError> {
    let threshold = return_threshold(spec, distance, reserve_margin)?;
    let start = spec.q_b - travel_charge(spec, distance);
    Ok(((start - threshold) / spec.discharge_rate()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    fn table6() -> FleetSpec {
        Scenario::canonical().fleet
    }

    #[test]
    fn sizing_examples() {
        let mut f = table6();
        f.p_gen = 5500.0;
        f.p_hub = 0.0;
        f.p_rover = 900.0;
        assert_eq!(fleet_size(&f), 6);
        f.p_rover = 410.0;
        assert_eq!(fleet_size(&f), 13);
        f.p_hub = f.p_gen - 1e-9;
        assert_eq!(fleet_size(&f), 0);
    }

    #[test]
    fn prototype_is_charge_rate_bound() {
        let f = table6();
        assert!((f.charge_power() - 2.8 * 22.2).abs() < 1e-12);
        assert!(f.charge_power() > f.p_rover);
        let expect = ((f.p_gen - f.p_hub) / (2.8 * 22.2)).floor() as usize;
        assert_eq!(fleet_size(&f), expect);
    }

    #[test]
    fn terminals() {
        assert_eq!(required_terminals(1), 2);
        assert_eq!(required_terminals(2), 3);
        assert_eq!(required_terminals(10), 11);
    }

    #[test]
    fn threshold_examples() {
        let f = table6();
        assert!((return_threshold(&f, 0.0, 0.1).unwrap() - 0.28).abs() < 1e-12);
        let endurance = f.q_b * f.v_b / f.p_rover * 3600.0;
        let r_h = 0.5 * f.v_rover * endurance;
        let half = return_threshold(&f, r_h, 0.0).unwrap();
        assert!((half - f.q_b / 2.0).abs() < 1e-9);
        let a = return_threshold(&f, 100.0, 0.0).unwrap();
        let b = return_threshold(&f, 200.0, 0.0).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(matches!(
            return_threshold(&f, 3.0 * r_h, 0.1),
            Err(FleetError::Infeasible { .. })
        ));
    }

    #[test]
    fn too_few_terminals_is_rejected() {
        let s = Scenario::canonical();
        let mut c = SimConfig::new(3, 3600.0);
        c.terminals = Some(3);
        assert!(matches!(
            run_sim(&s, &c, &FailureModel::none(), &make_rng(1)),
            Err(FleetError::TooFewTerminals { .. })
        ));
    }

    #[test]
    fn single_rover_day() {
        let s = Scenario::canonical();
        let c = SimConfig::new(1, 86_400.0);
        let m = run_sim(&s, &c, &FailureModel::none(), &make_rng(1)).unwrap();
        assert_eq!(m.swap_failures, 0);
        assert!(m.swaps_completed >= 10);
        assert!(
            m.rover_uptime_fraction >= 0.97,
            "{}",
            m.rover_uptime_fraction
        );
        assert!((m.mean_service_time.unwrap() - 98.0).abs() <= TICK);
        assert_eq!(replay(&c, &m.event_log), m.final_state);
    }

    // First three cycles by hand: work until the threshold, 20 s in, 98 s
    // swap, 20 s out.
    #[test]
    fn first_cycles_match_hand_schedule() {
        let s = Scenario::canonical();
        let f = s.fleet;
        let m = run_sim(
            &s,
            &SimConfig::new(1, 30_000.0),
            &FailureModel::none(),
            &make_rng(1),
        )
        .unwrap();
        let rate = f.p_rover / f.v_b / 3600.0;
        let travel = 20.0 * rate;
        let thr = travel + 0.1 * f.q_b;
        let first_work = ((f.q_b - thr) / rate * 1000.0).ceil() / 1000.0;
        let later_work = ((f.q_b - travel - thr) / rate * 1000.0).ceil() / 1000.0;
        let approaches: Vec<f64> = m
            .event_log
            .iter()
            .filter(|e| {
                matches!(
                    e.kind,
                    EventKind::Transition {
                        from: RoverState::Field,
                        to: RoverState::Approach
                    }
                )
            })
            .map(|e| e.time)
            .collect();
        let cycle = 20.0 + 98.0 + 20.0;
        let expect = [
            first_work,
            first_work + cycle + later_work,
            first_work + 2.0 * (cycle + later_work),
        ];
        for (a, e) in approaches.iter().zip(expect) {
            assert!((a - e).abs() <= 2.0 * TICK, "{a} vs {e}");
        }
        assert!(approaches.len() >= 3);
    }

    #[test]
    fn forced_jam_strands_rover() {
        let s = Scenario::canonical();
        let fm = FailureModel {
            p_jam: 1.0,
            jam_retry_cap: 3,
            ..FailureModel::none()
        };
        let c = SimConfig::new(1, 86_400.0);
        let m = run_sim(&s, &c, &fm, &make_rng(1)).unwrap();
        assert_eq!(m.swaps_completed, 0);
        assert_eq!(m.swap_failures, 1);
        assert_eq!(m.jams, 4);
        assert_eq!(m.stranded, vec![0]);
        assert!(m.rover_uptime_fraction < 0.1);
        assert_eq!(m.final_state.module_locations[0], Location::Rover(0));
        assert_eq!(replay(&c, &m.event_log), m.final_state);
    }

    #[test]
    fn steep_hub_blocks_entry() {
        let s = Scenario::canonical();
        let fm = FailureModel {
            hub_gradient: 13.0,
            ..FailureModel::none()
        };
        let m = run_sim(&s, &SimConfig::new(1, 20_000.0), &fm, &make_rng(1)).unwrap();
        assert_eq!(m.swaps_completed, 0);
        assert_eq!(m.entry_failures, 3);
        assert_eq!(m.stranded, vec![0]);
    }

    #[test]
    fn redundant_port_survives_port_failure() {
        let s = Scenario::canonical();
        let fm = FailureModel {
            port_failure_time: Some(10.0),
            ..FailureModel::none()
        };
        let mut c = SimConfig::new(2, 86_400.0);
        let single = run_sim(&s, &c, &fm, &make_rng(1)).unwrap();
        assert_eq!(single.swaps_completed, 0);
        c.ports = 2;
        c.terminals = Some(4);
        let dual = run_sim(&s, &c, &fm, &make_rng(1)).unwrap();
        assert!(dual.swaps_completed > 10);
        assert_eq!(replay(&c, &dual.event_log), dual.final_state);
    }

    #[test]
    fn aux_power_loss_adds_reboot_delay() {
        let s = Scenario::canonical();
        let fm = FailureModel {
            p_aux_power_fail: 1.0,
            aux_reboot_delay: 30.0,
            ..FailureModel::none()
        };
        let m = run_sim(&s, &SimConfig::new(1, 20_000.0), &fm, &make_rng(1)).unwrap();
        assert!((m.mean_service_time.unwrap() - 128.0).abs() <= TICK);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = Scenario::canonical();
        let fm = FailureModel {
            p_entry_fail: 0.2,
            p_continuity_fail: 0.1,
            p_jam: 0.1,
            ..FailureModel::none()
        };
        let c = SimConfig::new(2, 86_400.0);
        let a = run_sim(&s, &c, &fm, &make_rng(9)).unwrap();
        let b = run_sim(&s, &c, &fm, &make_rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn charging_respects_power_budget() {
        let mut s = Scenario::canonical();
        s.fleet.p_gen = 70.0;
        let m = run_sim(
            &s,
            &SimConfig::new(3, 86_400.0),
            &FailureModel::none(),
            &make_rng(2),
        )
        .unwrap();
        assert_eq!(m.max_concurrent_charging, 1);
        assert!(m.max_charging_power <= 70.0);
    }

    #[test]
    fn fail_profile_parses() {
        let m = FailureModel::from_toml("p_jam = 0.5\njam_retry_cap = 2\n").unwrap();
        assert_eq!(m.p_jam, 0.5);
        assert_eq!(m.jam_retry_cap, 2);
        assert!(FailureModel::from_toml("p_jam = 2.0").is_err());
        assert!(FailureModel::from_toml("bogus = 1").is_err());
    }
}
