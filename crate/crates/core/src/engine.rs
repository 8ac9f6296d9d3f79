//! Window-by-window simulation loop.
//!
//! Each window every vehicle transmits once on its reserved subchannel.
//! Subframe by subframe, non-transmitting vehicles sense the channel and
//! receive the packets of transmitters within the largest awareness
//! distance. At the end of the window sensing snapshots enter the
//! histories, reservation counters tick, expired reservations are
//! renewed, and vehicles move.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, decode_threshold_db, Arrival, ChannelConfig, LinkShadowState, SensedPowerGrid};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, SubchannelId};
use crate::metrics::{classify, PrrAccumulator, ReceptionEvent, SimulationReport};
use crate::mobility::{self, advance, generate_freeway, FreewayConfig, Metric, Trace, Vehicle};
use crate::rng::{Purpose, SimRng, StreamFactory};
use crate::sps::{draw_tsps, maybe_reselect, Reselection, Reservation, SensingHistory, SpsPolicyConfig};

/// Pathloss is evaluated no closer than this, so coincident trace
/// positions stay finite.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

pub fn default_awareness_distances() -> Vec<f64> {
    (1..=6).map(|i| 50.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Freeway(FreewayConfig),
    /// CSV trace; see [`mobility::Trace`].
    Trace { path: PathBuf },
    /// Explicit vehicles moving in a straight line on an open plane.
    Fixed { vehicles: Vec<Vehicle> },
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::Freeway(FreewayConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub channel: ChannelConfig,
    pub sps: SpsPolicyConfig,
    pub scenario: Scenario,
    pub duration_ms: u64,
    pub warmup_ms: u64,
    pub seed: u64,
    pub awareness_distances_m: Vec<f64>,
    /// Effective coded throughput, bps/Hz.
    pub rho: f64,
    /// Throughput loss coefficient.
    pub lambda: f64,
    /// Carried for reference; decoding is threshold based.
    pub cam_size_bytes: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            channel: ChannelConfig::default(),
            sps: SpsPolicyConfig::default(),
            scenario: Scenario::default(),
            duration_ms: 61_000,
            warmup_ms: 1_000,
            seed: 1,
            awareness_distances_m: default_awareness_distances(),
            rho: 0.9402,
            lambda: 0.6,
            cam_size_bytes: 190,
        }
    }
}

impl SimConfig {
    /// Reduced freeway: about 150 vehicles on 1.5 km, 20 s measured after
    /// a 1 s warm-up.
    pub fn desk_scale() -> Self {
        Self {
            scenario: Scenario::Freeway(FreewayConfig {
                road_length_m: 1500.0,
                ..FreewayConfig::default()
            }),
            duration_ms: 21_000,
            warmup_ms: 1_000,
            ..Self::default()
        }
    }

    pub fn decode_threshold_db(&self) -> Result<f64> {
        decode_threshold_db(self.rho, self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.channel.validate(&self.grid)?;
        self.sps.validate(&self.grid)?;
        if let Scenario::Freeway(f) = &self.scenario {
            f.validate()?;
        }
        if let Scenario::Fixed { vehicles } = &self.scenario {
            let mut ids: Vec<u32> = vehicles.iter().map(|v| v.id).collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::config("vehicles", "vehicle ids must be unique"));
            }
        }
        let w = self.grid.window_ms as u64;
        if self.duration_ms % w != 0 {
            return Err(Error::config("duration_ms", format!("must be a multiple of the {w} ms window")));
        }
        if self.warmup_ms % w != 0 {
            return Err(Error::config("warmup_ms", format!("must be a multiple of the {w} ms window")));
        }
        if self.duration_ms < self.warmup_ms {
            return Err(Error::config("duration_ms", "must be at least warmup_ms"));
        }
        let ds = &self.awareness_distances_m;
        if ds.is_empty() {
            return Err(Error::config("awareness_distances_m", "must not be empty"));
        }
        if ds.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::config("awareness_distances_m", "distances must be positive"));
        }
        if ds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("awareness_distances_m", "distances must be strictly increasing"));
        }
        decode_threshold_db(self.rho, self.lambda).map_err(|e| Error::config("rho/lambda", e.to_string()))?;
        Ok(())
    }

    pub fn total_windows(&self) -> u64 {
        self.duration_ms / self.grid.window_ms as u64
    }

    pub fn warmup_windows(&self) -> u64 {
        self.warmup_ms / self.grid.window_ms as u64
    }

    pub fn max_awareness_m(&self) -> f64 {
        self.awareness_distances_m.iter().copied().fold(0.0, f64::max)
    }
}

/// Hooks into the simulation loop. All methods default to no-ops.
pub trait Observer {
    fn on_transmission(&mut self, _window: u64, _vehicle: u32, _subchannel: SubchannelId) {}
    /// Only called for measurement windows.
    fn on_reception(&mut self, _event: &ReceptionEvent) {}
    fn on_reselection(&mut self, _window: u64, _vehicle: u32, _previous: &Reservation, _outcome: &Reselection) {}
}

impl Observer for () {}

impl Observer for Vec<ReceptionEvent> {
    fn on_reception(&mut self, event: &ReceptionEvent) {
        self.push(event.clone());
    }
}

impl Observer for PrrAccumulator {
    fn on_reception(&mut self, event: &ReceptionEvent) {
        self.record_event(event);
    }
}

#[derive(Debug, Clone)]
pub struct VehicleState {
    pub vehicle: Vehicle,
    pub reservation: Reservation,
    pub history: SensingHistory,
}

struct Link {
    shadow: LinkShadowState,
    rng: SimRng,
}

enum Mobility {
    Road { length: f64, wraparound: bool },
    Trace(Trace),
    Open,
}

/// Mutable world: vehicles with their grants and histories, per-link
/// shadowing, and the window counter.
pub struct Simulation {
    cfg: SimConfig,
    streams: StreamFactory,
    threshold_db: f64,
    metric: Metric,
    mobility: Mobility,
    vehicles: Vec<VehicleState>,
    links: HashMap<(u32, u32), Link>,
    window: u64,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let streams = StreamFactory::new(cfg.seed);
        let threshold_db = cfg.decode_threshold_db()?;
        let (metric, mobility, vehicles) = match &cfg.scenario {
            Scenario::Freeway(f) => {
                let vs = generate_freeway(f, &mut streams.stream(Purpose::Scenario, 0, 0, 0))?;
                (
                    f.metric(),
                    Mobility::Road {
                        length: f.road_length_m,
                        wraparound: f.wraparound,
                    },
                    vs,
                )
            }
            Scenario::Trace { path } => {
                let trace = mobility::load_trace(path, cfg.grid.window_ms)?;
                let vs = trace_vehicles(&trace, 0);
                (Metric::plane(), Mobility::Trace(trace), vs)
            }
            Scenario::Fixed { vehicles } => {
                let mut vs = vehicles.clone();
                vs.sort_by_key(|v| v.id);
                (Metric::plane(), Mobility::Open, vs)
            }
        };
        let mut sim = Self {
            cfg,
            streams,
            threshold_db,
            metric,
            mobility,
            vehicles: Vec::new(),
            links: HashMap::new(),
            window: 0,
        };
        sim.vehicles = vehicles.into_iter().map(|v| sim.spawn(v)).collect();
        Ok(sim)
    }

    /// Initial grant: uniform subchannel, fresh `T_SPS`, residual life
    /// uniform in `1..=T_SPS / T_w`.
    fn spawn(&self, vehicle: Vehicle) -> VehicleState {
        let grid = &self.cfg.grid;
        let mut rng = self
            .streams
            .stream(Purpose::InitialReservation, vehicle.id as u64, 0, self.window);
        let index = rng.random_range(0..grid.total_subchannels());
        let subchannel = grid.from_linear(index).expect("index within grid");
        let t = draw_tsps(&self.cfg.sps.t_sps_set_ms, &mut rng);
        let mut reservation = Reservation::new(subchannel, t, grid.window_ms);
        reservation.windows_remaining = rng.random_range(1..=reservation.windows_remaining);
        VehicleState {
            vehicle,
            reservation,
            history: SensingHistory::new(),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn threshold_db(&self) -> f64 {
        self.threshold_db
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    /// Replaces a vehicle's grant, e.g. to pin a test geometry.
    pub fn force_reservation(&mut self, vehicle: u32, reservation: Reservation) -> Result<()> {
        self.cfg.grid.linear_index(reservation.subchannel)?;
        let v = self
            .vehicles
            .iter_mut()
            .find(|v| v.vehicle.id == vehicle)
            .ok_or_else(|| Error::config("vehicle", format!("no vehicle with id {vehicle}")))?;
        v.reservation = reservation;
        Ok(())
    }

    pub fn measuring(&self) -> bool {
        self.window >= self.cfg.warmup_windows()
    }

    /// Per-RB received power before IBE scaling for every ordered pair,
    /// row = receiver. Also advances each link's shadowing.
    fn link_powers(&mut self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.vehicles.len();
        let mut power = vec![0.0; n * n];
        let mut dist = vec![0.0; n * n];
        let ch = &self.cfg.channel;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&self.vehicles[i].vehicle, &self.vehicles[j].vehicle);
                let d = self.metric.distance(a.position, b.position);
                let key = (a.id.min(b.id), a.id.max(b.id));
                let (pa, pb) = if a.id < b.id {
                    (a.position, b.position)
                } else {
                    (b.position, a.position)
                };
                let streams = self.streams;
                let link = self.links.entry(key).or_insert_with(|| Link {
                    shadow: LinkShadowState::default(),
                    rng: streams.stream(Purpose::Shadowing, key.0 as u64, key.1 as u64, 0),
                });
                let shadow_db = link.shadow.sample(
                    pa,
                    pb,
                    &self.metric,
                    ch.shadow_sigma_db,
                    ch.shadow_corr_distance_m,
                    &mut link.rng,
                );
                let pl = ch.pathloss_db(d.max(MIN_LINK_DISTANCE_M))?;
                let p = ch.received_rb_power_mw(pl, shadow_db, 1.0);
                power[i * n + j] = p;
                power[j * n + i] = p;
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok((power, dist))
    }

    /// Runs one window; reception events go to `observer` when the window
    /// is past warm-up.
    pub fn step_window<O: Observer + ?Sized>(&mut self, observer: &mut O) -> Result<()> {
        let n = self.vehicles.len();
        let grid = self.cfg.grid;
        let f_count = grid.sub_bands as usize;
        let (power, dist) = self.link_powers()?;
        let measuring = self.measuring();
        let max_d = self.cfg.max_awareness_m();

        let mut by_subframe: Vec<Vec<usize>> = vec![Vec::new(); grid.subframes as usize];
        for (i, v) in self.vehicles.iter().enumerate() {
            observer.on_transmission(self.window, v.vehicle.id, v.reservation.subchannel);
            by_subframe[v.reservation.subchannel.k as usize - 1].push(i);
        }

        let noise = self.cfg.channel.noise_floor_per_rb_mw;
        let mut snapshots: Vec<SensedPowerGrid> = (0..n).map(|_| SensedPowerGrid::filled(&grid, noise)).collect();
        let mut column = vec![0.0; f_count];
        let mut arrivals: Vec<Arrival> = Vec::new();
        let mut others: Vec<Arrival> = Vec::new();

        for (k0, txs) in by_subframe.iter().enumerate() {
            let k = k0 as u32 + 1;
            if txs.is_empty() {
                continue;
            }
            for rx in 0..n {
                let own = self.vehicles[rx].reservation.subchannel;
                let transmitting = own.k == k;
                arrivals.clear();
                arrivals.extend(txs.iter().filter(|&&j| j != rx).map(|&j| Arrival {
                    sub_band: self.vehicles[j].reservation.subchannel.f,
                    power_mw: power[rx * n + j],
                }));
                channel::sense_subframe(&self.cfg.channel, transmitting, &arrivals, &mut column)?;
                snapshots[rx].set_subframe(k, &column);

                if !measuring {
                    continue;
                }
                for &tx in txs {
                    if tx == rx || dist[rx * n + tx] > max_d {
                        continue;
                    }
                    let sc = self.vehicles[tx].reservation.subchannel;
                    let signal = power[rx * n + tx];
                    let rx_transmit = transmitting.then_some(own);
                    let breakdown = if transmitting {
                        None
                    } else {
                        others.clear();
                        others.extend(txs.iter().filter(|&&j| j != tx && j != rx).map(|&j| Arrival {
                            sub_band: self.vehicles[j].reservation.subchannel.f,
                            power_mw: power[rx * n + j],
                        }));
                        Some(channel::sinr(&self.cfg.channel, sc.f, signal, &others)?)
                    };
                    let verdict = classify(sc, rx_transmit, breakdown.as_ref(), self.threshold_db)?;
                    observer.on_reception(&ReceptionEvent {
                        window: self.window,
                        tx: self.vehicles[tx].vehicle.id,
                        rx: self.vehicles[rx].vehicle.id,
                        distance_m: dist[rx * n + tx],
                        subchannel: sc,
                        sinr: breakdown,
                        rx_transmit,
                        verdict,
                    });
                }
            }
        }

        for (v, snap) in self.vehicles.iter_mut().zip(snapshots) {
            v.history.push(snap);
            // Counters only run once the sensing window is full.
            if !v.history.is_full() {
                continue;
            }
            v.reservation.windows_remaining = v.reservation.windows_remaining.saturating_sub(1);
            if v.reservation.expired() {
                let mut rng = self
                    .streams
                    .stream(Purpose::Reselection, v.vehicle.id as u64, 0, self.window);
                let previous = v.reservation;
                let outcome = maybe_reselect(&previous, &v.history, &self.cfg.sps, &grid, &mut rng)?;
                observer.on_reselection(self.window, v.vehicle.id, &previous, &outcome);
                v.reservation = outcome.reservation;
            }
        }

        self.window += 1;
        self.move_vehicles();
        Ok(())
    }

    fn move_vehicles(&mut self) {
        let dt = self.cfg.grid.window_ms as f64 / 1000.0;
        match &self.mobility {
            Mobility::Road { length, wraparound } => {
                let (length, wraparound) = (*length, *wraparound);
                let mut vs: Vec<Vehicle> = self.vehicles.iter().map(|v| v.vehicle).collect();
                advance(&mut vs, dt, length, wraparound);
                if vs.len() == self.vehicles.len() {
                    for (state, v) in self.vehicles.iter_mut().zip(vs) {
                        state.vehicle = v;
                    }
                } else {
                    let moved: HashMap<u32, Vehicle> = vs.into_iter().map(|v| (v.id, v)).collect();
                    self.vehicles.retain_mut(|s| match moved.get(&s.vehicle.id) {
                        Some(v) => {
                            s.vehicle = *v;
                            true
                        }
                        None => false,
                    });
                    self.prune_links();
                }
            }
            Mobility::Open => {
                for s in &mut self.vehicles {
                    s.vehicle.position.x += s.vehicle.speed_mps * dt;
                }
            }
            Mobility::Trace(trace) => {
                let next = trace_vehicles(trace, self.window);
                let mut old: HashMap<u32, VehicleState> =
                    self.vehicles.drain(..).map(|s| (s.vehicle.id, s)).collect();
                let mut states = Vec::with_capacity(next.len());
                for v in next {
                    match old.remove(&v.id) {
                        Some(mut s) => {
                            s.vehicle = v;
                            states.push(s);
                        }
                        None => states.push(self.spawn(v)),
                    }
                }
                let departed = !old.is_empty();
                self.vehicles = states;
                if departed {
                    self.prune_links();
                }
            }
        }
    }

    fn prune_links(&mut self) {
        let present: std::collections::HashSet<u32> = self.vehicles.iter().map(|v| v.vehicle.id).collect();
        self.links.retain(|(a, b), _| present.contains(a) && present.contains(b));
    }

    /// Runs warm-up and measurement windows, feeding `observer` as well as
    /// the report's own accumulator.
    pub fn run_with<O: Observer + ?Sized>(mut self, observer: &mut O) -> Result<SimulationReport> {
        let mut acc = PrrAccumulator::new(&self.cfg.awareness_distances_m);
        let mut counter = EventCounter(0);
        let total = self.cfg.total_windows();
        while self.window < total {
            let mut sinks = ForwardTo(&mut acc, &mut counter);
            self.step_window(&mut ForwardTo(&mut sinks, observer))?;
        }
        Ok(SimulationReport {
            seed: self.cfg.seed,
            measured_windows: total - self.cfg.warmup_windows(),
            events: counter.0,
            table: acc.table(),
            config: self.cfg,
        })
    }
}

struct EventCounter(u64);

impl Observer for EventCounter {
    fn on_reception(&mut self, _event: &ReceptionEvent) {
        self.0 += 1;
    }
}

struct ForwardTo<'a, A: Observer, B: Observer + ?Sized>(&'a mut A, &'a mut B);

impl<A: Observer, B: Observer + ?Sized> Observer for ForwardTo<'_, A, B> {
    fn on_transmission(&mut self, window: u64, vehicle: u32, subchannel: SubchannelId) {
        self.0.on_transmission(window, vehicle, subchannel);
        self.1.on_transmission(window, vehicle, subchannel);
    }

    fn on_reception(&mut self, event: &ReceptionEvent) {
        self.0.on_reception(event);
        self.1.on_reception(event);
    }

    fn on_reselection(&mut self, window: u64, vehicle: u32, previous: &Reservation, outcome: &Reselection) {
        self.0.on_reselection(window, vehicle, previous, outcome);
        self.1.on_reselection(window, vehicle, previous, outcome);
    }
}

fn trace_vehicles(trace: &Trace, window: u64) -> Vec<Vehicle> {
    trace
        .window(window)
        .iter()
        .map(|s| Vehicle {
            id: s.vehicle_id,
            position: s.position,
            lane: 0,
            speed_mps: s.speed_mps,
        })
        .collect()
}

/// Simulates `cfg` and returns the aggregated report. Identical configs
/// (including the seed) give identical reports.
pub fn run(cfg: SimConfig) -> Result<SimulationReport> {
    Simulation::new(cfg)?.run_with(&mut ())
}

pub fn run_with_observer<O: Observer + ?Sized>(cfg: SimConfig, observer: &mut O) -> Result<SimulationReport> {
    Simulation::new(cfg)?.run_with(observer)
}
