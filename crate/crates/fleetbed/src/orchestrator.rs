//! Scenario loading and client scheduling.
//!
//! A scenario file declares a fleet of clients, each built from components
//! (scalar generators and 2D vehicle units). The orchestrator assembles the
//! components, derives one RNG stream per component from the scenario seed,
//! and schedules emissions either on a deterministic virtual clock (the
//! default: identical config and seed reproduce the output byte for byte)
//! or on wall-clock timers with one thread per component (for scaling
//! measurements, where ordering is arrival order).

use crate::datagen::{GeneratorComponent, IntrusionKind};
use crate::distributions::DistributionSpec;
use crate::record::{
    is_valid_client_id, line_without_vtime, parse_record, serialize_record, DataCategory,
    DifficultyLevel, Label, LogRecord, Payload, Rgb,
};
use crate::sim2d::{
    build_environment, CompromisedFlags, Environment2D, Rect, RequestKind, COLOR_PERIOD_MS,
    DEFAULT_ENV_SIZE, MOVE_PERIOD_MS, REQUEST_PERIOD_MS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

/// Scheduling mode for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Single-threaded discrete-event schedule on a virtual millisecond
    /// clock; events fire in (vtime, client id, component index, stream
    /// index) order and runs are deterministic per (config, seed).
    #[serde(rename = "virtual")]
    VirtualTime,
    /// One thread per component on wall-clock timers; output order is
    /// arrival order and not reproducible. Used for scaling benchmarks.
    #[serde(rename = "real")]
    RealTime,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::VirtualTime => write!(f, "virtual"),
            Mode::RealTime => write!(f, "real"),
        }
    }
}

/// How long a run lasts: a fixed record count or a clock horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Budget {
    /// Stop after exactly this many records have been emitted.
    Records(u64),
    /// Run all emissions scheduled at or before this time (virtual ms in
    /// [`Mode::VirtualTime`], wall ms in [`Mode::RealTime`]).
    DurationMs(u64),
}

/// One component of a client, as declared in a scenario file.
///
/// ```toml
/// [[client.component]]
/// kind = "generator"
/// distribution = "wald"
/// params = { mean = 1.0, shape = 1.0 }
/// intrusion = "off_value"
/// level = "easy"
///
/// [[client.component]]
/// kind = "unit"
/// color = true
/// requests = ["country_code", "poi", "route"]
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentConfig {
    /// A scalar data generator, optionally compromised by an intrusion.
    Generator {
        #[serde(flatten)]
        spec: DistributionSpec,
        #[serde(default)]
        intrusion: Option<IntrusionKind>,
        #[serde(default)]
        level: Option<DifficultyLevel>,
        #[serde(default)]
        period_ms: Option<u64>,
    },
    /// A moving 2D vehicle unit with a color sensor and/or positional
    /// request streams.
    Unit {
        /// Difficulty of this unit's compromised behavior; required when
        /// any `compromised` flag is set.
        #[serde(default)]
        level: Option<DifficultyLevel>,
        /// Emit color readings.
        #[serde(default)]
        color: bool,
        /// Positional request streams to emit.
        #[serde(default)]
        requests: Vec<RequestKind>,
        #[serde(default)]
        compromised: CompromisedFlags,
        /// Illegal zone rectangle: dwelled in when
        /// `compromised.illegal_dwell`, avoided otherwise.
        #[serde(default)]
        zone: Option<Rect>,
        /// Color readings inside the zone return this (non-legal) color;
        /// without it the zone is purely geometric.
        #[serde(default)]
        zone_color: Option<[u8; 3]>,
        #[serde(default)]
        color_period_ms: Option<u64>,
        #[serde(default)]
        request_period_ms: Option<u64>,
    },
}

/// One client: a stable id plus its component list. Component indices (used
/// for event ordering and RNG derivation) follow declaration order.
#[derive(Debug, Clone, Deserialize)]
pub struct ClientSpec {
    pub id: String,
    #[serde(default, rename = "component")]
    pub components: Vec<ComponentConfig>,
}

/// A validated scenario: seed, mode, budget, environment dimensions, and
/// the client fleet.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub mode: Mode,
    pub budget: Budget,
    pub width: u32,
    pub height: u32,
    pub clients: Vec<ClientSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    seed: u64,
    mode: Option<Mode>,
    records: Option<u64>,
    duration_ms: Option<u64>,
    width: Option<u32>,
    height: Option<u32>,
    #[serde(default, rename = "client")]
    clients: Vec<ClientSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("cannot read scenario file {path}")]
    ReadFile { path: PathBuf, source: io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("sink unavailable: {0}")]
    Sink(#[from] io::Error),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> OrchestratorError {
    OrchestratorError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// Where generated requests go. Implementations receive the emission time
/// and the wire line (the serialized record minus its time field, which the
/// receiving end re-assigns from its own clock).
pub trait RequestSink {
    fn submit(&mut self, vtime: u64, line: &str) -> io::Result<()>;
}

/// Sink that keeps all records in memory; the orchestrator's emission time
/// is used as the record time. Intended for in-process experiments.
#[derive(Debug, Default)]
pub struct CollectSink {
    pub records: Vec<LogRecord>,
}

impl RequestSink for CollectSink {
    fn submit(&mut self, vtime: u64, line: &str) -> io::Result<()> {
        let full = format!("{vtime}\t{line}");
        let record = parse_record(&full)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        self.records.push(record);
        Ok(())
    }
}

/// Sink that discards everything (budget and accounting still apply).
#[derive(Debug, Default)]
pub struct NullSink;

impl RequestSink for NullSink {
    fn submit(&mut self, _vtime: u64, _line: &str) -> io::Result<()> {
        Ok(())
    }
}

/// Totals of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub mode: Mode,
    pub records: u64,
    pub normal: u64,
    pub intrusions: u64,
    pub per_category: BTreeMap<DataCategory, u64>,
}

impl RunSummary {
    fn new(seed: u64, mode: Mode) -> RunSummary {
        RunSummary {
            seed,
            mode,
            records: 0,
            normal: 0,
            intrusions: 0,
            per_category: BTreeMap::new(),
        }
    }

    fn count(&mut self, category: DataCategory, label: Label) {
        self.records += 1;
        match label {
            Label::Normal => self.normal += 1,
            Label::Intrusion => self.intrusions += 1,
        }
        *self.per_category.entry(category).or_insert(0) += 1;
    }
}

/// Parse and validate a scenario from TOML text.
pub fn load_scenario_str(text: &str) -> Result<ScenarioConfig, OrchestratorError> {
    let raw: RawScenario = toml::from_str(text)?;
    let budget = match (raw.records, raw.duration_ms) {
        (Some(n), None) => Budget::Records(n),
        (None, Some(ms)) => Budget::DurationMs(ms),
        (None, None) => {
            return Err(invalid(
                "records",
                "exactly one of `records` or `duration_ms` is required",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(invalid(
                "records",
                "`records` and `duration_ms` are mutually exclusive",
            ))
        }
    };
    let config = ScenarioConfig {
        seed: raw.seed,
        mode: raw.mode.unwrap_or(Mode::VirtualTime),
        budget,
        width: raw.width.unwrap_or(DEFAULT_ENV_SIZE),
        height: raw.height.unwrap_or(DEFAULT_ENV_SIZE),
        clients: raw.clients,
    };
    config.validate()?;
    Ok(config)
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, OrchestratorError> {
    let text = std::fs::read_to_string(path).map_err(|source| OrchestratorError::ReadFile {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario_str(&text)
}

impl ScenarioConfig {
    /// Check every structural rule, reporting the offending field path.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("width", "environment dimensions must be positive"));
        }
        if let Budget::Records(0) = self.budget {
            return Err(invalid("records", "record budget must be positive"));
        }
        if self.clients.is_empty() {
            return Err(invalid("client", "at least one client is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut any_records = false;
        for (ci, client) in self.clients.iter().enumerate() {
            let cpath = format!("client[{ci}]");
            if !is_valid_client_id(&client.id) {
                return Err(invalid(
                    format!("{cpath}.id"),
                    format!(
                        "client id {:?} must be non-empty ASCII alphanumeric/&'_'/'-'",
                        client.id
                    ),
                ));
            }
            if !seen.insert(client.id.as_str()) {
                return Err(invalid(
                    format!("{cpath}.id"),
                    format!("duplicate client id {:?}", client.id),
                ));
            }
            if client.components.is_empty() {
                return Err(invalid(
                    format!("{cpath}.component"),
                    "client declares no components",
                ));
            }
            for (ki, component) in client.components.iter().enumerate() {
                let path = format!("{cpath}.component[{ki}]");
                any_records |= validate_component(component, &path, self.width, self.height)?;
            }
        }
        if let Budget::Records(_) = self.budget {
            if !any_records {
                return Err(invalid(
                    "records",
                    "a record budget needs at least one record-emitting stream \
                     (generator, color, or requests)",
                ));
            }
        }
        Ok(())
    }
}

/// Validate one component; returns whether it emits records.
fn validate_component(
    component: &ComponentConfig,
    path: &str,
    width: u32,
    height: u32,
) -> Result<bool, OrchestratorError> {
    match component {
        ComponentConfig::Generator {
            spec,
            intrusion,
            level,
            period_ms,
        } => {
            spec.validate()
                .and_then(|()| spec.interval_profile().map(|_| ()))
                .map_err(|e| invalid(format!("{path}.params"), e.to_string()))?;
            if period_ms == &Some(0) {
                return Err(invalid(
                    format!("{path}.period_ms"),
                    "period must be positive",
                ));
            }
            if intrusion.is_some() && level.is_none() {
                return Err(invalid(
                    format!("{path}.level"),
                    "a compromised generator needs a difficulty level",
                ));
            }
            Ok(true)
        }
        ComponentConfig::Unit {
            level,
            color,
            requests,
            compromised,
            zone,
            zone_color,
            color_period_ms,
            request_period_ms,
        } => {
            if !color && requests.is_empty() {
                return Err(invalid(
                    format!("{path}.requests"),
                    "a unit needs a color stream or at least one request stream",
                ));
            }
            let mut kinds = std::collections::BTreeSet::new();
            for kind in requests {
                if !kinds.insert(*kind) {
                    return Err(invalid(
                        format!("{path}.requests"),
                        format!("duplicate request kind {:?}", kind),
                    ));
                }
            }
            if compromised.any() && level.is_none() {
                return Err(invalid(
                    format!("{path}.level"),
                    "a compromised unit needs a difficulty level",
                ));
            }
            if compromised.color_area && !color {
                return Err(invalid(
                    format!("{path}.compromised"),
                    "color_area requires the color stream",
                ));
            }
            for (flag, kind) in [
                (compromised.country_code, RequestKind::CountryCode),
                (compromised.poi, RequestKind::Poi),
                (compromised.route, RequestKind::Route),
            ] {
                if flag && !requests.contains(&kind) {
                    return Err(invalid(
                        format!("{path}.compromised"),
                        format!("{kind:?} is flagged compromised but not in `requests`"),
                    ));
                }
            }
            if compromised.illegal_dwell && zone.is_none() {
                return Err(invalid(
                    format!("{path}.zone"),
                    "illegal_dwell requires a zone",
                ));
            }
            if zone.is_some() && compromised.color_area {
                return Err(invalid(
                    format!("{path}.zone"),
                    "a unit cannot combine a zone with a color_area environment",
                ));
            }
            if zone_color.is_some() && zone.is_none() {
                return Err(invalid(
                    format!("{path}.zone_color"),
                    "zone_color requires a zone",
                ));
            }
            if let Some(zone) = zone {
                let color = zone_color.map(|[r, g, b]| Rgb(r, g, b));
                Environment2D::with_illegal_zone(width, height, *zone, color)
                    .map_err(|e| invalid(format!("{path}.zone"), e.to_string()))?;
            }
            if color_period_ms == &Some(0) || request_period_ms == &Some(0) {
                return Err(invalid(
                    format!("{path}.color_period_ms"),
                    "periods must be positive",
                ));
            }
            Ok(*color || !requests.is_empty())
        }
    }
}

/// The RNG seed of one component: SHA-256 over the scenario seed
/// (little-endian), the client id bytes, and the component index
/// (little-endian). Changing one component's spec never perturbs another
/// component's stream.
pub fn component_seed(scenario_seed: u64, client_id: &str, component_idx: u32) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(scenario_seed.to_le_bytes());
    hasher.update(client_id.as_bytes());
    hasher.update(component_idx.to_le_bytes());
    hasher.finalize().into()
}

/// Stream slot within a unit component; fixed so event ordering and the
/// unit's RNG draw order are stable regardless of which streams are
/// enabled.
const STREAM_MOVE: u32 = 0;
const STREAM_COLOR: u32 = 1;

fn request_stream_index(kind: RequestKind) -> u32 {
    match kind {
        RequestKind::CountryCode => 2,
        RequestKind::Poi => 3,
        RequestKind::Route => 4,
    }
}

struct UnitState {
    unit: crate::sim2d::Unit,
    env: Environment2D,
}

enum EmitterKind {
    Generator(GeneratorComponent),
    Movement { unit: usize },
    Color { unit: usize },
    Request { unit: usize, kind: RequestKind },
}

struct Emitter {
    kind: EmitterKind,
    period_ms: u64,
    /// (client rank in id order, component index, stream index): the event
    /// tie-break after vtime.
    order: (u32, u32, u32),
    client_id: String,
}

struct Plan {
    emitters: Vec<Emitter>,
    units: Vec<UnitState>,
}

/// Instantiate components and their RNG streams from a validated config.
fn build_plan(config: &ScenarioConfig) -> Result<Plan, OrchestratorError> {
    let mut ranks: Vec<usize> = (0..config.clients.len()).collect();
    ranks.sort_by(|&a, &b| config.clients[a].id.cmp(&config.clients[b].id));
    let mut rank_of = vec![0u32; config.clients.len()];
    for (rank, &ci) in ranks.iter().enumerate() {
        rank_of[ci] = rank as u32;
    }

    let mut emitters = Vec::new();
    let mut units = Vec::new();
    for (ci, client) in config.clients.iter().enumerate() {
        for (ki, component) in client.components.iter().enumerate() {
            let path = format!("client[{ci}].component[{ki}]");
            let mut rng =
                ChaCha8Rng::from_seed(component_seed(config.seed, &client.id, ki as u32));
            match component {
                ComponentConfig::Generator {
                    spec,
                    intrusion,
                    level,
                    period_ms,
                } => {
                    let generator = GeneratorComponent::new(
                        spec.clone(),
                        period_ms.unwrap_or(crate::datagen::DEFAULT_PERIOD_MS),
                        *intrusion,
                        level.unwrap_or(DifficultyLevel::Easy),
                        rng,
                    )
                    .map_err(|e| invalid(&path, e.to_string()))?;
                    emitters.push(Emitter {
                        period_ms: generator.period_ms(),
                        kind: EmitterKind::Generator(generator),
                        order: (rank_of[ci], ki as u32, 0),
                        client_id: client.id.clone(),
                    });
                }
                ComponentConfig::Unit {
                    level,
                    color,
                    requests,
                    compromised,
                    zone,
                    zone_color,
                    color_period_ms,
                    request_period_ms,
                } => {
                    let level = level.unwrap_or(DifficultyLevel::Easy);
                    // Fixed draw order per unit: environment first (when it
                    // is seeded), then start position and heading, then the
                    // tick-by-tick movement and corruption draws.
                    let env = if let Some(zone) = zone {
                        let color = zone_color.map(|[r, g, b]| Rgb(r, g, b));
                        Environment2D::with_illegal_zone(config.width, config.height, *zone, color)
                    } else if compromised.color_area {
                        build_environment(level, config.width, config.height, &mut rng)
                    } else {
                        Environment2D::plain(config.width, config.height)
                    }
                    .map_err(|e| invalid(&path, e.to_string()))?;
                    let (x, y) = if compromised.illegal_dwell {
                        let zone = env.illegal_zone().expect("validated: dwell has a zone");
                        (
                            rng.gen_range(zone.x..zone.x + zone.w),
                            rng.gen_range(zone.y..zone.y + zone.h),
                        )
                    } else {
                        (
                            rng.gen_range(0.0..config.width as f64),
                            rng.gen_range(0.0..config.height as f64),
                        )
                    };
                    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
                    let unit_idx = units.len();
                    units.push(UnitState {
                        unit: crate::sim2d::Unit::new(x, y, heading, *compromised, level, rng),
                        env,
                    });
                    emitters.push(Emitter {
                        kind: EmitterKind::Movement { unit: unit_idx },
                        period_ms: MOVE_PERIOD_MS,
                        order: (rank_of[ci], ki as u32, STREAM_MOVE),
                        client_id: client.id.clone(),
                    });
                    if *color {
                        emitters.push(Emitter {
                            kind: EmitterKind::Color { unit: unit_idx },
                            period_ms: color_period_ms.unwrap_or(COLOR_PERIOD_MS),
                            order: (rank_of[ci], ki as u32, STREAM_COLOR),
                            client_id: client.id.clone(),
                        });
                    }
                    for kind in RequestKind::ALL {
                        if requests.contains(&kind) {
                            emitters.push(Emitter {
                                kind: EmitterKind::Request {
                                    unit: unit_idx,
                                    kind,
                                },
                                period_ms: request_period_ms.unwrap_or(REQUEST_PERIOD_MS),
                                order: (rank_of[ci], ki as u32, request_stream_index(kind)),
                                client_id: client.id.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Plan { emitters, units })
}

/// Fire one emitter at `vtime`: movement mutates the unit and emits
/// nothing; everything else produces one record.
fn fire(
    emitter: &mut Emitter,
    units: &mut [UnitState],
    vtime: u64,
) -> Option<(DataCategory, Label, String)> {
    let (category, payload, label) = match &mut emitter.kind {
        EmitterKind::Generator(generator) => {
            let (value, label) = generator.next_value();
            (generator.kind(), Payload::Value { value }, label)
        }
        EmitterKind::Movement { unit } => {
            let state = &mut units[*unit];
            state.unit.step(&state.env);
            return None;
        }
        EmitterKind::Color { unit } => {
            let state = &mut units[*unit];
            let (color, label) = state.unit.read_color(&state.env);
            let (x, y) = state.unit.position();
            (DataCategory::Color, Payload::ColorReading { x, y, color }, label)
        }
        EmitterKind::Request { unit, kind } => {
            let state = &mut units[*unit];
            let request = state.unit.make_request(&state.env, *kind);
            (request.category, request.payload, request.label)
        }
    };
    let record = LogRecord::new(vtime, emitter.client_id.clone(), category, payload, label)
        .expect("components produce schema-valid records");
    Some((category, label, serialize_record(&record)))
}

/// Run a scenario, routing every emission to `sink`.
pub fn run(
    config: &ScenarioConfig,
    sink: &mut dyn RequestSink,
) -> Result<RunSummary, OrchestratorError> {
    run_with_ready(config, sink, || {})
}

/// [`run`], invoking `on_ready` once all components are assembled (and, in
/// real-time mode, all component threads have started). Benchmarks use the
/// callback to mark the end of start-up.
pub fn run_with_ready(
    config: &ScenarioConfig,
    sink: &mut dyn RequestSink,
    on_ready: impl FnOnce(),
) -> Result<RunSummary, OrchestratorError> {
    config.validate()?;
    let plan = build_plan(config)?;
    match config.mode {
        Mode::VirtualTime => run_virtual(config, plan, sink, on_ready),
        Mode::RealTime => run_real(config, plan, sink, on_ready),
    }
}

fn run_virtual(
    config: &ScenarioConfig,
    mut plan: Plan,
    sink: &mut dyn RequestSink,
    on_ready: impl FnOnce(),
) -> Result<RunSummary, OrchestratorError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut summary = RunSummary::new(config.seed, Mode::VirtualTime);
    // Heap key: (vtime, client rank, component index, stream index,
    // emitter slot). The slot resolves nothing (the order triple is unique)
    // but gives the event its emitter back in O(1).
    let mut heap: BinaryHeap<Reverse<(u64, u32, u32, u32, usize)>> = plan
        .emitters
        .iter()
        .enumerate()
        .map(|(i, e)| Reverse((e.period_ms, e.order.0, e.order.1, e.order.2, i)))
        .collect();
    on_ready();
    while let Some(Reverse((vtime, a, b, c, slot))) = heap.pop() {
        match config.budget {
            Budget::Records(n) if summary.records >= n => break,
            Budget::DurationMs(horizon) if vtime > horizon => break,
            _ => {}
        }
        let emitter = &mut plan.emitters[slot];
        if let Some((category, label, line)) = fire(emitter, &mut plan.units, vtime) {
            sink.submit(vtime, line_without_vtime(&line))?;
            summary.count(category, label);
        }
        heap.push(Reverse((vtime + plan.emitters[slot].period_ms, a, b, c, slot)));
    }
    Ok(summary)
}

/// One emission travelling from a component thread to the collector.
struct Emission {
    category: DataCategory,
    label: Label,
    line: String,
}

fn run_real(
    config: &ScenarioConfig,
    plan: Plan,
    sink: &mut dyn RequestSink,
    on_ready: impl FnOnce(),
) -> Result<RunSummary, OrchestratorError> {
    let mut summary = RunSummary::new(config.seed, Mode::RealTime);
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<Emission>();
    let origin = Instant::now();

    // Units are owned by their component thread; every stream of a unit
    // runs on that thread's timeline in the same order the virtual
    // schedule uses (movement, color, requests).
    let mut unit_states: Vec<Option<UnitState>> = plan.units.into_iter().map(Some).collect();
    let mut component_threads: BTreeMap<(u32, u32), ComponentThread> = BTreeMap::new();
    for emitter in plan.emitters {
        let key = (emitter.order.0, emitter.order.1);
        let entry = component_threads.entry(key).or_default();
        match &emitter.kind {
            EmitterKind::Movement { unit }
            | EmitterKind::Color { unit }
            | EmitterKind::Request { unit, .. } => {
                let unit = *unit;
                if entry.unit.is_none() {
                    entry.unit = unit_states[unit].take();
                }
            }
            EmitterKind::Generator(_) => {}
        }
        entry.streams.push(emitter);
    }

    let mut handles = Vec::new();
    for (_, thread) in component_threads {
        let tx = tx.clone();
        let stop = Arc::clone(&stop);
        handles.push(std::thread::spawn(move || thread.run(tx, stop, origin)));
    }
    drop(tx);
    on_ready();

    let deadline = match config.budget {
        Budget::DurationMs(ms) => Some(origin + Duration::from_millis(ms)),
        Budget::Records(_) => None,
    };
    loop {
        let emission = match deadline {
            Some(deadline) => {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                match rx.recv_timeout(deadline - now) {
                    Ok(e) => e,
                    Err(mpsc::RecvTimeoutError::Timeout) => break,
                    Err(mpsc::RecvTimeoutError::Disconnected) => break,
                }
            }
            None => match rx.recv() {
                Ok(e) => e,
                Err(_) => break,
            },
        };
        let vtime = origin.elapsed().as_millis() as u64;
        sink.submit(vtime, &emission.line)?;
        summary.count(emission.category, emission.label);
        if let Budget::Records(n) = config.budget {
            if summary.records >= n {
                break;
            }
        }
    }
    stop.store(true, Ordering::Relaxed);
    drop(rx);
    for handle in handles {
        let _ = handle.join();
    }
    Ok(summary)
}

/// All streams of one component, run on a single wall-clock thread.
#[derive(Default)]
struct ComponentThread {
    streams: Vec<Emitter>,
    unit: Option<UnitState>,
}

impl ComponentThread {
    fn run(mut self, tx: mpsc::Sender<Emission>, stop: Arc<AtomicBool>, origin: Instant) {
        // Next due tick per stream, in stream order (streams were pushed in
        // (component, stream index) order).
        let mut due: Vec<u64> = self.streams.iter().map(|e| e.period_ms).collect();
        let mut units = Vec::new();
        if let Some(state) = self.unit.take() {
            units.push(state);
        }
        // Stream emitters address their unit by index; within one component
        // thread there is at most one unit, slot 0.
        for stream in &mut self.streams {
            match &mut stream.kind {
                EmitterKind::Movement { unit }
                | EmitterKind::Color { unit }
                | EmitterKind::Request { unit, .. } => *unit = 0,
                EmitterKind::Generator(_) => {}
            }
        }
        while !stop.load(Ordering::Relaxed) {
            let next = *due.iter().min().expect("components have streams");
            let now = origin.elapsed().as_millis() as u64;
            if next > now {
                std::thread::sleep(Duration::from_millis(next - now));
                continue;
            }
            for (i, stream) in self.streams.iter_mut().enumerate() {
                if due[i] > now {
                    continue;
                }
                let tick = due[i];
                due[i] += stream.period_ms;
                if let Some((category, label, line)) = fire(stream, &mut units, tick) {
                    let emission = Emission {
                        category,
                        label,
                        line: line_without_vtime(&line).to_owned(),
                    };
                    if tx.send(emission).is_err() {
                        return;
                    }
                }
            }
        }
    }
}

/// Run a scenario in memory and return both the summary and the records.
pub fn collect_run(
    config: &ScenarioConfig,
) -> Result<(RunSummary, Vec<LogRecord>), OrchestratorError> {
    let mut sink = CollectSink::default();
    let summary = run(config, &mut sink)?;
    Ok((summary, sink.records))
}

/// The categories the difficulty-gap experiment covers: the scalar
/// generator families plus the POI and route request streams.
pub const GAP_CATEGORIES: [DataCategory; 7] = [
    DataCategory::Wald,
    DataCategory::Pareto,
    DataCategory::Rayleigh,
    DataCategory::Uniform,
    DataCategory::Weibull,
    DataCategory::Poi,
    DataCategory::Route,
];

/// Build the two-client scenario of one difficulty-gap set: one normal
/// source of `category` and one compromised at `level`, so half the records
/// are clean training material. Generator categories use off-value
/// intrusions; POI and route use their compromised request variants.
pub fn gap_scenario(
    category: DataCategory,
    level: DifficultyLevel,
    seed: u64,
    records: u64,
) -> Result<ScenarioConfig, OrchestratorError> {
    let (normal, compromised) = if category.is_generator() {
        let spec = DistributionSpec::default_for(category);
        (
            ComponentConfig::Generator {
                spec: spec.clone(),
                intrusion: None,
                level: None,
                period_ms: None,
            },
            ComponentConfig::Generator {
                spec,
                intrusion: Some(IntrusionKind::OffValue),
                level: Some(level),
                period_ms: None,
            },
        )
    } else {
        let kind = match category {
            DataCategory::Poi => RequestKind::Poi,
            DataCategory::Route => RequestKind::Route,
            other => {
                return Err(invalid(
                    "category",
                    format!("{other} has no difficulty-gap scenario"),
                ))
            }
        };
        let flags = CompromisedFlags {
            poi: kind == RequestKind::Poi,
            route: kind == RequestKind::Route,
            ..CompromisedFlags::default()
        };
        (
            ComponentConfig::Unit {
                level: None,
                color: false,
                requests: vec![kind],
                compromised: CompromisedFlags::default(),
                zone: None,
                zone_color: None,
                color_period_ms: None,
                request_period_ms: None,
            },
            ComponentConfig::Unit {
                level: Some(level),
                color: false,
                requests: vec![kind],
                compromised: flags,
                zone: None,
                zone_color: None,
                color_period_ms: None,
                request_period_ms: None,
            },
        )
    };
    let config = ScenarioConfig {
        seed,
        mode: Mode::VirtualTime,
        budget: Budget::Records(records),
        width: DEFAULT_ENV_SIZE,
        height: DEFAULT_ENV_SIZE,
        clients: vec![
            ClientSpec {
                id: "normal".to_owned(),
                components: vec![normal],
            },
            ClientSpec {
                id: "probe".to_owned(),
                components: vec![compromised],
            },
        ],
    };
    config.validate()?;
    Ok(config)
}

/// Generate the record sets of one difficulty level for the gap
/// experiment: `sets` independent runs with seeds derived from `seed`.
pub fn gap_sets(
    category: DataCategory,
    level: DifficultyLevel,
    seed: u64,
    sets: u32,
    records_per_set: u64,
) -> Result<Vec<Vec<LogRecord>>, OrchestratorError> {
    (0..sets)
        .map(|i| {
            // Distinct, documented derivation per (level, set index).
            let set_seed = seed
                .wrapping_mul(1_000_003)
                .wrapping_add(level as u64 * 1_000 + i as u64);
            let config = gap_scenario(category, level, set_seed, records_per_set)?;
            Ok(collect_run(&config)?.1)
        })
        .collect()
}
