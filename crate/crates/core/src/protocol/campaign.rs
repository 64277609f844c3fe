//! Multiplexed campaign: sampling of attempts and the discrete-event run.
//!
//! Attempts are split into blocks of [`BLOCK_ATTEMPTS`]. Block `b` draws from
//! `ChaCha8Rng::seed_from_u64(master_seed)` with stream `b`, so results do not
//! depend on how many workers sample the blocks. Inside a block, attempts with
//! no click anywhere are skipped geometrically; only the others enter the
//! event queue and produce records.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::devices::Window;
use crate::fock::{Bin, DensityOperator};

use super::attempt::{
    apply_feed_forward, sample_index, AttemptModel, FeedForwardStatus, MemorySlot,
};
use super::bsm::{classify_bsm, pattern_clicks, BellOutcome, Click, Detector};
use super::timing::{memory_occupancy, ns_to_ps, us_to_ps, Occupancy};
use super::ProtocolError;

pub const BLOCK_ATTEMPTS: u64 = 1 << 16;
const BLOCKS_PER_CHUNK: u64 = 256;

/// Environment variable holding the number of sampling workers.
pub const WORKERS_ENV: &str = "TELEPORT_SIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    AttemptLaunched,
    PhotonArrivesAtBSM,
    DetectorClick { detector: Detector, bin: Bin },
    HeraldMessage,
    MemoryEmission,
    FeedForwardApplied,
}

impl EventKind {
    fn order(self) -> u8 {
        match self {
            EventKind::AttemptLaunched => 0,
            EventKind::PhotonArrivesAtBSM => 1,
            EventKind::DetectorClick { .. } => 2,
            EventKind::HeraldMessage => 3,
            EventKind::MemoryEmission => 4,
            EventKind::FeedForwardApplied => 5,
        }
    }
}

/// A scheduled event; ordered by time, then kind, then attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub time_ps: u64,
    pub kind: EventKind,
    pub attempt_id: u64,
}

impl Event {
    fn key(&self) -> (u64, u8, u64, EventKind) {
        (self.time_ps, self.kind.order(), self.attempt_id, self.kind)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeraldMessage {
    pub attempt_id: u64,
    pub outcome: BellOutcome,
    pub send_time_ps: u64,
    pub arrival_time_ps: u64,
}

/// What happened in one attempt with at least one click.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub attempt_id: u64,
    pub launch_time_ps: u64,
    /// BSM clicks that survived the detector dead time.
    pub bsm_clicks: Vec<Click>,
    pub outcome: BellOutcome,
    pub herald: Option<HeraldMessage>,
    pub feed_forward: FeedForwardStatus,
    /// Analyzer windows that registered a click.
    pub analyzer_clicks: Vec<Window>,
}

impl TrialRecord {
    /// Heralded and, when needed, corrected before retrieval.
    pub fn is_valid_herald(&self) -> bool {
        self.outcome.is_herald() && self.feed_forward != FeedForwardStatus::DeadlineMissed
    }

    pub fn analyzer_clicked(&self, w: Window) -> bool {
        self.analyzer_clicks.contains(&w)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub n_attempts: u64,
    pub active_attempts: u64,
    pub psi_plus: u64,
    pub psi_minus: u64,
    pub feed_forward_applied: u64,
    /// Heralds that reached Alice after the photon had left the memory.
    pub deadline_missed: u64,
    /// Attempts with clicks but no herald; their slots are dropped.
    pub dropped_no_herald: u64,
    pub bsm_clicks_lost_to_dead_time: u64,
    pub analyzer_clicks_lost_to_dead_time: u64,
    /// Largest number of heralded slots waiting in memory at once.
    pub max_heralded_in_flight: u32,
    pub occupancy: Option<Occupancy>,
}

impl CampaignSummary {
    pub fn idle_attempts(&self) -> u64 {
        self.n_attempts - self.active_attempts
    }
}

/// One attempt that is not idle, as drawn by the samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ActiveDraw {
    attempt_id: u64,
    pattern: usize,
    /// Analyzer pattern when already fixed (no BSM click), else `None`.
    analyzer: Option<usize>,
    analyzer_draw: f64,
}

/// Distribution over non-idle `(BSM pattern, analyzer pattern)` cells.
struct ActiveTable {
    p_active: f64,
    cells: Vec<(usize, Option<usize>)>,
    weights: Vec<f64>,
}

impl ActiveTable {
    fn new(model: &AttemptModel) -> Self {
        let mut cells = Vec::new();
        let mut weights = Vec::new();
        for a in 1..8 {
            cells.push((0, Some(a)));
            weights.push(model.pattern_probs[0] * model.analyzer[0][0].probs[a]);
        }
        for p in 1..16 {
            cells.push((p, None));
            weights.push(model.pattern_probs[p]);
        }
        let p_active = weights.iter().sum::<f64>().min(1.0);
        ActiveTable {
            p_active,
            cells,
            weights,
        }
    }
}

fn sample_block(
    table: &ActiveTable,
    master_seed: u64,
    block: u64,
    n_attempts: u64,
) -> Vec<ActiveDraw> {
    let start = block * BLOCK_ATTEMPTS;
    let end = (start + BLOCK_ATTEMPTS).min(n_attempts);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(block);
    let mut out = Vec::new();
    if table.p_active <= 0.0 {
        return out;
    }
    let log_q = (-table.p_active).ln_1p();
    let mut pos = start;
    loop {
        if table.p_active < 1.0 {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let skip = (u.ln() / log_q).floor();
            if skip >= (end - pos) as f64 {
                break;
            }
            pos += skip as u64;
        }
        if pos >= end {
            break;
        }
        let cell = table.cells[sample_index(&table.weights, rng.gen())];
        out.push(ActiveDraw {
            attempt_id: pos,
            pattern: cell.0,
            analyzer: cell.1,
            analyzer_draw: rng.gen(),
        });
        pos += 1;
    }
    out
}

struct AttemptState {
    draw: ActiveDraw,
    launch_ps: u64,
    slot: MemorySlot,
    clicks: Vec<Click>,
    outcome: Option<BellOutcome>,
    herald: Option<HeraldMessage>,
    feed_forward: FeedForwardStatus,
    emitted: bool,
    analyzer_clicks: Vec<Window>,
}

#[derive(Clone, Copy)]
struct Timing {
    period_ps: u64,
    storage_ps: u64,
    optical_ps: u64,
    bin_sep_ps: u64,
    return_ps: u64,
    processing_ps: u64,
    bsm_dead_ps: [u64; 2],
    analyzer_dead_ps: u64,
}

struct Engine<'a> {
    model: &'a AttemptModel,
    timing: Timing,
    queue: BinaryHeap<Reverse<Event>>,
    attempts: HashMap<u64, AttemptState>,
    last_bsm_click: [Option<u64>; 2],
    last_analyzer_click: Option<u64>,
    heralded_in_flight: u32,
    summary: CampaignSummary,
    empty_state: Arc<DensityOperator>,
}

impl<'a> Engine<'a> {
    fn launch(&mut self, draw: ActiveDraw) {
        let t = self.timing;
        let launch = draw.attempt_id * t.period_ps;
        let conditional = self.model.conditional[draw.pattern]
            .clone()
            .unwrap_or_else(|| self.empty_state.clone());
        let slot = MemorySlot {
            attempt_id: draw.attempt_id,
            absorb_time_ps: launch,
            emission_time_ps: launch + t.storage_ps,
            feed_forward_pending: false,
            phase_corrected: false,
            conditional_state: conditional,
        };
        let at_bsm = launch + t.optical_ps;
        let id = draw.attempt_id;
        self.push(launch, EventKind::AttemptLaunched, id);
        self.push(slot.emission_time_ps, EventKind::MemoryEmission, id);
        if draw.pattern != 0 {
            self.push(at_bsm, EventKind::PhotonArrivesAtBSM, id);
            for c in pattern_clicks(draw.pattern) {
                let time = at_bsm + if c.bin == Bin::Late { t.bin_sep_ps } else { 0 };
                self.push(
                    time,
                    EventKind::DetectorClick {
                        detector: c.detector,
                        bin: c.bin,
                    },
                    id,
                );
            }
            let send = at_bsm + t.bin_sep_ps;
            self.push(
                send + t.return_ps + t.processing_ps,
                EventKind::HeraldMessage,
                id,
            );
        }
        self.attempts.insert(
            id,
            AttemptState {
                draw,
                launch_ps: launch,
                slot,
                clicks: Vec::new(),
                outcome: if draw.pattern == 0 {
                    Some(BellOutcome::NoHerald)
                } else {
                    None
                },
                herald: None,
                feed_forward: FeedForwardStatus::NotNeeded,
                emitted: false,
                analyzer_clicks: Vec::new(),
            },
        );
    }

    fn push(&mut self, time_ps: u64, kind: EventKind, attempt_id: u64) {
        self.queue.push(Reverse(Event {
            time_ps,
            kind,
            attempt_id,
        }));
    }

    /// Processes events strictly before `until`.
    fn run_until(
        &mut self,
        until: u64,
        sink: &mut dyn FnMut(&TrialRecord),
    ) -> Result<(), ProtocolError> {
        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            if ev.time_ps >= until {
                break;
            }
            self.queue.pop();
            self.process(ev, sink)?;
        }
        Ok(())
    }

    fn process(
        &mut self,
        ev: Event,
        sink: &mut dyn FnMut(&TrialRecord),
    ) -> Result<(), ProtocolError> {
        let now = ev.time_ps;
        let id = ev.attempt_id;
        match ev.kind {
            EventKind::AttemptLaunched | EventKind::PhotonArrivesAtBSM => {}
            EventKind::DetectorClick { detector, bin } => {
                let dead = self.timing.bsm_dead_ps[detector.index()];
                let last = &mut self.last_bsm_click[detector.index()];
                if matches!(*last, Some(prev) if now - prev <= dead && dead > 0) {
                    self.summary.bsm_clicks_lost_to_dead_time += 1;
                } else {
                    *last = Some(now);
                    self.attempts
                        .get_mut(&id)
                        .expect("attempt in flight")
                        .clicks
                        .push(Click::new(detector, bin));
                }
            }
            EventKind::HeraldMessage => {
                let t = self.timing;
                let mut correct = false;
                let st = self.attempts.get_mut(&id).expect("attempt in flight");
                let outcome = classify_bsm(&st.clicks, 0.0, 0.0);
                st.outcome = Some(outcome);
                match outcome {
                    BellOutcome::NoHerald => self.summary.dropped_no_herald += 1,
                    BellOutcome::PsiPlus => self.summary.psi_plus += 1,
                    BellOutcome::PsiMinus => self.summary.psi_minus += 1,
                }
                if outcome.is_herald() {
                    let send = st.launch_ps + t.optical_ps + t.bin_sep_ps;
                    st.herald = Some(HeraldMessage {
                        attempt_id: id,
                        outcome,
                        send_time_ps: send,
                        arrival_time_ps: now,
                    });
                    if st.emitted {
                        st.feed_forward = FeedForwardStatus::DeadlineMissed;
                        self.summary.deadline_missed += 1;
                    } else {
                        st.slot.feed_forward_pending = true;
                        self.heralded_in_flight += 1;
                        self.summary.max_heralded_in_flight = self
                            .summary
                            .max_heralded_in_flight
                            .max(self.heralded_in_flight);
                        if outcome == BellOutcome::PsiMinus {
                            correct = true;
                        } else {
                            st.slot.feed_forward_pending = false;
                        }
                    }
                }
                if correct {
                    self.push(now, EventKind::FeedForwardApplied, id);
                }
                self.try_finish(id, sink);
            }
            EventKind::FeedForwardApplied => {
                let st = self.attempts.get_mut(&id).expect("attempt in flight");
                let (slot, status) = apply_feed_forward(&st.slot, BellOutcome::PsiMinus, now)?;
                st.slot = slot;
                st.feed_forward = status;
                if status == FeedForwardStatus::Applied {
                    self.summary.feed_forward_applied += 1;
                }
            }
            EventKind::MemoryEmission => {
                let st = self.attempts.get_mut(&id).expect("attempt in flight");
                st.emitted = true;
                if st.herald.is_some() {
                    self.heralded_in_flight -= 1;
                }
                let pattern = match st.draw.analyzer {
                    Some(a) => a,
                    None => sample_index(
                        &self
                            .model
                            .analyzer_given(st.draw.pattern, st.slot.phase_corrected)
                            .probs,
                        st.draw.analyzer_draw,
                    ),
                };
                let sep = self.timing.bin_sep_ps;
                let dead = self.timing.analyzer_dead_ps;
                for (k, w) in crate::devices::Window::ALL.iter().enumerate() {
                    if pattern >> w.bit() & 1 == 0 {
                        continue;
                    }
                    let t = now + k as u64 * sep;
                    if matches!(self.last_analyzer_click, Some(prev) if t - prev <= dead && dead > 0)
                    {
                        self.summary.analyzer_clicks_lost_to_dead_time += 1;
                    } else {
                        self.last_analyzer_click = Some(t);
                        st.analyzer_clicks.push(*w);
                    }
                }
                self.try_finish(id, sink);
            }
        }
        Ok(())
    }

    fn try_finish(&mut self, id: u64, sink: &mut dyn FnMut(&TrialRecord)) {
        let st = &self.attempts[&id];
        if !st.emitted || st.outcome.is_none() {
            return;
        }
        let st = self.attempts.remove(&id).expect("present");
        sink(&TrialRecord {
            attempt_id: id,
            launch_time_ps: st.launch_ps,
            bsm_clicks: st.clicks,
            outcome: st.outcome.expect("classified"),
            herald: st.herald,
            feed_forward: st.feed_forward,
            analyzer_clicks: st.analyzer_clicks,
        });
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, ProtocolError> {
    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ProtocolError::Invalid(format!("cannot start workers: {e}")))
}

/// Runs `n_attempts` attempts and feeds one record per non-idle attempt to
/// `sink`, in the order the attempts complete.
pub fn run_campaign(
    config: &ExperimentConfig,
    model: &AttemptModel,
    n_attempts: u64,
    master_seed: u64,
    sink: &mut dyn FnMut(&TrialRecord),
) -> Result<CampaignSummary, ProtocolError> {
    if n_attempts == 0 {
        return Err(ProtocolError::Invalid(
            "a campaign needs at least one attempt".into(),
        ));
    }
    let t = &config.timing;
    let timing = Timing {
        period_ps: us_to_ps(t.attempt_period_us),
        storage_ps: us_to_ps(config.memory.storage_time_us),
        optical_ps: us_to_ps(config.fiber.delay_us()),
        bin_sep_ps: ns_to_ps(t.bin_separation_ns),
        return_ps: us_to_ps(t.classical_return(&config.fiber)),
        processing_ps: us_to_ps(t.processing_latency_us),
        bsm_dead_ps: [
            ns_to_ps(config.detectors.d1.dead_time_ns),
            ns_to_ps(config.detectors.d2.dead_time_ns),
        ],
        analyzer_dead_ps: ns_to_ps(config.detectors.analyzer.dead_time_ns),
    };
    let occupancy = memory_occupancy(timing.period_ps, timing.storage_ps, n_attempts);
    let table = ActiveTable::new(model);
    let mut engine = Engine {
        model,
        timing,
        queue: BinaryHeap::new(),
        attempts: HashMap::new(),
        last_bsm_click: [None, None],
        last_analyzer_click: None,
        heralded_in_flight: 0,
        summary: CampaignSummary {
            n_attempts,
            occupancy: Some(occupancy),
            ..Default::default()
        },
        empty_state: Arc::new(DensityOperator::vacuum(
            crate::fock::Register::new(crate::devices::SIGNAL_MODES.to_vec())?,
            config.simulation.cutoff,
        )?),
    };
    let pool = worker_pool()?;
    let n_blocks = n_attempts.div_ceil(BLOCK_ATTEMPTS);
    let mut chunk_start = 0;
    while chunk_start < n_blocks {
        let chunk_end = (chunk_start + BLOCKS_PER_CHUNK).min(n_blocks);
        let draws: Vec<Vec<ActiveDraw>> = pool.install(|| {
            (chunk_start..chunk_end)
                .into_par_iter()
                .map(|b| sample_block(&table, master_seed, b, n_attempts))
                .collect()
        });
        for draw in draws.into_iter().flatten() {
            let launch = draw.attempt_id * engine.timing.period_ps;
            engine.run_until(launch, sink)?;
            engine.summary.active_attempts += 1;
            engine.launch(draw);
        }
        chunk_start = chunk_end;
    }
    engine.run_until(u64::MAX, sink)?;
    debug_assert!(engine.attempts.is_empty());
    Ok(engine.summary)
}

/// [`run_campaign`] collecting the records.
pub fn collect_campaign(
    config: &ExperimentConfig,
    model: &AttemptModel,
    n_attempts: u64,
    master_seed: u64,
) -> Result<(CampaignSummary, Vec<TrialRecord>), ProtocolError> {
    let mut records = Vec::new();
    let summary = run_campaign(config, model, n_attempts, master_seed, &mut |r| {
        records.push(r.clone())
    })?;
    Ok((summary, records))
}
