use serde::{Deserialize, Serialize};

use crate::devices::{AfcMemoryParams, FiberParams};

use super::ProtocolError;

pub const PS_PER_US: f64 = 1e6;
pub const PS_PER_NS: f64 = 1e3;

/// Rounds a duration in μs to integer picoseconds.
pub fn us_to_ps(us: f64) -> u64 {
    (us * PS_PER_US).round().max(0.0) as u64
}

pub fn ns_to_ps(ns: f64) -> u64 {
    (ns * PS_PER_NS).round().max(0.0) as u64
}

pub fn ps_to_us(ps: i64) -> f64 {
    ps as f64 / PS_PER_US
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    pub attempt_period_us: f64,
    pub bin_separation_ns: f64,
    pub qubit_duration_ns: f64,
    /// Herald return latency; defaults to the one-way fiber delay.
    pub classical_return_us: Option<f64>,
    pub processing_latency_us: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            attempt_period_us: 4.1,
            bin_separation_ns: 420.0,
            qubit_duration_ns: 840.0,
            classical_return_us: None,
            processing_latency_us: 0.0,
        }
    }
}

impl TimingParams {
    pub fn classical_return(&self, fiber: &FiberParams) -> f64 {
        self.classical_return_us.unwrap_or_else(|| fiber.delay_us())
    }

    pub fn attempt_rate_khz(&self) -> f64 {
        1e3 / self.attempt_period_us
    }
}

/// Herald round trip against the storage time of the memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    pub one_way_optical_us: f64,
    pub classical_return_us: f64,
    pub processing_latency_us: f64,
    pub storage_time_us: f64,
    /// `storage − (optical + return + processing)`; negative when heralds
    /// arrive after retrieval.
    pub remaining_margin_us: f64,
}

impl TimingBudget {
    pub fn new(fiber: &FiberParams, timing: &TimingParams, memory: &AfcMemoryParams) -> Self {
        let optical = fiber.delay_us();
        let ret = timing.classical_return(fiber);
        let proc = timing.processing_latency_us;
        let margin_ps = us_to_ps(memory.storage_time_us) as i64
            - (us_to_ps(optical) + us_to_ps(ret) + us_to_ps(proc)) as i64;
        TimingBudget {
            one_way_optical_us: optical,
            classical_return_us: ret,
            processing_latency_us: proc,
            storage_time_us: memory.storage_time_us,
            remaining_margin_us: ps_to_us(margin_ps),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.remaining_margin_us >= 0.0
    }
}

/// Highest attempt rate (kHz) when each attempt waits for its herald.
pub fn max_single_mode_rate(fiber: &FiberParams) -> Result<f64, ProtocolError> {
    if !(fiber.length_km > 0.0) {
        return Err(ProtocolError::Invalid(format!(
            "single-mode rate needs a positive fiber length, got {} km",
            fiber.length_km
        )));
    }
    Ok(1e3 / (2.0 * fiber.delay_us()))
}

/// Highest attempt rate (MHz) with temporal multiplexing: one qubit per qubit duration.
pub fn max_multiplexed_rate(qubit_duration_ns: f64) -> Result<f64, ProtocolError> {
    if !(qubit_duration_ns > 0.0) {
        return Err(ProtocolError::Invalid(format!(
            "qubit duration must be positive, got {qubit_duration_ns} ns"
        )));
    }
    Ok(1e3 / qubit_duration_ns)
}

/// Number of attempts stored in the memory at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub max: u32,
    /// Minimum once the schedule is in steady state; absent for campaigns
    /// too short to reach it.
    pub steady_min: Option<u32>,
    pub time_average: f64,
}

/// Occupancy of the schedule `[k·period, k·period + storage)`, `k < n_attempts`.
pub fn memory_occupancy(period_ps: u64, storage_ps: u64, n_attempts: u64) -> Occupancy {
    assert!(period_ps > 0 && storage_ps > 0 && n_attempts > 0);
    let per_window = storage_ps.div_ceil(period_ps);
    // the pattern repeats with the period once the first slot is released
    let m = n_attempts.min(2 * per_window + 4);
    let mut events: Vec<(u64, i32)> = Vec::with_capacity(2 * m as usize);
    for k in 0..m {
        events.push((k * period_ps, 1));
        events.push((k * period_ps + storage_ps, -1));
    }
    // releases first at equal times: the windows are half-open
    events.sort();
    let last_launch = (m - 1) * period_ps;
    let steady = m < n_attempts || storage_ps <= last_launch;
    let mut count = 0i32;
    let mut max = 0i32;
    let mut steady_min: Option<i32> = None;
    for (i, &(t, d)) in events.iter().enumerate() {
        count += d;
        max = max.max(count);
        let next = events.get(i + 1).map(|e| e.0).unwrap_or(t);
        if next > t && t >= storage_ps && t < last_launch.max(storage_ps) && steady {
            steady_min = Some(steady_min.map_or(count, |s| s.min(count)));
        }
    }
    let n = n_attempts as f64;
    let span = (n - 1.0) * period_ps as f64 + storage_ps as f64;
    Occupancy {
        max: max as u32,
        steady_min: steady_min.map(|s| s as u32),
        time_average: n * storage_ps as f64 / span,
    }
}
