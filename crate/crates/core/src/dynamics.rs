//! Hormone counters, detector learning rates, and class priorities.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::profile::Gender;
use crate::training::Polarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub h: f64,
    pub s: f64,
    pub k_d: f64,
    pub k_g: f64,
    pub delta: f64,
    pub window: u64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams { h: 1.0, s: 1.0, k_d: 1.0, k_g: 1.0, delta: 1.0, window: 32 }
    }
}

/// Happiness and sadness summed over the last `window` ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormoneState {
    pub window: u64,
    pub happiness: f64,
    pub sadness: f64,
    events: VecDeque<(u64, f64, f64)>,
}

impl HormoneState {
    pub fn new(window: u64) -> Self {
        HormoneState { window: window.max(1), happiness: 0.0, sadness: 0.0, events: VecDeque::new() }
    }

    /// Record patches applied and dropped at `tick` and forget anything
    /// `window` or more ticks old.
    pub fn accumulate(&mut self, tick: u64, applied: usize, dropped: usize, params: &DynamicsParams) {
        if applied > 0 || dropped > 0 {
            self.events.push_back((tick, params.h * applied as f64, params.s * dropped as f64));
        }
        while self.events.front().is_some_and(|(t, _, _)| t + self.window <= tick) {
            self.events.pop_front();
        }
        // Re-sum rather than subtract so the totals never drift.
        self.happiness = self.events.iter().fold(0.0, |a, e| a + e.1);
        self.sadness = self.events.iter().fold(0.0, |a, e| a + e.2);
    }
}

/// Learning rates of the detector's discriminator and generator.
pub fn detector_frequencies(state: &HormoneState, params: &DynamicsParams) -> (f64, f64) {
    (params.k_d * state.happiness, params.k_g * state.sadness)
}

/// Turns rates into runs: each half fires whenever its phase, advanced by
/// rate / window per tick, crosses one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorSchedule {
    pub phase_d: f64,
    pub phase_g: f64,
}

impl DetectorSchedule {
    pub fn step(&mut self, rates: (f64, f64), window: u64) -> (bool, bool) {
        let w = window.max(1) as f64;
        self.phase_d += rates.0 / w;
        self.phase_g += rates.1 / w;
        let d = self.phase_d >= 1.0;
        let g = self.phase_g >= 1.0;
        if d {
            self.phase_d -= self.phase_d.floor();
        }
        if g {
            self.phase_g -= self.phase_g.floor();
        }
        (d, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Excitation {
    Excited,
    Depressed,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityTable {
    pub priorities: BTreeMap<ClassId, f64>,
    /// Recent active sums; their mean is the reference level.
    pub history: VecDeque<f64>,
    pub window: usize,
}

impl PriorityTable {
    pub fn new(globals: impl IntoIterator<Item = ClassId>, window: usize) -> Self {
        PriorityTable { priorities: globals.into_iter().map(|c| (c, 0.0)).collect(), history: VecDeque::new(), window: window.max(1) }
    }

    pub fn average(&self) -> Option<f64> {
        (!self.history.is_empty()).then(|| self.history.iter().fold(0.0, |a, b| a + b) / self.history.len() as f64)
    }

    pub fn record(&mut self, p: f64) {
        self.history.push_back(p);
        while self.history.len() > self.window {
            self.history.pop_front();
        }
    }
}

/// Sum of the active priorities and how it compares with the running mean.
/// With no history yet the sum is its own mean.
pub fn active_priority(active: &[ClassId], table: &PriorityTable) -> Result<(f64, Excitation)> {
    let mut p = 0.0;
    for c in active {
        p += table.priorities.get(c).ok_or_else(|| Error::arg(format!("{c} has no priority")))?;
    }
    let avg = table.average().unwrap_or(p);
    let class = if p > avg {
        Excitation::Excited
    } else if p < avg {
        Excitation::Depressed
    } else {
        Excitation::Neutral
    };
    Ok((p, class))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityEvents {
    pub active: Vec<ClassId>,
    pub control: Option<Polarity>,
    pub stable_io: bool,
    pub applied: usize,
    pub dropped: usize,
}

/// Net change on each active class. Stable I/O and applied patches raise it,
/// churn and dropped patches lower it; the male gate ignores the drop while
/// I/O is stable, the female gate ignores churn while a patch was applied.
pub fn internal_delta(ev: &PriorityEvents, gender: Gender, delta: f64) -> f64 {
    let mut d = 0.0;
    if ev.stable_io {
        d += delta;
    } else if !(gender == Gender::Female && ev.applied > 0) {
        d -= delta;
    }
    if ev.applied > 0 {
        d += delta;
    }
    if ev.dropped > 0 && !(gender == Gender::Male && ev.stable_io) {
        d -= delta;
    }
    d
}

pub fn update_priorities(table: &PriorityTable, ev: &PriorityEvents, gender: Gender, delta: f64) -> PriorityTable {
    let mut out = table.clone();
    let mut d = internal_delta(ev, gender, delta);
    match ev.control {
        Some(Polarity::Pleasure) => d += delta,
        Some(Polarity::Pain) => d -= delta,
        None => {}
    }
    for c in &ev.active {
        if let Some(p) = out.priorities.get_mut(c) {
            *p += d;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_evicts() {
        let p = DynamicsParams { window: 2, ..Default::default() };
        let mut h = HormoneState::new(2);
        h.accumulate(0, 3, 0, &p);
        assert_eq!(h.happiness, 3.0);
        h.accumulate(1, 0, 1, &p);
        assert_eq!((h.happiness, h.sadness), (3.0, 1.0));
        h.accumulate(2, 0, 0, &p);
        assert_eq!((h.happiness, h.sadness), (0.0, 1.0));
    }

    #[test]
    fn priority_sum() {
        let mut t = PriorityTable::new([ClassId(0), ClassId(1)], 4);
        t.priorities.insert(ClassId(0), 2.0);
        t.priorities.insert(ClassId(1), 3.0);
        assert_eq!(active_priority(&[ClassId(0), ClassId(1)], &t).unwrap(), (5.0, Excitation::Neutral));
        assert!(active_priority(&[ClassId(9)], &t).is_err());
    }
}
