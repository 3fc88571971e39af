//! The per-tick loop tying the stack, decisions, training and dynamics
//! together, and its line-delimited JSON trace.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::basis_file::{parse_basis, BasisFile, SpeechDirection};
use crate::bits::Bits;
use crate::bitspace::Region;
use crate::classes::ClassId;
use crate::config::RunConfig;
use crate::decisions::{resolve_sigma, DecisionRecord, Resolution, SigmaParams};
use crate::dynamics::{
    active_priority, detector_frequencies, update_priorities, DetectorSchedule, Excitation, HormoneState,
    PriorityEvents, PriorityTable,
};
use crate::error::{Error, Result};
use crate::io::{failure_report, write_region, ConditioningClass, RegionMap, SlotAssignment, SpeechRouter, Stereotype, StereotypeEvent};
use crate::memory::MemoryTree;
use crate::packer::KeyKind;
use crate::stack::Stack;
use crate::store::ClassStore;
use crate::training::{
    apply_control, detector_scan, emotion_bits, genetic_search, imaginator_generate, ControlEvent, Disposition,
    FrequencyGenerator, NgramDiscriminator, Pending, Polarity,
};

pub const TRACE_SCHEMA: &str = "layerlex-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderRecord {
    pub record: String,
    pub schema: String,
    pub version: u32,
    pub profile: String,
    pub config: RunConfig,
    pub regions: Vec<(String, Region)>,
    pub basis: Vec<String>,
    pub speech: Vec<SlotAssignment>,
    pub rejected: Vec<(ClassId, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub index: usize,
    pub bits: Bits,
    /// (class, first address, last address)
    pub objects: Vec<(ClassId, usize, usize)>,
    pub sentences: usize,
    pub actions: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSummary {
    pub id: usize,
    pub target: ClassId,
    pub level: usize,
    pub created: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaSummary {
    pub target: ClassId,
    pub tested: usize,
    pub best_fitness: Vec<usize>,
    pub packs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub discriminator: bool,
    pub generator: bool,
    pub masks: Vec<Bits>,
    pub fresh: Vec<Bits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRecord {
    pub happiness: f64,
    pub sadness: f64,
    pub omega_d: f64,
    pub omega_g: f64,
    pub priority: f64,
    pub excitation: Excitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub record: String,
    pub tick: u64,
    pub frame: Bits,
    pub layers: Vec<LayerSummary>,
    pub stereotype: Vec<StereotypeEvent>,
    pub internal_holder: Option<ClassId>,
    pub decision: DecisionRecord,
    pub response: Option<Bits>,
    pub patches: Vec<PatchSummary>,
    pub ga: Option<GaSummary>,
    pub control: Option<Polarity>,
    pub disposition: Disposition,
    pub detector: Option<DetectorSummary>,
    pub dynamics: DynamicsRecord,
    pub packed: usize,
    pub memory: String,
}

fn fnv(s: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub struct Simulation {
    pub cfg: RunConfig,
    pub map: RegionMap,
    pub stack: Stack,
    pub memory: MemoryTree,
    pub stereotype: Stereotype,
    pub router: SpeechRouter,
    pub conditioning: Vec<(ConditioningClass, SlotAssignment)>,
    pub rejected: Vec<(ClassId, String)>,
    pub generator: FrequencyGenerator,
    pub discriminator: NgramDiscriminator,
    pub pending: Vec<Pending>,
    pub hormones: HormoneState,
    pub schedule: DetectorSchedule,
    pub priorities: PriorityTable,
    history: VecDeque<Bits>,
    last_output: Option<Bits>,
    last_disposition: Disposition,
    last_failure: Option<Bits>,
    names: Vec<String>,
    tick: u64,
}

impl Simulation {
    pub fn new(cfg: RunConfig, basis: &BasisFile) -> Result<Self> {
        cfg.validate()?;
        let map = RegionMap::new(cfg.length)?;
        let mut store = ClassStore::new(basis.basis.clone(), cfg.derived_budget)?;
        store.set_stereotyped(basis.speech.iter().map(|(id, _)| *id));
        let mut router = SpeechRouter::new(map);
        let mut conditioning = Vec::new();
        let mut rejected = Vec::new();
        for (id, dir) in &basis.speech {
            let class = basis.basis.get(id.0 as usize).unwrap().clone();
            let region = match dir {
                SpeechDirection::Internal => map.internal,
                SpeechDirection::External => map.output,
            };
            let built = class
                .span()
                .checked_sub(region.len())
                .filter(|w| *w > 0 && *w <= map.input.len())
                .ok_or_else(|| Error::arg("mask span does not fit input plus its region"))
                .and_then(|w| ConditioningClass::new(*id, class, w, region));
            match built.and_then(|c| router.route(*dir, *id).map(|a| (c, a))) {
                Ok(pair) => conditioning.push(pair),
                Err(e) => rejected.push((*id, e.to_string())),
            }
        }
        let names = (0..basis.basis.len()).map(|i| basis.basis.name(i).unwrap_or("?").to_string()).collect();
        Ok(Simulation {
            map,
            stack: Stack::new(cfg.depth, cfg.length)?,
            memory: MemoryTree::new(store),
            stereotype: Stereotype::new(cfg.horizon),
            router,
            conditioning,
            rejected,
            generator: FrequencyGenerator::new(cfg.generator_batch),
            discriminator: NgramDiscriminator::new(cfg.ngram),
            pending: Vec::new(),
            hormones: HormoneState::new(cfg.dynamics.window),
            schedule: DetectorSchedule::default(),
            priorities: PriorityTable::new((0..basis.basis.len() as u32).map(ClassId), cfg.dynamics.window as usize),
            history: VecDeque::new(),
            last_output: None,
            last_disposition: Disposition::Idle,
            last_failure: None,
            names,
            tick: 0,
            cfg,
        })
    }

    pub fn header(&self) -> HeaderRecord {
        HeaderRecord {
            record: "header".into(),
            schema: TRACE_SCHEMA.into(),
            version: TRACE_VERSION,
            profile: self.cfg.profile.name(),
            config: self.cfg.clone(),
            regions: self.map.regions().iter().map(|(n, r)| (n.to_string(), *r)).collect(),
            basis: self.names.clone(),
            speech: self.conditioning.iter().map(|(_, a)| *a).collect(),
            rejected: self.rejected.clone(),
        }
    }

    /// Fill the reserved regions from the previous tick and run the
    /// stereotype over the frame.
    fn prepare(&mut self, input: &Bits) -> Result<(Bits, Vec<StereotypeEvent>)> {
        let mut frame = input.clone();
        for (name, r) in self.map.regions() {
            if name != "input" {
                write_region(&mut frame, r, &Bits::zeros(r.len()));
            }
        }
        write_region(&mut frame, self.map.emotions, &emotion_bits(self.last_disposition));
        if let Some(f) = self.last_failure.take() {
            write_region(&mut frame, self.map.failure, &f);
        }
        let running: BTreeSet<ClassId> = self.stereotype.running.iter().map(|u| u.class.id).collect();
        for (c, _) in &self.conditioning {
            if !running.contains(&c.id) {
                self.stereotype.upload(c.clone());
            }
        }
        let events = self.stereotype.step(&mut frame, self.tick)?;
        if let Some(StereotypeEvent::Failed { class, frame: at, .. }) =
            events.iter().find(|e| matches!(e, StereotypeEvent::Failed { .. }))
        {
            self.last_failure = Some(failure_report(*class, *at));
        }
        Ok((frame, events))
    }

    pub fn step(&mut self, input: &Bits, control: Option<Polarity>) -> Result<TickRecord> {
        if input.len() != self.cfg.length {
            return Err(Error::arg(format!("frame has {} bits, expected {}", input.len(), self.cfg.length)));
        }
        let tick = self.tick;
        let (frame, stereotype) = self.prepare(input)?;
        let sensed = frame.slice(self.map.input.begin, self.map.input.end + 1);
        self.discriminator_learn(&sensed);
        self.history.push_back(sensed);
        while self.history.len() > self.cfg.dynamics.window as usize {
            self.history.pop_front();
        }

        let params = SigmaParams {
            profile: &self.cfg.profile,
            cfg: &self.cfg.decision,
            map: &self.map,
            window: self.cfg.decision.budget.window,
        };
        let outcome = resolve_sigma(&self.stack, &self.memory, std::slice::from_ref(&frame), 1, &params)?;
        let last = outcome.traces.last().cloned();
        self.stack = outcome.stack;
        self.memory = outcome.memory;
        let applied = outcome.fixed.len();
        let mut dropped = match outcome.record.resolution {
            Resolution::Dropped => outcome.record.leaves,
            _ => 0,
        };

        let mut ga = None;
        if let Some(first) = outcome.fixed.first() {
            let mut samples = Vec::new();
            for p in &outcome.fixed {
                samples.extend(self.memory.observed_reprs(p.target).unwrap_or_default());
            }
            ga = self.train(first.target, tick)?;
            if let Some(rb) = outcome.rollback.clone() {
                self.pending.push(Pending { patches: outcome.fixed.clone(), rollback: rb, samples });
            }
        }

        let disposition = apply_control(
            control.map(|polarity| ControlEvent { tick, polarity }),
            &mut self.pending,
            &mut self.generator,
            &mut self.discriminator,
            &mut self.memory,
        );
        if let Disposition::RolledBack { patches } = disposition {
            dropped += patches;
        }
        self.last_disposition = disposition;

        let dp = self.cfg.dynamics;
        self.hormones.accumulate(tick, applied, dropped, &dp);
        let rates = detector_frequencies(&self.hormones, &dp);
        let (run_d, run_g) = self.schedule.step(rates, dp.window);
        let detector = (run_d || run_g).then(|| {
            let window: Vec<Bits> = self.history.iter().cloned().collect();
            let r = detector_scan(&window, self.cfg.detector);
            DetectorSummary {
                discriminator: run_d,
                generator: run_g,
                masks: if run_d { r.masks.into_iter().map(|m| m.pattern).collect() } else { Vec::new() },
                fresh: if run_g { r.fresh } else { Vec::new() },
            }
        });

        let active: Vec<ClassId> = last
            .as_ref()
            .map(|t| {
                let set: BTreeSet<ClassId> = t
                    .layers
                    .iter()
                    .flat_map(|l| l.objects.iter().map(|o| o.noun))
                    .filter(|c| self.priorities.priorities.contains_key(c))
                    .collect();
                set.into_iter().collect()
            })
            .unwrap_or_default();
        let (priority, excitation) = active_priority(&active, &self.priorities)?;
        self.priorities.record(priority);
        let output = outcome.response.clone().unwrap_or_else(|| frame.slice(self.map.output.begin, self.map.output.end + 1));
        let stable_io = self.last_output.as_ref() == Some(&output);
        self.last_output = Some(output);
        let events = PriorityEvents { active, control, stable_io, applied, dropped };
        self.priorities = update_priorities(&self.priorities, &events, self.cfg.profile.gender, dp.delta);

        let layers = last
            .as_ref()
            .map(|t| {
                t.layers
                    .iter()
                    .map(|l| LayerSummary {
                        index: l.index,
                        bits: l.bits.clone(),
                        objects: l.objects.iter().map(|o| (o.class_ref, o.block.begin, o.block.end)).collect(),
                        sentences: l.sentences.len(),
                        actions: l.actions.len(),
                        dropped: l.dropped,
                    })
                    .collect()
            })
            .unwrap_or_default();

        self.tick += 1;
        Ok(TickRecord {
            record: "tick".into(),
            tick,
            frame,
            layers,
            stereotype,
            internal_holder: self.router.internal,
            decision: outcome.record,
            response: outcome.response,
            patches: outcome
                .fixed
                .iter()
                .map(|p| PatchSummary { id: p.id, target: p.target, level: p.level, created: p.created.0 })
                .collect(),
            ga,
            control,
            disposition,
            detector,
            dynamics: DynamicsRecord {
                happiness: self.hormones.happiness,
                sadness: self.hormones.sadness,
                omega_d: rates.0,
                omega_g: rates.1,
                priority,
                excitation,
            },
            packed: self.memory.packed.len(),
            memory: fnv(&self.memory.fingerprint()),
        })
    }

    fn discriminator_learn(&mut self, sample: &Bits) {
        use crate::training::DiscriminatorStrategy;
        self.discriminator.learn(sample);
    }

    /// Search reader sets for a freshly packed parent against its own lower
    /// classes plus imagined recombinations.
    fn train(&mut self, target: ClassId, tick: u64) -> Result<Option<GaSummary>> {
        let Ok(problem) = self.memory.pack_problem(target) else { return Ok(None) };
        let mut test = problem.reprs.clone();
        if let Ok(tree) = imaginator_generate(target, &self.memory, &mut self.generator, &self.discriminator) {
            test.extend(tree.samples_for(target));
        }
        let mut params = self.cfg.ga;
        params.seed = self.cfg.seed ^ tick;
        let report = genetic_search(
            &problem,
            &test,
            self.cfg.profile.spontaneous(),
            KeyKind::from(self.cfg.profile.context),
            self.cfg.decision.budget,
            params,
        );
        Ok(Some(GaSummary { target, tested: test.len(), best_fitness: report.best_fitness, packs: report.best.is_some() }))
    }
}

/// Frames, one per non-blank line. Lines starting with `#` are skipped.
pub fn parse_frames(text: &str, length: usize) -> Result<Vec<Bits>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bits: Bits = line.parse().map_err(|_| Error::Parse { line: i + 1, msg: "frame must be 0s and 1s".into() })?;
        if bits.len() != length {
            return Err(Error::Parse { line: i + 1, msg: format!("frame has {} bits, expected {length}", bits.len()) });
        }
        out.push(bits);
    }
    Ok(out)
}

/// Control events as `tick polarity` lines.
pub fn parse_controls(text: &str) -> Result<BTreeMap<u64, Polarity>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
        let mut parts = line.split_whitespace();
        let tick: u64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad tick"))?;
        let polarity = match parts.next() {
            Some("pleasure") => Polarity::Pleasure,
            Some("pain") => Polarity::Pain,
            _ => return Err(err("polarity must be pleasure or pain")),
        };
        if parts.next().is_some() {
            return Err(err("trailing text"));
        }
        out.insert(tick, polarity);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ticks: u64,
    pub responses: usize,
    pub dropped: usize,
    pub patches: usize,
}

/// Run every frame, writing the header and one record per tick.
pub fn run(
    cfg: RunConfig,
    basis_text: &str,
    frames: &[Bits],
    controls: &BTreeMap<u64, Polarity>,
    out: &mut dyn Write,
) -> Result<RunSummary> {
    let basis = parse_basis(basis_text, cfg.derived_budget)?;
    let mut sim = Simulation::new(cfg, &basis)?;
    let io = |e: std::io::Error| Error::arg(format!("trace write failed: {e}"));
    let json = |e: serde_json::Error| Error::arg(format!("trace encode failed: {e}"));
    writeln!(out, "{}", serde_json::to_string(&sim.header()).map_err(json)?).map_err(io)?;
    let mut summary = RunSummary::default();
    for f in frames {
        let control = controls.get(&sim.tick).copied();
        let rec = sim.step(f, control)?;
        summary.ticks += 1;
        summary.responses += usize::from(rec.response.is_some());
        summary.dropped += usize::from(rec.decision.resolution == Resolution::Dropped);
        summary.patches += rec.patches.len();
        writeln!(out, "{}", serde_json::to_string(&rec).map_err(json)?).map_err(io)?;
    }
    Ok(summary)
}
