//! Signal-layer regions, conditioning classes, the stereotype that runs them,
//! and speech routing.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::bitspace::Region;
use crate::boolalg::Var;
use crate::classes::{ClassId, ClassOp, Provenance, SimpleClass};
use crate::error::{Error, Result};
use crate::profile::{OpKind, OptionProfile};

pub use crate::basis_file::SpeechDirection;

pub const EMOTIONS_WIDTH: usize = 4;
pub const FAILURE_WIDTH: usize = 8;
pub const EGO_WIDTH: usize = 8;
pub const INTERNAL_WIDTH: usize = 4;
pub const OUTPUT_WIDTH: usize = 8;
pub const RESERVED_WIDTH: usize = EMOTIONS_WIDTH + FAILURE_WIDTH + EGO_WIDTH + INTERNAL_WIDTH + OUTPUT_WIDTH;

/// Partition of the signal layer. External input comes first, the reserved
/// regions follow in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMap {
    pub length: usize,
    pub input: Region,
    pub emotions: Region,
    pub failure: Region,
    pub ego: Region,
    pub internal: Region,
    pub output: Region,
}

impl RegionMap {
    pub fn new(length: usize) -> Result<Self> {
        if length <= RESERVED_WIDTH {
            return Err(Error::Config(format!("layer length must exceed {RESERVED_WIDTH}")));
        }
        let mut at = length - RESERVED_WIDTH;
        let mut next = |w: usize| {
            let r = Region::new(at, at + w - 1);
            at += w;
            r
        };
        Ok(RegionMap {
            length,
            input: Region::new(0, length - RESERVED_WIDTH - 1),
            emotions: next(EMOTIONS_WIDTH),
            failure: next(FAILURE_WIDTH),
            ego: next(EGO_WIDTH),
            internal: next(INTERNAL_WIDTH),
            output: next(OUTPUT_WIDTH),
        })
    }

    pub fn regions(&self) -> [(&'static str, Region); 6] {
        [
            ("input", self.input),
            ("emotions", self.emotions),
            ("failure", self.failure),
            ("ego", self.ego),
            ("internal", self.internal),
            ("output", self.output),
        ]
    }

    pub fn is_partition(&self) -> bool {
        let rs = self.regions();
        let mut at = 0;
        for (_, r) in rs {
            if r.begin != at {
                return false;
            }
            at = r.end + 1;
        }
        at == self.length
    }
}

/// Overwrite `region` of `frame` with `content`, truncating or zero-padding.
pub fn write_region(frame: &mut Bits, region: Region, content: &Bits) {
    for i in 0..region.len() {
        frame.set(region.begin + i, content.get(i).unwrap_or(false));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Qualification {
    Yes,
    ExternalQuality(crate::boolalg::QualityId),
}

/// A class can run on its own when every verb reads only qualities its own
/// adjectives produce.
pub fn qualifies_conditioning(class: &SimpleClass) -> Qualification {
    let own = class.own_qualities();
    for v in &class.verbs {
        if let Some(q) = v.poly.quality_args().into_iter().find(|q| !own.contains(q)) {
            return Qualification::ExternalQuality(q);
        }
    }
    Qualification::Yes
}

/// A qualifying class bound to an input width and a private state region.
/// Its block is the input frame followed by the state bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningClass {
    pub id: ClassId,
    pub class: SimpleClass,
    pub input_width: usize,
    pub private: Region,
}

impl ConditioningClass {
    pub fn new(id: ClassId, class: SimpleClass, input_width: usize, private: Region) -> Result<Self> {
        if let Qualification::ExternalQuality(q) = qualifies_conditioning(&class) {
            return Err(Error::Forbidden(format!("class {id} reads external quality {q}")));
        }
        if class.span() != input_width + private.len() {
            return Err(Error::arg(format!(
                "mask span {} must equal input {} plus state {}",
                class.span(),
                input_width,
                private.len()
            )));
        }
        Ok(ConditioningClass { id, class, input_width, private })
    }

    pub fn state_width(&self) -> usize {
        self.private.len()
    }

    /// One frame: `None` when the mask fails on the window, else the new state.
    pub fn step(&self, input: &Bits, state: &Bits) -> Result<Option<Bits>> {
        if input.len() != self.input_width || state.len() != self.state_width() {
            return Err(Error::arg("input or state width mismatch"));
        }
        let mut window = input.clone();
        window.extend_from(state);
        if !self.class.noun.mask.matches_at(window.as_slice(), 0) {
            return Ok(None);
        }
        let qualities: Vec<bool> =
            self.class.adjectives.iter().map(|a| a.poly.eval_bits(window.as_slice())).collect::<Result<_>>()?;
        for v in &self.class.verbs {
            let value = v.poly.eval_with(|var| match var {
                Var::Bit(i) => window.get(i),
                Var::Quality(q) => {
                    self.class.adjectives.iter().position(|a| a.output == q).map(|k| qualities[k])
                }
            })?;
            window.set(v.action_point, value);
        }
        Ok(Some(window.slice(self.input_width, window.len())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    /// Detected on every frame; `unloaded` is set when the horizon was reached.
    Detected { unloaded: Option<usize> },
    Failed { frame: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningRun {
    pub status: RunStatus,
    /// State after each processed frame.
    pub states: Vec<Bits>,
}

pub const DEFAULT_HORIZON: usize = 4;

/// Run from an all-zero state. The class is unloaded after `horizon`
/// consecutive detections, or fails at the first frame its mask rejects.
pub fn run_conditioning(r: &ConditioningClass, frames: &[Bits], horizon: usize) -> Result<ConditioningRun> {
    let mut state = Bits::zeros(r.state_width());
    let mut states = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        match r.step(f, &state)? {
            None => return Ok(ConditioningRun { status: RunStatus::Failed { frame: i }, states }),
            Some(next) => {
                state = next;
                states.push(state.clone());
                if horizon > 0 && states.len() >= horizon {
                    return Ok(ConditioningRun { status: RunStatus::Detected { unloaded: Some(i) }, states });
                }
            }
        }
    }
    Ok(ConditioningRun { status: RunStatus::Detected { unloaded: None }, states })
}

/// Report of a failed class for the failure region: a presence bit, the
/// class index in 3 bits and the frame index in 4 bits, both modulo.
pub fn failure_report(id: ClassId, frame: usize) -> Bits {
    let mut b = Bits::new();
    b.push(true);
    b.push_uint(u64::from(id.0 % 8), 3).unwrap();
    b.push_uint((frame % 16) as u64, 4).unwrap();
    b
}

pub fn decode_failure(bits: &Bits) -> Option<(u32, usize)> {
    let mut r = bits.reader();
    if !r.read_bit().ok()? {
        return None;
    }
    let id = r.read_uint(3).ok()? as u32;
    let frame = r.read_uint(4).ok()? as usize;
    Some((id, frame))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uploaded {
    pub class: ConditioningClass,
    pub state: Bits,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StereotypeEvent {
    Unloaded { class: ClassId, tick: u64 },
    Failed { class: ClassId, tick: u64, frame: usize },
}

/// Pool of running conditioning classes, stepped once per tick in upload order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stereotype {
    pub running: Vec<Uploaded>,
    pub horizon: usize,
}

impl Stereotype {
    pub fn new(horizon: usize) -> Self {
        Stereotype { running: Vec::new(), horizon }
    }

    pub fn upload(&mut self, class: ConditioningClass) {
        let state = Bits::zeros(class.state_width());
        self.running.push(Uploaded { class, state, detections: 0 });
    }

    /// Step every class on the input region of `frame`, write states into
    /// their private regions, and drop unloaded or failed classes.
    pub fn step(&mut self, frame: &mut Bits, tick: u64) -> Result<Vec<StereotypeEvent>> {
        let mut events = Vec::new();
        let mut keep = Vec::new();
        for mut u in std::mem::take(&mut self.running) {
            let input = frame.slice(0, u.class.input_width);
            match u.class.step(&input, &u.state)? {
                None => {
                    events.push(StereotypeEvent::Failed { class: u.class.id, tick, frame: u.detections });
                }
                Some(next) => {
                    write_region(frame, u.class.private, &next);
                    u.state = next;
                    u.detections += 1;
                    if self.horizon > 0 && u.detections >= self.horizon {
                        events.push(StereotypeEvent::Unloaded { class: u.class.id, tick });
                    } else {
                        keep.push(u);
                    }
                }
            }
        }
        self.running = keep;
        Ok(events)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub class: ClassId,
    pub direction: SpeechDirection,
    pub region: Region,
}

/// Binds conditioning classes to output regions. Only one class at a time
/// may hold the internal slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechRouter {
    pub map: RegionMap,
    pub internal: Option<ClassId>,
}

impl SpeechRouter {
    pub fn new(map: RegionMap) -> Self {
        SpeechRouter { map, internal: None }
    }

    pub fn route(&mut self, direction: SpeechDirection, class: ClassId) -> Result<SlotAssignment> {
        match direction {
            SpeechDirection::External => Ok(SlotAssignment { class, direction, region: self.map.output }),
            SpeechDirection::Internal => {
                if let Some(holder) = self.internal {
                    return Err(Error::Busy(holder.0));
                }
                self.internal = Some(class);
                Ok(SlotAssignment { class, direction, region: self.map.internal })
            }
        }
    }

    pub fn release_internal(&mut self) -> Option<ClassId> {
        self.internal.take()
    }
}

pub fn route_speech(direction: SpeechDirection, class: ClassId, router: &mut SpeechRouter) -> Result<SlotAssignment> {
    router.route(direction, class)
}

/// Run one class operation requested through speech. Only internal speech
/// may ask for it. Operations outside the profile's spontaneous set are
/// tagged as coming from internal speech.
pub fn invoke_nonspontaneous(
    class: &SimpleClass,
    op: ClassOp,
    via: &SlotAssignment,
    profile: &OptionProfile,
) -> Result<SimpleClass> {
    if via.direction != SpeechDirection::Internal {
        return Err(Error::Forbidden("class operations may only be requested by internal speech".into()));
    }
    let provenance = if profile.spontaneous().contains(OpKind::of(&op)) {
        Provenance::Engine
    } else {
        Provenance::InternalSpeech
    };
    class.apply(op, provenance)
}
