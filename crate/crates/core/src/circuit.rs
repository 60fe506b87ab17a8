//! Declarative interferometers: mode declarations, photon sources and an
//! ordered element list, plus Aharonov-Bohm loop bookkeeping.
//!
//! Element order is the source of truth for topology. A beam splitter that
//! renames its outputs retires its input names, so any later element still
//! referring to them is reported as an ordering violation by [`Circuit::validate`].

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elements::{BeamSplitterSpec, Element, FluxSegmentSpec, MirrorSpec, PhaseShifterSpec};
use crate::error::{Error, Result};
use crate::fock::{mode, FockState, ModeId, ModeRegistry, DEFAULT_MAX_PHOTONS};

fn default_max_photons() -> u32 {
    DEFAULT_MAX_PHOTONS
}

/// An element with an optional human-readable label ("BS3", "M1", ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitElement {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub element: Element,
}

impl CircuitElement {
    pub fn new(label: &str, element: Element) -> Self {
        CircuitElement {
            label: Some(label.to_string()),
            element,
        }
    }

    pub fn unlabeled(element: Element) -> Self {
        CircuitElement {
            label: None,
            element,
        }
    }
}

/// Photons created in a mode before any element fires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub mode: ModeId,
    #[serde(default = "one")]
    pub photons: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub modes: Vec<ModeId>,
    #[serde(default = "default_max_photons")]
    pub max_photons: u32,
    #[serde(default)]
    pub sources: Vec<Source>,
    #[serde(default)]
    pub elements: Vec<CircuitElement>,
}

/// A problem found by [`Circuit::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    NoModes,
    DuplicateMode(ModeId),
    UnknownSourceMode(ModeId),
    /// Element `element` refers to a mode that is never declared or produced.
    UnknownMode {
        element: usize,
        mode: ModeId,
    },
    /// The mode exists at some point, but not when the element fires.
    OrderingViolation {
        element: usize,
        mode: ModeId,
    },
    OutputCollision {
        element: usize,
        mode: ModeId,
    },
    InvalidElement {
        element: usize,
        reason: String,
    },
    Truncation {
        total: u32,
        max: u32,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoModes => write!(f, "no modes declared"),
            Diagnostic::DuplicateMode(m) => write!(f, "mode `{m}` declared twice"),
            Diagnostic::UnknownSourceMode(m) => write!(f, "source refers to unknown mode `{m}`"),
            Diagnostic::UnknownMode { element, mode } => {
                write!(f, "element {element}: unknown mode `{mode}`")
            }
            Diagnostic::OrderingViolation { element, mode } => {
                write!(
                    f,
                    "element {element}: mode `{mode}` is not live when the element fires"
                )
            }
            Diagnostic::OutputCollision { element, mode } => {
                write!(
                    f,
                    "element {element}: output `{mode}` collides with a live mode"
                )
            }
            Diagnostic::InvalidElement { element, reason } => {
                write!(f, "element {element}: {reason}")
            }
            Diagnostic::Truncation { total, max } => {
                write!(f, "{total} source photons exceed truncation limit {max}")
            }
        }
    }
}

impl Circuit {
    pub fn new(modes: Vec<ModeId>) -> Self {
        Circuit {
            modes,
            max_photons: DEFAULT_MAX_PHOTONS,
            sources: Vec::new(),
            elements: Vec::new(),
        }
    }

    pub fn with_max_photons(mut self, max_photons: u32) -> Self {
        self.max_photons = max_photons;
        self
    }

    pub fn source(mut self, mode: ModeId, photons: u32) -> Self {
        self.sources.push(Source { mode, photons });
        self
    }

    pub fn push(mut self, label: &str, element: Element) -> Self {
        self.elements.push(CircuitElement::new(label, element));
        self
    }

    /// Lists everything wrong with the circuit; empty iff well-formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if self.modes.is_empty() {
            diags.push(Diagnostic::NoModes);
        }
        let mut live: Vec<ModeId> = Vec::new();
        for m in &self.modes {
            if live.contains(m) {
                diags.push(Diagnostic::DuplicateMode(m.clone()));
            } else {
                live.push(m.clone());
            }
        }
        for s in &self.sources {
            if !live.contains(&s.mode) {
                diags.push(Diagnostic::UnknownSourceMode(s.mode.clone()));
            }
        }
        let total: u32 = self.sources.iter().map(|s| s.photons).sum();
        if total > self.max_photons {
            diags.push(Diagnostic::Truncation {
                total,
                max: self.max_photons,
            });
        }

        let mut ever: BTreeSet<&ModeId> = self.modes.iter().collect();
        for e in &self.elements {
            if let Element::BeamSplitter(bs) = &e.element {
                ever.extend(bs.outputs.iter());
            }
        }

        for (i, e) in self.elements.iter().enumerate() {
            if let Err(err) = e.element.check() {
                diags.push(Diagnostic::InvalidElement {
                    element: i,
                    reason: err.to_string(),
                });
            }
            let inputs = e.element.inputs();
            let mut inputs_ok = true;
            for m in &inputs {
                if !live.contains(m) {
                    inputs_ok = false;
                    let mode = (*m).clone();
                    diags.push(if ever.contains(m) {
                        Diagnostic::OrderingViolation { element: i, mode }
                    } else {
                        Diagnostic::UnknownMode { element: i, mode }
                    });
                }
            }
            if !inputs_ok {
                continue;
            }
            if let Element::BeamSplitter(bs) = &e.element {
                for out in &bs.outputs {
                    if !bs.inputs.contains(out) && live.contains(out) {
                        diags.push(Diagnostic::OutputCollision {
                            element: i,
                            mode: out.clone(),
                        });
                    }
                }
                for (inp, out) in bs.inputs.iter().zip(&bs.outputs) {
                    if let Some(slot) = live.iter_mut().find(|m| *m == inp) {
                        *slot = out.clone();
                    }
                }
            }
        }
        diags
    }

    /// Registry of the declared (initial) modes.
    pub fn registry(&self) -> Result<ModeRegistry> {
        Ok(ModeRegistry::new(self.modes.clone())?.with_max_photons(self.max_photons))
    }

    /// Runs the circuit from the vacuum: sources first, then every element in
    /// order.
    pub fn simulate(&self) -> Result<FockState> {
        let diags = self.validate();
        if !diags.is_empty() {
            let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            return Err(Error::InvalidCircuit(text.join("; ")));
        }
        let mut state = FockState::vacuum(Arc::new(self.registry()?))?;
        for s in &self.sources {
            for _ in 0..s.photons {
                state = state.apply_creation(&s.mode)?;
            }
        }
        state = state
            .normalized()
            .ok_or_else(|| Error::InvalidCircuit("source state vanished".into()))?;
        for e in &self.elements {
            state = e.element.apply(&state)?;
        }
        state
            .normalized()
            .ok_or_else(|| Error::InvalidCircuit("state vanished".into()))
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.label.as_deref() == Some(label))
    }

    /// The circuit cut right after the element labeled `label`.
    pub fn through(&self, label: &str) -> Result<Circuit> {
        let idx = self
            .position(label)
            .ok_or_else(|| Error::InvalidCircuit(format!("no element labeled `{label}`")))?;
        let mut c = self.clone();
        c.elements.truncate(idx + 1);
        Ok(c)
    }

    /// Inserts an extra phase shifter on `mode` right before the last beam
    /// splitter that consumes it (or at the end if there is none).
    pub fn with_scan_phase(&self, mode: &ModeId, phi: f64) -> Circuit {
        let pos = self
            .elements
            .iter()
            .rposition(
                |e| matches!(&e.element, Element::BeamSplitter(bs) if bs.inputs.contains(mode)),
            )
            .unwrap_or(self.elements.len());
        let mut c = self.clone();
        c.elements.insert(
            pos,
            CircuitElement::new(
                "scan",
                Element::Phase(PhaseShifterSpec {
                    mode: mode.clone(),
                    phi,
                }),
            ),
        );
        c
    }

    /// Writes the assignment's segment phases into the circuit's flux
    /// elements (the first flux element on each mode).
    pub fn with_flux(&self, assignment: &FluxAssignment) -> Result<Circuit> {
        let mut c = self.clone();
        for (m, phase) in &assignment.segment_phases {
            let slot = c.elements.iter_mut().find_map(|e| match &mut e.element {
                Element::Flux(f) if &f.mode == m => Some(f),
                _ => None,
            });
            match slot {
                Some(f) => f.segment_phase = *phase,
                None => {
                    return Err(Error::InvalidCircuit(format!(
                        "no flux segment on mode `{m}`"
                    )))
                }
            }
        }
        Ok(c)
    }
}

/// One traversed beam in a closed loop. `reversed` means the loop runs
/// against the direction of propagation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LoopSegment {
    pub mode: ModeId,
    pub reversed: bool,
}

impl LoopSegment {
    pub fn forward(mode: ModeId) -> Self {
        LoopSegment {
            mode,
            reversed: false,
        }
    }

    pub fn backward(mode: ModeId) -> Self {
        LoopSegment {
            mode,
            reversed: true,
        }
    }
}

/// Parses `"+a"`, `"-d"` or a bare `"a"` (forward).
impl TryFrom<String> for LoopSegment {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        let (reversed, name) = match value.as_bytes().first() {
            Some(b'-') => (true, &value[1..]),
            Some(b'+') => (false, &value[1..]),
            _ => (false, value.as_str()),
        };
        Ok(LoopSegment {
            mode: ModeId::new(name)?,
            reversed,
        })
    }
}

impl From<LoopSegment> for String {
    fn from(s: LoopSegment) -> String {
        format!("{}{}", if s.reversed { '-' } else { '+' }, s.mode)
    }
}

/// Closed path around an enclosed area, with an overall orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxLoop {
    pub segments: Vec<LoopSegment>,
    /// `+1` counter-clockwise, `-1` clockwise.
    #[serde(default = "unit_winding")]
    pub winding: i8,
}

fn unit_winding() -> i8 {
    1
}

/// Segment phases per beam plus the loops whose enclosed flux is reported.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FluxAssignment {
    #[serde(default)]
    pub segment_phases: BTreeMap<ModeId, f64>,
    #[serde(default, rename = "loop")]
    pub loops: Vec<FluxLoop>,
}

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

impl FluxAssignment {
    /// Dimensionless flux enclosed by loop `loop_index`: the signed sum of
    /// segment phases along it, reduced to `(-pi, pi]`.
    pub fn enclosed_flux(&self, loop_index: usize) -> Result<f64> {
        let lp = self.loops.get(loop_index).ok_or(Error::LoopIndex {
            index: loop_index,
            count: self.loops.len(),
        })?;
        let sum: f64 = lp
            .segments
            .iter()
            .map(|s| {
                let p = self.segment_phases.get(&s.mode).copied().unwrap_or(0.0);
                if s.reversed {
                    -p
                } else {
                    p
                }
            })
            .sum();
        Ok(wrap_angle(f64::from(lp.winding) * sum))
    }
}

/// Built-in circuits.
pub mod fixtures {
    use super::*;
    use crate::elements::Convention;

    /// Single-photon Mach-Zehnder: BS1 on (a, b), phase `phi` on a, BS2 on
    /// (a, b). Outputs keep the input names.
    pub fn mach_zehnder(phi: f64, convention: Convention) -> Circuit {
        let bs = BeamSplitterSpec::in_place(mode("a"), mode("b")).with_convention(convention);
        Circuit::new(vec![mode("a"), mode("b")])
            .source(mode("a"), 1)
            .push("BS1", Element::BeamSplitter(bs.clone()))
            .push(
                "PS1",
                Element::Phase(PhaseShifterSpec {
                    mode: mode("a"),
                    phi,
                }),
            )
            .push("BS2", Element::BeamSplitter(bs))
    }

    /// The two-source coherence-swapping device.
    ///
    /// Source photons enter a and c. BS1 splits a into (a, b), BS2 splits c
    /// into (c, d); mirrors M1, M2 fold a and d; each of a, b, c, d carries
    /// a flux segment (zero by default); BS3 mixes (b, c) into (b_out,
    /// c_out); a phase shifter sits on d; BS4 mixes (a, d) into (a_out,
    /// d_out). The last splitter is called BS4 here; it is the same device
    /// sometimes written BM4 or BSX.
    pub fn fig1() -> Circuit {
        let flux = |m: &str| {
            Element::Flux(FluxSegmentSpec {
                mode: mode(m),
                segment_phase: 0.0,
            })
        };
        Circuit::new(vec![mode("a"), mode("b"), mode("c"), mode("d")])
            .source(mode("a"), 1)
            .source(mode("c"), 1)
            .push(
                "BS1",
                Element::BeamSplitter(BeamSplitterSpec::in_place(mode("a"), mode("b"))),
            )
            .push(
                "BS2",
                Element::BeamSplitter(BeamSplitterSpec::in_place(mode("c"), mode("d"))),
            )
            .push(
                "M1",
                Element::Mirror(MirrorSpec {
                    mode: mode("a"),
                    phase: 0.0,
                }),
            )
            .push(
                "M2",
                Element::Mirror(MirrorSpec {
                    mode: mode("d"),
                    phase: 0.0,
                }),
            )
            .push("flux_a", flux("a"))
            .push("flux_b", flux("b"))
            .push("flux_c", flux("c"))
            .push("flux_d", flux("d"))
            .push(
                "BS3",
                Element::BeamSplitter(BeamSplitterSpec::new(
                    [mode("b"), mode("c")],
                    [mode("b_out"), mode("c_out")],
                )),
            )
            .push(
                "PS",
                Element::Phase(PhaseShifterSpec {
                    mode: mode("d"),
                    phi: 0.0,
                }),
            )
            .push(
                "BS4",
                Element::BeamSplitter(BeamSplitterSpec::new(
                    [mode("a"), mode("d")],
                    [mode("a_out"), mode("d_out")],
                )),
            )
    }

    /// The internal loop of [`fig1`]: BS1 -a-> BS4 <-d- BS2 -c-> BS3 <-b- BS1.
    pub fn fig1_loop() -> FluxLoop {
        FluxLoop {
            segments: vec![
                LoopSegment::forward(mode("a")),
                LoopSegment::backward(mode("d")),
                LoopSegment::forward(mode("c")),
                LoopSegment::backward(mode("b")),
            ],
            winding: 1,
        }
    }

    /// Flux assignment over [`fig1_loop`] with the given segment phases.
    pub fn fig1_flux(phases: &[(&str, f64)]) -> FluxAssignment {
        FluxAssignment {
            segment_phases: phases.iter().map(|(m, p)| (mode(m), *p)).collect(),
            loops: vec![fig1_loop()],
        }
    }
}
