//! Linear optical elements acting on creation operators.
//!
//! A beam splitter with transfer matrix `U` maps output annihilation
//! operators as `out_j = sum_k U[j][k] in_k`. Since `U` is unitary, the input
//! creation operators are substituted by `in_k^dagger = sum_j U[j][k]
//! out_j^dagger`, term by term, which is how states are pushed through it.
//!
//! Phase shifters, Aharonov-Bohm flux segments and mirrors all multiply a
//! term by `exp(i * phi * n)`. Flux segments are kept as a separate element
//! so that circuits can assign and audit loop fluxes independently of the
//! scanned phase.

use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId};

/// Phase convention of a beam splitter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `[[sqrt t, sqrt(1-t)], [sqrt(1-t), -sqrt t]]`
    #[default]
    RealHadamard,
    /// `[[sqrt t, i sqrt(1-t)], [i sqrt(1-t), sqrt t]]`
    SymmetricI,
}

fn half() -> f64 {
    0.5
}

/// Two-mode beam splitter. Output names may reuse the input names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterSpec {
    pub inputs: [ModeId; 2],
    pub outputs: [ModeId; 2],
    #[serde(default)]
    pub convention: Convention,
    #[serde(default = "half")]
    pub transmissivity: f64,
}

impl BeamSplitterSpec {
    pub fn new(inputs: [ModeId; 2], outputs: [ModeId; 2]) -> Self {
        BeamSplitterSpec {
            inputs,
            outputs,
            convention: Convention::RealHadamard,
            transmissivity: 0.5,
        }
    }

    /// 50-50 splitter whose outputs keep the input names.
    pub fn in_place(first: ModeId, second: ModeId) -> Self {
        BeamSplitterSpec::new([first.clone(), second.clone()], [first, second])
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_transmissivity(mut self, transmissivity: f64) -> Self {
        self.transmissivity = transmissivity;
        self
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.transmissivity) {
            return Err(Error::InvalidTransmissivity(self.transmissivity));
        }
        if self.inputs[0] == self.inputs[1] {
            return Err(Error::RepeatedPort(self.inputs[0].to_string()));
        }
        if self.outputs[0] == self.outputs[1] {
            return Err(Error::RepeatedPort(self.outputs[0].to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseShifterSpec {
    pub mode: ModeId,
    pub phi: f64,
}

/// Path-ordered vector-potential phase picked up along one beam segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSegmentSpec {
    pub mode: ModeId,
    pub segment_phase: f64,
}

/// Mirror; identity unless a reflection phase is configured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    pub mode: ModeId,
    #[serde(default)]
    pub phase: f64,
}

/// 2x2 transfer matrix of a beam splitter.
pub fn transfer_matrix(spec: &BeamSplitterSpec) -> Result<Matrix2<Complex64>> {
    spec.check()?;
    let t = spec.transmissivity;
    let tr = Complex64::new(t.sqrt(), 0.0);
    let rf = (1.0 - t).sqrt();
    Ok(match spec.convention {
        Convention::RealHadamard => {
            let r = Complex64::new(rf, 0.0);
            Matrix2::new(tr, r, r, -tr)
        }
        Convention::SymmetricI => {
            let r = Complex64::new(0.0, rf);
            Matrix2::new(tr, r, r, tr)
        }
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// Applies an arbitrary 2x2 matrix to a pair of modes, optionally
/// renaming them. The matrix is not checked for unitarity.
pub fn apply_two_mode_transform(
    state: &FockState,
    inputs: [&ModeId; 2],
    outputs: [&ModeId; 2],
    matrix: &Matrix2<Complex64>,
) -> Result<FockState> {
    let registry = state.registry();
    let i1 = registry.index(inputs[0])?;
    let i2 = registry.index(inputs[1])?;
    if i1 == i2 {
        return Err(Error::RepeatedPort(inputs[0].to_string()));
    }
    let out_registry = if outputs[0] == inputs[0] && outputs[1] == inputs[1] {
        state.registry_arc().clone()
    } else {
        Arc::new(registry.renamed(&[(i1, outputs[0]), (i2, outputs[1])])?)
    };

    // in_1^dagger -> u00 out_1^dagger + u10 out_2^dagger
    // in_2^dagger -> u01 out_1^dagger + u11 out_2^dagger
    let (u00, u01, u10, u11) = (
        matrix[(0, 0)],
        matrix[(0, 1)],
        matrix[(1, 0)],
        matrix[(1, 1)],
    );
    let mut terms = Vec::new();
    for (occ, amp) in state.terms() {
        let n1 = occ.counts()[i1];
        let n2 = occ.counts()[i2];
        let input_norm = (factorial(n1) * factorial(n2)).sqrt();
        for k in 0..=n1 {
            let ck = binomial(n1, k) * u00.powu(k) * u10.powu(n1 - k);
            for l in 0..=n2 {
                let cl = binomial(n2, l) * u01.powu(l) * u11.powu(n2 - l);
                let m1 = k + l;
                let m2 = n1 + n2 - m1;
                let ket_norm = (factorial(m1) * factorial(m2)).sqrt();
                let mut next = occ.clone();
                next.counts_mut()[i1] = m1;
                next.counts_mut()[i2] = m2;
                terms.push((next, amp * ck * cl * (ket_norm / input_norm)));
            }
        }
    }
    Ok(FockState::from_terms(out_registry, terms))
}

/// Pushes `state` through a beam splitter.
pub fn apply_beam_splitter(state: &FockState, spec: &BeamSplitterSpec) -> Result<FockState> {
    let u = transfer_matrix(spec)?;
    apply_two_mode_transform(
        state,
        [&spec.inputs[0], &spec.inputs[1]],
        [&spec.outputs[0], &spec.outputs[1]],
        &u,
    )
}

fn finite(value: f64, name: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub fn apply_phase(state: &FockState, spec: &PhaseShifterSpec) -> Result<FockState> {
    finite(spec.phi, "phi")?;
    state.with_mode_phase(&spec.mode, spec.phi)
}

/// Same action as a phase shifter with `phi = segment_phase`.
pub fn apply_flux_segment(state: &FockState, spec: &FluxSegmentSpec) -> Result<FockState> {
    finite(spec.segment_phase, "segment_phase")?;
    state.with_mode_phase(&spec.mode, spec.segment_phase)
}

pub fn apply_mirror(state: &FockState, spec: &MirrorSpec) -> Result<FockState> {
    finite(spec.phase, "phase")?;
    if spec.phase == 0.0 {
        state.registry().index(&spec.mode)?;
        return Ok(state.clone());
    }
    state.with_mode_phase(&spec.mode, spec.phase)
}

/// Any element a circuit can hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    BeamSplitter(BeamSplitterSpec),
    Phase(PhaseShifterSpec),
    Flux(FluxSegmentSpec),
    Mirror(MirrorSpec),
}

impl Element {
    pub fn apply(&self, state: &FockState) -> Result<FockState> {
        match self {
            Element::BeamSplitter(s) => apply_beam_splitter(state, s),
            Element::Phase(s) => apply_phase(state, s),
            Element::Flux(s) => apply_flux_segment(state, s),
            Element::Mirror(s) => apply_mirror(state, s),
        }
    }

    /// Modes that must be live when the element fires.
    pub fn inputs(&self) -> Vec<&ModeId> {
        match self {
            Element::BeamSplitter(s) => s.inputs.iter().collect(),
            Element::Phase(s) => vec![&s.mode],
            Element::Flux(s) => vec![&s.mode],
            Element::Mirror(s) => vec![&s.mode],
        }
    }

    /// Modes that are live after the element fires, in input order.
    pub fn outputs(&self) -> Vec<&ModeId> {
        match self {
            Element::BeamSplitter(s) => s.outputs.iter().collect(),
            _ => self.inputs(),
        }
    }

    /// Parameter checks that do not depend on the state.
    pub fn check(&self) -> Result<()> {
        match self {
            Element::BeamSplitter(s) => s.check(),
            Element::Phase(s) => finite(s.phi, "phi"),
            Element::Flux(s) => finite(s.segment_phase, "segment_phase"),
            Element::Mirror(s) => finite(s.phase, "phase"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mode, ModeRegistry};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn is_unitary(u: &Matrix2<Complex64>) -> bool {
        let p = u * u.adjoint();
        close(p[(0, 0)], c(1.0, 0.0))
            && close(p[(1, 1)], c(1.0, 0.0))
            && close(p[(0, 1)], c(0.0, 0.0))
            && close(p[(1, 0)], c(0.0, 0.0))
    }

    fn reg(names: &[&str]) -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::from_names(names).unwrap())
    }

    #[test]
    fn real_hadamard_matrix() {
        let u = transfer_matrix(&BeamSplitterSpec::in_place(mode("b"), mode("c"))).unwrap();
        let h = FRAC_1_SQRT_2;
        assert!(close(u[(0, 0)], c(h, 0.0)));
        assert!(close(u[(0, 1)], c(h, 0.0)));
        assert!(close(u[(1, 0)], c(h, 0.0)));
        assert!(close(u[(1, 1)], c(-h, 0.0)));
        assert!(is_unitary(&u));
    }

    #[test]
    fn full_transmission_limit() {
        let spec = BeamSplitterSpec::in_place(mode("a"), mode("b")).with_transmissivity(1.0);
        let u = transfer_matrix(&spec).unwrap();
        assert_eq!(
            u,
            Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
        );
    }

    #[test]
    fn symmetric_i_matrix_is_unitary() {
        let spec = BeamSplitterSpec::in_place(mode("a"), mode("b"))
            .with_convention(Convention::SymmetricI);
        let u = transfer_matrix(&spec).unwrap();
        let h = FRAC_1_SQRT_2;
        assert!(close(u[(0, 0)], c(h, 0.0)));
        assert!(close(u[(0, 1)], c(0.0, h)));
        assert!(close(u[(1, 0)], c(0.0, h)));
        assert!(close(u[(1, 1)], c(h, 0.0)));
        assert!(is_unitary(&u));
        for t in [0.0, 0.1, 0.37, 0.9, 1.0] {
            for conv in [Convention::RealHadamard, Convention::SymmetricI] {
                let s = spec.clone().with_transmissivity(t).with_convention(conv);
                assert!(is_unitary(&transfer_matrix(&s).unwrap()));
            }
        }
    }

    #[test]
    fn transmissivity_out_of_range() {
        for t in [-0.1, 1.5] {
            let spec = BeamSplitterSpec::in_place(mode("a"), mode("b")).with_transmissivity(t);
            assert_eq!(
                transfer_matrix(&spec).unwrap_err(),
                Error::InvalidTransmissivity(t)
            );
        }
    }

    #[test]
    fn single_photon_splits_evenly() {
        let r = reg(&["a", "b"]);
        let s = FockState::basis(r, &[(mode("a"), 1)]).unwrap();
        let out =
            apply_beam_splitter(&s, &BeamSplitterSpec::in_place(mode("a"), mode("b"))).unwrap();
        assert!(close(
            out.amplitude(&[(mode("a"), 1)]).unwrap(),
            c(FRAC_1_SQRT_2, 0.0)
        ));
        assert!(close(
            out.amplitude(&[(mode("b"), 1)]).unwrap(),
            c(FRAC_1_SQRT_2, 0.0)
        ));
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        // b^dagger c^dagger |0> -> (b_out^dagger^2 - c_out^dagger^2)/2 |0>
        let r = reg(&["b", "c"]);
        let s = FockState::basis(r, &[(mode("b"), 1), (mode("c"), 1)]).unwrap();
        let spec = BeamSplitterSpec::new([mode("b"), mode("c")], [mode("b_out"), mode("c_out")]);
        let out = apply_beam_splitter(&s, &spec).unwrap();
        assert_eq!(out.registry().modes(), &[mode("b_out"), mode("c_out")]);
        let coinc = out
            .amplitude(&[(mode("b_out"), 1), (mode("c_out"), 1)])
            .unwrap();
        assert!(coinc.norm() < 1e-12);
        let bb = out.amplitude(&[(mode("b_out"), 2)]).unwrap();
        let cc = out.amplitude(&[(mode("c_out"), 2)]).unwrap();
        // monomial coefficient 1/2 on a squared creator -> ket amplitude sqrt(2)/2
        assert!(close(bb, c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(cc, c(-FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn beam_splitter_then_inverse_is_identity() {
        let r = reg(&["a", "b"]);
        let s = FockState::basis(r.clone(), &[(mode("a"), 2), (mode("b"), 1)]).unwrap();
        let spec = BeamSplitterSpec::in_place(mode("a"), mode("b"))
            .with_convention(Convention::SymmetricI)
            .with_transmissivity(0.3);
        let u = transfer_matrix(&spec).unwrap();
        let fwd = apply_beam_splitter(&s, &spec).unwrap();
        let a = mode("a");
        let b = mode("b");
        let back = apply_two_mode_transform(&fwd, [&a, &b], [&a, &b], &u.adjoint()).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
        assert!((back.inner_product(&s).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn output_collision_rejected() {
        let r = reg(&["a", "b", "c"]);
        let s = FockState::vacuum(r).unwrap();
        let spec = BeamSplitterSpec::new([mode("a"), mode("b")], [mode("c"), mode("x")]);
        assert!(
            matches!(apply_beam_splitter(&s, &spec), Err(Error::OutputCollision(m)) if m == "c")
        );
        let spec = BeamSplitterSpec::new([mode("a"), mode("q")], [mode("a"), mode("q")]);
        assert!(matches!(apply_beam_splitter(&s, &spec), Err(Error::UnknownMode(m)) if m == "q"));
    }

    #[test]
    fn phase_shifter_actions() {
        let r = reg(&["a", "b"]);
        let s10 = FockState::basis(r.clone(), &[(mode("a"), 1)]).unwrap();
        let s01 = FockState::basis(r.clone(), &[(mode("b"), 1)]).unwrap();
        let h = c(FRAC_1_SQRT_2, 0.0);
        let s = FockState::superpose(&[(h, &s10), (h, &s01)]).unwrap();

        let id = apply_phase(
            &s,
            &PhaseShifterSpec {
                mode: mode("a"),
                phi: 0.0,
            },
        )
        .unwrap();
        assert!((id.inner_product(&s).unwrap() - c(1.0, 0.0)).norm() < 1e-15);

        let phi = 0.7;
        let out = apply_phase(
            &s,
            &PhaseShifterSpec {
                mode: mode("a"),
                phi,
            },
        )
        .unwrap();
        assert!(close(
            out.amplitude(&[(mode("a"), 1)]).unwrap(),
            Complex64::from_polar(FRAC_1_SQRT_2, phi)
        ));
        assert!(close(out.amplitude(&[(mode("b"), 1)]).unwrap(), h));

        let s20 = FockState::basis(r, &[(mode("a"), 2)]).unwrap();
        let out = apply_phase(
            &s20,
            &PhaseShifterSpec {
                mode: mode("a"),
                phi,
            },
        )
        .unwrap();
        assert!(close(
            out.amplitude(&[(mode("a"), 2)]).unwrap(),
            Complex64::from_polar(1.0, 2.0 * phi)
        ));

        assert!(matches!(
            apply_phase(
                &s20,
                &PhaseShifterSpec {
                    mode: mode("z"),
                    phi
                }
            ),
            Err(Error::UnknownMode(_))
        ));
        assert_eq!(
            apply_phase(
                &s20,
                &PhaseShifterSpec {
                    mode: mode("a"),
                    phi: f64::NAN
                }
            )
            .unwrap_err(),
            Error::NonFinite("phi")
        );
    }

    #[test]
    fn flux_segment_interference_depends_on_difference() {
        // Two-path state, segment phases on each path, recombined: only
        // phi_1 - phi_2 matters.
        let r = reg(&["p1", "p2"]);
        let s1 = FockState::basis(r.clone(), &[(mode("p1"), 1)]).unwrap();
        let s2 = FockState::basis(r, &[(mode("p2"), 1)]).unwrap();
        let h = c(FRAC_1_SQRT_2, 0.0);
        let s = FockState::superpose(&[(h, &s1), (h, &s2)]).unwrap();
        let detect = |p1: f64, p2: f64| {
            let x = apply_flux_segment(
                &s,
                &FluxSegmentSpec {
                    mode: mode("p1"),
                    segment_phase: p1,
                },
            )
            .unwrap();
            let x = apply_flux_segment(
                &x,
                &FluxSegmentSpec {
                    mode: mode("p2"),
                    segment_phase: p2,
                },
            )
            .unwrap();
            let x = apply_beam_splitter(&x, &BeamSplitterSpec::in_place(mode("p1"), mode("p2")))
                .unwrap();
            x.amplitude(&[(mode("p1"), 1)]).unwrap().norm_sqr()
        };
        let base = detect(0.9, 0.2);
        assert!((detect(1.4, 0.7) - base).abs() < 1e-12);
        assert!((detect(0.7, 0.0) - base).abs() < 1e-12);
        assert!((detect(0.0, 0.0) - detect(2.0 * PI, 0.0)).abs() < 1e-12);
        let zero = apply_flux_segment(
            &s,
            &FluxSegmentSpec {
                mode: mode("p1"),
                segment_phase: 0.0,
            },
        )
        .unwrap();
        assert!((zero.inner_product(&s).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn element_serde_uses_kind_tag() {
        let e: Element = serde_json::from_str(
            r#"{"kind":"beam_splitter","inputs":["a","b"],"outputs":["a","b"],"convention":"symmetric-i"}"#,
        )
        .unwrap();
        match &e {
            Element::BeamSplitter(s) => {
                assert_eq!(s.convention, Convention::SymmetricI);
                assert_eq!(s.transmissivity, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        let m: Element = serde_json::from_str(r#"{"kind":"mirror","mode":"a"}"#).unwrap();
        assert_eq!(
            m,
            Element::Mirror(MirrorSpec {
                mode: mode("a"),
                phase: 0.0
            })
        );
    }
}
