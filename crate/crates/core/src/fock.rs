//! Sparse Fock-space states over a small, named set of bosonic modes.
//!
//! A [`FockState`] maps occupation vectors to complex amplitudes. Amplitudes
//! are coefficients on *normalized* number kets,
//!
//! ```text
//! |n_1, ..., n_k> = prod_j (a_j^dagger)^{n_j} / sqrt(n_j!) |0>
//! ```
//!
//! so creation operators follow the usual ladder rule
//! `a^dagger |n> = sqrt(n + 1) |n + 1>`. A monomial written in operator form,
//! e.g. `1/2 (b^dagger)^2 |0>`, is therefore stored as amplitude
//! `1/2 * sqrt(2)` on the ket `|2>`.
//!
//! Every state carries the registry it was built over. The registry fixes the
//! mode order, the truncation on total photon number and the magnitude below
//! which amplitudes are dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditioning::DetectionPattern;
use crate::error::{Error, Result};

/// Default cap on the total photon number of any stored term.
pub const DEFAULT_MAX_PHOTONS: u32 = 4;

/// Amplitudes with magnitude below this are removed after every operation.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Name of an optical mode (a beam).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModeId(String);

impl ModeId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::EmptyModeName);
        }
        Ok(ModeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ModeId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        ModeId::new(value)
    }
}

impl TryFrom<&str> for ModeId {
    type Error = Error;
    fn try_from(value: &str) -> Result<Self> {
        ModeId::new(value)
    }
}

impl From<ModeId> for String {
    fn from(value: ModeId) -> Self {
        value.0
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for building a [`ModeId`] from a literal that is known to be
/// non-empty.
///
/// # Panics
///
/// Panics on an empty name.
pub fn mode(name: &str) -> ModeId {
    ModeId::new(name).expect("mode name must be non-empty")
}

/// Ordered set of mode names plus the truncation settings shared by every
/// state built over it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRegistry {
    modes: Vec<ModeId>,
    max_photons: u32,
    prune_threshold: f64,
}

impl ModeRegistry {
    pub fn new<I>(modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = ModeId>,
    {
        let modes: Vec<ModeId> = modes.into_iter().collect();
        if modes.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::DuplicateMode(m.to_string()));
            }
        }
        Ok(ModeRegistry {
            modes,
            max_photons: DEFAULT_MAX_PHOTONS,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        })
    }

    /// Builds a registry from string names.
    pub fn from_names(names: &[&str]) -> Result<Self> {
        let modes = names
            .iter()
            .map(|n| ModeId::new(*n))
            .collect::<Result<Vec<_>>>()?;
        ModeRegistry::new(modes)
    }

    pub fn with_max_photons(mut self, max_photons: u32) -> Self {
        self.max_photons = max_photons;
        self
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune_threshold = threshold;
        self
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn max_photons(&self) -> u32 {
        self.max_photons
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn contains(&self, mode: &ModeId) -> bool {
        self.modes.contains(mode)
    }

    /// Position of `mode` in occupation vectors.
    pub fn index(&self, mode: &ModeId) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))
    }

    /// Registry with the modes at `removed` taken out. `None` if nothing is
    /// left.
    fn without(&self, removed: &[usize]) -> Option<ModeRegistry> {
        let modes: Vec<ModeId> = self
            .modes
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, m)| m.clone())
            .collect();
        if modes.is_empty() {
            return None;
        }
        Some(ModeRegistry {
            modes,
            max_photons: self.max_photons,
            prune_threshold: self.prune_threshold,
        })
    }

    /// Registry with the modes at the given slots renamed. The result must
    /// still have unique names.
    pub(crate) fn renamed(&self, renames: &[(usize, &ModeId)]) -> Result<ModeRegistry> {
        let mut modes = self.modes.clone();
        for (idx, name) in renames {
            modes[*idx] = (*name).clone();
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::OutputCollision(m.to_string()));
            }
        }
        Ok(ModeRegistry {
            modes,
            max_photons: self.max_photons,
            prune_threshold: self.prune_threshold,
        })
    }
}

/// Photon counts, one entry per registered mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation(Vec<u32>);

impl Occupation {
    pub fn new(counts: Vec<u32>) -> Self {
        Occupation(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [u32] {
        &mut self.0
    }
}

/// Result of projecting a state onto a detection pattern.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Probability of the pattern (squared norm of the kept part relative to
    /// the input norm).
    pub probability: f64,
    /// Normalized state of the modes outside the pattern; `None` when the
    /// pattern has zero probability or no modes remain.
    pub remainder: Option<FockState>,
}

/// A pure state of the registered modes.
#[derive(Clone, Debug)]
pub struct FockState {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<Occupation, Complex64>,
}

fn same_registry(a: &Arc<ModeRegistry>, b: &Arc<ModeRegistry>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl FockState {
    /// The vacuum `|0, ..., 0>` with amplitude one.
    pub fn vacuum(registry: impl Into<Arc<ModeRegistry>>) -> Result<Self> {
        let registry = registry.into();
        if registry.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let mut terms = BTreeMap::new();
        terms.insert(
            Occupation(vec![0; registry.len()]),
            Complex64::new(1.0, 0.0),
        );
        Ok(FockState { registry, terms })
    }

    /// A state with no terms (the zero vector).
    pub fn empty(registry: impl Into<Arc<ModeRegistry>>) -> Self {
        FockState {
            registry: registry.into(),
            terms: BTreeMap::new(),
        }
    }

    /// Normalized number ket with the given counts; unlisted modes are empty.
    pub fn basis(registry: impl Into<Arc<ModeRegistry>>, counts: &[(ModeId, u32)]) -> Result<Self> {
        let registry = registry.into();
        let mut occ = vec![0u32; registry.len()];
        for (m, n) in counts {
            occ[registry.index(m)?] += n;
        }
        let total: u32 = occ.iter().sum();
        if total > registry.max_photons() {
            return Err(Error::Truncation {
                total,
                max: registry.max_photons(),
            });
        }
        let mut terms = BTreeMap::new();
        terms.insert(Occupation(occ), Complex64::new(1.0, 0.0));
        Ok(FockState { registry, terms })
    }

    /// Collects `(occupation, amplitude)` pairs, summing duplicates and
    /// pruning small amplitudes.
    pub(crate) fn from_terms<I>(registry: Arc<ModeRegistry>, terms: I) -> Self
    where
        I: IntoIterator<Item = (Occupation, Complex64)>,
    {
        let mut map: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, amp) in terms {
            *map.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let threshold = registry.prune_threshold();
        map.retain(|_, a| a.norm() >= threshold);
        FockState {
            registry,
            terms: map,
        }
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub(crate) fn registry_arc(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Amplitude on the ket with the given per-mode counts (missing modes are
    /// zero). Unknown modes are an error.
    pub fn amplitude(&self, counts: &[(ModeId, u32)]) -> Result<Complex64> {
        let mut occ = vec![0u32; self.registry.len()];
        for (m, n) in counts {
            occ[self.registry.index(m)?] = *n;
        }
        Ok(self
            .terms
            .get(&Occupation(occ))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<FockState> {
        let n = self.norm();
        if n == 0.0 {
            return None;
        }
        Some(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> FockState {
        FockState::from_terms(
            self.registry.clone(),
            self.terms.iter().map(|(o, a)| (o.clone(), a * factor)),
        )
    }

    /// Applies `a^dagger` of `mode`: `|n> -> sqrt(n + 1) |n + 1>`.
    pub fn apply_creation(&self, mode: &ModeId) -> Result<FockState> {
        let idx = self.registry.index(mode)?;
        let max = self.registry.max_photons();
        let mut out = Vec::with_capacity(self.terms.len());
        for (occ, amp) in &self.terms {
            let total = occ.total() + 1;
            if total > max {
                return Err(Error::Truncation { total, max });
            }
            let mut next = occ.clone();
            let n = next.0[idx];
            next.0[idx] = n + 1;
            out.push((next, amp * f64::from(n + 1).sqrt()));
        }
        Ok(FockState::from_terms(self.registry.clone(), out))
    }

    /// Applies `a` of `mode`: `|n> -> sqrt(n) |n - 1>`.
    pub fn apply_annihilation(&self, mode: &ModeId) -> Result<FockState> {
        let idx = self.registry.index(mode)?;
        let out = self.terms.iter().filter_map(|(occ, amp)| {
            let n = occ.0[idx];
            if n == 0 {
                return None;
            }
            let mut next = occ.clone();
            next.0[idx] = n - 1;
            Some((next, amp * f64::from(n).sqrt()))
        });
        Ok(FockState::from_terms(
            self.registry.clone(),
            out.collect::<Vec<_>>(),
        ))
    }

    /// Linear combination `sum_k c_k |s_k>`. All parts must share one registry.
    pub fn superpose(parts: &[(Complex64, &FockState)]) -> Result<FockState> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::EmptyRegistry);
        };
        let registry = first.registry.clone();
        if parts
            .iter()
            .any(|(_, s)| !same_registry(&s.registry, &registry))
        {
            return Err(Error::RegistryMismatch);
        }
        let terms = parts
            .iter()
            .flat_map(|(c, s)| s.terms.iter().map(move |(o, a)| (o.clone(), c * a)));
        Ok(FockState::from_terms(registry, terms.collect::<Vec<_>>()))
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner_product(&self, other: &FockState) -> Result<Complex64> {
        if !same_registry(&self.registry, &other.registry) {
            return Err(Error::RegistryMismatch);
        }
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (&self.terms, &other.terms, true)
        } else {
            (&other.terms, &self.terms, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (occ, a) in small {
            if let Some(b) = large.get(occ) {
                acc += if conj_small {
                    a.conj() * b
                } else {
                    b.conj() * a
                };
            }
        }
        Ok(acc)
    }

    /// `|<x|y>|^2 / (<x|x><y|y>)`; one iff the states agree up to a global
    /// phase and scale.
    pub fn fidelity(&self, other: &FockState) -> Result<f64> {
        let ip = self.inner_product(other)?;
        let denom = self.norm_sqr() * other.norm_sqr();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(ip.norm_sqr() / denom)
    }

    /// Multiplies each term by `exp(i * phi * n)`, `n` being the count in
    /// `mode`.
    pub(crate) fn with_mode_phase(&self, mode: &ModeId, phi: f64) -> Result<FockState> {
        let idx = self.registry.index(mode)?;
        let terms = self.terms.iter().map(|(occ, a)| {
            let n = f64::from(occ.0[idx]);
            (occ.clone(), a * Complex64::from_polar(1.0, phi * n))
        });
        Ok(FockState::from_terms(
            self.registry.clone(),
            terms.collect::<Vec<_>>(),
        ))
    }

    /// Keeps the terms whose counts on the pattern modes match exactly.
    ///
    /// The remainder is restricted to the modes outside the pattern and
    /// renormalized. Its global phase is whatever the algebra produces.
    pub fn project(&self, pattern: &DetectionPattern) -> Result<Projection> {
        let demands = pattern
            .demands()
            .map(|(m, n)| Ok((self.registry.index(m)?, n)))
            .collect::<Result<Vec<(usize, u32)>>>()?;
        let total = self.norm_sqr();
        let removed: Vec<usize> = demands.iter().map(|(i, _)| *i).collect();

        let kept: Vec<(&Occupation, &Complex64)> = self
            .terms
            .iter()
            .filter(|(occ, _)| demands.iter().all(|(i, n)| occ.0[*i] == *n))
            .collect();
        let kept_norm: f64 = kept.iter().map(|(_, a)| a.norm_sqr()).sum();
        if kept.is_empty() || total == 0.0 {
            return Ok(Projection {
                probability: 0.0,
                remainder: None,
            });
        }
        let probability = kept_norm / total;

        let remainder = self.registry.without(&removed).map(|reg| {
            let reg = Arc::new(reg);
            let scale = 1.0 / kept_norm.sqrt();
            let terms = kept.iter().map(|(occ, a)| {
                let counts = occ
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !removed.contains(i))
                    .map(|(_, c)| *c)
                    .collect();
                (Occupation(counts), *a * scale)
            });
            FockState::from_terms(reg, terms.collect::<Vec<_>>())
        });
        Ok(Projection {
            probability,
            remainder,
        })
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (occ, amp) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|", amp.re, amp.im)?;
            let parts: Vec<String> = self
                .registry
                .modes()
                .iter()
                .zip(occ.counts())
                .filter(|(_, n)| **n > 0)
                .map(|(m, n)| format!("{m}:{n}"))
                .collect();
            if parts.is_empty() {
                f.write_str("vac")?;
            } else {
                f.write_str(&parts.join(","))?;
            }
            f.write_str(">")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ab() -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::from_names(&["a", "b"]).unwrap())
    }

    #[test]
    fn vacuum_is_single_unit_term() {
        let vac = FockState::vacuum(ab()).unwrap();
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.amplitude(&[]).unwrap(), c(1.0));
        assert_eq!(vac.norm(), 1.0);

        let reg4 = ModeRegistry::from_names(&["a", "b", "c", "d"]).unwrap();
        let vac4 = FockState::vacuum(reg4).unwrap();
        let (occ, amp) = vac4.terms().next().unwrap();
        assert_eq!(occ.counts(), &[0, 0, 0, 0]);
        assert_eq!(*amp, c(1.0));
    }

    #[test]
    fn empty_registry_rejected() {
        assert_eq!(ModeRegistry::new(vec![]).unwrap_err(), Error::EmptyRegistry);
        assert_eq!(ModeId::new("").unwrap_err(), Error::EmptyModeName);
        assert!(matches!(
            ModeRegistry::from_names(&["a", "a"]),
            Err(Error::DuplicateMode(_))
        ));
    }

    #[test]
    fn creation_ladder_factors() {
        let vac = FockState::vacuum(ab()).unwrap();
        let one = vac.apply_creation(&mode("a")).unwrap();
        assert_eq!(one.amplitude(&[(mode("a"), 1)]).unwrap(), c(1.0));
        let two = one.apply_creation(&mode("a")).unwrap();
        let amp = two.amplitude(&[(mode("a"), 2)]).unwrap();
        assert!((amp.re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn creation_on_superposition() {
        // a^dagger (|1,0> + |0,1>)/sqrt2 = (sqrt2 |2,0> + |1,1>)/sqrt2
        let reg = ab();
        let s10 = FockState::basis(reg.clone(), &[(mode("a"), 1)]).unwrap();
        let s01 = FockState::basis(reg.clone(), &[(mode("b"), 1)]).unwrap();
        let s =
            FockState::superpose(&[(c(FRAC_1_SQRT_2), &s10), (c(FRAC_1_SQRT_2), &s01)]).unwrap();
        let out = s.apply_creation(&mode("a")).unwrap();
        let a20 = out.amplitude(&[(mode("a"), 2)]).unwrap();
        let a11 = out.amplitude(&[(mode("a"), 1), (mode("b"), 1)]).unwrap();
        assert!((a20.re - 1.0).abs() < 1e-15);
        assert!((a11.re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn creation_errors() {
        let vac = FockState::vacuum(ab()).unwrap();
        assert!(matches!(
            vac.apply_creation(&mode("x")),
            Err(Error::UnknownMode(m)) if m == "x"
        ));
        let reg = Arc::new(
            ModeRegistry::from_names(&["a"])
                .unwrap()
                .with_max_photons(1),
        );
        let one = FockState::vacuum(reg)
            .unwrap()
            .apply_creation(&mode("a"))
            .unwrap();
        assert_eq!(
            one.apply_creation(&mode("a")).unwrap_err(),
            Error::Truncation { total: 2, max: 1 }
        );
    }

    #[test]
    fn superpose_linearity_and_cancellation() {
        let reg = ab();
        let s10 = FockState::basis(reg.clone(), &[(mode("a"), 1)]).unwrap();
        let s01 = FockState::basis(reg.clone(), &[(mode("b"), 1)]).unwrap();

        let sum = FockState::superpose(&[(c(1.0), &s10), (c(1.0), &s01)]).unwrap();
        assert_eq!(sum.len(), 2);

        let zero = FockState::superpose(&[(c(1.0), &s10), (c(-1.0), &s10)]).unwrap();
        assert!(zero.is_empty());

        let same = FockState::superpose(&[(c(0.5), &sum), (c(0.5), &sum)]).unwrap();
        assert!((same.inner_product(&sum).unwrap() - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn registry_mismatch() {
        let s = FockState::vacuum(ab()).unwrap();
        let t = FockState::vacuum(ModeRegistry::from_names(&["a", "c"]).unwrap()).unwrap();
        assert_eq!(s.inner_product(&t).unwrap_err(), Error::RegistryMismatch);
        assert_eq!(
            FockState::superpose(&[(c(1.0), &s), (c(1.0), &t)]).unwrap_err(),
            Error::RegistryMismatch
        );
    }

    #[test]
    fn inner_products_of_basis() {
        let reg = ab();
        let vac = FockState::vacuum(reg.clone()).unwrap();
        assert_eq!(vac.inner_product(&vac).unwrap(), c(1.0));
        let s10 = FockState::basis(reg.clone(), &[(mode("a"), 1)]).unwrap();
        let s01 = FockState::basis(reg, &[(mode("b"), 1)]).unwrap();
        assert_eq!(s10.inner_product(&s01).unwrap(), c(0.0));
    }

    #[test]
    fn phased_superposition_has_unit_norm() {
        let reg = ab();
        let s10 = FockState::basis(reg.clone(), &[(mode("a"), 1)]).unwrap();
        let s01 = FockState::basis(reg, &[(mode("b"), 1)]).unwrap();
        for k in 0..16 {
            let phi = k as f64 * 0.4;
            let s = FockState::superpose(&[
                (Complex64::from_polar(FRAC_1_SQRT_2, phi), &s10),
                (c(FRAC_1_SQRT_2), &s01),
            ])
            .unwrap();
            assert!((s.inner_product(&s).unwrap() - c(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn project_no_match_is_empty() {
        let reg = ab();
        let s10 = FockState::basis(reg, &[(mode("a"), 1)]).unwrap();
        let p = s10
            .project(&DetectionPattern::new([(mode("b"), 1)]))
            .unwrap();
        assert_eq!(p.probability, 0.0);
        assert!(p.remainder.is_none());
        assert!(matches!(
            s10.project(&DetectionPattern::new([(mode("z"), 1)])),
            Err(Error::UnknownMode(_))
        ));
    }

    #[test]
    fn project_restricts_and_renormalizes() {
        let reg = ab();
        let s11 = FockState::basis(reg.clone(), &[(mode("a"), 1), (mode("b"), 1)]).unwrap();
        let s20 = FockState::basis(reg, &[(mode("a"), 2)]).unwrap();
        let s = FockState::superpose(&[(c(0.6), &s11), (c(0.8), &s20)]).unwrap();
        let p = s.project(&DetectionPattern::new([(mode("b"), 1)])).unwrap();
        assert!((p.probability - 0.36).abs() < 1e-15);
        let rem = p.remainder.unwrap();
        assert_eq!(rem.registry().modes(), &[mode("a")]);
        assert!((rem.amplitude(&[(mode("a"), 1)]).unwrap() - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn display_lists_occupied_modes() {
        let reg = ab();
        let s = FockState::basis(reg, &[(mode("b"), 2)]).unwrap();
        assert_eq!(s.to_string(), "(1.000000+0.000000i)|b:2>");
    }
}
