//! Heralding on detection patterns, conditional fringe scans and sinusoidal
//! visibility fits.
//!
//! Detectors are ideal and photon-number resolving: a pattern demands exact
//! counts on each listed mode.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{wrap_angle, Circuit};
use crate::error::{Error, Result};
use crate::fock::{mode, FockState, ModeId};

/// Exact photon counts demanded on a set of modes.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectionPattern {
    demands: BTreeMap<ModeId, u32>,
}

impl DetectionPattern {
    pub fn new<I>(demands: I) -> Self
    where
        I: IntoIterator<Item = (ModeId, u32)>,
    {
        DetectionPattern {
            demands: demands.into_iter().collect(),
        }
    }

    pub fn demands(&self) -> impl Iterator<Item = (&ModeId, u32)> {
        self.demands.iter().map(|(m, n)| (m, *n))
    }

    pub fn modes(&self) -> impl Iterator<Item = &ModeId> {
        self.demands.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .demands
            .iter()
            .map(|(m, n)| format!("{m}={n}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Single photon at b_out, nothing at c_out.
pub fn b_click() -> DetectionPattern {
    DetectionPattern::new([(mode("b_out"), 1), (mode("c_out"), 0)])
}

/// Single photon at c_out, nothing at b_out.
pub fn c_click() -> DetectionPattern {
    DetectionPattern::new([(mode("b_out"), 0), (mode("c_out"), 1)])
}

/// Feed-forward phase applied on the scanned beam for each herald pattern.
/// Patterns not listed get zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTable {
    entries: Vec<(DetectionPattern, f64)>,
}

impl CorrectionTable {
    pub fn new(entries: Vec<(DetectionPattern, f64)>) -> Self {
        CorrectionTable { entries }
    }

    /// b-click -> 0, c-click -> pi.
    pub fn fig1() -> Self {
        CorrectionTable::new(vec![(b_click(), 0.0), (c_click(), PI)])
    }

    pub fn phase_for(&self, pattern: &DetectionPattern) -> f64 {
        self.entries
            .iter()
            .find(|(p, _)| p == pattern)
            .map(|(_, phi)| *phi)
            .unwrap_or(0.0)
    }
}

/// Result of conditioning a state on a detection pattern.
#[derive(Clone, Debug)]
pub struct HeraldOutcome {
    pub probability: f64,
    /// Normalized state of the undetected modes; `None` iff the pattern
    /// cannot occur.
    pub conditional_state: Option<FockState>,
    pub correction_phase: f64,
}

impl HeraldOutcome {
    pub fn is_empty(&self) -> bool {
        self.conditional_state.is_none()
    }
}

pub fn herald(
    state: &FockState,
    pattern: &DetectionPattern,
    corrections: &CorrectionTable,
) -> Result<HeraldOutcome> {
    let p = state.project(pattern)?;
    let (probability, conditional_state) = match p.remainder {
        Some(s) if p.probability > 0.0 => (p.probability, Some(s)),
        _ => (0.0, None),
    };
    Ok(HeraldOutcome {
        probability,
        conditional_state,
        correction_phase: corrections.phase_for(pattern),
    })
}

/// A final detection pattern together with the id used in output files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPattern {
    pub id: String,
    pub counts: DetectionPattern,
}

impl LabeledPattern {
    pub fn new(id: &str, counts: DetectionPattern) -> Self {
        LabeledPattern {
            id: id.to_string(),
            counts,
        }
    }
}

/// The two single-click outcomes behind BS4 of the fig1 device.
pub fn bs4_patterns() -> Vec<LabeledPattern> {
    vec![
        LabeledPattern::new(
            "a_out",
            DetectionPattern::new([(mode("a_out"), 1), (mode("d_out"), 0)]),
        ),
        LabeledPattern::new(
            "d_out",
            DetectionPattern::new([(mode("a_out"), 0), (mode("d_out"), 1)]),
        ),
    ]
}

/// `n` uniform points on `[0, 2 pi)`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

pub const DEFAULT_GRID_POINTS: usize = 64;

/// What to scan and what to record.
#[derive(Clone, Debug)]
pub struct ScanSpec {
    pub herald: DetectionPattern,
    pub scan_mode: ModeId,
    pub grid: Vec<f64>,
    pub final_patterns: Vec<LabeledPattern>,
    /// Extra phase added on the scanned beam (feed-forward correction).
    pub correction_phase: f64,
}

impl ScanSpec {
    /// Fig1 scan: given herald, phase on d, BS4 single-click outcomes,
    /// default 64-point grid, no correction.
    pub fn fig1(herald: DetectionPattern) -> Self {
        ScanSpec {
            herald,
            scan_mode: mode("d"),
            grid: uniform_grid(DEFAULT_GRID_POINTS),
            final_patterns: bs4_patterns(),
            correction_phase: 0.0,
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_correction(mut self, phase: f64) -> Self {
        self.correction_phase = phase;
        self
    }
}

/// Conditional detection probabilities sampled over a phase grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeData {
    pub phase_grid: Vec<f64>,
    pub pattern_ids: Vec<String>,
    /// `probabilities[i][k]`: pattern `k` at grid point `i`, conditioned on
    /// the herald.
    pub probabilities: Vec<Vec<f64>>,
    pub herald_probabilities: Vec<f64>,
    /// Grid indices where the herald has zero probability; their rows are
    /// all zero.
    pub flagged: Vec<usize>,
}

impl FringeData {
    /// Column of conditional probabilities for one pattern.
    pub fn series(&self, pattern_id: &str) -> Result<Vec<f64>> {
        let k = self
            .pattern_ids
            .iter()
            .position(|p| p == pattern_id)
            .ok_or_else(|| Error::UnknownPattern(pattern_id.to_string()))?;
        Ok(self.probabilities.iter().map(|row| row[k]).collect())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty()
        || grid.iter().any(|x| !x.is_finite())
        || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Runs the circuit at every grid phase (injected on the scanned beam before
/// its last beam splitter), heralds, and records conditional probabilities.
///
/// Grid points are evaluated in parallel and assembled by index.
pub fn fringe_scan(circuit: &Circuit, spec: &ScanSpec) -> Result<FringeData> {
    check_grid(&spec.grid)?;
    let rows = spec
        .grid
        .par_iter()
        .map(|phi| -> Result<(f64, Option<Vec<f64>>)> {
            let c = circuit.with_scan_phase(&spec.scan_mode, phi + spec.correction_phase);
            let state = c.simulate()?;
            let p = state.project(&spec.herald)?;
            let Some(rem) = p.remainder.filter(|_| p.probability > 0.0) else {
                return Ok((0.0, None));
            };
            let probs = spec
                .final_patterns
                .iter()
                .map(|fp| rem.project(&fp.counts).map(|q| q.probability))
                .collect::<Result<Vec<f64>>>()?;
            Ok((p.probability, Some(probs)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut data = FringeData {
        phase_grid: spec.grid.clone(),
        pattern_ids: spec.final_patterns.iter().map(|p| p.id.clone()).collect(),
        probabilities: Vec::with_capacity(rows.len()),
        herald_probabilities: Vec::with_capacity(rows.len()),
        flagged: Vec::new(),
    };
    for (i, (hp, probs)) in rows.into_iter().enumerate() {
        data.herald_probabilities.push(hp);
        match probs {
            Some(p) => data.probabilities.push(p),
            None => {
                data.flagged.push(i);
                data.probabilities
                    .push(vec![0.0; spec.final_patterns.len()]);
            }
        }
    }
    Ok(data)
}

/// Fit of `p(phi) = A (1 - V cos(phi - offset))`.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityFit {
    pub visibility: f64,
    /// `None` when the data carry no modulation.
    pub phase_offset: Option<f64>,
    pub mean: f64,
    pub residual_rms: f64,
}

/// Linear least squares on `{1, cos phi, sin phi}`, then amplitude and phase
/// recovery.
pub fn fit_fringe(phases: &[f64], values: &[f64]) -> Result<VisibilityFit> {
    let n = phases.len().min(values.len());
    let mut distinct: Vec<f64> = phases[..n].iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 3 {
        return Err(Error::TooFewPoints(distinct.len()));
    }
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => phases[i].cos(),
        _ => phases[i].sin(),
    });
    let y = DVector::from_column_slice(&values[..n]);
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-14).expect("svd computed with u and v");
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);
    let resid = &design * &coef - &y;
    let residual_rms = (resid.norm_squared() / n as f64).sqrt();

    let amp = c1.hypot(c2);
    if amp <= 1e-12 * c0.abs().max(1e-300) || c0 <= 0.0 {
        return Ok(VisibilityFit {
            visibility: 0.0,
            phase_offset: None,
            mean: c0,
            residual_rms,
        });
    }
    Ok(VisibilityFit {
        visibility: amp / c0,
        // adding zero turns a -0.0 offset into 0.0
        phase_offset: Some(wrap_angle((-c2).atan2(-c1)) + 0.0),
        mean: c0,
        residual_rms,
    })
}

/// Fits the fringe of one recorded pattern, skipping flagged grid points.
pub fn extract_visibility(data: &FringeData, pattern_id: &str) -> Result<VisibilityFit> {
    let series = data.series(pattern_id)?;
    let (phases, values): (Vec<f64>, Vec<f64>) = data
        .phase_grid
        .iter()
        .zip(series)
        .enumerate()
        .filter(|(i, _)| !data.flagged.contains(i))
        .map(|(_, (p, v))| (*p, v))
        .unzip();
    fit_fringe(&phases, &values)
}
