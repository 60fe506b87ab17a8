//! Pulsed down-conversion: joint detection amplitudes and the visibility of
//! the four-fold coincidence fringe.
//!
//! Spectral profiles are Gaussian, `h(w) = exp(-(w - center)^2 / (2 width^2))`,
//! and time-domain functions use `H(t) = (2 pi)^(-1/2) int dw e^{iwt} h(w)`,
//! which gives `H(t) = width * e^{i center t} * e^{-width^2 t^2 / 2}`.
//!
//! The phase-matching function is taken in its infinite-crystal limit, so the
//! amplitude to detect one photon of a pair at `t_x` in beam x and the other
//! at `t_y` in beam y is the convolution
//!
//! ```text
//! A_xy(t_x, t_y) = (2 pi)^(-1/2) int dt G(t) F_x(t_x - t) F_y(t_y - t)
//! ```
//!
//! An unfiltered beam has `f = 1`, i.e. `F(t) = sqrt(2 pi) delta(t)`, and the
//! amplitude collapses to `G(t_y) F_x(t_x - t_y)`.
//!
//! The fringe visibility is
//!
//! ```text
//! V = int d^4t |A_ad A_bc A_bd A_ac| / int d^4t |A_ad A_bc|^2
//! ```
//!
//! with `A_ad = A_ad(t_a, t_d)` etc. Identical Gaussian filters on the two
//! trigger beams (a, b) with the other two beams unfiltered give exactly
//! `V = sigma_p / sqrt(sigma_p^2 + sigma_f^2)`. Filtering all four beams is
//! also supported by the quadrature but does not follow that formula.
//!
//! Units are arbitrary but shared: times are in units of the inverse of
//! whatever frequency unit the widths use. Only `sigma_f / sigma_p` matters.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Pump,
    Filter,
}

/// Gaussian amplitude profile of the pump pulse or of a filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub center: f64,
    pub width: f64,
    pub kind: ProfileKind,
    /// Time offset of the time-domain envelope.
    #[serde(default)]
    pub delay: f64,
}

impl SpectralProfile {
    pub fn new(kind: ProfileKind, center: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::NonPositiveWidth(width));
        }
        if !center.is_finite() {
            return Err(Error::NonFinite("center"));
        }
        Ok(SpectralProfile {
            center,
            width,
            kind,
            delay: 0.0,
        })
    }

    pub fn pump(center: f64, width: f64) -> Result<Self> {
        SpectralProfile::new(ProfileKind::Pump, center, width)
    }

    pub fn filter(center: f64, width: f64) -> Result<Self> {
        SpectralProfile::new(ProfileKind::Filter, center, width)
    }

    pub fn delayed(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    /// Same profile with the width multiplied by `k`.
    pub fn rescaled(mut self, k: f64) -> Self {
        self.width *= k;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::NonPositiveWidth(self.width));
        }
        Ok(())
    }

    /// `h(w)`.
    pub fn spectrum(&self, omega: f64) -> f64 {
        let x = (omega - self.center) / self.width;
        (-0.5 * x * x).exp()
    }

    /// `H(t)`, including the delay.
    pub fn time_domain(&self, t: f64) -> Complex64 {
        let s = t - self.delay;
        Complex64::from_polar(
            self.width * (-0.5 * self.width * self.width * s * s).exp(),
            self.center * s,
        )
    }
}

/// Filter in front of a detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filter {
    Gaussian(SpectralProfile),
    /// No filtering: flat transmission.
    Open,
}

/// Which beam pair an amplitude describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeamPair {
    AD,
    BC,
    BD,
    AC,
}

/// Closed-form evaluator of `A_xy(t_x, t_y)` for Gaussian inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointAmplitude {
    pub pump: SpectralProfile,
    pub filter_x: Filter,
    pub filter_y: Filter,
    pub pair: Option<BeamPair>,
}

/// Builds the amplitude for a pump and two Gaussian filters.
pub fn joint_amplitude(
    pump: &SpectralProfile,
    filter_x: &SpectralProfile,
    filter_y: &SpectralProfile,
) -> Result<JointAmplitude> {
    JointAmplitude::new(
        *pump,
        Filter::Gaussian(*filter_x),
        Filter::Gaussian(*filter_y),
    )
}

impl JointAmplitude {
    pub fn new(pump: SpectralProfile, filter_x: Filter, filter_y: Filter) -> Result<Self> {
        pump.check()?;
        for f in [&filter_x, &filter_y] {
            if let Filter::Gaussian(p) = f {
                p.check()?;
            }
        }
        if filter_x == Filter::Open && filter_y == Filter::Open {
            return Err(Error::UnfilteredPair);
        }
        Ok(JointAmplitude {
            pump,
            filter_x,
            filter_y,
            pair: None,
        })
    }

    pub fn for_pair(mut self, pair: BeamPair) -> Self {
        self.pair = Some(pair);
        self
    }

    /// `A_xy(t_x, t_y)`.
    pub fn eval(&self, tx: f64, ty: f64) -> Complex64 {
        let p = &self.pump;
        match (&self.filter_x, &self.filter_y) {
            (Filter::Gaussian(fx), Filter::Gaussian(fy)) => {
                // shift every profile's delay onto the detection times
                let tx = tx - p.delay - fx.delay;
                let ty = ty - p.delay - fy.delay;
                let (sx2, sy2) = (fx.width * fx.width, fy.width * fy.width);
                let s = p.width * p.width + sx2 + sy2;
                let detuning = p.center - fx.center - fy.center;
                let b = Complex64::new(sx2 * tx + sy2 * ty, detuning);
                let exponent = b * b / (2.0 * s)
                    + Complex64::new(
                        -0.5 * (sx2 * tx * tx + sy2 * ty * ty),
                        fx.center * tx + fy.center * ty,
                    );
                (p.width * fx.width * fy.width / s.sqrt()) * exponent.exp()
            }
            (Filter::Gaussian(fx), Filter::Open) => p.time_domain(ty) * fx.time_domain(tx - ty),
            (Filter::Open, Filter::Gaussian(fy)) => p.time_domain(tx) * fy.time_domain(ty - tx),
            (Filter::Open, Filter::Open) => unreachable!("rejected at construction"),
        }
    }

    /// Precision matrix `M` of the envelope `|A| ~ exp(-t^T M t / 2)` about
    /// the delayed origin.
    pub fn envelope_precision(&self) -> Matrix2<f64> {
        let sp2 = self.pump.width * self.pump.width;
        match (&self.filter_x, &self.filter_y) {
            (Filter::Gaussian(fx), Filter::Gaussian(fy)) => {
                let (sx2, sy2) = (fx.width * fx.width, fy.width * fy.width);
                let s = sp2 + sx2 + sy2;
                Matrix2::new(
                    sx2 - sx2 * sx2 / s,
                    -sx2 * sy2 / s,
                    -sx2 * sy2 / s,
                    sy2 - sy2 * sy2 / s,
                )
            }
            (Filter::Gaussian(fx), Filter::Open) => {
                let sx2 = fx.width * fx.width;
                Matrix2::new(sx2, -sx2, -sx2, sx2 + sp2)
            }
            (Filter::Open, Filter::Gaussian(fy)) => {
                let sy2 = fy.width * fy.width;
                Matrix2::new(sp2 + sy2, -sy2, -sy2, sy2)
            }
            (Filter::Open, Filter::Open) => unreachable!("rejected at construction"),
        }
    }

    /// Time about which the envelope along each axis is centred.
    fn envelope_center(&self) -> (f64, f64) {
        let d = |f: &Filter| match f {
            Filter::Gaussian(p) => p.delay,
            Filter::Open => 0.0,
        };
        match (&self.filter_x, &self.filter_y) {
            (Filter::Gaussian(_), Filter::Gaussian(_)) => (
                self.pump.delay + d(&self.filter_x),
                self.pump.delay + d(&self.filter_y),
            ),
            (Filter::Gaussian(_), Filter::Open) => {
                (self.pump.delay + d(&self.filter_x), self.pump.delay)
            }
            _ => (self.pump.delay, self.pump.delay + d(&self.filter_y)),
        }
    }
}

/// Trapezoid evaluation of the convolution integral, independent of the
/// closed form. Open filters are handled exactly (the integral collapses).
pub fn convolve_numeric(amp: &JointAmplitude, tx: f64, ty: f64, points: usize) -> Complex64 {
    let p = &amp.pump;
    match (&amp.filter_x, &amp.filter_y) {
        (Filter::Gaussian(fx), Filter::Gaussian(fy)) => {
            // the integrand is confined by each factor; cover the pump envelope
            // and both filter envelopes around their peaks
            let spans = [
                (p.delay, 1.0 / p.width),
                (tx - fx.delay, 1.0 / fx.width),
                (ty - fy.delay, 1.0 / fy.width),
            ];
            let lo = spans
                .iter()
                .map(|(c, w)| c - 12.0 * w)
                .fold(f64::INFINITY, f64::min);
            let hi = spans
                .iter()
                .map(|(c, w)| c + 12.0 * w)
                .fold(f64::NEG_INFINITY, f64::max);
            let n = points.max(3);
            let h = (hi - lo) / (n - 1) as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let t = lo + h * k as f64;
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                acc += w * p.time_domain(t) * fx.time_domain(tx - t) * fy.time_domain(ty - t);
            }
            acc * h / (2.0 * PI).sqrt()
        }
        (Filter::Gaussian(fx), Filter::Open) => p.time_domain(ty) * fx.time_domain(tx - ty),
        (Filter::Open, Filter::Gaussian(fy)) => p.time_domain(tx) * fy.time_domain(ty - tx),
        (Filter::Open, Filter::Open) => unreachable!("rejected at construction"),
    }
}

/// Where the identical filters sit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterPlacement {
    /// Filters on the trigger beams a and b; c and d unfiltered.
    #[default]
    TriggerBeams,
    /// The same filter on all four beams.
    AllBeams,
}

/// How amplitudes are tabulated for the quadrature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeMethod {
    #[default]
    ClosedForm,
    /// Trapezoid convolution of the time-domain functions.
    Convolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VisibilityMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    #[serde(rename = "V")]
    pub visibility: f64,
    pub method: VisibilityMethod,
    pub estimated_error: f64,
}

/// Exact visibility for identical Gaussian trigger filters:
/// `V = (sigma_p^2 / (sigma_p^2 + sigma_f^2))^(1/2)`.
pub fn visibility_closed_form(
    pump: &SpectralProfile,
    filter: &SpectralProfile,
) -> Result<VisibilityResult> {
    pump.check()?;
    filter.check()?;
    let sp2 = pump.width * pump.width;
    let sf2 = filter.width * filter.width;
    Ok(VisibilityResult {
        visibility: (sp2 / (sp2 + sf2)).sqrt(),
        method: VisibilityMethod::ClosedForm,
        estimated_error: 0.0,
    })
}

/// `sigma_f = 0` limit of [`visibility_closed_form`] is one; this is the
/// same expression written for raw widths, accepting a zero filter width.
pub fn visibility_from_widths(sigma_p: f64, sigma_f: f64) -> Result<f64> {
    if sigma_p.is_nan() || sigma_p <= 0.0 {
        return Err(Error::NonPositiveWidth(sigma_p));
    }
    if sigma_f.is_nan() || sigma_f < 0.0 {
        return Err(Error::NonPositiveWidth(sigma_f));
    }
    Ok((sigma_p * sigma_p / (sigma_p * sigma_p + sigma_f * sigma_f)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Points per axis of the primary grid.
    pub points: usize,
    /// Points per axis of the refinement check.
    pub refined_points: usize,
    /// Half-width of each axis in units of the envelope's marginal standard
    /// deviation.
    pub span_sigmas: f64,
    /// Largest accepted change of V between the two grids.
    pub tolerance: f64,
    pub placement: FilterPlacement,
    pub amplitudes: AmplitudeMethod,
    /// Points of the inner trapezoid rule when amplitudes are convolved.
    pub convolution_points: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            points: 41,
            refined_points: 61,
            span_sigmas: 6.0,
            tolerance: 1e-4,
            placement: FilterPlacement::TriggerBeams,
            amplitudes: AmplitudeMethod::ClosedForm,
            convolution_points: 401,
        }
    }
}

/// The four amplitudes entering the visibility integral.
#[derive(Clone, Copy, Debug)]
pub struct FourBeamAmplitudes {
    pub ad: JointAmplitude,
    pub bc: JointAmplitude,
    pub bd: JointAmplitude,
    pub ac: JointAmplitude,
}

impl FourBeamAmplitudes {
    pub fn new(
        pump: &SpectralProfile,
        filter: &SpectralProfile,
        placement: FilterPlacement,
    ) -> Result<Self> {
        let f = Filter::Gaussian(*filter);
        let signal = match placement {
            FilterPlacement::TriggerBeams => Filter::Open,
            FilterPlacement::AllBeams => f,
        };
        // first slot is always a trigger beam (a or b), second a signal beam
        let make = |pair| JointAmplitude::new(*pump, f, signal).map(|a| a.for_pair(pair));
        Ok(FourBeamAmplitudes {
            ad: make(BeamPair::AD)?,
            bc: make(BeamPair::BC)?,
            bd: make(BeamPair::BD)?,
            ac: make(BeamPair::AC)?,
        })
    }

    /// Per-axis (a, b, c, d) centre and marginal standard deviation of the
    /// larger of the numerator and denominator envelopes.
    fn axis_extent(&self) -> [(f64, f64); 4] {
        const A: usize = 0;
        const B: usize = 1;
        const C: usize = 2;
        const D: usize = 3;
        let embed = |m: Matrix2<f64>, i: usize, j: usize, into: &mut Matrix4<f64>, scale: f64| {
            into[(i, i)] += scale * m[(0, 0)];
            into[(i, j)] += scale * m[(0, 1)];
            into[(j, i)] += scale * m[(1, 0)];
            into[(j, j)] += scale * m[(1, 1)];
        };
        let mut num = Matrix4::zeros();
        embed(self.ad.envelope_precision(), A, D, &mut num, 1.0);
        embed(self.bc.envelope_precision(), B, C, &mut num, 1.0);
        embed(self.bd.envelope_precision(), B, D, &mut num, 1.0);
        embed(self.ac.envelope_precision(), A, C, &mut num, 1.0);
        let mut den = Matrix4::zeros();
        embed(self.ad.envelope_precision(), A, D, &mut den, 2.0);
        embed(self.bc.envelope_precision(), B, C, &mut den, 2.0);

        let num_cov = num
            .try_inverse()
            .expect("numerator envelope is positive definite");
        let den_cov = den
            .try_inverse()
            .expect("denominator envelope is positive definite");
        let (ca, cd) = self.ad.envelope_center();
        let (cb, cc) = self.bc.envelope_center();
        let centers = [ca, cb, cc, cd];
        let mut out = [(0.0, 0.0); 4];
        for k in 0..4 {
            let sd = num_cov[(k, k)].max(den_cov[(k, k)]).sqrt();
            out[k] = (centers[k], sd);
        }
        out
    }
}

fn axis_grid(center: f64, half_width: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * half_width / (n - 1) as f64;
    let t = (0..n).map(|k| center - half_width + h * k as f64).collect();
    let w = (0..n)
        .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
        .collect();
    (t, w)
}

fn tabulate(
    amp: &JointAmplitude,
    tx: &[f64],
    ty: &[f64],
    method: AmplitudeMethod,
    conv_points: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(tx.len() * ty.len());
    for &x in tx {
        for &y in ty {
            let v = match method {
                AmplitudeMethod::ClosedForm => amp.eval(x, y),
                AmplitudeMethod::Convolution => convolve_numeric(amp, x, y, conv_points),
            };
            out.push(v.norm());
        }
    }
    out
}

/// Direct tensor-grid evaluation of the visibility integral with `n`
/// trapezoid points per axis. Returns `(numerator, denominator)`.
pub fn visibility_integrals(
    amps: &FourBeamAmplitudes,
    opts: &QuadratureOptions,
    n: usize,
) -> (f64, f64) {
    let n = n.max(3);
    let extent = amps.axis_extent();
    let grids: Vec<(Vec<f64>, Vec<f64>)> = extent
        .iter()
        .map(|(c, sd)| axis_grid(*c, opts.span_sigmas * sd, n))
        .collect();
    let (ta, wa) = &grids[0];
    let (tb, wb) = &grids[1];
    let (tc, wc) = &grids[2];
    let (td, wd) = &grids[3];
    let m = opts.amplitudes;
    let cp = opts.convolution_points;
    let ad = tabulate(&amps.ad, ta, td, m, cp);
    let bc = tabulate(&amps.bc, tb, tc, m, cp);
    let bd = tabulate(&amps.bd, tb, td, m, cp);
    let ac = tabulate(&amps.ac, ta, tc, m, cp);

    // one partial sum per a-index, combined in index order
    let partials: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|ia| {
            let mut num = 0.0;
            let mut den = 0.0;
            for ib in 0..n {
                let wab = wa[ia] * wb[ib];
                for ic in 0..n {
                    let bc_v = bc[ib * n + ic];
                    let ac_v = ac[ia * n + ic];
                    let wabc = wab * wc[ic];
                    for id in 0..n {
                        let ad_v = ad[ia * n + id];
                        let w = wabc * wd[id];
                        let pair = ad_v * bc_v;
                        num += w * pair * bd[ib * n + id] * ac_v;
                        den += w * pair * pair;
                    }
                }
            }
            (num, den)
        })
        .collect();
    partials
        .iter()
        .fold((0.0, 0.0), |(n0, d0), (n1, d1)| (n0 + n1, d0 + d1))
}

/// Visibility by four-dimensional quadrature, with a refinement check.
pub fn visibility_quadrature(
    pump: &SpectralProfile,
    filter: &SpectralProfile,
    opts: &QuadratureOptions,
) -> Result<VisibilityResult> {
    pump.check()?;
    filter.check()?;
    let amps = FourBeamAmplitudes::new(pump, filter, opts.placement)?;
    let ratio = |n| {
        let (num, den) = visibility_integrals(&amps, opts, n);
        num / den
    };
    let coarse = ratio(opts.points);
    let fine = ratio(opts.refined_points);
    let delta = (fine - coarse).abs();
    if delta.is_nan() || delta > opts.tolerance {
        return Err(Error::NonConvergence {
            delta,
            tol: opts.tolerance,
        });
    }
    Ok(VisibilityResult {
        visibility: fine,
        method: VisibilityMethod::Quadrature,
        estimated_error: delta,
    })
}
