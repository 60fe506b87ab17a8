//! Scenario files and the runner behind the `cohswap` binary.
//!
//! A scenario is a single TOML document with these sections, all optional
//! except `name`:
//!
//! ```toml
//! name = "fig1"
//!
//! [circuit]                      # modes, sources, ordered elements
//! modes = ["a", "b", "c", "d"]
//! max_photons = 4
//! sources = [{ mode = "a", photons = 1 }, { mode = "c", photons = 1 }]
//!
//! [[circuit.elements]]
//! label = "BS1"
//! kind = "beam_splitter"         # beam_splitter | phase | flux | mirror
//! inputs = ["a", "b"]
//! outputs = ["a", "b"]
//! convention = "real-hadamard"   # or "symmetric-i"
//! transmissivity = 0.5
//!
//! [herald]                       # detection pattern behind the mixing splitter
//! pattern = { b_out = 1, c_out = 0 }
//! correction_phase = 0.0
//!
//! [scan]                         # phase scan and recorded outcomes
//! mode = "d"
//! grid = 64
//! patterns = [{ id = "a_out", counts = { a_out = 1, d_out = 0 } }]
//!
//! [flux.segment_phases]          # written into the circuit's flux elements
//! a = 0.8
//! [[flux.loop]]
//! segments = ["+a", "-d", "+c", "-b"]
//!
//! [spectral]                     # pulsed down-conversion visibility sweep
//! sigma_p = 1.0
//! sigma_f = [0.5, 1.0, 2.0]
//!
//! [output]                       # file names inside the output directory
//! fringe_csv = "fringe.csv"
//! ```
//!
//! A run writes the fringe CSV (`phi_radians,pattern_id,probability`), a fit
//! summary, the visibility JSON records and a manifest holding the config
//! hash and the effective config. Output is deterministic for a given
//! config.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{Circuit, FluxAssignment};
use crate::conditioning::{
    extract_visibility, fringe_scan, uniform_grid, DetectionPattern, FringeData, LabeledPattern,
    ScanSpec, DEFAULT_GRID_POINTS,
};
use crate::error::Error;
use crate::fock::ModeId;
use crate::spectral::{
    visibility_closed_form, visibility_quadrature, AmplitudeMethod, FilterPlacement,
    QuadratureOptions, SpectralProfile,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Built-in scenarios as `(name, source text)`.
pub const BUILTINS: &[(&str, &str)] = &[
    ("fig1", include_str!("../scenarios/fig1.scenario")),
    ("fig1_flux", include_str!("../scenarios/fig1_flux.scenario")),
    ("pdc_sweep", include_str!("../scenarios/pdc_sweep.scenario")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".scenario").unwrap_or(name);
    BUILTINS.iter().find(|(n, _)| *n == stem).map(|(_, s)| *s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldConfig {
    pub pattern: DetectionPattern,
    #[serde(default)]
    pub correction_phase: f64,
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub mode: ModeId,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub patterns: Vec<LabeledPattern>,
}

fn default_tol() -> f64 {
    QuadratureOptions::default().tolerance
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub sigma_p: f64,
    pub sigma_f: Vec<f64>,
    #[serde(default)]
    pub pump_center: f64,
    #[serde(default)]
    pub filter_center: f64,
    #[serde(default)]
    pub placement: FilterPlacement,
    #[serde(default)]
    pub amplitudes: AmplitudeMethod,
    #[serde(default = "default_tol")]
    pub quad_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub fringe_csv: String,
    pub fringe_fit: String,
    pub visibility_json: String,
    pub manifest: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            fringe_csv: "fringe.csv".into(),
            fringe_fit: "fringe_fit.json".into(),
            visibility_json: "visibility.json".into(),
            manifest: "manifest.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<Circuit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herald: Option<HeraldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<FluxAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    /// Parses scenario text; syntax errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(vec![e.to_string()]))
    }

    /// Recovers the effective config embedded in a run manifest.
    pub fn from_manifest(json: &str) -> Result<Self, RunError> {
        let m: Manifest =
            serde_json::from_str(json).map_err(|e| RunError::Config(vec![e.to_string()]))?;
        Ok(m.config)
    }

    /// Circuit with the flux assignment written in, if any.
    pub fn effective_circuit(&self) -> Result<Option<Circuit>, Error> {
        match (&self.circuit, &self.flux) {
            (Some(c), Some(f)) => c.with_flux(f).map(Some),
            (Some(c), None) => Ok(Some(c.clone())),
            _ => Ok(None),
        }
    }

    /// Semantic checks; empty iff the scenario can run.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        match self.effective_circuit() {
            Ok(Some(c)) => diags.extend(c.validate().iter().map(|d| format!("circuit: {d}"))),
            Ok(None) => {}
            Err(e) => diags.push(format!("flux: {e}")),
        }
        if let Some(flux) = &self.flux {
            for (i, lp) in flux.loops.iter().enumerate() {
                if lp.winding != 1 && lp.winding != -1 {
                    diags.push(format!("flux.loop[{i}]: winding must be +1 or -1"));
                }
            }
        }
        match (&self.circuit, &self.herald, &self.scan) {
            (Some(_), Some(_), Some(scan)) => {
                if scan.grid < 3 {
                    diags.push(format!(
                        "scan.grid: need at least 3 points, got {}",
                        scan.grid
                    ));
                }
                if scan.patterns.is_empty() {
                    diags.push("scan.patterns: at least one pattern required".into());
                }
            }
            (None, None, None) => {}
            _ => diags.push("circuit, herald and scan must be given together".into()),
        }
        if let Some(sp) = &self.spectral {
            if !positive(sp.sigma_p) {
                diags.push(format!(
                    "spectral.sigma_p: must be positive, got {}",
                    sp.sigma_p
                ));
            }
            if sp.sigma_f.is_empty() {
                diags.push("spectral.sigma_f: at least one width required".into());
            }
            for (i, w) in sp.sigma_f.iter().enumerate() {
                if !positive(*w) {
                    diags.push(format!("spectral.sigma_f[{i}]: must be positive, got {w}"));
                }
            }
            if !positive(sp.quad_tol) {
                diags.push("spectral.quad_tol: must be positive".into());
            }
        }
        if self.circuit.is_none() && self.spectral.is_none() {
            diags.push("scenario has neither a circuit nor a spectral section".into());
        }
        diags
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// One visibility record of the spectral sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct VisibilityRecord {
    pub sigma_p: f64,
    pub sigma_f: f64,
    pub V_closed: f64,
    pub V_quad: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternFit {
    pub pattern_id: String,
    pub visibility: f64,
    pub phase_offset: Option<f64>,
    pub mean: f64,
    pub residual_rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub herald_probability: f64,
    pub flagged_points: Vec<usize>,
    pub enclosed_flux: Vec<f64>,
    pub fits: Vec<PatternFit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub config: ScenarioConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    NonConvergence(Error),
    #[error("simulation failed: {0}")]
    Simulation(Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::NonConvergence(_) => 3,
            RunError::Simulation(_) | RunError::Io { .. } => 1,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub grid: Option<usize>,
    pub quad_tol: Option<f64>,
    /// Recorded in the manifest; the model is deterministic.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub fringe: Option<FringeData>,
    pub fit: Option<FitSummary>,
    pub visibility: Vec<VisibilityRecord>,
    pub written: Vec<PathBuf>,
}

/// Fringe CSV: header plus one row per (grid point, pattern), LF endings.
/// Flagged grid points (zero herald probability) are written as `NaN`.
pub fn emit_fringe_csv(data: &FringeData, path: &Path) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["phi_radians", "pattern_id", "probability"])?;
    for (i, (phi, row)) in data.phase_grid.iter().zip(&data.probabilities).enumerate() {
        let flagged = data.flagged.contains(&i);
        for (id, p) in data.pattern_ids.iter().zip(row) {
            let prob = if flagged {
                "NaN".to_string()
            } else {
                format!("{p:.15e}")
            };
            w.write_record([format!("{phi:.15e}"), id.clone(), prob])?;
        }
    }
    w.flush()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

/// Runs a scenario given as text.
pub fn run_text(text: &str, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let mut config = ScenarioConfig::parse(text)?;
    if let (Some(n), Some(scan)) = (opts.grid, config.scan.as_mut()) {
        scan.grid = n;
    }
    if let (Some(t), Some(sp)) = (opts.quad_tol, config.spectral.as_mut()) {
        sp.quad_tol = t;
    }
    let diags = config.validate();
    if !diags.is_empty() {
        return Err(RunError::Config(diags));
    }

    fs::create_dir_all(&opts.out_dir).map_err(|e| RunError::io(&opts.out_dir, e))?;
    let mut written = Vec::new();

    let mut fringe = None;
    let mut fit = None;
    if let (Some(circuit), Some(herald), Some(scan)) = (
        config.effective_circuit().map_err(RunError::Simulation)?,
        &config.herald,
        &config.scan,
    ) {
        let spec = ScanSpec {
            herald: herald.pattern.clone(),
            scan_mode: scan.mode.clone(),
            grid: uniform_grid(scan.grid),
            final_patterns: scan.patterns.clone(),
            correction_phase: herald.correction_phase,
        };
        let data = fringe_scan(&circuit, &spec).map_err(RunError::Simulation)?;
        let csv_path = opts.out_dir.join(&config.output.fringe_csv);
        emit_fringe_csv(&data, &csv_path).map_err(|e| RunError::io(&csv_path, e))?;
        written.push(csv_path);

        let mut fits = Vec::new();
        for id in &data.pattern_ids {
            let f = extract_visibility(&data, id).map_err(RunError::Simulation)?;
            fits.push(PatternFit {
                pattern_id: id.clone(),
                visibility: f.visibility,
                phase_offset: f.phase_offset,
                mean: f.mean,
                residual_rms: f.residual_rms,
            });
        }
        let enclosed_flux = match &config.flux {
            Some(fa) => (0..fa.loops.len())
                .map(|i| fa.enclosed_flux(i))
                .collect::<Result<Vec<_>, _>>()
                .map_err(RunError::Simulation)?,
            None => Vec::new(),
        };
        let summary = FitSummary {
            herald_probability: data.herald_probabilities.first().copied().unwrap_or(0.0),
            flagged_points: data.flagged.clone(),
            enclosed_flux,
            fits,
        };
        let fit_path = opts.out_dir.join(&config.output.fringe_fit);
        write_json(&summary, &fit_path)?;
        written.push(fit_path);
        fringe = Some(data);
        fit = Some(summary);
    }

    let mut visibility = Vec::new();
    if let Some(sp) = &config.spectral {
        let pump = SpectralProfile::pump(sp.pump_center, sp.sigma_p)
            .map_err(|e| RunError::Config(vec![e.to_string()]))?;
        let qopts = QuadratureOptions {
            tolerance: sp.quad_tol,
            placement: sp.placement,
            amplitudes: sp.amplitudes,
            ..Default::default()
        };
        for &sf in &sp.sigma_f {
            let filter = SpectralProfile::filter(sp.filter_center, sf)
                .map_err(|e| RunError::Config(vec![e.to_string()]))?;
            let closed = visibility_closed_form(&pump, &filter).map_err(RunError::Simulation)?;
            let quad = visibility_quadrature(&pump, &filter, &qopts).map_err(|e| match e {
                Error::NonConvergence { .. } => RunError::NonConvergence(e),
                other => RunError::Simulation(other),
            })?;
            visibility.push(VisibilityRecord {
                sigma_p: sp.sigma_p,
                sigma_f: sf,
                V_closed: closed.visibility,
                V_quad: quad.visibility,
                err: quad.estimated_error,
            });
        }
        let path = opts.out_dir.join(&config.output.visibility_json);
        write_json(&visibility, &path)?;
        written.push(path);
    }

    let manifest_path = opts.out_dir.join(&config.output.manifest);
    let mut outputs: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.push(config.output.manifest.clone());
    let manifest = Manifest {
        name: config.name.clone(),
        version: VERSION.to_string(),
        config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        seed: opts.seed,
        outputs,
        config: config.clone(),
    };
    write_json(&manifest, &manifest_path)?;
    written.push(manifest_path);

    Ok(RunSummary {
        config,
        fringe,
        fit,
        visibility,
        written,
    })
}

/// Runs a scenario file, or a built-in when `path` names one and no such
/// file exists.
pub fn run_path(path: &Path, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => match path.to_str().and_then(builtin) {
            Some(t) if e.kind() == io::ErrorKind::NotFound => t.to_string(),
            _ => return Err(RunError::Config(vec![format!("{}: {e}", path.display())])),
        },
    };
    run_text(&text, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_validate() {
        for (name, text) in BUILTINS {
            let cfg = ScenarioConfig::parse(text).unwrap();
            assert_eq!(&cfg.name, name);
            assert_eq!(cfg.validate(), Vec::<String>::new(), "{name}");
        }
        assert!(builtin("fig1.scenario").is_some());
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let err = ScenarioConfig::parse("name = \"x\"\n[circuit\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ScenarioConfig::parse("name = \"x\"\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn semantic_checks() {
        let mut cfg = ScenarioConfig::parse(builtin("fig1").unwrap()).unwrap();
        cfg.scan.as_mut().unwrap().grid = 2;
        let d = cfg.validate();
        assert!(d.iter().any(|m| m.starts_with("scan.grid")), "{d:?}");

        let mut cfg = ScenarioConfig::parse(builtin("pdc_sweep").unwrap()).unwrap();
        cfg.spectral.as_mut().unwrap().sigma_f.push(-1.0);
        let d = cfg.validate();
        assert!(d.iter().any(|m| m.contains("sigma_f[3]")), "{d:?}");

        let cfg = ScenarioConfig::parse("name = \"empty\"").unwrap();
        assert_eq!(cfg.validate().len(), 1);
    }
}
