//! Subcommands of the `cavtool` binary. Each reads a JSON config, writes its
//! outputs into one directory and returns the written paths.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cavity::{
    branch_curve, dispersion_scan, gaussian_mode, membrane_energy_fraction, mode_volume, spectral_params, Cavity,
    CavityGeometry, CavitySpectralParams, GaussianMode, Mirror, ModeIndex, ScanOptions,
};
use crate::constants::{Constants, DEBYE_WALLER_GEV, GEV_ZPL_NM, N_SIO2, N_TA2O5};
use crate::coupling::{
    beta_breakdown, beta_scan, coupling_report, depth_bands, depth_bands_csv, surface_field_fraction,
    BetaBreakdown, BetaOptions, CouplingInputs, CouplingReport, DepthBand, DepthReference, EfficiencyChain,
    EmitterProperties,
};
use crate::emitter::{G2Model, SaturationParams};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_g2, fit_gaussian_peaks, fit_saturation, g2_model_fn, gaussian_peaks_fn, saturation_model_fn, Dataset,
    FitOptions, FitResult, GaussianPeak, Weighting,
};
use crate::io::{read_json, read_xy_csv, sha256_file, xy_csv, Grid, OutputDir, Source, StackFile};
use crate::optics::{field_profile, stack_response, BraggDesign, InterfaceMark, LayerStack, Termination};
use crate::synth::{synthesize, Noise};
use crate::uncertainty::{Propagation, Quantity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stack,
    Dispersion,
    Fit,
    Report,
    BetaScan,
    Synth,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stack => "stack",
            Command::Dispersion => "dispersion",
            Command::Fit => "fit",
            Command::Report => "report",
            Command::BetaScan => "beta-scan",
            Command::Synth => "synth",
        }
    }
}

/// Run `command` with the config at `config`, writing into `out`.
pub fn run(command: Command, config: &Path, out: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let base = config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut dir = OutputDir::create(out)?;
    match command {
        Command::Stack => cmd_stack(&read_json(config)?, &base, &mut dir)?,
        Command::Dispersion => cmd_dispersion(&read_json(config)?, &base, &mut dir)?,
        Command::Fit => cmd_fit(&read_json(config)?, &base, &mut dir)?,
        Command::Report => cmd_report(&read_json(config)?, &base, &mut dir, seed)?,
        Command::BetaScan => cmd_beta_scan(&read_json(config)?, &base, &mut dir)?,
        Command::Synth => cmd_synth(&read_json(config)?, &mut dir, seed)?,
    }
    Ok(dir.into_written())
}

#[derive(Debug, Clone, Serialize)]
struct Meta {
    command: &'static str,
    tool_version: &'static str,
    constants: Constants,
}

fn meta(command: Command) -> Meta {
    Meta {
        command: command.name(),
        tool_version: env!("CARGO_PKG_VERSION"),
        constants: Constants::current(),
    }
}

// ---------------------------------------------------------------- stack

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub stack: Option<Source<StackFile>>,
    pub design: Option<DesignSpec>,
    #[serde(default = "default_spectrum")]
    pub spectrum_nm: Grid,
    pub field_wavelength_nm: Option<f64>,
    #[serde(default = "one")]
    pub field_sampling_nm: f64,
    #[serde(default = "default_report_wavelengths")]
    pub report_wavelengths_nm: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default = "zpl")]
    pub wavelength_nm: f64,
    #[serde(default = "n_hi")]
    pub n_hi: f64,
    #[serde(default = "n_lo")]
    pub n_lo: f64,
    pub termination: Termination,
    #[serde(default = "target_ppm")]
    pub target_ppm: f64,
    #[serde(default = "one")]
    pub incident_index: f64,
    #[serde(default = "n_lo")]
    pub substrate_index: f64,
    #[serde(default = "max_pairs")]
    pub max_pairs: usize,
}

fn default_spectrum() -> Grid {
    Grid::Range {
        start: 450.0,
        stop: 750.0,
        points: 601,
    }
}
fn default_report_wavelengths() -> Vec<f64> {
    vec![GEV_ZPL_NM, 532.0]
}
fn one() -> f64 {
    1.0
}
fn zpl() -> f64 {
    GEV_ZPL_NM
}
fn n_hi() -> f64 {
    N_TA2O5
}
fn n_lo() -> f64 {
    N_SIO2
}
fn target_ppm() -> f64 {
    70.0
}
fn max_pairs() -> usize {
    200
}

#[derive(Debug, Serialize)]
struct ResponseRow {
    lambda_nm: f64,
    reflectance: f64,
    transmittance: f64,
    transmittance_ppm: f64,
    phase_rad: f64,
}

#[derive(Debug, Serialize)]
struct DesignSummary {
    spec: DesignSpec,
    pairs: usize,
    achieved_ppm: f64,
}

#[derive(Debug, Serialize)]
struct StackReport {
    meta: Meta,
    layers: usize,
    total_thickness_nm: f64,
    design: Option<DesignSummary>,
    response: Vec<ResponseRow>,
    field_wavelength_nm: f64,
    interfaces: Vec<InterfaceMark>,
}

fn response_row(stack: &LayerStack, wl: f64) -> Result<ResponseRow> {
    let r = stack_response(stack, wl)?;
    Ok(ResponseRow {
        lambda_nm: wl,
        reflectance: r.reflectance,
        transmittance: r.transmittance,
        transmittance_ppm: r.transmittance * 1e6,
        phase_rad: r.phase_on_reflection,
    })
}

pub fn cmd_stack(config: &StackConfig, base: &Path, out: &mut OutputDir) -> Result<()> {
    let (stack, design) = match (&config.stack, &config.design) {
        (Some(src), None) => (src.load(base)?.to_stack()?, None),
        (None, Some(spec)) => {
            let designer = BraggDesign {
                wavelength_nm: spec.wavelength_nm,
                n_hi: spec.n_hi,
                n_lo: spec.n_lo,
                termination: spec.termination,
                incident_index: spec.incident_index,
                substrate_index: spec.substrate_index,
                max_pairs: spec.max_pairs,
            };
            let stack = designer.design(spec.target_ppm)?;
            let achieved = stack_response(&stack, spec.wavelength_nm)?.transmittance * 1e6;
            let pairs = (stack.layers.len() - 1 - usize::from(spec.termination == Termination::Lo)) / 2;
            (
                stack,
                Some(DesignSummary {
                    spec: *spec,
                    pairs,
                    achieved_ppm: achieved,
                }),
            )
        }
        _ => return Err(Error::invalid("stack config needs exactly one of `stack` and `design`")),
    };
    let mut spectrum = String::from("lambda_nm,reflectance,transmittance,phase_rad\n");
    for wl in config.spectrum_nm.values()? {
        let row = response_row(&stack, wl)?;
        spectrum.push_str(&format!("{},{},{},{}\n", wl, row.reflectance, row.transmittance, row.phase_rad));
    }
    out.write_text("spectrum.csv", &spectrum)?;
    let field_wl = config
        .field_wavelength_nm
        .or(design.as_ref().map(|d| d.spec.wavelength_nm))
        .unwrap_or(GEV_ZPL_NM);
    let profile = field_profile(&stack, field_wl, config.field_sampling_nm)?;
    out.write_text("field_profile.csv", &profile.to_csv())?;
    if design.is_some() {
        out.write_json("designed_stack.json", &StackFile::from_stack(&stack))?;
    }
    let report = StackReport {
        meta: meta(Command::Stack),
        layers: stack.layers.len(),
        total_thickness_nm: stack.total_thickness_nm(),
        design,
        response: config
            .report_wavelengths_nm
            .iter()
            .map(|&wl| response_row(&stack, wl))
            .collect::<Result<_>>()?,
        field_wavelength_nm: field_wl,
        interfaces: profile.interfaces.clone(),
    };
    out.write_json("stack_report.json", &report)?;
    Ok(())
}

// ---------------------------------------------------------------- cavity

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MirrorSpec {
    /// Matched quarter-wave mirrors (low-index terminated flat, high-index
    /// terminated fiber).
    Designed {
        #[serde(default = "target_ppm")]
        target_ppm: f64,
        #[serde(default = "n_hi")]
        n_hi: f64,
        #[serde(default = "n_lo")]
        n_lo: f64,
        #[serde(default = "zpl")]
        design_nm: f64,
    },
    Stacks {
        flat: Source<StackFile>,
        fiber: Source<StackFile>,
    },
    Perfect,
}

impl Default for MirrorSpec {
    fn default() -> Self {
        MirrorSpec::Designed {
            target_ppm: target_ppm(),
            n_hi: n_hi(),
            n_lo: n_lo(),
            design_nm: zpl(),
        }
    }
}

impl MirrorSpec {
    pub fn build(&self, geometry: CavityGeometry, base: &Path) -> Result<Cavity> {
        match self {
            MirrorSpec::Designed {
                target_ppm,
                n_hi,
                n_lo,
                design_nm,
            } => Cavity::with_designed_mirrors(geometry, *target_ppm, *n_hi, *n_lo, *design_nm),
            MirrorSpec::Stacks { flat, fiber } => Cavity::new(
                geometry,
                Mirror::Coating(flat.load(base)?.to_stack()?),
                Mirror::Coating(fiber.load(base)?.to_stack()?),
            ),
            MirrorSpec::Perfect => Cavity::new(geometry, Mirror::Perfect, Mirror::Perfect),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub geometry: Source<CavityGeometry>,
    #[serde(default)]
    pub mirrors: MirrorSpec,
    pub air_gap_um: Grid,
    pub wavelength_nm: Grid,
    #[serde(default = "default_branches")]
    pub branches: Vec<(u32, u32)>,
    #[serde(default = "default_phase_width")]
    pub phase_width: f64,
    #[serde(default = "default_transverse_weights")]
    pub transverse_weights: [f64; 2],
    #[serde(default = "yes")]
    pub include_gouy: bool,
}

fn default_branches() -> Vec<(u32, u32)> {
    vec![(15, 0), (15, 1), (16, 0), (16, 1)]
}
fn default_phase_width() -> f64 {
    ScanOptions::default().phase_width
}
fn default_transverse_weights() -> [f64; 2] {
    ScanOptions::default().transverse_weights
}
fn yes() -> bool {
    true
}

#[derive(Debug, Serialize)]
struct BranchGap {
    m: u32,
    q: u32,
    air_gap_um: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AxialSummary {
    longitudinal: u32,
    membrane_energy_fraction: f64,
    mode_volume_um3: f64,
}

#[derive(Debug, Serialize)]
struct DispersionReport {
    meta: Meta,
    geometry: CavityGeometry,
    mirror_transmittance_ppm: Option<(f64, f64)>,
    mirror_phase_rad: f64,
    finesse_from_mirrors: Option<f64>,
    effective_length_um: f64,
    spectral: Option<CavitySpectralParams>,
    gaussian_mode: GaussianMode,
    resonances: Vec<BranchGap>,
    axial: Option<AxialSummary>,
}

pub fn cmd_dispersion(config: &DispersionConfig, base: &Path, out: &mut OutputDir) -> Result<()> {
    let geometry = config.geometry.load(base)?;
    let mut cavity = config.mirrors.build(geometry, base)?;
    if !config.include_gouy {
        cavity = cavity.without_gouy();
    }
    let mode = gaussian_mode(&geometry)?;
    let gaps = config.air_gap_um.values()?;
    let wavelengths = config.wavelength_nm.values()?;
    let options = ScanOptions {
        phase_width: config.phase_width,
        transverse_weights: config.transverse_weights,
    };
    let map = dispersion_scan(&cavity, &gaps, &wavelengths, options)?;
    out.write_text("dispersion_map.csv", &map.to_csv())?;

    let mut overlay = String::from("m,q,lambda_nm,air_gap_um\n");
    let mut resonances = Vec::new();
    for &(m, q) in &config.branches {
        let index = ModeIndex::new(m, q)?;
        for (wl, gap) in wavelengths.iter().zip(branch_curve(&cavity, index, &wavelengths)?) {
            overlay.push_str(&format!("{m},{q},{wl},{gap}\n"));
        }
        let gap = match cavity.resonant_air_gap(index) {
            Ok(g) => Some(g),
            Err(Error::RootNotFound(_)) | Err(Error::StabilityViolation { .. }) => None,
            Err(e) => return Err(e),
        };
        resonances.push(BranchGap { m, q, air_gap_um: gap });
    }
    out.write_text("branches.csv", &overlay)?;

    let lambda = geometry.wavelength_nm;
    let coated = !matches!(config.mirrors, MirrorSpec::Perfect);
    let effective_length_um = cavity.effective_length_um(lambda)?;
    let (transmittance, finesse, spectral, axial) = if coated {
        let t_flat = cavity.flat_mirror.transmittance(lambda)?;
        let t_fiber = cavity.fiber_mirror.transmittance(lambda)?;
        let finesse = cavity.finesse_from_mirrors(lambda, 0.0)?;
        let spectral = spectral_params(finesse, effective_length_um)?;
        let m = config.branches.first().map(|b| b.0).unwrap_or(15);
        let (profile, layout) = cavity.axial_profile(m, 1.0)?;
        let resonant = geometry.with_air_gap(cavity.planar_resonant_air_gap(m)?);
        let axial = AxialSummary {
            longitudinal: m,
            membrane_energy_fraction: membrane_energy_fraction(&profile, &layout),
            mode_volume_um3: mode_volume(&resonant, &profile)?,
        };
        (Some((t_flat * 1e6, t_fiber * 1e6)), Some(finesse), Some(spectral), Some(axial))
    } else {
        (None, None, None, None)
    };
    let report = DispersionReport {
        meta: meta(Command::Dispersion),
        geometry,
        mirror_transmittance_ppm: transmittance,
        mirror_phase_rad: cavity.mirror_phase_wrapped(lambda)?,
        finesse_from_mirrors: finesse,
        effective_length_um,
        spectral,
        gaussian_mode: mode,
        resonances,
        axial,
    };
    out.write_json("dispersion_report.json", &report)?;
    Ok(())
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    G2,
    Saturation,
    Peaks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PowerUnit {
    #[default]
    #[serde(rename = "mW")]
    MilliWatt,
    #[serde(rename = "W")]
    Watt,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: FitModel,
    pub data: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default = "max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub g2_initial: Option<G2Model>,
    #[serde(default)]
    pub saturation_initial: Option<SaturationParams>,
    #[serde(default)]
    pub fix_background: bool,
    #[serde(default)]
    pub power_unit: PowerUnit,
    #[serde(default = "one_usize")]
    pub n_peaks: usize,
}

fn max_iterations() -> usize {
    FitOptions::default().max_iterations
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum FittedModel {
    G2(G2Model),
    Saturation(SaturationParams),
    Peaks { baseline: f64, peaks: Vec<GaussianPeak> },
}

#[derive(Debug, Serialize)]
struct FitReport {
    meta: Meta,
    model: FitModel,
    label: Option<String>,
    input_file: String,
    input_sha256: String,
    weighting: Weighting,
    fitted: FittedModel,
    result: FitResult,
}

pub fn cmd_fit(config: &FitConfig, base: &Path, out: &mut OutputDir) -> Result<()> {
    let path = base.join(&config.data);
    let options = FitOptions {
        max_iterations: config.max_iterations,
        weighting: config.weighting,
    };
    let (x_name, y_name) = match config.model {
        FitModel::G2 => ("tau_ns", "g2"),
        FitModel::Saturation => match config.power_unit {
            PowerUnit::MilliWatt => ("power_mW", "counts_per_s"),
            PowerUnit::Watt => ("power_W", "counts_per_s"),
        },
        FitModel::Peaks => ("length_um", "counts"),
    };
    let mut data = read_xy_csv(&path, x_name, y_name)?;
    let (fitted, result, model_fn): (FittedModel, FitResult, Box<dyn Fn(f64) -> f64>) = match config.model {
        FitModel::G2 => {
            let (m, r) = fit_g2(&data, config.g2_initial, options)?;
            let p = r.params.clone();
            (FittedModel::G2(m), r, Box::new(move |x| g2_model_fn(&p, x)))
        }
        FitModel::Saturation => {
            if config.power_unit == PowerUnit::Watt {
                data.x.iter_mut().for_each(|p| *p *= 1e3);
            }
            let (s, r) = fit_saturation(&data, config.saturation_initial, config.fix_background, options)?;
            let p = r.params.clone();
            (FittedModel::Saturation(s), r, Box::new(move |x| saturation_model_fn(&p, x)))
        }
        FitModel::Peaks => {
            let (baseline, peaks, r) = fit_gaussian_peaks(&data, config.n_peaks, options)?;
            let p = r.params.clone();
            (
                FittedModel::Peaks { baseline, peaks },
                r,
                Box::new(move |x| gaussian_peaks_fn(&p, x)),
            )
        }
    };
    let x_out = if config.model == FitModel::Saturation { "power_mW" } else { x_name };
    let mut residuals = format!("{x_out},{y_name},model,residual\n");
    for (x, y) in data.x.iter().zip(&data.y) {
        let m = model_fn(*x);
        residuals.push_str(&format!("{x},{y},{m},{}\n", y - m));
    }
    out.write_text("residuals.csv", &residuals)?;
    let converged = result.converged;
    let iterations = result.iterations;
    let report = FitReport {
        meta: meta(Command::Fit),
        model: config.model,
        label: config.label.clone(),
        input_file: Path::new(&config.data)
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        input_sha256: sha256_file(&path)?,
        weighting: config.weighting,
        fitted,
        result,
    };
    out.write_json("fit_result.json", &report)?;
    if !converged {
        return Err(Error::NotConverged { iterations });
    }
    Ok(())
}

// ---------------------------------------------------------------- report

/// Input quantity: a bare number (exact), a value with errors, or a
/// parameter read from a fit result file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum QuantitySource {
    Exact(f64),
    Value {
        value: f64,
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default)]
        sigma_plus: Option<f64>,
        #[serde(default)]
        sigma_minus: Option<f64>,
    },
    FitParameter {
        fit_result: String,
        param: String,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl QuantitySource {
    fn resolve(&self, base: &Path, unit: &str) -> Result<Quantity> {
        match self {
            QuantitySource::Exact(v) => Ok(Quantity::exact(*v, unit)),
            QuantitySource::Value {
                value,
                sigma,
                sigma_plus,
                sigma_minus,
            } => {
                let plus = sigma_plus.or(*sigma).unwrap_or(0.0);
                let minus = sigma_minus.or(*sigma).unwrap_or(0.0);
                Quantity::new(*value, plus, minus, unit)
            }
            QuantitySource::FitParameter {
                fit_result,
                param,
                scale,
            } => {
                let path = base.join(fit_result);
                let json: serde_json::Value = read_json(&path)?;
                let names = json["result"]["param_names"].as_array();
                let index = names
                    .and_then(|n| n.iter().position(|v| v.as_str() == Some(param.as_str())))
                    .ok_or_else(|| Error::Parse {
                        path: path.display().to_string(),
                        message: format!("no parameter `{param}`"),
                    })?;
                let value = json["result"]["params"][index].as_f64();
                let err = json["result"]["std_errors"][index].as_f64();
                match (value, err) {
                    (Some(v), Some(e)) => Quantity::symmetric(v * scale, e * scale.abs(), unit),
                    _ => Err(Error::Parse {
                        path: path.display().to_string(),
                        message: format!("parameter `{param}` has no numeric value"),
                    }),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    #[default]
    Hybrid,
    Linear,
    MonteCarlo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub free_counts: Option<QuantitySource>,
    pub eta_free: Option<QuantitySource>,
    pub cavity_counts: Option<QuantitySource>,
    pub eta_cavity: Option<QuantitySource>,
    pub emitter_linewidth_thz: Option<QuantitySource>,
    pub cavity_linewidth_ghz: Option<QuantitySource>,
    pub debye_waller: Option<QuantitySource>,
    pub bright_state_rate: Option<QuantitySource>,
    #[serde(default)]
    pub propagation: PropagationMode,
    /// Also evaluate with Monte Carlo for comparison.
    #[serde(default)]
    pub monte_carlo_check: bool,
    #[serde(default = "mc_samples")]
    pub monte_carlo_samples: usize,
}

fn mc_samples() -> usize {
    10_000
}

#[derive(Debug, Serialize)]
struct MonteCarloCheck {
    seed: u64,
    samples: usize,
    report: CouplingReport,
    /// Interval width of the primary mode over the Monte Carlo width, per
    /// quantity.
    width_ratio: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct ReportFile {
    meta: Meta,
    propagation: PropagationMode,
    inputs: CouplingInputs,
    report: CouplingReport,
    monte_carlo: Option<MonteCarloCheck>,
}

fn report_fields(r: &CouplingReport) -> [(&'static str, &Quantity); 10] {
    [
        ("rate_free", &r.rate_free),
        ("rate_cavity", &r.rate_cavity),
        ("spectral_density_free", &r.spectral_density_free),
        ("spectral_density_cav", &r.spectral_density_cav),
        ("enhancement_ratio", &r.enhancement_ratio),
        ("beta", &r.beta),
        ("purcell", &r.purcell),
        ("lifetime_reduction", &r.lifetime_reduction),
        ("zpl_fraction_enhanced", &r.zpl_fraction_enhanced),
        ("quantum_efficiency", &r.quantum_efficiency),
    ]
}

pub fn resolve_report_inputs(config: &ReportConfig, base: &Path) -> Result<CouplingInputs> {
    let fields: [(&str, &Option<QuantitySource>); 7] = [
        ("free_counts", &config.free_counts),
        ("eta_free", &config.eta_free),
        ("cavity_counts", &config.cavity_counts),
        ("eta_cavity", &config.eta_cavity),
        ("emitter_linewidth_thz", &config.emitter_linewidth_thz),
        ("cavity_linewidth_ghz", &config.cavity_linewidth_ghz),
        ("bright_state_rate", &config.bright_state_rate),
    ];
    let missing: Vec<&str> = fields.iter().filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!("report config is missing: {}", missing.join(", "))));
    }
    let get = |src: &Option<QuantitySource>, unit: &str| src.as_ref().unwrap().resolve(base, unit);
    Ok(CouplingInputs {
        free_counts: get(&config.free_counts, "counts/s")?,
        eta_free: EfficiencyChain::new(get(&config.eta_free, "counts/photon")?)?,
        cavity_counts: get(&config.cavity_counts, "counts/s")?,
        eta_cavity: EfficiencyChain::new(get(&config.eta_cavity, "counts/photon")?)?,
        emitter_linewidth_thz: get(&config.emitter_linewidth_thz, "THz")?,
        cavity_linewidth_ghz: get(&config.cavity_linewidth_ghz, "GHz")?,
        debye_waller: match &config.debye_waller {
            Some(src) => src.resolve(base, "")?,
            None => Quantity::exact(DEBYE_WALLER_GEV, ""),
        },
        bright_state_rate: get(&config.bright_state_rate, "photons/s")?,
    })
}

pub fn cmd_report(config: &ReportConfig, base: &Path, out: &mut OutputDir, seed: Option<u64>) -> Result<()> {
    let inputs = resolve_report_inputs(config, base)?;
    let seed = seed.unwrap_or(0);
    let mc = Propagation::MonteCarlo {
        samples: config.monte_carlo_samples,
        seed,
    };
    let primary = match config.propagation {
        PropagationMode::Hybrid => Propagation::Hybrid,
        PropagationMode::Linear => Propagation::Linear,
        PropagationMode::MonteCarlo => mc,
    };
    let report = coupling_report(&inputs, primary)?;
    let monte_carlo = if config.monte_carlo_check {
        let mc_report = coupling_report(&inputs, mc)?;
        let width_ratio = report_fields(&report)
            .iter()
            .zip(report_fields(&mc_report))
            .map(|((name, a), (_, b))| {
                let wa = a.sigma_plus + a.sigma_minus;
                let wb = b.sigma_plus + b.sigma_minus;
                let ratio = if wb > 0.0 { wa / wb } else if wa == 0.0 { 1.0 } else { f64::INFINITY };
                (name.to_string(), ratio)
            })
            .collect();
        Some(MonteCarloCheck {
            seed,
            samples: config.monte_carlo_samples,
            report: mc_report,
            width_ratio,
        })
    } else {
        None
    };
    let file = ReportFile {
        meta: meta(Command::Report),
        propagation: config.propagation,
        inputs,
        report,
        monte_carlo,
    };
    out.write_json("coupling_report.json", &file)?;
    Ok(())
}

// ---------------------------------------------------------------- beta scan

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaScanConfig {
    pub geometry: Source<CavityGeometry>,
    #[serde(default)]
    pub mirrors: MirrorSpec,
    #[serde(default = "default_mode")]
    pub mode: (u32, u32),
    #[serde(default = "default_emitter")]
    pub emitter: EmitterProperties,
    #[serde(default)]
    pub options: BetaOptions,
    pub thickness_nm: Grid,
    pub depth_nm: Grid,
    #[serde(default = "default_depth_mean")]
    pub depth_mean_nm: f64,
    #[serde(default = "default_depth_sigma")]
    pub depth_sigma_nm: f64,
    #[serde(default)]
    pub depth_reference: DepthReference,
    #[serde(default = "default_band_samples")]
    pub band_samples_per_sigma: usize,
    #[serde(default)]
    pub measured_beta: Option<f64>,
}

fn default_mode() -> (u32, u32) {
    (15, 0)
}
fn default_emitter() -> EmitterProperties {
    EmitterProperties {
        linewidth_thz: 5.22,
        lifetime_ns: 6.0,
        debye_waller: DEBYE_WALLER_GEV,
    }
}
fn default_depth_mean() -> f64 {
    125.0
}
fn default_depth_sigma() -> f64 {
    20.0
}
fn default_band_samples() -> usize {
    10
}

#[derive(Debug, Serialize)]
struct BetaModelInfo {
    formula: &'static str,
    orientation_factor: f64,
    quantum_efficiency: f64,
    finesse: Option<f64>,
    extra_loss_ppm: f64,
    depth_reference: DepthReference,
    depth_mean_nm: f64,
    depth_sigma_nm: f64,
}

#[derive(Debug, Serialize)]
struct BetaReport {
    meta: Meta,
    model: BetaModelInfo,
    emitter: EmitterProperties,
    mode: (u32, u32),
    at_geometry: Option<(BetaBreakdown, DepthBand)>,
    measured_beta: Option<f64>,
    measured_within_two_sigma_band: Option<bool>,
    /// Thicknesses where the nominal β has a local maximum.
    beta_maxima_nm: Vec<f64>,
    /// Thicknesses where |E|² at the air-facing membrane surface has a
    /// local maximum.
    surface_antinodes_nm: Vec<f64>,
}

fn local_maxima(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| x[i])
        .collect()
}

pub fn cmd_beta_scan(config: &BetaScanConfig, base: &Path, out: &mut OutputDir) -> Result<()> {
    let geometry = config.geometry.load(base)?;
    let cavity = config.mirrors.build(geometry, base)?;
    let mode = ModeIndex::new(config.mode.0, config.mode.1)?;
    let thicknesses = config.thickness_nm.values()?;
    let depths = config.depth_nm.values()?;
    let scan = beta_scan(
        &cavity,
        mode,
        &config.emitter,
        &config.options,
        &thicknesses,
        &depths,
        config.depth_reference,
    )?;
    out.write_text("beta_scan.csv", &scan.to_csv())?;
    let bands = depth_bands(
        &cavity,
        mode,
        &config.emitter,
        &config.options,
        &thicknesses,
        config.depth_mean_nm,
        config.depth_sigma_nm,
        config.depth_reference,
        config.band_samples_per_sigma,
    )?;
    out.write_text("beta_bands.csv", &depth_bands_csv(&bands))?;

    let t0 = geometry.membrane_thickness_nm;
    let at_geometry = if config.depth_mean_nm <= t0 {
        let mut g = geometry;
        g.emitter_depth_nm = config.depth_reference.from_mirror(config.depth_mean_nm, t0);
        let breakdown = beta_breakdown(&cavity.with_geometry(g)?, mode, &config.emitter, &config.options)?;
        let band = depth_bands(
            &cavity,
            mode,
            &config.emitter,
            &config.options,
            &[t0],
            config.depth_mean_nm,
            config.depth_sigma_nm,
            config.depth_reference,
            config.band_samples_per_sigma,
        )?;
        Some((breakdown, band[0]))
    } else {
        None
    };
    let nominal: Vec<f64> = bands.iter().map(|b| b.nominal).collect();
    let surface = surface_field_fraction(&cavity, mode, &config.options, &thicknesses)?;
    let report = BetaReport {
        meta: meta(Command::BetaScan),
        model: BetaModelInfo {
            formula: "beta = R/(R + 1/tau), R = 4 g^2/(kappa + gamma_star + 1/tau), g^2 = 3 c lambda^2 (xi/tau) u orient/(8 pi n V)",
            orientation_factor: config.options.orientation_factor,
            quantum_efficiency: 1.0,
            finesse: config.options.finesse,
            extra_loss_ppm: config.options.extra_loss_ppm,
            depth_reference: config.depth_reference,
            depth_mean_nm: config.depth_mean_nm,
            depth_sigma_nm: config.depth_sigma_nm,
        },
        emitter: config.emitter,
        mode: config.mode,
        measured_within_two_sigma_band: match (config.measured_beta, &at_geometry) {
            (Some(b), Some((_, band))) => Some(b >= band.two_sigma.0 && b <= band.two_sigma.1),
            _ => None,
        },
        at_geometry,
        measured_beta: config.measured_beta,
        beta_maxima_nm: local_maxima(&thicknesses, &nominal),
        surface_antinodes_nm: local_maxima(&thicknesses, &surface),
    };
    out.write_json("beta_report.json", &report)?;
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthTruth {
    G2 {
        sigma: f64,
        a: f64,
        tau1_ns: f64,
        tau2_ns: f64,
    },
    Saturation {
        i_inf: f64,
        p_sat: f64,
        c_bg: f64,
    },
    Peaks {
        baseline: f64,
        peaks: Vec<GaussianPeak>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub truth: SynthTruth,
    pub x: Grid,
    #[serde(default = "default_noise")]
    pub noise: Noise,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_noise() -> Noise {
    Noise::Gaussian(0.01)
}

#[derive(Debug, Serialize)]
struct SynthMeta<'a> {
    meta: Meta,
    seed: u64,
    noise: Noise,
    truth: &'a SynthTruth,
    file: &'static str,
}

pub fn cmd_synth(config: &SynthConfig, out: &mut OutputDir, seed: Option<u64>) -> Result<()> {
    let seed = seed.or(config.seed).unwrap_or(0);
    let x = config.x.values()?;
    let (data, file, header): (Dataset, &'static str, (&str, &str)) = match &config.truth {
        SynthTruth::G2 {
            sigma,
            a,
            tau1_ns,
            tau2_ns,
        } => {
            let m = G2Model::new(*sigma, *a, *tau1_ns, *tau2_ns)?;
            let p = [m.sigma, m.a, m.tau1_ns, m.tau2_ns];
            (
                synthesize(|t| g2_model_fn(&p, t), &x, config.noise, seed)?,
                "synth_g2.csv",
                ("tau_ns", "g2"),
            )
        }
        SynthTruth::Saturation { i_inf, p_sat, c_bg } => {
            let s = SaturationParams::new(*i_inf, *p_sat, *c_bg)?;
            let p = [s.i_inf, s.p_sat, s.c_bg];
            (
                synthesize(|v| saturation_model_fn(&p, v), &x, config.noise, seed)?,
                "synth_saturation.csv",
                ("power_mW", "counts_per_s"),
            )
        }
        SynthTruth::Peaks { baseline, peaks } => {
            if peaks.iter().any(|p| !(p.width > 0.0)) {
                return Err(Error::invalid("peak widths must be positive"));
            }
            let mut p = vec![*baseline];
            for pk in peaks {
                p.extend([pk.amplitude, pk.center, pk.width]);
            }
            (
                synthesize(|v| gaussian_peaks_fn(&p, v), &x, config.noise, seed)?,
                "synth_peaks.csv",
                ("length_um", "counts"),
            )
        }
    };
    out.write_text(file, &xy_csv(header.0, header.1, &data))?;
    out.write_json(
        &file.replace(".csv", "_meta.json"),
        &SynthMeta {
            meta: meta(Command::Synth),
            seed,
            noise: config.noise,
            truth: &config.truth,
            file,
        },
    )?;
    Ok(())
}
