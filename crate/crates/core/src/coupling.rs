//! Emitter-cavity figures of merit: efficiency-corrected rates, spectral
//! densities, funneling efficiency β, Purcell projections, and the simulated
//! β of an emitter inside the membrane.
//!
//! Linewidths are FWHM in ordinary frequency (`γ*/2π` in THz, `κ/2π` in GHz);
//! rates are photons/s.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{effective_axial_length_um, gaussian_mode, spectral_params, AxialLayout, Cavity, ModeIndex};
use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::optics::{field_profile_with_margins, FieldSolution};
use crate::uncertainty::{propagate, Propagation, Quantity};

/// Collection efficiency of a detection path, counts/photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub eta: Quantity,
}

impl EfficiencyChain {
    pub fn new(eta: Quantity) -> Result<Self> {
        if !(eta.value > 0.0 && eta.value <= 1.0) {
            return Err(Error::invalid(format!("efficiency must be in (0, 1], got {}", eta.value)));
        }
        Ok(EfficiencyChain { eta })
    }
}

pub fn corrected_rate(measured: f64, eta: f64) -> Result<f64> {
    if !(measured >= 0.0) {
        return Err(Error::invalid("measured rate must be >= 0"));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("efficiency must be positive, got {eta}")));
    }
    Ok(measured / eta)
}

/// Peak of a Lorentzian line carrying `rate`: `2·rate/(π·FWHM)`.
pub fn peak_spectral_density(rate: f64, fwhm_ghz: f64) -> Result<f64> {
    if !(fwhm_ghz > 0.0) {
        return Err(Error::invalid("linewidth must be positive"));
    }
    Ok(2.0 * rate / (PI * fwhm_ghz))
}

/// `β = I_cav / (I_free + I_cav)`.
pub fn beta_measured(rate_cav: f64, rate_free: f64) -> Result<f64> {
    if !(rate_cav >= 0.0 && rate_free >= 0.0) {
        return Err(Error::invalid("rates must be >= 0"));
    }
    if rate_cav + rate_free == 0.0 {
        return Err(Error::invalid("both rates are zero"));
    }
    Ok(rate_cav / (rate_free + rate_cav))
}

/// `F_p = γ*/(ξκ) · β`.
pub fn purcell_from_beta(linewidth_thz: f64, kappa_ghz: f64, xi: f64, beta: f64) -> Result<f64> {
    if !(linewidth_thz > 0.0 && kappa_ghz > 0.0) {
        return Err(Error::invalid("linewidths must be positive"));
    }
    check_xi(xi)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must be in [0, 1], got {beta}")));
    }
    Ok(linewidth_thz * 1e3 / (xi * kappa_ghz) * beta)
}

/// Lifetime reduction `1 + ξF` and ZPL fraction `ξ(1+F)/(1+ξF)` once the ZPL
/// is Purcell-enhanced by `F`.
pub fn lifetime_and_zpl_projection(purcell: f64, xi: f64) -> Result<(f64, f64)> {
    if !(purcell >= 0.0) {
        return Err(Error::invalid("Purcell factor must be >= 0"));
    }
    check_xi(xi)?;
    Ok((1.0 + xi * purcell, xi * (1.0 + purcell) / (1.0 + xi * purcell)))
}

pub fn quantum_efficiency(observed_total: f64, predicted_bright: f64) -> Result<f64> {
    if !(predicted_bright > 0.0) {
        return Err(Error::invalid("predicted bright-state rate must be positive"));
    }
    Ok(observed_total / predicted_bright)
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::invalid(format!("Debye-Waller factor must be in (0, 1], got {xi}")));
    }
    Ok(())
}

/// Measured inputs of the coupling report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingInputs {
    /// Saturated count rate without cavity, counts/s.
    pub free_counts: Quantity,
    pub eta_free: EfficiencyChain,
    /// Saturated count rate through the cavity mode, counts/s.
    pub cavity_counts: Quantity,
    pub eta_cavity: EfficiencyChain,
    /// `γ*/2π`, THz.
    pub emitter_linewidth_thz: Quantity,
    /// `κ/2π`, GHz.
    pub cavity_linewidth_ghz: Quantity,
    pub debye_waller: Quantity,
    /// Predicted bright-state emission rate, photons/s.
    pub bright_state_rate: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub rate_free: Quantity,
    pub rate_cavity: Quantity,
    pub spectral_density_free: Quantity,
    pub spectral_density_cav: Quantity,
    pub enhancement_ratio: Quantity,
    pub beta: Quantity,
    pub purcell: Quantity,
    pub lifetime_reduction: Quantity,
    pub zpl_fraction_enhanced: Quantity,
    pub quantum_efficiency: Quantity,
}

/// Evaluate the derived-quantity chain step by step; each output is
/// propagated from the quantities it is computed from.
pub fn coupling_report(inputs: &CouplingInputs, mode: Propagation) -> Result<CouplingReport> {
    let xi = &inputs.debye_waller;
    check_xi(xi.value)?;
    let ratio = |x: &[f64]| x[0] / x[1];
    let rate_free = propagate(
        ratio,
        &[inputs.free_counts.clone(), inputs.eta_free.eta.clone()],
        mode,
        "photons/s",
    )?;
    let rate_cavity = propagate(
        ratio,
        &[inputs.cavity_counts.clone(), inputs.eta_cavity.eta.clone()],
        mode,
        "photons/s",
    )?;
    let density_unit = "photons/(s GHz)";
    let spectral_density_free = propagate(
        |x| 2.0 * x[0] * x[1] / (PI * x[2] * 1e3),
        &[rate_free.clone(), xi.clone(), inputs.emitter_linewidth_thz.clone()],
        mode,
        density_unit,
    )?;
    let spectral_density_cav = propagate(
        |x| 2.0 * x[0] / (PI * x[1]),
        &[rate_cavity.clone(), inputs.cavity_linewidth_ghz.clone()],
        mode,
        density_unit,
    )?;
    let enhancement_ratio = propagate(
        ratio,
        &[spectral_density_cav.clone(), spectral_density_free.clone()],
        mode,
        "",
    )?;
    let beta = propagate(
        |x| x[0] / (x[0] + x[1]),
        &[rate_cavity.clone(), rate_free.clone()],
        mode,
        "",
    )?;
    let purcell = propagate(
        |x| x[0] * 1e3 / (x[1] * x[2]) * x[3],
        &[
            inputs.emitter_linewidth_thz.clone(),
            xi.clone(),
            inputs.cavity_linewidth_ghz.clone(),
            beta.clone(),
        ],
        mode,
        "",
    )?;
    let lifetime_reduction = propagate(|x| 1.0 + x[0] * x[1], &[xi.clone(), purcell.clone()], mode, "")?;
    let zpl_fraction_enhanced = propagate(
        |x| x[0] * (1.0 + x[1]) / (1.0 + x[0] * x[1]),
        &[xi.clone(), purcell.clone()],
        mode,
        "",
    )?;
    let quantum_efficiency = propagate(
        ratio,
        &[rate_free.clone(), inputs.bright_state_rate.clone()],
        mode,
        "",
    )?;
    Ok(CouplingReport {
        rate_free,
        rate_cavity,
        spectral_density_free,
        spectral_density_cav,
        enhancement_ratio,
        beta,
        purcell,
        lifetime_reduction,
        zpl_fraction_enhanced,
        quantum_efficiency,
    })
}

/// Emitter parameters entering the simulated β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterProperties {
    /// `γ*/2π`, THz.
    pub linewidth_thz: f64,
    pub lifetime_ns: f64,
    /// Fraction of the emission in the ZPL.
    pub debye_waller: f64,
}

impl EmitterProperties {
    fn validate(&self) -> Result<()> {
        if !(self.linewidth_thz > 0.0 && self.lifetime_ns > 0.0) {
            return Err(Error::invalid("emitter linewidth and lifetime must be positive"));
        }
        check_xi(self.debye_waller)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaOptions {
    /// `|d·ê|²/|d|²` summed over the polarization modes counted as "the
    /// mode". 1 for a dipole in the membrane plane with both polarizations.
    pub orientation_factor: f64,
    /// Overrides the finesse computed from the mirror transmissions.
    pub finesse: Option<f64>,
    /// Extra round-trip loss added to the mirror transmissions.
    pub extra_loss_ppm: f64,
    pub sampling_nm: f64,
}

impl Default for BetaOptions {
    fn default() -> Self {
        BetaOptions {
            orientation_factor: 1.0,
            finesse: None,
            extra_loss_ppm: 0.0,
            sampling_nm: 1.0,
        }
    }
}

/// Ingredients of a simulated β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaBreakdown {
    pub beta: f64,
    /// Coupling rate g, rad/s.
    pub g_per_s: f64,
    pub kappa_per_s: f64,
    pub mode_volume_um3: f64,
    /// `|E(z_e)|² / max(ε|E|²)`.
    pub field_fraction: f64,
    /// Emission rate into the cavity mode, 1/s.
    pub cavity_rate_per_s: f64,
}

/// `β = R/(R + γ)` with `R = 4g²/(κ + γ* + γ)`; all rates in rad/s or 1/s.
pub fn funneling_beta(g_squared: f64, kappa: f64, dephasing: f64, decay: f64) -> f64 {
    let rate = 4.0 * g_squared / (kappa + dephasing + decay);
    rate / (rate + decay)
}

/// Cavity quantities that do not depend on the emitter position.
#[derive(Debug, Clone)]
pub struct ModeField {
    solution: FieldSolution,
    layout: AxialLayout,
    peak_energy: f64,
    pub mode_volume_um3: f64,
    pub kappa_per_s: f64,
    wavelength_nm: f64,
    membrane_index: f64,
}

impl ModeField {
    pub fn new(cavity: &Cavity, mode: ModeIndex, options: &BetaOptions) -> Result<Self> {
        if mode.transverse_order != 0 {
            return Err(Error::invalid("beta simulation supports the fundamental transverse mode only"));
        }
        let geometry = &cavity.geometry;
        let lambda = geometry.wavelength_nm;
        let gap = cavity.planar_resonant_air_gap(mode.longitudinal)?;
        let (stack, layout) = cavity.axial_stack(gap)?;
        let profile = field_profile_with_margins(&stack, lambda, options.sampling_nm, 0.0, 0.0)?;
        let peak_energy = profile.energy_density().into_iter().fold(0.0, f64::max);
        let axial_um = effective_axial_length_um(&profile)?;
        let resonant = geometry.with_air_gap(gap);
        let mode_volume_um3 = axial_um * gaussian_mode(&resonant)?.effective_area_um2();
        let finesse = match options.finesse {
            Some(f) => f,
            None => cavity.finesse_from_mirrors(lambda, options.extra_loss_ppm)?,
        };
        let kappa_per_s = spectral_params(finesse, cavity.with_geometry(resonant)?.effective_length_um(lambda)?)?.kappa_per_s();
        Ok(ModeField {
            solution: FieldSolution::new(&stack, lambda)?,
            layout,
            peak_energy,
            mode_volume_um3,
            kappa_per_s,
            wavelength_nm: lambda,
            membrane_index: geometry.membrane_index,
        })
    }

    pub fn layout(&self) -> &AxialLayout {
        &self.layout
    }

    /// `|E|²/max(ε|E|²)` at `depth_from_mirror_nm` inside the membrane.
    pub fn field_fraction(&self, depth_from_mirror_nm: f64) -> Result<f64> {
        let thickness = self.layout.membrane_end_nm - self.layout.membrane_start_nm;
        if !(depth_from_mirror_nm >= 0.0 && depth_from_mirror_nm <= thickness) {
            return Err(Error::invalid(format!(
                "emitter at {depth_from_mirror_nm} nm from the mirror is outside the {thickness} nm membrane"
            )));
        }
        let z = self.layout.emitter_position_nm(depth_from_mirror_nm);
        Ok(self.solution.intensity_at(z) / self.peak_energy)
    }

    pub fn breakdown(&self, depth_from_mirror_nm: f64, emitter: &EmitterProperties, options: &BetaOptions) -> Result<BetaBreakdown> {
        emitter.validate()?;
        if !(options.orientation_factor >= 0.0 && options.orientation_factor <= 1.0) {
            return Err(Error::invalid("orientation factor must be in [0, 1]"));
        }
        let u = self.field_fraction(depth_from_mirror_nm)?;
        let decay = 1e9 / emitter.lifetime_ns;
        let zpl_rate = emitter.debye_waller * decay;
        let lambda_m = self.wavelength_nm * 1e-9;
        let volume_m3 = self.mode_volume_um3 * 1e-18;
        let g_squared = 3.0 * SPEED_OF_LIGHT * lambda_m * lambda_m * zpl_rate * u * options.orientation_factor
            / (8.0 * PI * self.membrane_index * volume_m3);
        let dephasing = 2.0 * PI * emitter.linewidth_thz * 1e12;
        let cavity_rate = 4.0 * g_squared / (self.kappa_per_s + dephasing + decay);
        Ok(BetaBreakdown {
            beta: funneling_beta(g_squared, self.kappa_per_s, dephasing, decay),
            g_per_s: g_squared.sqrt(),
            kappa_per_s: self.kappa_per_s,
            mode_volume_um3: self.mode_volume_um3,
            field_fraction: u,
            cavity_rate_per_s: cavity_rate,
        })
    }
}

/// Simulated β for the emitter at the geometry's depth (from the mirror).
pub fn beta_simulated(cavity: &Cavity, mode: ModeIndex, emitter: &EmitterProperties, options: &BetaOptions) -> Result<f64> {
    Ok(beta_breakdown(cavity, mode, emitter, options)?.beta)
}

pub fn beta_breakdown(cavity: &Cavity, mode: ModeIndex, emitter: &EmitterProperties, options: &BetaOptions) -> Result<BetaBreakdown> {
    ModeField::new(cavity, mode, options)?.breakdown(cavity.geometry.emitter_depth_nm, emitter, options)
}

/// Side of the membrane from which emitter depth is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthReference {
    /// Air-facing membrane surface.
    #[default]
    Surface,
    /// Membrane-mirror interface.
    Mirror,
}

impl DepthReference {
    pub fn from_mirror(&self, depth_nm: f64, thickness_nm: f64) -> f64 {
        match self {
            DepthReference::Surface => thickness_nm - depth_nm,
            DepthReference::Mirror => depth_nm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaScan {
    pub thicknesses_nm: Vec<f64>,
    pub depths_nm: Vec<f64>,
    /// `beta[i][j]` for thickness `i` and depth `j`; NaN where the emitter
    /// would sit outside the membrane.
    pub beta: Vec<Vec<f64>>,
}

impl BetaScan {
    /// CSV `t_d_nm,depth_nm,beta`, thickness-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_d_nm,depth_nm,beta\n");
        for (t, row) in self.thicknesses_nm.iter().zip(&self.beta) {
            for (d, b) in self.depths_nm.iter().zip(row) {
                out.push_str(&format!("{t},{d},{b}\n"));
            }
        }
        out
    }
}

/// β over a grid of membrane thicknesses and emitter depths.
pub fn beta_scan(
    cavity: &Cavity,
    mode: ModeIndex,
    emitter: &EmitterProperties,
    options: &BetaOptions,
    thicknesses_nm: &[f64],
    depths_nm: &[f64],
    reference: DepthReference,
) -> Result<BetaScan> {
    emitter.validate()?;
    let rows = thicknesses_nm
        .par_iter()
        .map(|&t| {
            let field = mode_field_at_thickness(cavity, mode, options, t)?;
            depths_nm
                .iter()
                .map(|&d| {
                    let from_mirror = reference.from_mirror(d, t);
                    if from_mirror < 0.0 || from_mirror > t {
                        return Ok(f64::NAN);
                    }
                    Ok(field.breakdown(from_mirror, emitter, options)?.beta)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BetaScan {
        thicknesses_nm: thicknesses_nm.to_vec(),
        depths_nm: depths_nm.to_vec(),
        beta: rows,
    })
}

/// Normalized field at the air-facing membrane surface for each thickness.
pub fn surface_field_fraction(cavity: &Cavity, mode: ModeIndex, options: &BetaOptions, thicknesses_nm: &[f64]) -> Result<Vec<f64>> {
    thicknesses_nm
        .par_iter()
        .map(|&t| mode_field_at_thickness(cavity, mode, options, t)?.field_fraction(t))
        .collect()
}

fn mode_field_at_thickness(cavity: &Cavity, mode: ModeIndex, options: &BetaOptions, thickness_nm: f64) -> Result<ModeField> {
    let mut geometry = cavity.geometry;
    geometry.membrane_thickness_nm = thickness_nm;
    geometry.emitter_depth_nm = geometry.emitter_depth_nm.min(thickness_nm);
    ModeField::new(&cavity.with_geometry(geometry)?, mode, options)
}

/// β at the nominal depth with the range reached within one and two
/// standard deviations of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthBand {
    pub thickness_nm: f64,
    pub nominal: f64,
    pub one_sigma: (f64, f64),
    pub two_sigma: (f64, f64),
}

/// Depth bands for each thickness; each window is sampled at
/// `samples_per_sigma` points per standard deviation on either side.
pub fn depth_bands(
    cavity: &Cavity,
    mode: ModeIndex,
    emitter: &EmitterProperties,
    options: &BetaOptions,
    thicknesses_nm: &[f64],
    mean_depth_nm: f64,
    sigma_nm: f64,
    reference: DepthReference,
    samples_per_sigma: usize,
) -> Result<Vec<DepthBand>> {
    if !(sigma_nm >= 0.0) || samples_per_sigma == 0 {
        return Err(Error::invalid("depth spread must be >= 0 with at least one sample per sigma"));
    }
    let n = samples_per_sigma as i64;
    thicknesses_nm
        .par_iter()
        .map(|&t| {
            let field = mode_field_at_thickness(cavity, mode, options, t)?;
            let beta_at = |depth: f64| -> Result<f64> {
                let from_mirror = reference.from_mirror(depth, t).clamp(0.0, t);
                Ok(field.breakdown(from_mirror, emitter, options)?.beta)
            };
            let nominal = beta_at(mean_depth_nm)?;
            let mut one = (nominal, nominal);
            let mut two = (nominal, nominal);
            for k in -2 * n..=2 * n {
                let offset = sigma_nm * k as f64 / n as f64;
                let b = beta_at(mean_depth_nm + offset)?;
                two = (two.0.min(b), two.1.max(b));
                if k.abs() <= n {
                    one = (one.0.min(b), one.1.max(b));
                }
            }
            Ok(DepthBand {
                thickness_nm: t,
                nominal,
                one_sigma: one,
                two_sigma: two,
            })
        })
        .collect()
}

/// CSV of depth bands.
pub fn depth_bands_csv(bands: &[DepthBand]) -> String {
    let mut out = String::from("t_d_nm,beta_nominal,beta_1sigma_min,beta_1sigma_max,beta_2sigma_min,beta_2sigma_max\n");
    for b in bands {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.thickness_nm, b.nominal, b.one_sigma.0, b.one_sigma.1, b.two_sigma.0, b.two_sigma.1
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::CavityGeometry;

    #[test]
    fn rate_corrections() {
        let free = corrected_rate(4000.0, 3.5e-3).unwrap();
        assert!((free - 1.142857e6).abs() < 1.0);
        assert!((corrected_rate(380.0, 8.2e-2).unwrap() - 4634.15).abs() < 0.01);
        assert_eq!(corrected_rate(123.0, 1.0).unwrap(), 123.0);
        assert!(corrected_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn spectral_densities() {
        let free = peak_spectral_density(0.6 * 1.2e6, 5220.0).unwrap();
        assert!((free - 87.8).abs() < 0.1);
        let cav = peak_spectral_density(4700.0, 1.08).unwrap();
        assert!((cav - 2770.4).abs() < 0.1);
        assert!((cav / free - 31.5).abs() < 0.1);
    }

    #[test]
    fn beta_limits() {
        assert!((beta_measured(4700.0, 1.2e6).unwrap() - 0.0039).abs() < 1e-4);
        assert_eq!(beta_measured(10.0, 0.0).unwrap(), 1.0);
        assert_eq!(beta_measured(0.0, 10.0).unwrap(), 0.0);
        assert!(beta_measured(0.0, 0.0).is_err());
    }

    #[test]
    fn purcell_chain() {
        let f = purcell_from_beta(5.22, 1.08, 0.6, 0.004).unwrap();
        assert!((f - 32.22).abs() < 0.01);
        assert_eq!(purcell_from_beta(5.22, 1.08, 0.6, 0.0).unwrap(), 0.0);
        let half = purcell_from_beta(5.22, 2.16, 0.6, 0.004).unwrap();
        assert!((half - f / 2.0).abs() < 1e-12);
        let (reduction, zpl) = lifetime_and_zpl_projection(32.0, 0.6).unwrap();
        assert!((reduction - 20.2).abs() < 1e-12);
        assert!((zpl - 0.980).abs() < 1e-3);
        assert_eq!(lifetime_and_zpl_projection(0.0, 0.6).unwrap(), (1.0, 0.6));
        assert_eq!(lifetime_and_zpl_projection(7.0, 1.0).unwrap().1, 1.0);
    }

    #[test]
    fn qe_values() {
        assert!((quantum_efficiency(1.2e6, 6.8e6).unwrap() - 0.1765).abs() < 1e-4);
        assert_eq!(quantum_efficiency(5.0, 5.0).unwrap(), 1.0);
        assert_eq!(quantum_efficiency(0.0, 5.0).unwrap(), 0.0);
    }

    fn cavity() -> Cavity {
        let geometry = CavityGeometry {
            radius_of_curvature_um: 43.1,
            air_gap_um: 4.5,
            membrane_thickness_nm: 862.0,
            membrane_index: 2.41,
            emitter_depth_nm: 125.0,
            wavelength_nm: 603.0,
        };
        Cavity::standard(geometry).unwrap()
    }

    fn gev() -> EmitterProperties {
        EmitterProperties {
            linewidth_thz: 5.22,
            lifetime_ns: 6.0,
            debye_waller: 0.6,
        }
    }

    #[test]
    fn beta_is_zero_at_a_node() {
        let field = ModeField::new(&cavity(), ModeIndex::fundamental(15), &BetaOptions::default()).unwrap();
        // Scan the membrane for the weakest field point.
        let (depth, _) = (0..=8620)
            .map(|i| i as f64 * 0.1)
            .map(|d| (d, field.field_fraction(d).unwrap()))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let b = field.breakdown(depth, &gev(), &BetaOptions::default()).unwrap();
        assert!(b.beta < 1e-5, "beta at node {}", b.beta);
        let zero = BetaOptions {
            orientation_factor: 0.0,
            ..Default::default()
        };
        assert_eq!(field.breakdown(300.0, &gev(), &zero).unwrap().beta, 0.0);
    }

    #[test]
    fn emitter_outside_membrane_rejected() {
        let field = ModeField::new(&cavity(), ModeIndex::fundamental(15), &BetaOptions::default()).unwrap();
        assert!(field.field_fraction(-1.0).is_err());
        assert!(field.field_fraction(900.0).is_err());
    }

    #[test]
    fn funneling_formula() {
        assert_eq!(funneling_beta(0.0, 1.0, 1.0, 1.0), 0.0);
        let b = funneling_beta(1.0, 1.0, 1.0, 2.0);
        // R = 4/4 = 1, β = 1/3
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
    }
}
