//! Plano-concave Fabry-Perot cavity with a dielectric membrane bonded to the
//! flat mirror.
//!
//! Axial layout, from the concave (fiber) side:
//!
//! ```text
//! fiber | fiber coating | air gap | membrane | flat coating | substrate
//! ```
//!
//! The round-trip phase at the air gap is
//! `2kL + Φ(λ) - 2(q+1)ψ`, where `Φ = arg(r_flat · r_fiber)` combines the
//! reflection of the membrane-coated flat mirror and the fiber mirror as seen
//! from the air gap, and `ψ` is the one-way Gouy phase. A cavity with two
//! perfectly conducting mirrors has `Φ = 0`, so longitudinal order `m` counts
//! half-wavelengths in the air gap. `Φ` is taken in `[0, 2π)` at the geometry
//! wavelength and followed continuously to other wavelengths, so a branch
//! keeps its label across a dispersion scan.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::optics::{
    field_profile_with_margins, stack_response, transfer_matrix, BraggDesign, FieldProfile,
    FieldSolution, Layer, LayerStack, Termination, TransferMatrix, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    #[serde(rename = "R_um")]
    pub radius_of_curvature_um: f64,
    pub air_gap_um: f64,
    #[serde(rename = "t_d_nm")]
    pub membrane_thickness_nm: f64,
    #[serde(rename = "n_d")]
    pub membrane_index: f64,
    /// Distance of the emitter from the mirror-membrane interface.
    pub emitter_depth_nm: f64,
    #[serde(rename = "lambda_nm")]
    pub wavelength_nm: f64,
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("R_um", self.radius_of_curvature_um),
            ("air_gap_um", self.air_gap_um),
            ("n_d", self.membrane_index),
            ("lambda_nm", self.wavelength_nm),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.membrane_thickness_nm >= 0.0) {
            return Err(Error::invalid("membrane thickness must be >= 0"));
        }
        if !(self.emitter_depth_nm >= 0.0 && self.emitter_depth_nm <= self.membrane_thickness_nm) {
            return Err(Error::invalid(format!(
                "emitter depth {} nm outside membrane of {} nm",
                self.emitter_depth_nm, self.membrane_thickness_nm
            )));
        }
        Ok(())
    }

    /// Free-space length with the same Gaussian-beam propagation as the
    /// air gap plus membrane (a slab of thickness `t` acts like `t/n`).
    pub fn equivalent_length_um(&self) -> f64 {
        equivalent_length_um(self.air_gap_um, self.membrane_thickness_nm, self.membrane_index)
    }

    pub fn with_air_gap(&self, air_gap_um: f64) -> Self {
        CavityGeometry {
            air_gap_um,
            ..*self
        }
    }
}

fn equivalent_length_um(air_gap_um: f64, membrane_nm: f64, n: f64) -> f64 {
    air_gap_um + membrane_nm * 1e-3 / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub longitudinal: u32,
    pub transverse_order: u32,
}

impl ModeIndex {
    pub fn new(longitudinal: u32, transverse_order: u32) -> Result<Self> {
        if longitudinal < 1 {
            return Err(Error::invalid("longitudinal order must be >= 1"));
        }
        Ok(ModeIndex {
            longitudinal,
            transverse_order,
        })
    }

    pub fn fundamental(longitudinal: u32) -> Self {
        ModeIndex {
            longitudinal: longitudinal.max(1),
            transverse_order: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMode {
    pub waist_radius_um: f64,
    /// Free-space Rayleigh range of the reduced (air-equivalent) resonator.
    pub rayleigh_range_um: f64,
    pub gouy_phase_per_pass: f64,
    /// Waist position measured from the flat mirror.
    pub waist_position_um: f64,
}

impl GaussianMode {
    /// `π w₀² n / λ` in a medium of index `n`.
    pub fn rayleigh_range_in(&self, n: f64, wavelength_nm: f64) -> f64 {
        PI * self.waist_radius_um.powi(2) * n / (wavelength_nm * 1e-3)
    }

    /// Area of a TEM00 intensity profile, `π w₀² / 2`.
    pub fn effective_area_um2(&self) -> f64 {
        PI * self.waist_radius_um.powi(2) / 2.0
    }
}

/// Fundamental mode of a plano-concave resonator of equivalent length
/// `length_um` and mirror radius `radius_um`.
pub fn gaussian_mode_for_length(radius_um: f64, length_um: f64, wavelength_nm: f64) -> Result<GaussianMode> {
    if !(wavelength_nm > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    if !(length_um > 0.0 && length_um < radius_um) {
        return Err(Error::StabilityViolation {
            length_um,
            radius_um,
        });
    }
    let lambda_um = wavelength_nm * 1e-3;
    let z_r = (length_um * (radius_um - length_um)).sqrt();
    let w0_sq = lambda_um / PI * z_r;
    Ok(GaussianMode {
        waist_radius_um: w0_sq.sqrt(),
        rayleigh_range_um: z_r,
        gouy_phase_per_pass: (length_um / z_r).atan(),
        waist_position_um: 0.0,
    })
}

pub fn gaussian_mode(geometry: &CavityGeometry) -> Result<GaussianMode> {
    gaussian_mode_for_length(
        geometry.radius_of_curvature_um,
        geometry.equivalent_length_um(),
        geometry.wavelength_nm,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavitySpectralParams {
    pub finesse: f64,
    pub fsr_thz: f64,
    pub linewidth_fwhm_ghz: f64,
    pub effective_length_um: f64,
}

impl CavitySpectralParams {
    /// Inverse of [`spectral_params`]: recover `L_eff` from finesse and linewidth.
    pub fn from_linewidth(finesse: f64, linewidth_ghz: f64) -> Result<Self> {
        if !(finesse > 0.0 && linewidth_ghz > 0.0) {
            return Err(Error::invalid("finesse and linewidth must be positive"));
        }
        let fsr_thz = linewidth_ghz * finesse * 1e-3;
        let effective_length_um = SPEED_OF_LIGHT / (2.0 * fsr_thz * 1e12) * 1e6;
        Ok(CavitySpectralParams {
            finesse,
            fsr_thz,
            linewidth_fwhm_ghz: linewidth_ghz,
            effective_length_um,
        })
    }

    /// Cavity energy decay rate `κ` (FWHM, angular), 1/s.
    pub fn kappa_per_s(&self) -> f64 {
        2.0 * PI * self.linewidth_fwhm_ghz * 1e9
    }
}

/// `FSR = c / (2 L_eff)`, `linewidth = FSR / F`.
pub fn spectral_params(finesse: f64, effective_length_um: f64) -> Result<CavitySpectralParams> {
    if !(finesse > 0.0) || !(effective_length_um > 0.0) {
        return Err(Error::invalid(format!(
            "finesse and effective length must be positive, got {finesse} and {effective_length_um}"
        )));
    }
    let fsr_thz = SPEED_OF_LIGHT / (2.0 * effective_length_um * 1e-6) * 1e-12;
    Ok(CavitySpectralParams {
        finesse,
        fsr_thz,
        linewidth_fwhm_ghz: fsr_thz * 1e3 / finesse,
        effective_length_um,
    })
}

/// `V = ∫ε|E|²dz · (π w₀²/2) / max(ε|E|²)` in µm³.
pub fn mode_volume(geometry: &CavityGeometry, axial_profile: &FieldProfile) -> Result<f64> {
    let mode = gaussian_mode(geometry)?;
    let length = effective_axial_length_um(axial_profile)?;
    Ok(length * mode.effective_area_um2())
}

/// `∫ε|E|²dz / max(ε|E|²)` in µm.
pub fn effective_axial_length_um(profile: &FieldProfile) -> Result<f64> {
    let energy = profile.energy_density();
    let peak = energy.iter().cloned().fold(0.0_f64, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidProfile("field maximum is zero".into()));
    }
    Ok(integrate_energy(profile, f64::NEG_INFINITY, f64::INFINITY) / peak * 1e-3)
}

/// Trapezoidal `∫ε|E|²dz` (nm) over `[from, to)`; each segment takes the
/// index of its left sample, so steps in ε land on the sampled interfaces.
pub(crate) fn integrate_energy(profile: &FieldProfile, from_nm: f64, to_nm: f64) -> f64 {
    let z = &profile.positions_nm;
    let mut total = 0.0;
    for i in 0..z.len().saturating_sub(1) {
        if z[i] < from_nm || z[i + 1] > to_nm {
            continue;
        }
        let eps = profile.index[i] * profile.index[i];
        total += 0.5 * eps * (profile.intensity[i] + profile.intensity[i + 1]) * (z[i + 1] - z[i]);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mirror {
    /// `r = -1` at every wavelength.
    Perfect,
    /// Coating listed from the cavity side; the incident index is replaced
    /// by whatever medium faces the mirror.
    Coating(LayerStack),
}

impl Mirror {
    /// Reflection amplitude seen from `incident` through `front` layers.
    fn reflection(&self, incident: C64, front: &[Layer], wavelength_nm: f64) -> Result<C64> {
        match self {
            Mirror::Coating(stack) => {
                Ok(stack_response(&stack.with_front_layers(front, incident), wavelength_nm)?.r)
            }
            Mirror::Perfect => {
                if front.is_empty() {
                    return Ok(C64::new(-1.0, 0.0));
                }
                // E = 0 behind the last front layer.
                let partial = LayerStack::new(incident, front.to_vec(), front[front.len() - 1].index)?;
                let m: TransferMatrix = transfer_matrix(&partial, wavelength_nm)?;
                let [a, b] = m.apply([C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
                Ok(b / a)
            }
        }
    }

    fn coating(&self) -> Option<&LayerStack> {
        match self {
            Mirror::Coating(s) => Some(s),
            Mirror::Perfect => None,
        }
    }

    pub fn transmittance(&self, wavelength_nm: f64) -> Result<f64> {
        match self {
            Mirror::Perfect => Ok(0.0),
            Mirror::Coating(s) => Ok(stack_response(s, wavelength_nm)?.transmittance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResonanceTarget {
    /// Solve for the air gap at the geometry wavelength.
    AirGap,
    /// Solve for the wavelength at the geometry air gap.
    Wavelength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Resonance {
    AirGapUm(f64),
    WavelengthNm(f64),
}

/// Step used when following the mirror phase in wavelength.
const UNWRAP_STEP_NM: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Cavity {
    pub geometry: CavityGeometry,
    pub flat_mirror: Mirror,
    pub fiber_mirror: Mirror,
    pub include_gouy: bool,
}

/// Geometric layout of the axial stack used for field profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxialLayout {
    pub air_gap_start_nm: f64,
    pub membrane_start_nm: f64,
    /// Mirror-membrane interface.
    pub membrane_end_nm: f64,
    pub end_nm: f64,
}

impl AxialLayout {
    pub fn emitter_position_nm(&self, depth_from_mirror_nm: f64) -> f64 {
        self.membrane_end_nm - depth_from_mirror_nm
    }
}

impl Cavity {
    pub fn new(geometry: CavityGeometry, flat_mirror: Mirror, fiber_mirror: Mirror) -> Result<Self> {
        geometry.validate()?;
        Ok(Cavity {
            geometry,
            flat_mirror,
            fiber_mirror,
            include_gouy: true,
        })
    }

    /// Matched quarter-wave mirrors at `target_ppm`: low-index terminated
    /// flat mirror, high-index terminated fiber mirror.
    pub fn with_designed_mirrors(geometry: CavityGeometry, target_ppm: f64, n_hi: f64, n_lo: f64, design_nm: f64) -> Result<Self> {
        let flat = BraggDesign::new(design_nm, n_hi, n_lo, Termination::Lo).design(target_ppm)?;
        let fiber = BraggDesign::new(design_nm, n_hi, n_lo, Termination::Hi).design(target_ppm)?;
        Cavity::new(geometry, Mirror::Coating(flat), Mirror::Coating(fiber))
    }

    /// 70 ppm Ta2O5/SiO2 mirrors designed at 603 nm.
    pub fn standard(geometry: CavityGeometry) -> Result<Self> {
        use crate::constants::{GEV_ZPL_NM, N_SIO2, N_TA2O5};
        Cavity::with_designed_mirrors(geometry, 70.0, N_TA2O5, N_SIO2, GEV_ZPL_NM)
    }

    pub fn with_geometry(&self, geometry: CavityGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(Cavity {
            geometry,
            ..self.clone()
        })
    }

    pub fn without_gouy(mut self) -> Self {
        self.include_gouy = false;
        self
    }

    fn membrane_layers(&self) -> Result<Vec<Layer>> {
        if self.geometry.membrane_thickness_nm > 0.0 {
            Ok(vec![Layer::lossless(
                self.geometry.membrane_thickness_nm,
                self.geometry.membrane_index,
            )?])
        } else {
            Ok(Vec::new())
        }
    }

    /// Reflection of the membrane-coated flat mirror seen from the air gap.
    pub fn flat_reflection(&self, wavelength_nm: f64) -> Result<C64> {
        self.flat_mirror
            .reflection(C64::new(1.0, 0.0), &self.membrane_layers()?, wavelength_nm)
    }

    pub fn fiber_reflection(&self, wavelength_nm: f64) -> Result<C64> {
        self.fiber_mirror.reflection(C64::new(1.0, 0.0), &[], wavelength_nm)
    }

    /// `arg(r_flat r_fiber)` in `[0, 2π)`.
    pub fn mirror_phase_wrapped(&self, wavelength_nm: f64) -> Result<f64> {
        let product = self.flat_reflection(wavelength_nm)? * self.fiber_reflection(wavelength_nm)?;
        let mut phase = product.arg();
        if phase < 0.0 {
            phase += 2.0 * PI;
        }
        if phase >= 2.0 * PI {
            phase -= 2.0 * PI;
        }
        Ok(phase)
    }

    /// Combined mirror phase, continuous in wavelength and anchored in
    /// `[0, 2π)` at the geometry wavelength.
    pub fn mirror_phase(&self, wavelength_nm: f64) -> Result<f64> {
        let anchor = self.geometry.wavelength_nm;
        let start = self.mirror_phase_wrapped(anchor)?;
        self.follow_phase(anchor, start, wavelength_nm)
    }

    fn follow_phase(&self, from_nm: f64, from_phase: f64, to_nm: f64) -> Result<f64> {
        let span = to_nm - from_nm;
        let steps = (span.abs() / UNWRAP_STEP_NM).ceil() as usize;
        let mut phase = from_phase;
        let mut prev_wrapped = self.mirror_phase_wrapped(from_nm)?;
        for k in 1..=steps {
            let wl = from_nm + span * k as f64 / steps as f64;
            let wrapped = self.mirror_phase_wrapped(wl)?;
            phase += wrap_pi(wrapped - prev_wrapped);
            prev_wrapped = wrapped;
        }
        Ok(phase)
    }

    /// Mirror phase on a sorted wavelength grid, continuous along the grid.
    pub fn mirror_phase_grid(&self, wavelengths_nm: &[f64]) -> Result<Vec<f64>> {
        if wavelengths_nm.is_empty() {
            return Ok(Vec::new());
        }
        let anchor = self.geometry.wavelength_nm;
        let nearest = wavelengths_nm
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - anchor).abs().total_cmp(&(b.1 - anchor).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut out = vec![0.0; wavelengths_nm.len()];
        out[nearest] = self.mirror_phase(wavelengths_nm[nearest])?;
        for i in nearest + 1..wavelengths_nm.len() {
            out[i] = self.follow_phase(wavelengths_nm[i - 1], out[i - 1], wavelengths_nm[i])?;
        }
        for i in (0..nearest).rev() {
            out[i] = self.follow_phase(wavelengths_nm[i + 1], out[i + 1], wavelengths_nm[i])?;
        }
        Ok(out)
    }

    /// One-way Gouy phase for an air gap `air_gap_um`.
    pub fn gouy_phase(&self, air_gap_um: f64) -> Result<f64> {
        if !self.include_gouy {
            return Ok(0.0);
        }
        let g = &self.geometry;
        let length = equivalent_length_um(air_gap_um, g.membrane_thickness_nm, g.membrane_index);
        if !(length > 0.0 && length < g.radius_of_curvature_um) {
            return Err(Error::StabilityViolation {
                length_um: length,
                radius_um: g.radius_of_curvature_um,
            });
        }
        Ok((length / (g.radius_of_curvature_um - length)).sqrt().atan())
    }

    fn phase_with(&self, air_gap_um: f64, wavelength_nm: f64, mirror_phase: f64, q: u32) -> Result<f64> {
        let k = 2.0 * PI / (wavelength_nm * 1e-3);
        Ok(2.0 * k * air_gap_um + mirror_phase - 2.0 * (q as f64 + 1.0) * self.gouy_phase(air_gap_um)?)
    }

    /// Total round-trip phase for transverse order `q`.
    pub fn round_trip_phase(&self, air_gap_um: f64, wavelength_nm: f64, q: u32) -> Result<f64> {
        let phi = self.mirror_phase(wavelength_nm)?;
        self.phase_with(air_gap_um, wavelength_nm, phi, q)
    }

    pub fn resonance_condition(&self, mode: ModeIndex, target: ResonanceTarget) -> Result<Resonance> {
        match target {
            ResonanceTarget::AirGap => self.resonant_air_gap(mode).map(Resonance::AirGapUm),
            ResonanceTarget::Wavelength => self.resonant_wavelength(mode).map(Resonance::WavelengthNm),
        }
    }

    /// Air gap (µm) resonant with `mode` at the geometry wavelength.
    pub fn resonant_air_gap(&self, mode: ModeIndex) -> Result<f64> {
        self.resonant_air_gap_at(mode, self.geometry.wavelength_nm)
    }

    /// Air gap (µm) resonant with `mode` at `wavelength_nm`.
    pub fn resonant_air_gap_at(&self, mode: ModeIndex, wavelength_nm: f64) -> Result<f64> {
        let phi = self.mirror_phase(wavelength_nm)?;
        self.resonant_air_gap_with_phase(mode, wavelength_nm, phi)
    }

    fn resonant_air_gap_with_phase(&self, mode: ModeIndex, wavelength_nm: f64, phi: f64) -> Result<f64> {
        let target = 2.0 * PI * mode.longitudinal as f64;
        let k = 2.0 * PI / (wavelength_nm * 1e-3);
        let bare = (target - phi) / (2.0 * k);
        if !(bare > 0.0) {
            return Err(Error::RootNotFound(format!(
                "order {} has no positive air gap at {wavelength_nm} nm",
                mode.longitudinal
            )));
        }
        if !self.include_gouy {
            return Ok(bare);
        }
        let g = &self.geometry;
        let max_gap = g.radius_of_curvature_um - g.membrane_thickness_nm * 1e-3 / g.membrane_index;
        let q = mode.transverse_order;
        let f = |gap: f64| -> Result<f64> { Ok(self.phase_with(gap, wavelength_nm, phi, q)? - target) };
        // Gouy phase only lowers the round trip, so the root lies above `bare`
        // and within (q+1) half-waves of it.
        let lo = bare;
        let hi = (bare + (q as f64 + 1.0) * wavelength_nm * 1e-3 / 2.0).min(max_gap * (1.0 - 1e-12));
        if !(hi > lo) {
            return Err(Error::StabilityViolation {
                length_um: equivalent_length_um(bare, g.membrane_thickness_nm, g.membrane_index),
                radius_um: g.radius_of_curvature_um,
            });
        }
        solve_bracketed(f, lo, hi, 1e-10)
    }

    /// Wavelength (nm) resonant with `mode` at the geometry air gap.
    pub fn resonant_wavelength(&self, mode: ModeIndex) -> Result<f64> {
        let gap = self.geometry.air_gap_um;
        let q = mode.transverse_order;
        let target = 2.0 * PI * mode.longitudinal as f64;
        let gouy = self.gouy_phase(gap)?;
        let anchor = self.geometry.wavelength_nm;
        let phi0 = self.mirror_phase_wrapped(anchor)?;
        // Seed with the mirror phase frozen at the anchor wavelength.
        let denom = target - phi0 + 2.0 * (q as f64 + 1.0) * gouy;
        if !(denom > 0.0) {
            return Err(Error::RootNotFound("no positive resonant wavelength".into()));
        }
        let seed = 4.0 * PI * gap / denom * 1e3;
        let f = |wl: f64| -> Result<f64> { Ok(self.round_trip_phase(gap, wl, q)? - target) };
        // Phase decreases with wavelength; widen until the sign changes.
        let mut width = 0.01 * seed;
        for _ in 0..6 {
            let lo = (seed - width).max(1.0);
            let hi = seed + width;
            if f(lo)? >= 0.0 && f(hi)? <= 0.0 {
                return solve_bracketed(f, lo, hi, 1e-10);
            }
            width *= 2.0;
        }
        Err(Error::RootNotFound(format!(
            "no resonance of order {} near {seed:.1} nm",
            mode.longitudinal
        )))
    }

    /// Cavity length entering the FSR: air gap plus the group delay of both
    /// mirror reflections (membrane path and coating penetration).
    pub fn effective_length_um(&self, wavelength_nm: f64) -> Result<f64> {
        let h = 0.01;
        let up = self.mirror_phase_wrapped(wavelength_nm + h)?;
        let down = self.mirror_phase_wrapped(wavelength_nm - h)?;
        let slope = wrap_pi(up - down) / (2.0 * h);
        let delay_nm = -wavelength_nm * wavelength_nm / (4.0 * PI) * slope;
        Ok(self.geometry.air_gap_um + delay_nm * 1e-3)
    }

    /// Finesse from mirror transmissions plus any extra round-trip loss.
    pub fn finesse_from_mirrors(&self, wavelength_nm: f64, extra_loss_ppm: f64) -> Result<f64> {
        let loss = self.flat_mirror.transmittance(wavelength_nm)?
            + self.fiber_mirror.transmittance(wavelength_nm)?
            + extra_loss_ppm * 1e-6;
        if !(loss > 0.0) {
            return Err(Error::invalid("lossless cavity has unbounded finesse"));
        }
        Ok(2.0 * PI / loss)
    }

    /// Full axial stack for an air gap of `air_gap_um`, incident from the fiber.
    pub fn axial_stack(&self, air_gap_um: f64) -> Result<(LayerStack, AxialLayout)> {
        let (Some(fiber), Some(flat)) = (self.fiber_mirror.coating(), self.flat_mirror.coating()) else {
            return Err(Error::invalid("axial field needs coated mirrors on both sides"));
        };
        let fiber_side = fiber.reversed();
        let coating_nm = fiber_side.total_thickness_nm();
        let mut layers = fiber_side.layers.clone();
        layers.push(Layer::lossless(air_gap_um * 1e3, 1.0)?);
        layers.extend(self.membrane_layers()?);
        layers.extend_from_slice(&flat.layers);
        let stack = LayerStack::new(fiber_side.incident_index, layers, flat.exit_index)?;
        let membrane_start = coating_nm + air_gap_um * 1e3;
        let membrane_end = membrane_start + self.geometry.membrane_thickness_nm;
        let layout = AxialLayout {
            air_gap_start_nm: coating_nm,
            membrane_start_nm: membrane_start,
            membrane_end_nm: membrane_end,
            end_nm: stack.total_thickness_nm(),
        };
        Ok((stack, layout))
    }

    /// Air gap (µm) where the planar stack resonates in order `m` at the
    /// geometry wavelength, ignoring the Gouy shift.
    pub fn planar_resonant_air_gap(&self, longitudinal: u32) -> Result<f64> {
        let phi = self.mirror_phase_wrapped(self.geometry.wavelength_nm)?;
        let k = 2.0 * PI / (self.geometry.wavelength_nm * 1e-3);
        let gap = (2.0 * PI * longitudinal as f64 - phi) / (2.0 * k);
        if !(gap > 0.0) {
            return Err(Error::RootNotFound(format!("order {longitudinal} has no positive air gap")));
        }
        Ok(gap)
    }

    /// Resonant axial standing wave for longitudinal order `m`.
    ///
    /// The planar stack carries no Gouy phase, so it is evaluated at the
    /// planar resonance; the transverse shift is a few tens of nm of air and
    /// leaves the pattern in the membrane unchanged.
    pub fn axial_profile(&self, longitudinal: u32, sampling_nm: f64) -> Result<(FieldProfile, AxialLayout)> {
        let gap = self.planar_resonant_air_gap(longitudinal)?;
        let (stack, layout) = self.axial_stack(gap)?;
        let profile = field_profile_with_margins(&stack, self.geometry.wavelength_nm, sampling_nm, 0.0, 0.0)?;
        Ok((profile, layout))
    }

    /// Axial field solution (exact evaluation at any position).
    pub fn axial_solution(&self, longitudinal: u32) -> Result<(FieldSolution, AxialLayout)> {
        let gap = self.planar_resonant_air_gap(longitudinal)?;
        let (stack, layout) = self.axial_stack(gap)?;
        Ok((FieldSolution::new(&stack, self.geometry.wavelength_nm)?, layout))
    }
}

/// Fraction of `∫ε|E|²` between the air gap and membrane that sits in the
/// membrane; near 1 for membrane-like modes, small for air-like ones.
pub fn membrane_energy_fraction(profile: &FieldProfile, layout: &AxialLayout) -> f64 {
    let air = integrate_energy(profile, layout.air_gap_start_nm, layout.membrane_start_nm);
    let membrane = integrate_energy(profile, layout.membrane_start_nm, layout.membrane_end_nm);
    if air + membrane == 0.0 {
        return 0.0;
    }
    membrane / (air + membrane)
}

pub(crate) fn wrap_pi(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    } else if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Bisection with secant refinement on a sign-changing bracket.
fn solve_bracketed<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootNotFound(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        // Take the secant point only while it stays well inside the bracket.
        let x = if secant > lo + 0.05 * (hi - lo) && secant < hi - 0.05 * (hi - lo) {
            secant
        } else {
            mid
        };
        let fx = f(x)?;
        if fx.abs() < tol {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
        if (hi - lo).abs() <= f64::EPSILON * hi.abs().max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::RootNotFound("bracketed solver did not converge".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Lorentzian half width in round-trip phase (rad).
    pub phase_width: f64,
    /// Weights of transverse orders 0 and 1.
    pub transverse_weights: [f64; 2],
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            phase_width: 0.05,
            transverse_weights: [1.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionMap {
    pub air_gaps_um: Vec<f64>,
    pub wavelengths_nm: Vec<f64>,
    /// `values[i][j]` for air gap `i` and wavelength `j`.
    pub values: Vec<Vec<f64>>,
}

impl DispersionMap {
    /// CSV with header `air_gap_um,lambda_nm,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("air_gap_um,lambda_nm,value\n");
        for (gap, row) in self.air_gaps_um.iter().zip(&self.values) {
            for (wl, v) in self.wavelengths_nm.iter().zip(row) {
                out.push_str(&format!("{gap},{wl},{v}\n"));
            }
        }
        out
    }

    /// Air gap index of the largest value in wavelength column `j`.
    pub fn argmax_gap(&self, j: usize) -> usize {
        let mut best = 0;
        for i in 0..self.air_gaps_um.len() {
            if self.values[i][j] > self.values[best][j] {
                best = i;
            }
        }
        best
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Resonance-proximity map: a Lorentzian in wrapped round-trip phase summed
/// over transverse orders 0 and 1.
pub fn dispersion_scan(cavity: &Cavity, air_gaps_um: &[f64], wavelengths_nm: &[f64], options: ScanOptions) -> Result<DispersionMap> {
    check_grid("air gap", air_gaps_um)?;
    check_grid("wavelength", wavelengths_nm)?;
    let phis = cavity.mirror_phase_grid(wavelengths_nm)?;
    let gouy = air_gaps_um
        .iter()
        .map(|&g| cavity.gouy_phase(g))
        .collect::<Result<Vec<_>>>()?;
    let width = options.phase_width;
    let values = air_gaps_um
        .par_iter()
        .zip(gouy.par_iter())
        .map(|(&gap, &psi)| {
            wavelengths_nm
                .iter()
                .zip(&phis)
                .map(|(&wl, &phi)| {
                    let k = 2.0 * PI / (wl * 1e-3);
                    let mut value = 0.0;
                    for (q, weight) in options.transverse_weights.iter().enumerate() {
                        let phase = 2.0 * k * gap + phi - 2.0 * (q as f64 + 1.0) * psi;
                        let detuning = wrap_pi(phase) / width;
                        value += weight / (1.0 + detuning * detuning);
                    }
                    value
                })
                .collect()
        })
        .collect();
    Ok(DispersionMap {
        air_gaps_um: air_gaps_um.to_vec(),
        wavelengths_nm: wavelengths_nm.to_vec(),
        values,
    })
}

/// Resonant air gap of `mode` at each wavelength (NaN where unstable).
pub fn branch_curve(cavity: &Cavity, mode: ModeIndex, wavelengths_nm: &[f64]) -> Result<Vec<f64>> {
    check_grid("wavelength", wavelengths_nm)?;
    let phis = cavity.mirror_phase_grid(wavelengths_nm)?;
    wavelengths_nm
        .par_iter()
        .zip(phis.par_iter())
        .map(|(&wl, &phi)| match cavity.resonant_air_gap_with_phase(mode, wl, phi) {
            Ok(gap) => Ok(gap),
            Err(Error::StabilityViolation { .. }) | Err(Error::RootNotFound(_)) => Ok(f64::NAN),
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> CavityGeometry {
        CavityGeometry {
            radius_of_curvature_um: 43.1,
            air_gap_um: 4.5,
            membrane_thickness_nm: 862.0,
            membrane_index: 2.41,
            emitter_depth_nm: 125.0,
            wavelength_nm: 603.0,
        }
    }

    #[test]
    fn waist_matches_closed_form() {
        let mode = gaussian_mode_for_length(43.1, 4.5, 603.0).unwrap();
        let oracle = (0.603 / PI * (4.5_f64 * (43.1 - 4.5)).sqrt()).sqrt();
        assert!((mode.waist_radius_um - oracle).abs() <= 1e-12 * oracle);
        assert!((2.0 * mode.waist_radius_um - 3.2).abs() < 0.05);
    }

    #[test]
    fn waist_scales_with_sqrt_wavelength() {
        let a = gaussian_mode_for_length(43.1, 4.5, 603.0).unwrap();
        let b = gaussian_mode_for_length(43.1, 4.5, 1206.0).unwrap();
        assert!((b.waist_radius_um / a.waist_radius_um - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unstable_lengths_rejected() {
        for len in [0.0, 43.1, 50.0] {
            assert!(matches!(
                gaussian_mode_for_length(43.1, len, 603.0),
                Err(Error::StabilityViolation { .. })
            ));
        }
        let small = gaussian_mode_for_length(43.1, 1e-15, 603.0).unwrap();
        assert!(small.waist_radius_um < 1e-3);
    }

    #[test]
    fn rayleigh_range_in_medium() {
        let mode = gaussian_mode_for_length(43.1, 4.5, 603.0).unwrap();
        let zr = mode.rayleigh_range_in(1.0, 603.0);
        assert!((zr - mode.rayleigh_range_um).abs() < 1e-12 * zr);
    }

    #[test]
    fn spectral_params_from_measured_values() {
        let from_kappa = CavitySpectralParams::from_linewidth(11_200.0, 1.08).unwrap();
        assert!((from_kappa.fsr_thz - 12.1).abs() < 0.01);
        assert!((from_kappa.effective_length_um - 12.4).abs() < 0.01);
        let round = spectral_params(11_200.0, from_kappa.effective_length_um).unwrap();
        assert!((round.linewidth_fwhm_ghz - 1.08).abs() < 1e-12 * 1.08);
    }

    #[test]
    fn doubling_finesse_halves_linewidth() {
        let a = spectral_params(1000.0, 10.0).unwrap();
        let b = spectral_params(2000.0, 10.0).unwrap();
        assert!((a.linewidth_fwhm_ghz / b.linewidth_fwhm_ghz - 2.0).abs() < 1e-12);
        assert!(spectral_params(0.0, 10.0).is_err());
        assert!(spectral_params(10.0, -1.0).is_err());
    }

    #[test]
    fn perfect_mirror_cavity_resonates_at_half_waves() {
        let g = CavityGeometry {
            membrane_thickness_nm: 0.0,
            emitter_depth_nm: 0.0,
            ..geometry()
        };
        let cavity = Cavity::new(g, Mirror::Perfect, Mirror::Perfect).unwrap().without_gouy();
        for m in [1, 7, 15, 16] {
            let gap = cavity.resonant_air_gap(ModeIndex::fundamental(m)).unwrap();
            assert!((gap - m as f64 * 0.603 / 2.0).abs() < 1e-12, "m={m} gap={gap}");
        }
    }

    #[test]
    fn perfect_mirror_under_membrane_matches_slab_phase() {
        // A lossless slab on a perfect conductor reflects with |r| = 1.
        let cavity = Cavity::new(geometry(), Mirror::Perfect, Mirror::Perfect).unwrap();
        let r = cavity.flat_reflection(603.0).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn higher_transverse_order_needs_longer_gap() {
        let cavity = Cavity::standard(geometry()).unwrap();
        let q0 = cavity.resonant_air_gap(ModeIndex::new(15, 0).unwrap()).unwrap();
        let q1 = cavity.resonant_air_gap(ModeIndex::new(15, 1).unwrap()).unwrap();
        let next = cavity.resonant_air_gap(ModeIndex::new(16, 0).unwrap()).unwrap();
        assert!(q0 < q1 && q1 < next);
    }

    #[test]
    fn resonant_gap_closes_phase() {
        let cavity = Cavity::standard(geometry()).unwrap();
        let mode = ModeIndex::new(15, 1).unwrap();
        let gap = cavity.resonant_air_gap(mode).unwrap();
        let phase = cavity.round_trip_phase(gap, 603.0, 1).unwrap();
        assert!((phase - 2.0 * PI * 15.0).abs() < 1e-9);
    }

    #[test]
    fn resonant_wavelength_closes_phase() {
        let cavity = Cavity::standard(geometry()).unwrap();
        let mode = ModeIndex::new(15, 0).unwrap();
        let wl = cavity.resonant_wavelength(mode).unwrap();
        let phase = cavity.round_trip_phase(cavity.geometry.air_gap_um, wl, 0).unwrap();
        assert!((phase - 2.0 * PI * 15.0).abs() < 1e-9, "{phase}");
        assert!((wl - 603.0).abs() < 40.0);
    }

    #[test]
    fn mirror_phase_anchor_in_range() {
        let cavity = Cavity::standard(geometry()).unwrap();
        let phi = cavity.mirror_phase(603.0).unwrap();
        assert!((0.0..2.0 * PI).contains(&phi));
    }

    #[test]
    fn mode_volume_of_standing_wave() {
        let g = CavityGeometry {
            membrane_thickness_nm: 0.0,
            emitter_depth_nm: 0.0,
            ..geometry()
        };
        let length_nm = 4500.0;
        let n = 45_001;
        let positions: Vec<f64> = (0..n).map(|i| i as f64 * length_nm / (n - 1) as f64).collect();
        let k = 15.0 * PI / length_nm;
        let intensity: Vec<f64> = positions.iter().map(|z| (k * z).sin().powi(2)).collect();
        let profile = FieldProfile {
            index: vec![1.0; n],
            positions_nm: positions,
            intensity,
            interfaces: Vec::new(),
        };
        let w0 = gaussian_mode(&g).unwrap().waist_radius_um;
        let v = mode_volume(&g, &profile).unwrap();
        let oracle = 4.5 * PI * w0 * w0 / 4.0;
        assert!((v - oracle).abs() < 1e-3 * oracle, "{v} vs {oracle}");

        let scaled = FieldProfile {
            intensity: profile.intensity.iter().map(|i| 7.5 * i).collect(),
            ..profile.clone()
        };
        assert!((mode_volume(&g, &scaled).unwrap() - v).abs() < 1e-12 * v);

        let dark = FieldProfile {
            intensity: vec![0.0; n],
            ..profile
        };
        assert!(matches!(mode_volume(&g, &dark), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let cavity = Cavity::standard(geometry()).unwrap();
        assert!(dispersion_scan(&cavity, &[], &[600.0], ScanOptions::default()).is_err());
        assert!(dispersion_scan(&cavity, &[4.0, 3.0], &[600.0], ScanOptions::default()).is_err());
    }

    #[test]
    fn wrap_pi_range() {
        for x in [-10.0, -PI, 0.0, PI, 3.0 * PI, 7.1] {
            let y = wrap_pi(x);
            assert!(y > -PI && y <= PI);
            assert!(((x - y) / (2.0 * PI)).fract().abs() < 1e-12 || ((x - y) / (2.0 * PI)).fract().abs() > 1.0 - 1e-12);
        }
    }
}
