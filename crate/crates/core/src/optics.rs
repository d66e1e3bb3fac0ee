//! Normal-incidence transfer-matrix optics for planar dielectric stacks.
//!
//! Conventions: time dependence `e^{-iωt}`, forward waves `e^{+ikz}`. Inside
//! every medium the field is `E(z) = A e^{ik(z-z₀)} + B e^{-ik(z-z₀)}` with `z₀`
//! the left boundary of the medium. A transfer matrix maps the amplitude pair
//! on the right of an element to the pair on its left, so a stack reads left
//! to right as an ordered matrix product. With this convention the amplitude
//! reflection off a bare `n1 → n2` interface is `(n1 - n2)/(n1 + n2)`.
//!
//! Positions are in nanometres, `z = 0` at the first interface of the stack.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// 2×2 complex transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub [[C64; 2]; 2]);

impl TransferMatrix {
    pub const IDENTITY: TransferMatrix = TransferMatrix([[ONE, ZERO], [ZERO, ONE]]);

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> Option<TransferMatrix> {
        let d = self.det();
        if d.norm() == 0.0 {
            return None;
        }
        let m = &self.0;
        Some(TransferMatrix([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Largest element-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &TransferMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    /// Reflection amplitude for light incident from the left.
    pub fn reflection(&self) -> C64 {
        self.0[1][0] / self.0[0][0]
    }

    /// Transmission amplitude for light incident from the left.
    pub fn transmission(&self) -> C64 {
        ONE / self.0[0][0]
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TransferMatrix(out)
    }
}

/// A homogeneous film.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness_nm: f64,
    pub index: C64,
}

impl Layer {
    pub fn new(thickness_nm: f64, index: C64) -> Result<Self> {
        let layer = Layer { thickness_nm, index };
        layer.validate()?;
        Ok(layer)
    }

    pub fn lossless(thickness_nm: f64, n: f64) -> Result<Self> {
        Layer::new(thickness_nm, C64::new(n, 0.0))
    }

    /// Layer of optical thickness λ/4 at `wavelength_nm`.
    pub fn quarter_wave(n: f64, wavelength_nm: f64) -> Result<Self> {
        Layer::lossless(wavelength_nm / (4.0 * n), n)
    }

    fn validate(&self) -> Result<()> {
        if !(self.thickness_nm >= 0.0) || !self.thickness_nm.is_finite() {
            return Err(Error::invalid(format!(
                "layer thickness must be finite and >= 0, got {}",
                self.thickness_nm
            )));
        }
        validate_index(self.index)
    }

    pub fn phase(&self, wavelength_nm: f64) -> C64 {
        self.index * (2.0 * PI * self.thickness_nm / wavelength_nm)
    }
}

fn validate_index(n: C64) -> Result<()> {
    if !(n.re > 0.0) || !n.re.is_finite() || !(n.im >= 0.0) {
        return Err(Error::invalid(format!(
            "refractive index needs real part > 0 and imaginary part >= 0, got {n}"
        )));
    }
    Ok(())
}

fn validate_wavelength(wavelength_nm: f64) -> Result<()> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::invalid(format!(
            "wavelength must be positive, got {wavelength_nm}"
        )));
    }
    Ok(())
}

/// Layers between two semi-infinite media, listed from the incident side.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub incident_index: C64,
    pub layers: Vec<Layer>,
    pub exit_index: C64,
}

impl LayerStack {
    pub fn new(incident_index: C64, layers: Vec<Layer>, exit_index: C64) -> Result<Self> {
        validate_index(incident_index)?;
        validate_index(exit_index)?;
        for layer in &layers {
            layer.validate()?;
        }
        Ok(LayerStack {
            incident_index,
            layers,
            exit_index,
        })
    }

    /// A single interface with no films.
    pub fn bare(incident: f64, exit: f64) -> Result<Self> {
        LayerStack::new(C64::new(incident, 0.0), Vec::new(), C64::new(exit, 0.0))
    }

    pub fn is_lossless(&self) -> bool {
        self.incident_index.im == 0.0
            && self.exit_index.im == 0.0
            && self.layers.iter().all(|l| l.index.im == 0.0)
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// The same stack seen from the exit side.
    pub fn reversed(&self) -> LayerStack {
        LayerStack {
            incident_index: self.exit_index,
            layers: self.layers.iter().rev().copied().collect(),
            exit_index: self.incident_index,
        }
    }

    /// `self` followed by `other`; `other.incident_index` is dropped and the
    /// two layer lists are joined directly.
    pub fn concat(&self, other: &LayerStack) -> LayerStack {
        let mut layers = self.layers.clone();
        layers.extend_from_slice(&other.layers);
        LayerStack {
            incident_index: self.incident_index,
            layers,
            exit_index: other.exit_index,
        }
    }

    /// Returns a copy with `layers` prepended on the incident side.
    pub fn with_front_layers(&self, front: &[Layer], incident_index: C64) -> LayerStack {
        let mut layers = front.to_vec();
        layers.extend_from_slice(&self.layers);
        LayerStack {
            incident_index,
            layers,
            exit_index: self.exit_index,
        }
    }

    /// Refractive index of the medium at position `z_nm`.
    pub fn index_at(&self, z_nm: f64) -> C64 {
        if z_nm < 0.0 {
            return self.incident_index;
        }
        let mut edge = 0.0;
        for layer in &self.layers {
            edge += layer.thickness_nm;
            if z_nm < edge {
                return layer.index;
            }
        }
        self.exit_index
    }
}

/// Propagation through `layer`: `diag(e^{-iδ}, e^{+iδ})`, `δ = 2π n d / λ`.
pub fn propagation_matrix(layer: &Layer, wavelength_nm: f64) -> Result<TransferMatrix> {
    validate_wavelength(wavelength_nm)?;
    layer.validate()?;
    let delta = layer.phase(wavelength_nm);
    let i = C64::i();
    Ok(TransferMatrix([
        [(-i * delta).exp(), ZERO],
        [ZERO, (i * delta).exp()],
    ]))
}

/// Fresnel amplitude coefficients `(r, t)` for `n1 → n2`.
pub fn fresnel(n1: C64, n2: C64) -> (C64, C64) {
    let sum = n1 + n2;
    ((n1 - n2) / sum, (n1 * 2.0) / sum)
}

/// Interface from `n1` (left) to `n2` (right): `(1/t) [[1, r], [r, 1]]`.
pub fn interface_matrix(n1: C64, n2: C64) -> Result<TransferMatrix> {
    if n1.norm() == 0.0 || n2.norm() == 0.0 {
        return Err(Error::invalid("refractive index must be non-zero"));
    }
    let (r, t) = fresnel(n1, n2);
    Ok(TransferMatrix([[ONE / t, r / t], [r / t, ONE / t]]))
}

fn interface_unchecked(n1: C64, n2: C64) -> TransferMatrix {
    if n1 == n2 {
        return TransferMatrix::IDENTITY;
    }
    let (r, t) = fresnel(n1, n2);
    TransferMatrix([[ONE / t, r / t], [r / t, ONE / t]])
}

fn propagation_unchecked(layer: &Layer, wavelength_nm: f64) -> TransferMatrix {
    let delta = layer.phase(wavelength_nm);
    let i = C64::i();
    TransferMatrix([[(-i * delta).exp(), ZERO], [ZERO, (i * delta).exp()]])
}

/// Full transfer matrix of `stack`, incident medium to exit medium.
pub fn transfer_matrix(stack: &LayerStack, wavelength_nm: f64) -> Result<TransferMatrix> {
    validate_wavelength(wavelength_nm)?;
    let mut m = TransferMatrix::IDENTITY;
    let mut n_prev = stack.incident_index;
    for layer in &stack.layers {
        m = m * interface_unchecked(n_prev, layer.index) * propagation_unchecked(layer, wavelength_nm);
        n_prev = layer.index;
    }
    Ok(m * interface_unchecked(n_prev, stack.exit_index))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackResponse {
    pub r: C64,
    pub t: C64,
    pub reflectance: f64,
    pub transmittance: f64,
    /// `arg(r)` in (-π, π].
    pub phase_on_reflection: f64,
}

impl StackResponse {
    fn from_matrix(m: &TransferMatrix, n_in: C64, n_exit: C64) -> Self {
        let r = m.reflection();
        let t = m.transmission();
        StackResponse {
            r,
            t,
            reflectance: r.norm_sqr(),
            transmittance: n_exit.re / n_in.re * t.norm_sqr(),
            phase_on_reflection: r.arg(),
        }
    }
}

pub fn stack_response(stack: &LayerStack, wavelength_nm: f64) -> Result<StackResponse> {
    let m = transfer_matrix(stack, wavelength_nm)?;
    Ok(StackResponse::from_matrix(
        &m,
        stack.incident_index,
        stack.exit_index,
    ))
}

/// Forward/backward amplitudes of every medium for unit incident amplitude.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    wavelength_nm: f64,
    /// Left boundary of each region; region 0 (incident) is referenced at 0.
    starts: Vec<f64>,
    indices: Vec<C64>,
    amplitudes: Vec<[C64; 2]>,
}

impl FieldSolution {
    pub fn new(stack: &LayerStack, wavelength_nm: f64) -> Result<Self> {
        let m = transfer_matrix(stack, wavelength_nm)?;
        let t = m.transmission();

        let n_layers = stack.layers.len();
        let mut indices = Vec::with_capacity(n_layers + 2);
        indices.push(stack.incident_index);
        indices.extend(stack.layers.iter().map(|l| l.index));
        indices.push(stack.exit_index);

        let mut starts = Vec::with_capacity(n_layers + 2);
        starts.push(0.0);
        let mut z = 0.0;
        for layer in &stack.layers {
            starts.push(z);
            z += layer.thickness_nm;
        }
        starts.push(z);

        // Walk back from the exit medium, where only the transmitted wave exists.
        let mut amplitudes = vec![[ZERO; 2]; n_layers + 2];
        amplitudes[n_layers + 1] = [t, ZERO];
        let mut right = [t, ZERO];
        for j in (1..=n_layers).rev() {
            let at_right_edge = interface_unchecked(indices[j], indices[j + 1]).apply(right);
            let left = propagation_unchecked(&stack.layers[j - 1], wavelength_nm).apply(at_right_edge);
            amplitudes[j] = left;
            right = left;
        }
        amplitudes[0] = interface_unchecked(indices[0], indices[1]).apply(right);

        Ok(FieldSolution {
            wavelength_nm,
            starts,
            indices,
            amplitudes,
        })
    }

    fn region_of(&self, z_nm: f64) -> usize {
        if z_nm < 0.0 {
            return 0;
        }
        let last = self.starts.len() - 1;
        // Regions 1..last-1 are layers; zero-thickness layers are skipped.
        for j in 1..last {
            if z_nm < self.starts[j + 1] {
                return j;
            }
        }
        last
    }

    /// Complex field at `z_nm`.
    pub fn field_at(&self, z_nm: f64) -> C64 {
        let j = self.region_of(z_nm);
        let k = self.indices[j] * (2.0 * PI / self.wavelength_nm);
        let dz = z_nm - self.starts[j];
        let i = C64::i();
        let [a, b] = self.amplitudes[j];
        a * (i * k * dz).exp() + b * (-i * k * dz).exp()
    }

    pub fn intensity_at(&self, z_nm: f64) -> f64 {
        self.field_at(z_nm).norm_sqr()
    }

    pub fn index_at(&self, z_nm: f64) -> C64 {
        self.indices[self.region_of(z_nm)]
    }

    /// Positions of the interfaces between consecutive media.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.starts.len() - 1);
        out.extend_from_slice(&self.starts[1..]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFeature {
    Node,
    Antinode,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceMark {
    pub position_nm: f64,
    pub intensity: f64,
    /// Extremes of |E|² within a quarter wave on either side.
    pub local_min: f64,
    pub local_max: f64,
    pub feature: FieldFeature,
}

/// Tolerance (fraction of the local maximum) for node/antinode labels.
pub const FEATURE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    pub positions_nm: Vec<f64>,
    /// |E(z)|² for unit incident amplitude.
    pub intensity: Vec<f64>,
    /// Real refractive index at each sample.
    pub index: Vec<f64>,
    pub interfaces: Vec<InterfaceMark>,
}

impl FieldProfile {
    /// ε|E|² at each sample.
    pub fn energy_density(&self) -> Vec<f64> {
        self.intensity
            .iter()
            .zip(&self.index)
            .map(|(i, n)| i * n * n)
            .collect()
    }

    /// CSV with header `z_nm,intensity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_nm,intensity\n");
        for (z, i) in self.positions_nm.iter().zip(&self.intensity) {
            out.push_str(&format!("{z},{i}\n"));
        }
        out
    }
}

/// Samples |E|² through `stack` with spacing `sampling_nm`, plus one
/// wavelength of each ambient medium.
pub fn field_profile(stack: &LayerStack, wavelength_nm: f64, sampling_nm: f64) -> Result<FieldProfile> {
    field_profile_with_margins(stack, wavelength_nm, sampling_nm, wavelength_nm, wavelength_nm)
}

pub fn field_profile_with_margins(
    stack: &LayerStack,
    wavelength_nm: f64,
    sampling_nm: f64,
    margin_before_nm: f64,
    margin_after_nm: f64,
) -> Result<FieldProfile> {
    if !(sampling_nm > 0.0) {
        return Err(Error::invalid(format!(
            "sampling must be positive, got {sampling_nm}"
        )));
    }
    if !(margin_before_nm >= 0.0 && margin_after_nm >= 0.0) {
        return Err(Error::invalid("margins must be >= 0"));
    }
    let solution = FieldSolution::new(stack, wavelength_nm)?;

    let start = -margin_before_nm;
    let end = stack.total_thickness_nm() + margin_after_nm;
    let count = ((end - start) / sampling_nm).floor() as usize + 1;
    let mut positions = Vec::with_capacity(count + stack.layers.len() + 2);
    for k in 0..count {
        positions.push(start + k as f64 * sampling_nm);
    }
    // Every interface is sampled exactly so continuity can be checked there.
    positions.extend(solution.interfaces());
    positions.sort_by(f64::total_cmp);
    positions.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let intensity = positions.iter().map(|&z| solution.intensity_at(z)).collect();
    let index = positions.iter().map(|&z| solution.index_at(z).re).collect();

    let mut interfaces: Vec<f64> = solution.interfaces();
    interfaces.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let marks = interfaces
        .into_iter()
        .map(|z| classify_interface(&solution, z))
        .collect();

    Ok(FieldProfile {
        positions_nm: positions,
        intensity,
        index,
        interfaces: marks,
    })
}

fn classify_interface(solution: &FieldSolution, z: f64) -> InterfaceMark {
    const SAMPLES: usize = 256;
    let lambda = solution.wavelength_nm;
    let left_span = lambda / (4.0 * solution.index_at(z - 1e-9).re);
    let right_span = lambda / (4.0 * solution.index_at(z).re);
    let value = solution.intensity_at(z);
    let (mut lo, mut hi) = (value, value);
    for k in 1..=SAMPLES {
        let f = k as f64 / SAMPLES as f64;
        for zz in [z - f * left_span, z + f * right_span] {
            let v = solution.intensity_at(zz);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let feature = if value >= (1.0 - FEATURE_TOLERANCE) * hi {
        FieldFeature::Antinode
    } else if value - lo <= FEATURE_TOLERANCE * hi {
        FieldFeature::Node
    } else {
        FieldFeature::Intermediate
    };
    InterfaceMark {
        position_nm: z,
        intensity: value,
        local_min: lo,
        local_max: hi,
        feature,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// High-index layer faces the incident medium (node at the surface).
    Hi,
    /// Extra low-index layer faces the incident medium (antinode).
    Lo,
}

/// Quarter-wave Bragg mirror designer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraggDesign {
    pub wavelength_nm: f64,
    pub n_hi: f64,
    pub n_lo: f64,
    pub termination: Termination,
    pub incident_index: f64,
    pub substrate_index: f64,
    pub max_pairs: usize,
}

impl BraggDesign {
    /// Air on the incident side, fused silica substrate.
    pub fn new(wavelength_nm: f64, n_hi: f64, n_lo: f64, termination: Termination) -> Self {
        BraggDesign {
            wavelength_nm,
            n_hi,
            n_lo,
            termination,
            incident_index: 1.0,
            substrate_index: crate::constants::N_SIO2,
            max_pairs: 200,
        }
    }

    /// Quarter-wave stack with `pairs` high/low pairs on top of a single
    /// high-index layer next to the substrate.
    pub fn stack(&self, pairs: usize) -> Result<LayerStack> {
        let hi = Layer::quarter_wave(self.n_hi, self.wavelength_nm)?;
        let lo = Layer::quarter_wave(self.n_lo, self.wavelength_nm)?;
        // incident | [L] (H L)^pairs H | substrate
        let mut layers = Vec::with_capacity(2 * pairs + 2);
        if self.termination == Termination::Lo {
            layers.push(lo);
        }
        for _ in 0..pairs {
            layers.push(hi);
            layers.push(lo);
        }
        layers.push(hi);
        LayerStack::new(
            C64::new(self.incident_index, 0.0),
            layers,
            C64::new(self.substrate_index, 0.0),
        )
    }

    /// Fewest pairs whose transmittance at the design wavelength is at most
    /// `target_ppm`.
    pub fn design(&self, target_ppm: f64) -> Result<LayerStack> {
        validate_wavelength(self.wavelength_nm)?;
        if !(target_ppm > 0.0 && target_ppm <= 1e6) {
            return Err(Error::invalid(format!(
                "target transmittance must be in (0, 1e6] ppm, got {target_ppm}"
            )));
        }
        if !(self.n_lo >= 1.0) || self.n_hi < self.n_lo {
            return Err(Error::invalid(format!(
                "need n_hi > n_lo >= 1, got n_hi={} n_lo={}",
                self.n_hi, self.n_lo
            )));
        }
        if self.n_hi == self.n_lo {
            return Err(Error::DesignInfeasible(
                "equal high and low indices give no index contrast".into(),
            ));
        }
        let target = target_ppm * 1e-6;
        for pairs in 0..=self.max_pairs {
            let stack = self.stack(pairs)?;
            if stack_response(&stack, self.wavelength_nm)?.transmittance <= target {
                return Ok(stack);
            }
        }
        Err(Error::DesignInfeasible(format!(
            "{target_ppm} ppm not reached within {} pairs",
            self.max_pairs
        )))
    }
}

/// Quarter-wave mirror between air and fused silica with the fewest pairs
/// reaching `target_ppm` at `wavelength_nm`.
pub fn design_bragg_mirror(
    target_ppm: f64,
    wavelength_nm: f64,
    n_hi: f64,
    n_lo: f64,
    termination: Termination,
) -> Result<LayerStack> {
    BraggDesign::new(wavelength_nm, n_hi, n_lo, termination).design(target_ppm)
}

/// Linearly interpolated refractive-index table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    /// `(wavelength_nm, n_real, n_imag)`, sorted by wavelength.
    pub points: Vec<(f64, f64, f64)>,
}

impl IndexTable {
    pub fn new(mut points: Vec<(f64, f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("index table needs at least one point"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(_, re, im) in &points {
            validate_index(C64::new(re, im))?;
        }
        Ok(IndexTable { points })
    }

    /// Clamped to the end values outside the tabulated range.
    pub fn at(&self, wavelength_nm: f64) -> C64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if wavelength_nm <= first.0 {
            return C64::new(first.1, first.2);
        }
        if wavelength_nm >= last.0 {
            return C64::new(last.1, last.2);
        }
        let k = pts.partition_point(|p| p.0 <= wavelength_nm);
        let (a, b) = (pts[k - 1], pts[k]);
        let f = (wavelength_nm - a.0) / (b.0 - a.0);
        C64::new(a.1 + f * (b.1 - a.1), a.2 + f * (b.2 - a.2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Material {
    Constant(C64),
    Table(IndexTable),
}

impl Material {
    pub fn index(&self, wavelength_nm: f64) -> C64 {
        match self {
            Material::Constant(n) => *n,
            Material::Table(t) => t.at(wavelength_nm),
        }
    }
}

/// A stack whose materials may disperse; [`DispersiveStack::at`] freezes it
/// at one wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveStack {
    pub incident: Material,
    pub layers: Vec<(f64, Material)>,
    pub exit: Material,
}

impl DispersiveStack {
    pub fn at(&self, wavelength_nm: f64) -> Result<LayerStack> {
        let layers = self
            .layers
            .iter()
            .map(|(d, m)| Layer::new(*d, m.index(wavelength_nm)))
            .collect::<Result<Vec<_>>>()?;
        LayerStack::new(
            self.incident.index(wavelength_nm),
            layers,
            self.exit.index(wavelength_nm),
        )
    }
}

impl From<&LayerStack> for DispersiveStack {
    fn from(stack: &LayerStack) -> Self {
        DispersiveStack {
            incident: Material::Constant(stack.incident_index),
            layers: stack
                .layers
                .iter()
                .map(|l| (l.thickness_nm, Material::Constant(l.index)))
                .collect(),
            exit: Material::Constant(stack.exit_index),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn zero_thickness_propagation_is_identity() {
        let layer = Layer::lossless(0.0, 2.41).unwrap();
        let m = propagation_matrix(&layer, 603.0).unwrap();
        assert!(m.max_abs_diff(&TransferMatrix::IDENTITY) < 1e-15);
    }

    #[test]
    fn quarter_wave_phase_is_half_pi() {
        let layer = Layer::quarter_wave(2.10, 603.0).unwrap();
        assert!((layer.phase(603.0).re - PI / 2.0).abs() < 1e-14);
        let m = propagation_matrix(&layer, 603.0).unwrap();
        // diag(e^{-iπ/2}, e^{iπ/2}) = diag(-i, i)
        assert!((m.0[0][0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((m.0[1][1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn membrane_phase_matches_arithmetic() {
        let layer = Layer::lossless(862.0, 2.41).unwrap();
        let expected = 2.0 * PI * 2.41 * 862.0 / 603.0;
        assert!((layer.phase(603.0).re - expected).abs() < 1e-12);
        assert!((expected - 21.646).abs() < 1e-3);
        let m = propagation_matrix(&layer, 603.0).unwrap();
        assert!((m.det() - ONE).norm() < 1e-12);
    }

    #[test]
    fn propagation_rejects_bad_wavelength() {
        let layer = Layer::lossless(10.0, 1.5).unwrap();
        assert!(matches!(
            propagation_matrix(&layer, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            propagation_matrix(&layer, -5.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn interface_identity_and_fresnel_sign() {
        let same = interface_matrix(c(1.7), c(1.7)).unwrap();
        assert!(same.max_abs_diff(&TransferMatrix::IDENTITY) < 1e-15);

        let m = interface_matrix(c(1.0), c(2.41)).unwrap();
        let r = m.reflection();
        assert!((r.re - (1.0 - 2.41) / (1.0 + 2.41)).abs() < 1e-15);
        assert!((r.re + 0.4135).abs() < 1e-4);

        let back = interface_matrix(c(2.41), c(1.0)).unwrap();
        assert!((back.reflection() + r).norm() < 1e-15);
        assert!((m * back).max_abs_diff(&TransferMatrix::IDENTITY) < 1e-12);
    }

    #[test]
    fn interface_rejects_zero_index() {
        assert!(interface_matrix(c(0.0), c(1.0)).is_err());
    }

    #[test]
    fn empty_stack_transmits_everything() {
        let stack = LayerStack::bare(1.3, 1.3).unwrap();
        let resp = stack_response(&stack, 603.0).unwrap();
        assert!(resp.reflectance.abs() < 1e-15);
        assert!((resp.transmittance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn air_diamond_reflectance() {
        let stack = LayerStack::bare(1.0, 2.41).unwrap();
        let resp = stack_response(&stack, 603.0).unwrap();
        let oracle = ((1.0 - 2.41) / (1.0 + 2.41_f64)).powi(2);
        assert!((resp.reflectance - oracle).abs() < 1e-15);
        assert!((resp.reflectance - 0.1710).abs() < 1e-4);
        assert!((resp.reflectance + resp.transmittance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn layer_invariants_enforced() {
        assert!(Layer::lossless(-1.0, 1.5).is_err());
        assert!(Layer::new(1.0, C64::new(0.0, 0.0)).is_err());
        assert!(Layer::new(1.0, C64::new(1.5, -0.1)).is_err());
        assert!(Layer::new(1.0, C64::new(1.5, 0.1)).is_ok());
    }

    #[test]
    fn bragg_transmission_decreases_with_pairs() {
        for termination in [Termination::Hi, Termination::Lo] {
            let design = BraggDesign::new(603.0, 2.10, 1.46, termination);
            let mut prev = f64::INFINITY;
            for pairs in 0..25 {
                let t = stack_response(&design.stack(pairs).unwrap(), 603.0)
                    .unwrap()
                    .transmittance;
                assert!(t < prev, "pairs={pairs} T={t} prev={prev}");
                prev = t;
            }
        }
    }

    #[test]
    fn bragg_design_termination_and_trivial_target() {
        let hi = design_bragg_mirror(1e6, 603.0, 2.10, 1.46, Termination::Hi).unwrap();
        assert_eq!(hi.layers.len(), 1);
        let design = BraggDesign::new(603.0, 2.10, 1.46, Termination::Hi);
        let lo_design = BraggDesign {
            termination: Termination::Lo,
            ..design
        };
        assert_eq!(
            lo_design.stack(7).unwrap().layers.len(),
            design.stack(7).unwrap().layers.len() + 1
        );
        assert!((lo_design.stack(7).unwrap().layers[0].index.re - 1.46).abs() < 1e-15);
    }

    #[test]
    fn bragg_design_infeasible_without_contrast() {
        let err = design_bragg_mirror(70.0, 603.0, 1.46, 1.46, Termination::Hi).unwrap_err();
        assert!(matches!(err, Error::DesignInfeasible(_)));
        assert!(matches!(
            design_bragg_mirror(70.0, 603.0, 1.2, 1.46, Termination::Hi),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn free_propagation_profile_is_uniform() {
        let stack = LayerStack::bare(1.0, 1.0).unwrap();
        let profile = field_profile(&stack, 603.0, 5.0).unwrap();
        for i in &profile.intensity {
            assert!((i - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_wave_slab_on_reflector_has_node_at_reflector() {
        // A strongly absorbing metal-like exit approximates a perfect
        // conductor; the node sits at the slab/reflector boundary.
        let slab = Layer::lossless(603.0 / (2.0 * 1.5), 1.5).unwrap();
        let stack = LayerStack::new(c(1.0), vec![slab], C64::new(0.0001, 1e6)).unwrap();
        let solution = FieldSolution::new(&stack, 603.0).unwrap();
        let at_reflector = solution.intensity_at(slab.thickness_nm - 1e-9);
        let peak = solution.intensity_at(slab.thickness_nm / 2.0);
        assert!(at_reflector < 1e-6 * peak, "{at_reflector} vs {peak}");
        // Inner amplitude is the air amplitude scaled by 1/n.
        assert!((peak - 4.0 / 2.25).abs() < 1e-3);
    }

    #[test]
    fn field_continuous_at_interfaces() {
        let design = BraggDesign::new(603.0, 2.10, 1.46, Termination::Lo);
        let stack = design.stack(6).unwrap();
        let solution = FieldSolution::new(&stack, 590.0).unwrap();
        for z in solution.interfaces() {
            let left = solution.field_at(z - 1e-7);
            let right = solution.field_at(z);
            assert!((left - right).norm() <= 1e-6 * (1.0 + right.norm()));
        }
    }

    #[test]
    fn termination_sets_surface_feature() {
        let lo = design_bragg_mirror(70.0, 603.0, 2.10, 1.46, Termination::Lo).unwrap();
        let profile = field_profile(&lo, 603.0, 1.0).unwrap();
        assert_eq!(profile.interfaces[0].feature, FieldFeature::Antinode);

        let hi = design_bragg_mirror(70.0, 603.0, 2.10, 1.46, Termination::Hi).unwrap();
        let profile = field_profile(&hi, 603.0, 1.0).unwrap();
        assert_eq!(profile.interfaces[0].feature, FieldFeature::Node);
    }

    #[test]
    fn index_table_interpolates_and_clamps() {
        let table = IndexTable::new(vec![(600.0, 2.0, 0.0), (500.0, 2.2, 0.0)]).unwrap();
        assert!((table.at(550.0).re - 2.1).abs() < 1e-12);
        assert_eq!(table.at(400.0).re, 2.2);
        assert_eq!(table.at(700.0).re, 2.0);
    }
}
