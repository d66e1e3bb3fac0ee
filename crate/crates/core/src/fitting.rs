//! Bounded damped least squares and the ready-made fit models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::emitter::{g2_measured, saturation_model, G2Model, SaturationParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Weights as given (1 unless set).
    #[default]
    Given,
    /// `w = 1/max(y, 1)` for count data.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            weighting: Weighting::Given,
        }
    }
}

pub struct FitProblem<M> {
    pub model: M,
    pub param_names: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub options: FitOptions,
}

impl<M> FitProblem<M>
where
    M: Fn(&[f64], f64) -> f64,
{
    /// Unit weights and unbounded parameters.
    pub fn new(model: M, x: Vec<f64>, y: Vec<f64>, initial: Vec<f64>) -> Self {
        let k = initial.len();
        let n = x.len();
        FitProblem {
            model,
            param_names: (0..k).map(|i| format!("p{i}")).collect(),
            x,
            y,
            weights: vec![1.0; n],
            initial,
            lower: vec![f64::NEG_INFINITY; k],
            upper: vec![f64::INFINITY; k],
            options: FitOptions::default(),
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_names(mut self, names: &[&str]) -> Self {
        self.param_names = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.x.len();
        let k = self.initial.len();
        if n == 0 {
            return Err(Error::invalid("fit needs at least one data point"));
        }
        if self.y.len() != n || self.weights.len() != n {
            return Err(Error::invalid("x, y and weights must have equal length"));
        }
        if k == 0 || self.lower.len() != k || self.upper.len() != k || self.param_names.len() != k {
            return Err(Error::invalid("parameter, bound and name vectors must have equal non-zero length"));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("data contains non-finite values"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and >= 0"));
        }
        for i in 0..k {
            let (lo, hi, p) = (self.lower[i], self.upper[i], self.initial[i]);
            if !(lo <= hi) {
                return Err(Error::invalid(format!("bounds of {} are inconsistent", self.param_names[i])));
            }
            if !(p >= lo && p <= hi) || !p.is_finite() {
                return Err(Error::invalid(format!(
                    "initial {} = {p} outside [{lo}, {hi}]",
                    self.param_names[i]
                )));
            }
        }
        Ok(())
    }

    fn effective_weights(&self) -> Vec<f64> {
        match self.options.weighting {
            Weighting::Given => self.weights.clone(),
            Weighting::Poisson => self
                .y
                .iter()
                .zip(&self.weights)
                .map(|(y, w)| w / y.max(1.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi_squared: f64,
    pub reduced_chi_squared: f64,
    pub converged: bool,
    pub iterations: usize,
    pub rank_deficient: bool,
    /// Largest `|∂χ²/∂p|·|p|` over free parameters at the solution.
    pub gradient_norm: f64,
    /// χ² after each accepted step, starting from the initial value.
    pub cost_history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.param_names.iter().position(|n| n == name)?;
        Some((self.params[i], self.std_errors[i]))
    }
}

/// Central-difference derivative step for a parameter of value `p`.
pub fn jacobian_step(p: f64) -> f64 {
    (1e-6 * p.abs()).max(1e-8)
}

/// `∂f(p, x_i)/∂p_j` for the columns in `free`, by central differences.
pub fn numerical_jacobian<M>(model: &M, params: &[f64], x: &[f64], free: &[usize]) -> DMatrix<f64>
where
    M: Fn(&[f64], f64) -> f64,
{
    let mut jac = DMatrix::zeros(x.len(), free.len());
    let mut p = params.to_vec();
    for (col, &j) in free.iter().enumerate() {
        let h = jacobian_step(params[j]);
        p[j] = params[j] + h;
        let up: Vec<f64> = x.iter().map(|&xi| model(&p, xi)).collect();
        p[j] = params[j] - h;
        for (i, &xi) in x.iter().enumerate() {
            jac[(i, col)] = (up[i] - model(&p, xi)) / (2.0 * h);
        }
        p[j] = params[j];
    }
    jac
}

const GRADIENT_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-12;
const STALL_GRADIENT_TOL: f64 = 1e-4;
const LAMBDA_MAX: f64 = 1e16;
const RANK_TOL: f64 = 1e-12;

/// Minimize `Σ w (y - f(p, x))²` within the box bounds.
///
/// Parameters with equal lower and upper bound are held fixed. The damped
/// normal equations use Marquardt's diagonal scaling so that rescaling a
/// parameter does not change the path.
pub fn fit<M>(problem: &FitProblem<M>) -> Result<FitResult>
where
    M: Fn(&[f64], f64) -> f64,
{
    problem.validate()?;
    let weights = problem.effective_weights();
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let free: Vec<usize> = (0..problem.initial.len())
        .filter(|&j| problem.lower[j] < problem.upper[j])
        .collect();
    let model = &problem.model;
    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            problem.x.len(),
            problem
                .x
                .iter()
                .zip(&problem.y)
                .zip(&sqrt_w)
                .map(|((&x, &y), &sw)| sw * (y - model(p, x))),
        )
    };
    let weighted_jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut jac = numerical_jacobian(model, p, &problem.x, &free);
        for (i, sw) in sqrt_w.iter().enumerate() {
            jac.row_mut(i).scale_mut(*sw);
        }
        jac
    };
    let project = |p: &mut [f64]| {
        for j in 0..p.len() {
            p[j] = p[j].clamp(problem.lower[j], problem.upper[j]);
        }
    };

    let mut params = problem.initial.clone();
    let mut r = residuals(&params);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::invalid("model is not finite at the initial parameters"));
    }
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut warnings = Vec::new();

    let scaled_gradient = |jac: &DMatrix<f64>, r: &DVector<f64>, p: &[f64]| -> f64 {
        // ∂χ²/∂p = -2 Jᵀr; scaled by |p| so the test is unit-independent.
        // Components pushing against an active bound do not count.
        let g = jac.transpose() * r;
        free.iter()
            .enumerate()
            .filter(|&(col, &j)| {
                let blocked_low = p[j] <= problem.lower[j] && g[col] < 0.0;
                let blocked_high = p[j] >= problem.upper[j] && g[col] > 0.0;
                !(blocked_low || blocked_high)
            })
            .map(|(col, &j)| {
                let scale = p[j].abs().max(jacobian_step(p[j]));
                2.0 * g[col].abs() * scale
            })
            .fold(0.0, f64::max)
    };

    if free.is_empty() {
        converged = true;
    }
    let mut jac = weighted_jacobian(&params);
    let mut gradient = scaled_gradient(&jac, &r, &params);
    while !converged && iterations < problem.options.max_iterations {
        if gradient < GRADIENT_TOL * (1.0 + cost) {
            converged = true;
            break;
        }
        iterations += 1;
        // Parameters resting on a bound that the gradient pushes outward sit
        // out this step, so clipping does not distort the others.
        let g = jac.transpose() * &r;
        let active: Vec<usize> = (0..free.len())
            .filter(|&col| {
                let j = free[col];
                let blocked_low = params[j] <= problem.lower[j] && g[col] <= 0.0;
                let blocked_high = params[j] >= problem.upper[j] && g[col] >= 0.0;
                !(blocked_low || blocked_high)
            })
            .collect();
        let sub = jac.select_columns(&active);
        let jtj = sub.transpose() * &sub;
        let jtr = sub.transpose() * &r;
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj.clone();
            for d in 0..active.len() {
                let diag = jtj[(d, d)].max(1e-300);
                damped[(d, d)] += lambda * diag;
            }
            let Some(step) = damped.clone().cholesky().map(|c| c.solve(&jtr)).or_else(|| damped.lu().solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = params.clone();
            for (k, &col) in active.iter().enumerate() {
                trial[free[col]] += step[k];
            }
            project(&mut trial);
            let trial_r = residuals(&trial);
            let trial_cost = trial_r.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let relative_step = free
                    .iter()
                    .map(|&j| (trial[j] - params[j]).abs() / params[j].abs().max(jacobian_step(params[j])))
                    .fold(0.0, f64::max);
                let relative_drop = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                params = trial;
                r = trial_r;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                jac = weighted_jacobian(&params);
                gradient = scaled_gradient(&jac, &r, &params);
                if relative_step < STEP_TOL && relative_drop < STEP_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at machine precision. The gradient
            // then carries finite-difference noise, so the test is looser.
            converged = gradient < STALL_GRADIENT_TOL * (1.0 + cost) || cost == 0.0 || stalled_at_minimum(&history);
            if !converged {
                warnings.push("damping exhausted before the gradient test was met".into());
            }
            break;
        }
    }
    if !converged && iterations >= problem.options.max_iterations {
        warnings.push(format!("maximum of {} iterations reached", problem.options.max_iterations));
    }

    let n = problem.x.len();
    let dof = n.saturating_sub(free.len());
    let reduced = if dof > 0 { cost / dof as f64 } else { f64::NAN };
    if dof == 0 {
        warnings.push("no degrees of freedom left; covariance is not scaled".into());
    }
    let (free_cov, rank_deficient) = covariance(&jac, if dof > 0 { reduced } else { 1.0 });
    if rank_deficient {
        warnings.push("Jacobian is rank deficient; covariance uses a pseudo-inverse".into());
    }
    let k = params.len();
    let mut cov = vec![vec![0.0; k]; k];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            cov[i][j] = free_cov[(a, b)];
        }
    }
    let std_errors = (0..k).map(|i| cov[i][i].max(0.0).sqrt()).collect();
    Ok(FitResult {
        param_names: problem.param_names.clone(),
        params,
        std_errors,
        covariance: cov,
        chi_squared: cost,
        reduced_chi_squared: reduced,
        converged: converged && !rank_deficient,
        iterations,
        rank_deficient,
        gradient_norm: gradient,
        cost_history: history,
        warnings,
    })
}

fn stalled_at_minimum(history: &[f64]) -> bool {
    match history {
        [.., a, b] => (a - b).abs() <= 1e-12 * a.abs(),
        _ => false,
    }
}

/// `s² (JᵀJ)⁻¹` via SVD; reports rank deficiency.
fn covariance(jac: &DMatrix<f64>, scale: f64) -> (DMatrix<f64>, bool) {
    let k = jac.ncols();
    if k == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let jtj = jac.transpose() * jac;
    // Equilibrate so the rank test is independent of parameter units.
    let d: Vec<f64> = (0..k)
        .map(|i| {
            let v = jtj[(i, i)];
            if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }
        })
        .collect();
    let dm = DMatrix::from_diagonal(&DVector::from_vec(d));
    let scaled = &dm * &jtj * &dm;
    let svd = scaled.svd(true, true);
    let max_sv = svd.singular_values.max();
    let zero_column = (0..k).any(|i| jtj[(i, i)] == 0.0);
    let rank_deficient = zero_column || svd.singular_values.iter().any(|&s| s <= RANK_TOL * max_sv);
    let inv = svd
        .pseudo_inverse(RANK_TOL * max_sv)
        .unwrap_or_else(|_| DMatrix::zeros(k, k));
    let mut cov = &dm * inv * &dm * scale;
    // Symmetrize rounding noise.
    cov = (&cov + cov.transpose()) * 0.5;
    (cov, rank_deficient)
}

/// Points `(x, y)` with optional weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("x and y must have equal length"));
        }
        Ok(Dataset { x, y, weights: None })
    }

    fn weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.x.len()])
    }
}

pub const G2_PARAM_NAMES: [&str; 4] = ["sigma", "a", "tau1_ns", "tau2_ns"];

pub fn g2_model_fn(p: &[f64], tau: f64) -> f64 {
    let model = G2Model {
        sigma: p[0],
        a: p[1],
        tau1_ns: p[2],
        tau2_ns: p[3],
    };
    g2_measured(tau, &model)
}

/// Fit the background-diluted three-level correlation. Without an initial
/// guess one is estimated from the data.
pub fn fit_g2(data: &Dataset, initial: Option<G2Model>, options: FitOptions) -> Result<(G2Model, FitResult)> {
    if data.x.is_empty() {
        return Err(Error::invalid("g2 data is empty"));
    }
    let guess = match initial {
        Some(m) => m,
        None => g2_initial_guess(data),
    };
    let problem = FitProblem {
        model: g2_model_fn,
        param_names: G2_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        x: data.x.clone(),
        y: data.y.clone(),
        weights: data.weights(),
        initial: vec![guess.sigma, guess.a, guess.tau1_ns, guess.tau2_ns],
        lower: vec![1e-6, 0.0, 1e-6, 1e-6],
        upper: vec![1.0, f64::INFINITY, f64::INFINITY, f64::INFINITY],
        options,
    };
    let mut result = fit(&problem)?;
    let span = data.x.iter().map(|t| t.abs()).fold(0.0, f64::max);
    let step = min_spacing(&data.x);
    let p = &result.params;
    if span < 3.0 * p[3].max(p[2]) {
        result.warnings.push("delay range does not reach the slow time constant".into());
    }
    if step > p[2].min(p[3]) {
        result.warnings.push("delay spacing is coarser than the fast time constant".into());
    }
    let model = G2Model {
        sigma: p[0],
        a: p[1],
        tau1_ns: p[2],
        tau2_ns: p[3],
    };
    Ok((model, result))
}

fn min_spacing(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min)
}

fn g2_initial_guess(data: &Dataset) -> G2Model {
    let mut pts: Vec<(f64, f64)> = data.x.iter().map(|t| t.abs()).zip(data.y.iter().cloned()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let smooth: Vec<f64> = median5(&pts.iter().map(|p| p.1).collect::<Vec<_>>());
    let span = pts.last().map(|p| p.0).unwrap_or(1.0).max(1e-3);
    let g0 = smooth[0];
    let sigma = (1.0 - g0).clamp(0.01, 1.0).sqrt();
    let (i_peak, &peak) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let excess = (peak - 1.0).max(0.0);
    let a = (excess / (sigma * sigma)).max(0.05);
    let half_rise = 0.5 * (g0 + peak);
    let tau1 = pts
        .iter()
        .zip(&smooth)
        .find(|(_, &s)| s >= half_rise)
        .map(|(p, _)| p.0 / std::f64::consts::LN_2)
        .filter(|t| *t > 0.0)
        .unwrap_or(span / 100.0);
    let tau2 = pts[i_peak..]
        .iter()
        .zip(&smooth[i_peak..])
        .find(|(_, &s)| s - 1.0 <= excess / std::f64::consts::E)
        .map(|(p, _)| p.0)
        .filter(|t| *t > 2.0 * tau1)
        .unwrap_or((span / 5.0).max(3.0 * tau1));
    G2Model {
        sigma,
        a,
        tau1_ns: tau1,
        tau2_ns: tau2,
    }
}

pub const SATURATION_PARAM_NAMES: [&str; 3] = ["I_inf", "P_sat", "c_bg"];

pub fn saturation_model_fn(p: &[f64], power: f64) -> f64 {
    saturation_model(
        power,
        &SaturationParams {
            i_inf: p[0],
            p_sat: p[1],
            c_bg: p[2],
        },
    )
}

/// Saturation fit. `fix_background` pins `c_bg` at zero.
pub fn fit_saturation(
    data: &Dataset,
    initial: Option<SaturationParams>,
    fix_background: bool,
    options: FitOptions,
) -> Result<(SaturationParams, FitResult)> {
    let mut distinct = data.x.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::invalid("saturation fit needs at least 4 distinct powers"));
    }
    let mut guess = initial.unwrap_or_else(|| {
        let p_mid = distinct[distinct.len() / 2];
        let y_max = data.y.iter().cloned().fold(0.0, f64::max);
        SaturationParams {
            i_inf: 1.5 * y_max,
            p_sat: p_mid.max(1e-9),
            c_bg: 0.0,
        }
    });
    if fix_background {
        guess.c_bg = 0.0;
    }
    let bg_upper = if fix_background { 0.0 } else { f64::INFINITY };
    let problem = FitProblem {
        model: saturation_model_fn,
        param_names: SATURATION_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        x: data.x.clone(),
        y: data.y.clone(),
        weights: data.weights(),
        initial: vec![guess.i_inf, guess.p_sat, guess.c_bg],
        lower: vec![0.0, 1e-12, 0.0],
        upper: vec![f64::INFINITY, f64::INFINITY, bg_upper],
        options,
    };
    let result = fit(&problem)?;
    let p = &result.params;
    Ok((
        SaturationParams {
            i_inf: p[0],
            p_sat: p[1],
            c_bg: p[2],
        },
        result,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPeak {
    pub center: f64,
    /// Standard deviation.
    pub width: f64,
    /// Height above the baseline.
    pub amplitude: f64,
}

/// `baseline + Σ A exp(-(x-c)²/(2s²))` with `p = [baseline, A₁, c₁, s₁, ...]`.
pub fn gaussian_peaks_fn(p: &[f64], x: f64) -> f64 {
    let mut y = p[0];
    for peak in p[1..].chunks_exact(3) {
        let z = (x - peak[1]) / peak[2];
        y += peak[0] * (-0.5 * z * z).exp();
    }
    y
}

/// Running median over five points (shrinking at the ends).
pub fn median5(y: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(y.len());
            let mut w = y[lo..hi].to_vec();
            w.sort_by(f64::total_cmp);
            let m = w.len();
            if m % 2 == 1 {
                w[m / 2]
            } else {
                0.5 * (w[m / 2 - 1] + w[m / 2])
            }
        })
        .collect()
}

/// Initial peaks at the `n_peaks` largest local maxima of the median-smoothed
/// scan; `x` must be sorted.
///
/// Maxima whose prominence is below 5% of the smoothed range are treated as
/// noise. Missing peaks are seeded one at a time at the largest residual
/// of the smoothed scan minus the peaks seeded so far.
pub fn seed_peaks(x: &[f64], y: &[f64], n_peaks: usize) -> (f64, Vec<GaussianPeak>) {
    let smooth = median5(y);
    let baseline = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let top = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = smooth.len();
    let min_width = min_spacing(x).min(x[n - 1] - x[0]).max(1e-12);
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || smooth[i] > smooth[i - 1];
            let right = i + 1 == n || smooth[i] >= smooth[i + 1];
            left && right && prominence(&smooth, i) > 0.05 * (top - baseline)
        })
        .collect();
    maxima.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]).then(a.cmp(&b)));
    maxima.truncate(n_peaks);
    let mut peaks: Vec<GaussianPeak> = maxima
        .iter()
        .map(|&i| peak_at(x, &smooth, i, baseline, min_width))
        .collect();
    while peaks.len() < n_peaks {
        let residual: Vec<f64> = x
            .iter()
            .zip(&smooth)
            .map(|(&xi, &s)| s - baseline - peaks.iter().map(|p| gaussian(p, xi)).sum::<f64>())
            .collect();
        let (i, _) = residual
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &r)| if r > best.1 { (i, r) } else { best });
        let mut seed = peak_at(x, &residual, i, 0.0, min_width);
        seed.amplitude = seed.amplitude.max(1e-3 * (top - baseline)).max(f64::MIN_POSITIVE);
        peaks.push(seed);
    }
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    (baseline, peaks)
}

fn gaussian(p: &GaussianPeak, x: f64) -> f64 {
    let z = (x - p.center) / p.width;
    p.amplitude * (-0.5 * z * z).exp()
}

/// Height of `y[i]` above the higher of the lowest points separating it from
/// taller samples (or the ends) on either side.
fn prominence(y: &[f64], i: usize) -> f64 {
    let mut left_min = y[i];
    for j in (0..i).rev() {
        if y[j] > y[i] {
            break;
        }
        left_min = left_min.min(y[j]);
    }
    let mut right_min = y[i];
    for &v in &y[i + 1..] {
        if v > y[i] {
            break;
        }
        right_min = right_min.min(v);
    }
    y[i] - left_min.max(right_min)
}

/// Seed from the half-maximum width around sample `i`.
fn peak_at(x: &[f64], y: &[f64], i: usize, baseline: f64, min_width: f64) -> GaussianPeak {
    let n = y.len();
    let height = y[i] - baseline;
    let half = baseline + 0.5 * height;
    let mut l = i;
    while l > 0 && y[l] > half {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < n && y[r] > half {
        r += 1;
    }
    GaussianPeak {
        center: x[i],
        width: ((x[r] - x[l]) / 2.354_820_045).max(min_width),
        amplitude: height.max(0.0),
    }
}

fn fit_peak_set(
    x: &[f64],
    y: &[f64],
    weights: &[f64],
    baseline: f64,
    seeds: &[GaussianPeak],
    options: FitOptions,
) -> Result<FitResult> {
    let mut names = vec!["baseline".to_string()];
    let mut initial = vec![baseline];
    let mut lower = vec![f64::NEG_INFINITY];
    let mut upper = vec![f64::INFINITY];
    for (k, s) in seeds.iter().enumerate() {
        names.extend([format!("amplitude_{k}"), format!("center_{k}"), format!("width_{k}")]);
        initial.extend([s.amplitude, s.center, s.width]);
        lower.extend([0.0, f64::NEG_INFINITY, PEAK_MIN_WIDTH]);
        upper.extend([f64::INFINITY, f64::INFINITY, f64::INFINITY]);
    }
    fit(&FitProblem {
        model: gaussian_peaks_fn,
        param_names: names,
        x: x.to_vec(),
        y: y.to_vec(),
        weights: weights.to_vec(),
        initial,
        lower,
        upper,
        options,
    })
}

const PEAK_MIN_WIDTH: f64 = 1e-12;

fn peak_fit_is_healthy(result: &FitResult) -> bool {
    result.converged
        && !result.rank_deficient
        && result.params[1..]
            .chunks_exact(3)
            .all(|c| c[0] > 0.0 && c[2] > PEAK_MIN_WIDTH)
}

fn greedy_peak_fit(x: &[f64], y: &[f64], weights: &[f64], n_peaks: usize, options: FitOptions) -> Result<FitResult> {
    let (baseline, first) = seed_peaks(x, y, 1);
    let mut result = fit_peak_set(x, y, weights, baseline, &first, options)?;
    let min_width = min_spacing(x).min(x[x.len() - 1] - x[0]).max(PEAK_MIN_WIDTH);
    for _ in 1..n_peaks {
        let p = result.params.clone();
        let residual = median5(&x.iter().zip(y).map(|(&xi, &yi)| yi - gaussian_peaks_fn(&p, xi)).collect::<Vec<_>>());
        let (i, _) = residual
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &r)| if r > best.1 { (i, r) } else { best });
        let mut seeds: Vec<GaussianPeak> = p[1..]
            .chunks_exact(3)
            .map(|c| GaussianPeak {
                amplitude: c[0],
                center: c[1],
                width: c[2].max(min_width),
            })
            .collect();
        let mut extra = peak_at(x, &residual, i, 0.0, min_width);
        extra.amplitude = extra.amplitude.max(f64::MIN_POSITIVE);
        seeds.push(extra);
        result = fit_peak_set(x, y, weights, p[0], &seeds, options)?;
    }
    Ok(result)
}

/// Fit `n_peaks` Gaussians on a common baseline; peaks come back sorted by
/// center.
pub fn fit_gaussian_peaks(data: &Dataset, n_peaks: usize, options: FitOptions) -> Result<(f64, Vec<GaussianPeak>, FitResult)> {
    if n_peaks == 0 {
        return Err(Error::invalid("need at least one peak"));
    }
    if data.x.is_empty() {
        return Err(Error::invalid("scan is empty"));
    }
    let mut order: Vec<usize> = (0..data.x.len()).collect();
    order.sort_by(|&a, &b| data.x[a].total_cmp(&data.x[b]));
    let x: Vec<f64> = order.iter().map(|&i| data.x[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| data.y[i]).collect();
    let w = data.weights();
    let weights: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    let (baseline, seeds) = seed_peaks(&x, &y, n_peaks);
    let mut result = fit_peak_set(&x, &y, &weights, baseline, &seeds, options)?;
    if !peak_fit_is_healthy(&result) && n_peaks > 1 {
        // Overlapping peaks may hide as shoulders: grow the model one peak
        // at a time, seeding each new peak at the largest residual.
        let greedy = greedy_peak_fit(&x, &y, &weights, n_peaks, options)?;
        if peak_fit_is_healthy(&greedy) || greedy.chi_squared < result.chi_squared {
            result = greedy;
        }
    }
    // Reorder peak blocks by fitted center, carrying the covariance along.
    let mut blocks: Vec<usize> = (0..n_peaks).collect();
    blocks.sort_by(|&a, &b| result.params[2 + 3 * a].total_cmp(&result.params[2 + 3 * b]));
    let perm: Vec<usize> = std::iter::once(0)
        .chain(blocks.iter().flat_map(|&b| [1 + 3 * b, 2 + 3 * b, 3 + 3 * b]))
        .collect();
    result.params = perm.iter().map(|&i| result.params[i]).collect();
    result.std_errors = perm.iter().map(|&i| result.std_errors[i]).collect();
    result.covariance = perm
        .iter()
        .map(|&i| perm.iter().map(|&j| result.covariance[i][j]).collect())
        .collect();
    let peaks = result.params[1..]
        .chunks_exact(3)
        .map(|c| GaussianPeak {
            amplitude: c[0],
            center: c[1],
            width: c[2].abs(),
        })
        .collect();
    Ok((result.params[0], peaks, result))
}
