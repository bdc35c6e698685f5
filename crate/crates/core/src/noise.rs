//! Phase-noise spectral densities and the analytical chain from PSD to
//! interference error rate.
//!
//! The model covers two noise sources per side: the laser's frequency
//! noise (white frequency noise gives a Lorentzian line of width
//! δν = π·h_w) and the fiber path-length fluctuation, characterized as a
//! phase-noise PSD or a tabulated path variance. Both enter the structure
//! function ⟨Δφ²(τ)⟩, which in turn drives the residual phase variance
//! after the R-frame reference estimate and the sifted error rate in the
//! Q-frame.

use crate::quad::{integrate_panels, sinc, sinc_sq_tail, spectral_edges};
use std::f64::consts::PI;
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Optical carrier at 1550.12 nm, Hz.
pub const DEFAULT_NU0: f64 = SPEED_OF_LIGHT / 1550.12e-9;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),
    #[error("negative linewidth/noise amplitude {0}")]
    NegativeAmplitude(f64),
    #[error("PSD table needs at least 2 points, got {0}")]
    TableTooShort(usize),
    #[error("PSD table frequencies must be strictly increasing and positive")]
    TableNotMonotone,
    #[error("PSD density must be finite and >= 0")]
    BadDensity,
    #[error("invalid band [{0}, {1}]")]
    BadBand(f64, f64),
    #[error("tau must be > 0, got {0}")]
    BadTau(f64),
    #[error("time {0} s outside the Q-frame [-T_Q/2, T_Q/2]")]
    OutsideQFrame(f64),
    #[error("negative variance {0}")]
    NegativeVariance(f64),
    #[error("invalid frame schedule")]
    BadSchedule,
    #[error("invalid slice configuration")]
    BadSlice,
    #[error("target error rate {0} outside the attainable range ({1}, 0.5)")]
    TargetOutOfRange(f64, f64),
    #[error("path variance table must be nonnegative and nondecreasing")]
    BadPathTable,
}

/// One-sided spectral density of a noise source.
///
/// `WhiteFrequency` is frequency noise in Hz²/Hz; `Tabulated` is phase
/// noise in rad²/Hz with log-log interpolation between knots; `Sum`
/// evaluates to the sum of its children.
#[derive(Debug, Clone)]
pub enum PsdKind {
    WhiteFrequency { h_w: f64 },
    Tabulated { points: Vec<(f64, f64)> },
    Sum(Vec<PsdModel>),
}

#[derive(Debug, Clone)]
pub struct PsdModel {
    pub kind: PsdKind,
    /// Band over which the model is defined; evaluation outside clamps.
    pub band: (f64, f64),
}

/// Default evaluation band, Hz. The integrands span nine decades.
pub const DEFAULT_BAND: (f64, f64) = (1.0, 1e9);

impl PsdModel {
    pub fn white_frequency(h_w: f64) -> Result<Self, NoiseError> {
        if !(h_w >= 0.0) || !h_w.is_finite() {
            return Err(NoiseError::NegativeAmplitude(h_w));
        }
        Ok(Self { kind: PsdKind::WhiteFrequency { h_w }, band: DEFAULT_BAND })
    }

    /// White-frequency model from a Lorentzian linewidth δν, Hz.
    pub fn from_linewidth(delta_nu: f64) -> Result<Self, NoiseError> {
        if !(delta_nu >= 0.0) {
            return Err(NoiseError::NegativeAmplitude(delta_nu));
        }
        Self::white_frequency(delta_nu / PI)
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self, NoiseError> {
        if points.len() < 2 {
            return Err(NoiseError::TableTooShort(points.len()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[0].0 > 0.0) {
                return Err(NoiseError::TableNotMonotone);
            }
        }
        if points.iter().any(|p| !p.1.is_finite() || p.1 < 0.0) {
            return Err(NoiseError::BadDensity);
        }
        let band = (points[0].0, points[points.len() - 1].0);
        Ok(Self { kind: PsdKind::Tabulated { points }, band })
    }

    pub fn sum(children: Vec<PsdModel>) -> Result<Self, NoiseError> {
        let lo = children.iter().map(|c| c.band.0).fold(f64::INFINITY, f64::min);
        let hi = children.iter().map(|c| c.band.1).fold(0.0, f64::max);
        if !(lo > 0.0 && hi > lo) {
            return Err(NoiseError::BadBand(lo, hi));
        }
        Ok(Self { kind: PsdKind::Sum(children), band: (lo, hi) })
    }

    /// Evaluate the density at `f` Hz, clamping to the band edges and
    /// reporting whether clamping happened.
    pub fn eval_clamped(&self, f: f64) -> Result<(f64, bool), NoiseError> {
        if f < 0.0 {
            return Err(NoiseError::NegativeFrequency(f));
        }
        let clamped = f < self.band.0 || f > self.band.1;
        let fc = f.clamp(self.band.0, self.band.1);
        let v = match &self.kind {
            PsdKind::WhiteFrequency { h_w } => *h_w,
            PsdKind::Tabulated { points } => interp_loglog(points, fc),
            PsdKind::Sum(children) => {
                let mut acc = 0.0;
                for c in children {
                    acc += c.eval_clamped(fc)?.0;
                }
                acc
            }
        };
        Ok((v, clamped))
    }

    /// Evaluate the density at `f` Hz (clamped to band).
    pub fn eval(&self, f: f64) -> Result<f64, NoiseError> {
        Ok(self.eval_clamped(f)?.0)
    }

    /// Breakpoints worth honoring as quadrature panel edges.
    fn breakpoints(&self, out: &mut Vec<f64>) {
        match &self.kind {
            PsdKind::WhiteFrequency { .. } => {}
            PsdKind::Tabulated { points } => out.extend(points.iter().map(|p| p.0)),
            PsdKind::Sum(children) => {
                for c in children {
                    c.breakpoints(out);
                }
            }
        }
    }
}

/// Lorentzian linewidth from a white frequency-noise amplitude: δν = π·h_w.
pub fn linewidth_from_white(h_w: f64) -> Result<f64, NoiseError> {
    if !(h_w >= 0.0) {
        return Err(NoiseError::NegativeAmplitude(h_w));
    }
    Ok(PI * h_w)
}

fn interp_loglog(points: &[(f64, f64)], f: f64) -> f64 {
    let f = f.clamp(points[0].0, points[points.len() - 1].0);
    let idx = match points.binary_search_by(|p| p.0.partial_cmp(&f).unwrap()) {
        Ok(i) => return points[i].1,
        Err(i) => i.clamp(1, points.len() - 1),
    };
    let (f0, d0) = points[idx - 1];
    let (f1, d1) = points[idx];
    if d0 <= 0.0 || d1 <= 0.0 {
        // log-log undefined at zero density; fall back to linear
        return d0 + (d1 - d0) * (f - f0) / (f1 - f0);
    }
    let t = (f / f0).ln() / (f1 / f0).ln();
    (d0.ln() + t * (d1 / d0).ln()).exp()
}

/// Optical path-difference fluctuation of one fiber span.
///
/// Internally everything reduces to a delay variance σ_T²(τ) in s², so the
/// phase contribution is 4π²ν₀²σ_T²(τ) and the cross-term attenuation is
/// exp(−2π²σ_T²(τ)f²).
#[derive(Debug, Clone, Default)]
pub enum FiberPathModel {
    #[default]
    None,
    /// (τ s, σ_L² m²) pairs, linearly interpolated.
    TabulatedPath { points: Vec<(f64, f64)> },
    /// Fiber phase-noise PSD, rad²/Hz: σ_φ²(τ) = 2∫S_φ(f)(1−cos2πfτ)df.
    PhasePsd { psd: PsdModel },
}

impl FiberPathModel {
    pub fn tabulated_path(points: Vec<(f64, f64)>) -> Result<Self, NoiseError> {
        if points.len() < 2 {
            return Err(NoiseError::TableTooShort(points.len()));
        }
        let mut last = -1.0;
        let mut last_v = 0.0;
        for &(tau, v) in &points {
            if tau <= last || v < last_v || v < 0.0 || !v.is_finite() {
                return Err(NoiseError::BadPathTable);
            }
            last = tau;
            last_v = v;
        }
        Ok(Self::TabulatedPath { points })
    }

    /// Delay variance σ_T²(τ), s².
    pub fn delay_variance(&self, tau: f64, nu0: f64) -> Result<f64, NoiseError> {
        if tau < 0.0 {
            return Err(NoiseError::BadTau(tau));
        }
        match self {
            FiberPathModel::None => Ok(0.0),
            FiberPathModel::TabulatedPath { points } => {
                let sigma_l2 = interp_linear_clamped(points, tau);
                Ok(sigma_l2 / (SPEED_OF_LIGHT * SPEED_OF_LIGHT))
            }
            FiberPathModel::PhasePsd { psd } => {
                let sigma_phi2 = phase_variance_from_phase_psd(psd, tau)?;
                Ok(sigma_phi2 / (4.0 * PI * PI * nu0 * nu0))
            }
        }
    }

    /// Phase variance contribution 4π²ν₀²σ_T²(τ), rad².
    pub fn phase_variance(&self, tau: f64, nu0: f64) -> Result<f64, NoiseError> {
        Ok(4.0 * PI * PI * nu0 * nu0 * self.delay_variance(tau, nu0)?)
    }
}

fn interp_linear_clamped(points: &[(f64, f64)], x: f64) -> f64 {
    if x <= points[0].0 {
        // anchored at σ²(0) = 0
        if points[0].0 > 0.0 {
            return points[0].1 * (x / points[0].0).max(0.0);
        }
        return points[0].1;
    }
    let last = points[points.len() - 1];
    if x >= last.0 {
        return last.1;
    }
    let idx = points.partition_point(|p| p.0 < x);
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// σ_φ²(τ) = 2∫S_φ(f)(1−cos 2πfτ)df over the model band.
pub fn phase_variance_from_phase_psd(psd: &PsdModel, tau: f64) -> Result<f64, NoiseError> {
    if tau == 0.0 {
        return Ok(0.0);
    }
    let mut brk = Vec::new();
    psd.breakpoints(&mut brk);
    let (lo, hi) = psd.band;
    let edges = spectral_edges(lo, hi, 12, 1.0 / tau, &brk);
    let f_int = |f: f64| {
        let s = psd.eval(f).unwrap_or(0.0);
        s * (1.0 - (2.0 * PI * f * tau).cos())
    };
    Ok(2.0 * integrate_panels(&f_int, &edges))
}

/// Two-sided link: independent lasers and fiber spans, variances add.
#[derive(Debug, Clone)]
pub struct LinkNoise {
    pub laser_a: PsdModel,
    pub laser_b: PsdModel,
    pub fiber_a: FiberPathModel,
    pub fiber_b: FiberPathModel,
    pub nu0: f64,
}

impl LinkNoise {
    /// White-frequency lasers only, no fiber term.
    pub fn white(delta_nu_a: f64, delta_nu_b: f64) -> Result<Self, NoiseError> {
        Ok(Self {
            laser_a: PsdModel::from_linewidth(delta_nu_a)?,
            laser_b: PsdModel::from_linewidth(delta_nu_b)?,
            fiber_a: FiberPathModel::None,
            fiber_b: FiberPathModel::None,
            nu0: DEFAULT_NU0,
        })
    }

    pub fn quiet() -> Self {
        Self::white(0.0, 0.0).unwrap()
    }
}

/// Quadrature control for the structure-function integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub points_per_decade: usize,
    /// Number of oscillation periods resolved explicitly before switching
    /// to the analytic sinc² tail.
    pub periods: f64,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self { points_per_decade: 12, periods: 64.0 }
    }
}

/// Structure function of one side: the three terms of the PSD-to-variance
/// relation (frequency-noise sinc² integral, path term, cross term).
pub fn side_phase_diff_variance(
    laser: &PsdModel,
    fiber: &FiberPathModel,
    nu0: f64,
    tau: f64,
    opts: QuadOpts,
) -> Result<f64, NoiseError> {
    if !(tau > 0.0) {
        return Err(NoiseError::BadTau(tau));
    }
    let mut brk = Vec::new();
    laser.breakpoints(&mut brk);
    let period = 1.0 / tau;
    let f_lo = laser.band.0.min(1e-4 / tau).max(1e-6);
    let f_hi = (opts.periods / tau).max(laser.band.1.min(1e9));
    let edges = spectral_edges(f_lo, f_hi, opts.points_per_decade, period, &brk);

    // term 1: 4π²τ² ∫ S_δν(f) sinc²(πfτ) df, plus analytic tail and the
    // flat [0, f_lo] stub
    let integrand = |f: f64| {
        let s = laser.eval(f).unwrap_or(0.0);
        let sc = sinc(f * tau);
        s * sc * sc
    };
    let mut i1 = integrate_panels(&integrand, &edges);
    i1 += laser.eval(f_hi)? * sinc_sq_tail(f_hi, tau);
    i1 += laser.eval(f_lo)? * f_lo;
    let term1 = 4.0 * PI * PI * tau * tau * i1;

    // term 2: 4π²ν₀²σ_T²(τ)
    let sigma_t2 = fiber.delay_variance(tau, nu0)?;
    let term2 = 4.0 * PI * PI * nu0 * nu0 * sigma_t2;

    // term 3: 2 ∫ S_δν(f) [1 − exp(−2π²σ_T²f²)] cos(2πfτ)/f² df
    let term3 = if sigma_t2 > 0.0 {
        let integrand3 = |f: f64| {
            let s = laser.eval(f).unwrap_or(0.0);
            let atten = 1.0 - (-2.0 * PI * PI * sigma_t2 * f * f).exp();
            s * atten * (2.0 * PI * f * tau).cos() / (f * f)
        };
        2.0 * integrate_panels(&integrand3, &edges)
    } else {
        0.0
    };

    Ok((term1 + term2 + term3).max(0.0))
}

/// ⟨Δφ²(τ)⟩ of the beat note: sum of the two independent sides.
pub fn phase_diff_variance(noise: &LinkNoise, tau: f64) -> Result<f64, NoiseError> {
    phase_diff_variance_opts(noise, tau, QuadOpts::default())
}

pub fn phase_diff_variance_opts(noise: &LinkNoise, tau: f64, opts: QuadOpts) -> Result<f64, NoiseError> {
    let a = side_phase_diff_variance(&noise.laser_a, &noise.fiber_a, noise.nu0, tau, opts)?;
    let b = side_phase_diff_variance(&noise.laser_b, &noise.fiber_b, noise.nu0, tau, opts)?;
    Ok(a + b)
}

/// R-frame/Q-frame time multiplexing. Durations in seconds.
#[derive(Debug, Clone, Copy)]
pub struct FrameSchedule {
    pub t_r: f64,
    pub t_q: f64,
    pub t_buffer: f64,
}

impl FrameSchedule {
    pub fn new(t_r: f64, t_q: f64, t_buffer: f64) -> Result<Self, NoiseError> {
        if !(t_r > 0.0 && t_q > 0.0 && t_buffer >= 0.0) {
            return Err(NoiseError::BadSchedule);
        }
        Ok(Self { t_r, t_q, t_buffer })
    }

    /// One full period: R-frame, buffer, Q-frame, buffer.
    pub fn period(&self) -> f64 {
        self.t_q + self.t_r + 2.0 * self.t_buffer
    }

    /// Absolute interval [start, end) of the k-th R-frame.
    pub fn r_frame(&self, k: u64) -> (f64, f64) {
        let start = k as f64 * self.period();
        (start, start + self.t_r)
    }

    /// Absolute interval of the k-th Q-frame (after the k-th R-frame).
    pub fn q_frame(&self, k: u64) -> (f64, f64) {
        let start = k as f64 * self.period() + self.t_r + self.t_buffer;
        (start, start + self.t_q)
    }

    /// Duty cycle: fraction of time occupied by Q-frames.
    pub fn duty_cycle(&self) -> f64 {
        self.t_q / self.period()
    }
}

/// Phase-slice acceptance: M slices, events accepted within
/// `accept_halfwidth` of 0 or π.
#[derive(Debug, Clone, Copy)]
pub struct SliceConfig {
    pub m: u32,
    pub accept_halfwidth: f64,
}

impl SliceConfig {
    pub fn new(m: u32, accept_halfwidth: f64) -> Result<Self, NoiseError> {
        if m < 2 || !(accept_halfwidth > 0.0 && accept_halfwidth <= PI / 2.0) {
            return Err(NoiseError::BadSlice);
        }
        Ok(Self { m, accept_halfwidth })
    }

    /// Sift-rule default: half-width π/M.
    pub fn sift_default(m: u32) -> Result<Self, NoiseError> {
        Self::new(m, PI / m as f64)
    }

    /// Wider integration-window variant: half-width 2π/M.
    pub fn wide_window(m: u32) -> Result<Self, NoiseError> {
        Self::new(m, 2.0 * PI / m as f64)
    }

    /// Error rate with zero phase noise: (1 − sin(w)/w)/2.
    pub fn floor(&self) -> f64 {
        0.5 * (1.0 - self.accept_halfwidth.sin() / self.accept_halfwidth)
    }
}

/// Instantaneous interference error rate for Gaussian phase fluctuation of
/// the given variance, averaged over the accepted window.
///
/// The inner Gaussian integral of sin²(φ/2) collapses to
/// (1 − e^{−σ²/2} cos φ̂)/2, and the window average of cos φ̂ is sin(w)/w.
pub fn instantaneous_er(variance: f64, slice: &SliceConfig) -> Result<f64, NoiseError> {
    if !(variance >= 0.0) {
        return Err(NoiseError::NegativeVariance(variance));
    }
    let w = slice.accept_halfwidth;
    Ok(0.5 * (1.0 - (-variance / 2.0).exp() * w.sin() / w))
}

/// Precomputed structure-function curve for fast repeated evaluation.
///
/// ⟨Δφ²⟩ is smooth in τ, so a dense linear-interpolation grid over
/// [0, T_Q + 2T_R] keeps the double integrals cheap.
pub struct StructureCurve {
    step: f64,
    values: Vec<f64>,
}

impl StructureCurve {
    pub fn build(noise: &LinkNoise, tau_max: f64, n: usize) -> Result<Self, NoiseError> {
        let step = tau_max / (n - 1) as f64;
        let mut values = Vec::with_capacity(n);
        values.push(0.0);
        for i in 1..n {
            values.push(phase_diff_variance(noise, step * i as f64)?);
        }
        Ok(Self { step, values })
    }

    pub fn at(&self, tau: f64) -> f64 {
        let tau = tau.abs();
        let x = tau / self.step;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let t = x - i as f64;
        self.values[i] * (1.0 - t.min(1.0)) + self.values[i + 1] * t.min(1.0)
    }
}

/// Residual phase variance ⟨(φ(t) − φ̂)²⟩ after estimating φ̂ as the mean
/// of φ over the duplexed R-frames ℛ = [−T_R−T_Q/2, −T_Q/2] ∪ [T_Q/2,
/// T_Q/2+T_R], for t in the Q-frame [−T_Q/2, T_Q/2].
pub struct ReferenceVarianceModel {
    schedule: FrameSchedule,
    curve: StructureCurve,
}

impl ReferenceVarianceModel {
    pub fn build(noise: &LinkNoise, schedule: FrameSchedule) -> Result<Self, NoiseError> {
        let tau_max = schedule.t_q + 2.0 * schedule.t_r;
        let curve = StructureCurve::build(noise, tau_max * 1.0001, 1025)?;
        Ok(Self { schedule, curve })
    }

    pub fn at(&self, t: f64) -> Result<f64, NoiseError> {
        let tq = self.schedule.t_q;
        let tr = self.schedule.t_r;
        if t.abs() > tq / 2.0 + 1e-15 {
            return Err(NoiseError::OutsideQFrame(t));
        }
        let v = |tau: f64| self.curve.at(tau);
        // first term: (1/2T_R) ∫₀^{T_R} [V(t'+T_Q/2+t) + V(t'+T_Q/2−t)] dt'
        let f1 = |tp: f64| v(tp + tq / 2.0 + t) + v(tp + tq / 2.0 - t);
        let i1 = gl_integral(&f1, 0.0, tr) / (2.0 * tr);
        // second term: (1/(2T_R)²) ∫₀^{T_R} t'[V(T_Q+t') + V(T_Q+2T_R−t') + 2V(T_R−t')] dt'
        let f2 = |tp: f64| tp * (v(tq + tp) + v(tq + 2.0 * tr - tp) + 2.0 * v(tr - tp));
        let i2 = gl_integral(&f2, 0.0, tr) / (4.0 * tr * tr);
        Ok((i1 - i2).max(0.0))
    }

    /// Test-only single-R-frame variant: estimate from the left R-frame
    /// alone, ℛ₁ = [−T_R−T_Q/2, −T_Q/2].
    pub fn at_single_frame(&self, t: f64) -> Result<f64, NoiseError> {
        let tq = self.schedule.t_q;
        let tr = self.schedule.t_r;
        if t.abs() > tq / 2.0 + 1e-15 {
            return Err(NoiseError::OutsideQFrame(t));
        }
        let v = |tau: f64| self.curve.at(tau);
        // (1/T_R)∫_ℛ V(|t−s|)ds − (1/(2T_R²))∫∫ V(|s−s'|)
        let f1 = |tp: f64| v(tp + tq / 2.0 + t);
        let i1 = gl_integral(&f1, 0.0, tr) / tr;
        let f2 = |u: f64| (tr - u) * v(u);
        let i2 = gl_integral(&f2, 0.0, tr) / (tr * tr);
        Ok((i1 - i2).max(0.0))
    }
}

fn gl_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    // composite 16-pt GL over 8 sub-panels; the integrands are smooth
    let n = 8;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| crate::quad::gauss16(f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

/// Residual variance at a single Q-frame time (convenience wrapper;
/// rebuilds the structure curve, so batch users should hold a
/// [`ReferenceVarianceModel`]).
pub fn reference_phase_estimate_variance(
    noise: &LinkNoise,
    schedule: FrameSchedule,
    t: f64,
) -> Result<f64, NoiseError> {
    ReferenceVarianceModel::build(noise, schedule)?.at(t)
}

/// Average interference error rate over the Q-frame (accurate carrier
/// estimation assumed).
pub fn mean_er_over_qframe(
    noise: &LinkNoise,
    schedule: FrameSchedule,
    slice: &SliceConfig,
) -> Result<f64, NoiseError> {
    let model = ReferenceVarianceModel::build(noise, schedule)?;
    mean_er_with_model(&model, schedule, slice)
}

pub fn mean_er_with_model(
    model: &ReferenceVarianceModel,
    schedule: FrameSchedule,
    slice: &SliceConfig,
) -> Result<f64, NoiseError> {
    // the residual variance is even in t: integrate [0, T_Q/2] only
    let half = schedule.t_q / 2.0;
    let f = |t: f64| {
        let var = model.at(t).unwrap_or(f64::INFINITY);
        instantaneous_er(var, slice).unwrap_or(0.5)
    };
    Ok(gl_integral(&f, 0.0, half) / half)
}

/// Largest white-noise linewidth (per laser, both sides equal) whose mean
/// Q-frame error rate stays at `target_er`; bisection to 1e-3 relative.
pub fn max_linewidth_for_er(
    target_er: f64,
    schedule: FrameSchedule,
    slice: &SliceConfig,
) -> Result<f64, NoiseError> {
    let floor = slice.floor();
    if !(target_er > floor && target_er < 0.5) {
        return Err(NoiseError::TargetOutOfRange(target_er, floor));
    }
    let er_of = |dv: f64| -> Result<f64, NoiseError> {
        let link = LinkNoise::white(dv, dv)?;
        mean_er_over_qframe(&link, schedule, slice)
    };
    let mut lo = 0.0;
    let mut hi = 1e3;
    while er_of(hi)? < target_er {
        hi *= 4.0;
        if hi > 1e12 {
            return Err(NoiseError::TargetOutOfRange(target_er, floor));
        }
    }
    while (hi - lo) / hi > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if er_of(mid)? < target_er {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_psd_from_linewidth() {
        // δν = 5.9 kHz ⇒ h_w = δν/π ≈ 1878 Hz²/Hz
        let m = PsdModel::from_linewidth(5900.0).unwrap();
        let h = m.eval(12345.0).unwrap();
        assert!((h - 5900.0 / PI).abs() < 1e-9);
        assert!((h - 1878.0).abs() < 1.0);
        assert!((linewidth_from_white(h).unwrap() - 5900.0).abs() < 1e-9);
    }

    #[test]
    fn linewidth_roundtrip_and_zero() {
        assert_eq!(linewidth_from_white(0.0).unwrap(), 0.0);
        assert!((linewidth_from_white(5000.0 / PI).unwrap() - 5000.0).abs() < 1e-9);
        assert!(linewidth_from_white(-1.0).is_err());
    }

    #[test]
    fn sum_psd_is_linear() {
        let a = PsdModel::from_linewidth(5000.0).unwrap();
        let b = PsdModel::from_linewidth(5000.0).unwrap();
        let s = PsdModel::sum(vec![a.clone(), b]).unwrap();
        let got = s.eval(1e3).unwrap();
        assert!((got - 2.0 * a.eval(1e3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tabulated_loglog_midpoint() {
        // {(10², 10⁻²), (10⁴, 10⁻⁶)} at f = 10³ → 10⁻⁴ (log-log midpoint)
        let m = PsdModel::tabulated(vec![(1e2, 1e-2), (1e4, 1e-6)]).unwrap();
        let got = m.eval(1e3).unwrap();
        assert!((got - 1e-4).abs() / 1e-4 < 1e-12);
    }

    #[test]
    fn tabulated_validation() {
        assert!(matches!(
            PsdModel::tabulated(vec![(1.0, 1.0)]),
            Err(NoiseError::TableTooShort(1))
        ));
        assert!(PsdModel::tabulated(vec![(2.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(PsdModel::tabulated(vec![(1.0, -1.0), (2.0, 1.0)]).is_err());
        let m = PsdModel::tabulated(vec![(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert!(m.eval(-1.0).is_err());
        // clamped outside band, flagged
        assert!(m.eval_clamped(10.0).unwrap().1);
    }

    #[test]
    fn zero_noise_variance_is_zero() {
        let link = LinkNoise::quiet();
        let v = phase_diff_variance(&link, 1e-6).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn white_noise_closed_form() {
        // single side, δν = 5 kHz, τ = 1 µs → 2πδντ ≈ 0.0314 rad²
        let laser = PsdModel::from_linewidth(5000.0).unwrap();
        let v = side_phase_diff_variance(&laser, &FiberPathModel::None, DEFAULT_NU0, 1e-6, QuadOpts::default())
            .unwrap();
        let want = 2.0 * PI * 5000.0 * 1e-6;
        assert!((v - want).abs() / want < 1e-4, "v={v} want={want}");
    }

    #[test]
    fn white_noise_closed_form_across_tau_range() {
        let link = LinkNoise::white(5000.0, 0.0).unwrap();
        for &tau in &[1e-8, 1e-7, 1e-6, 1e-5, 1e-4] {
            let v = phase_diff_variance(&link, tau).unwrap();
            let want = 2.0 * PI * 5000.0 * tau;
            assert!((v - want).abs() / want < 1e-4, "tau={tau}: {v} vs {want}");
        }
    }

    #[test]
    fn two_sides_add() {
        let single = LinkNoise::white(5000.0, 0.0).unwrap();
        let double = LinkNoise::white(5000.0, 5000.0).unwrap();
        let v1 = phase_diff_variance(&single, 1e-6).unwrap();
        let v2 = phase_diff_variance(&double, 1e-6).unwrap();
        assert!((v2 - 2.0 * v1).abs() / v2 < 1e-9);
    }

    #[test]
    fn instantaneous_er_anchors() {
        let s16 = SliceConfig::sift_default(16).unwrap();
        // σ² = 0, half-width π/16 → (1 − (16/π)sin(π/16))/2 ≈ 0.00321
        let e0 = instantaneous_er(0.0, &s16).unwrap();
        assert!((e0 - 0.00321).abs() < 1e-4, "e0={e0}");
        let wide = SliceConfig::wide_window(16).unwrap();
        let e1 = instantaneous_er(0.0, &wide).unwrap();
        assert!((e1 - 0.01275).abs() < 1e-4, "e1={e1}");
        // variance → ∞ → 0.5
        let einf = instantaneous_er(1e6, &s16).unwrap();
        assert!((einf - 0.5).abs() < 1e-12);
        // monotone nondecreasing in variance
        let mut prev = 0.0;
        for i in 0..60 {
            let e = instantaneous_er(0.01 * i as f64, &s16).unwrap();
            assert!(e >= prev - 1e-15 && e <= 0.5);
            prev = e;
        }
    }

    #[test]
    fn reference_variance_zero_noise_and_symmetry() {
        let link = LinkNoise::white(2000.0, 2000.0).unwrap();
        let sched = FrameSchedule::new(5e-6, 1e-6, 0.0).unwrap();
        let model = ReferenceVarianceModel::build(&link, sched).unwrap();
        let quiet = ReferenceVarianceModel::build(&LinkNoise::quiet(), sched).unwrap();
        assert_eq!(quiet.at(0.0).unwrap(), 0.0);
        assert_eq!(quiet.at(4e-7).unwrap(), 0.0);
        for &t in &[1e-7, 3e-7, 4.9e-7] {
            let p = model.at(t).unwrap();
            let m = model.at(-t).unwrap();
            assert!((p - m).abs() <= 1e-12 * p.max(1e-30), "t={t}");
        }
        assert!(model.at(6e-7).is_err());
        // never exceeds the farthest-separation structure function
        let vmax = phase_diff_variance(&link, sched.t_q / 2.0 + sched.t_r).unwrap();
        for &t in &[0.0, 2e-7, 4.9e-7] {
            assert!(model.at(t).unwrap() <= vmax);
        }
    }

    #[test]
    fn wiener_reference_variance_closed_form() {
        // for V(τ) = Dτ the duplexed residual is D(T_R/6 + T_Q/4), flat in t
        let dv = 10_000.0;
        let link = LinkNoise::white(dv, dv).unwrap();
        let sched = FrameSchedule::new(5e-6, 1e-6, 0.0).unwrap();
        let model = ReferenceVarianceModel::build(&link, sched).unwrap();
        let d = 2.0 * (2.0 * PI * dv);
        let want = d * (sched.t_r / 6.0 + sched.t_q / 4.0);
        for &t in &[0.0, 2.5e-7, 4.9e-7] {
            let got = model.at(t).unwrap();
            assert!((got - want).abs() / want < 2e-3, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn duplexing_beats_single_frame() {
        let link = LinkNoise::white(5000.0, 5000.0).unwrap();
        let sched = FrameSchedule::new(5e-6, 1e-6, 0.0).unwrap();
        let model = ReferenceVarianceModel::build(&link, sched).unwrap();
        let dup = model.at(0.0).unwrap();
        let single = model.at_single_frame(0.0).unwrap();
        assert!(dup <= single, "duplexed {dup} vs single {single}");
    }

    #[test]
    fn linewidth_requirement_anchor() {
        // 35.5 kHz per side, T_Q = 1 µs, T_R = 5 µs → ≈ 11 % mean ER
        let link = LinkNoise::white(35_500.0, 35_500.0).unwrap();
        let sched = FrameSchedule::new(5e-6, 1e-6, 0.0).unwrap();
        let slice = SliceConfig::sift_default(16).unwrap();
        let er = mean_er_over_qframe(&link, sched, &slice).unwrap();
        assert!((er - 0.11).abs() < 0.02, "er={er}");

        let lw = max_linewidth_for_er(0.11, sched, &slice).unwrap();
        assert!((30e3..=41e3).contains(&lw), "lw={lw}");
    }

    #[test]
    fn er_monotone_in_linewidth() {
        let sched = FrameSchedule::new(5e-6, 1e-6, 0.0).unwrap();
        let slice = SliceConfig::sift_default(16).unwrap();
        let mut prev = 0.0;
        for &dv in &[0.0, 1e3, 5e3, 2e4, 5e4] {
            let link = LinkNoise::white(dv, dv).unwrap();
            let er = mean_er_over_qframe(&link, sched, &slice).unwrap();
            assert!(er >= prev, "dv={dv}");
            prev = er;
        }
        // noiseless floor
        let quiet = mean_er_over_qframe(&LinkNoise::quiet(), sched, &slice).unwrap();
        assert!((quiet - slice.floor()).abs() < 1e-12);
        assert!((slice.floor() - 0.00321).abs() < 1e-4);
    }

    #[test]
    fn max_linewidth_monotone_in_target() {
        let sched = FrameSchedule::new(5e-6, 1e-6, 0.0).unwrap();
        let slice = SliceConfig::sift_default(16).unwrap();
        let mut prev = 0.0;
        for &target in &[0.02, 0.05, 0.11, 0.2] {
            let lw = max_linewidth_for_er(target, sched, &slice).unwrap();
            assert!(lw > prev);
            prev = lw;
        }
        assert!(max_linewidth_for_er(0.001, sched, &slice).is_err());
    }

    #[test]
    fn fiber_phase_psd_contribution() {
        // a fiber phase PSD adds a nonnegative, growing contribution
        let psd = PsdModel::tabulated(vec![(1.0, 50.0), (1e3, 5e-5), (1e5, 5e-9)]).unwrap();
        let fiber = FiberPathModel::PhasePsd { psd };
        let v1 = fiber.phase_variance(1e-6, DEFAULT_NU0).unwrap();
        let v2 = fiber.phase_variance(1e-5, DEFAULT_NU0).unwrap();
        assert!(v1 >= 0.0 && v2 >= v1 * 0.5);
        assert_eq!(fiber.phase_variance(0.0, DEFAULT_NU0).unwrap(), 0.0);
    }

    #[test]
    fn schedule_frames_deterministic() {
        let sched = FrameSchedule::new(4.9152e-6, 1.6384e-6, 0.1024e-6).unwrap();
        let p = sched.period();
        assert!((p - 6.7584e-6).abs() < 1e-12);
        let (r0, r0e) = sched.r_frame(3);
        assert!((r0 - 3.0 * p).abs() < 1e-12);
        assert!((r0e - r0 - sched.t_r).abs() < 1e-18);
        let (q0, q0e) = sched.q_frame(3);
        assert!(q0 > r0e && q0e - q0 - sched.t_q < 1e-18);
        assert!(FrameSchedule::new(0.0, 1.0, 0.0).is_err());
    }
}
