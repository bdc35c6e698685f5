//! Monte Carlo twin of the analytic noise chain: stochastic phase
//! trajectories realized from PSD models and Poisson click streams at the
//! two interference detectors under the frame schedule.
//!
//! Trajectory synthesis shapes white Gaussian noise in the frequency
//! domain (Hermitian spectrum, inverse FFT), which gives the target PSD
//! exactly in expectation and band-limits at [1/duration, 1/(2Δt)].
//! Interpretation per PSD kind: white-frequency models are frequency
//! noise and contribute S(f)/f² to the phase PSD; tabulated models are
//! phase noise in rad²/Hz and contribute directly; sums mix freely.

use crate::noise::{FiberPathModel, FrameSchedule, LinkNoise, PsdKind, PsdModel};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("beat frequency {0} Hz outside plausible band [{1}, {2}] Hz")]
    CarrierOutOfBand(f64, f64, f64),
    #[error("trajectory of {0} samples exceeds the cap of {1}")]
    TrajectoryTooLong(u64, u64),
    #[error("invalid duration or sample period")]
    BadTiming,
    #[error("negative rate")]
    NegativeRate,
    #[error("expected event count {0:.0} exceeds the cap of {1}")]
    TooManyEvents(f64, u64),
    #[error("fiber path model is tabulated in tau and cannot be synthesized; provide a phase PSD")]
    FiberNotSynthesizable,
    #[error("pulse period {0} s does not divide the Q-frame duration {1} s")]
    InconsistentPulsePeriod(f64, f64),
}

/// Plausible beat-note band, Hz. The drift keeps the tone inside it over
/// any one run.
pub const DEFAULT_CARRIER_BAND: (f64, f64) = (50e6, 200e6);

/// Deterministic beat-note carrier: Φ_c(t) = 2πνt + πd·t² + φ₀.
#[derive(Debug, Clone, Copy)]
pub struct BeatCarrier {
    pub nu: f64,
    pub phi0: f64,
    /// Linear frequency drift, Hz/s.
    pub drift: f64,
}

impl BeatCarrier {
    pub fn new(nu: f64, phi0: f64) -> Result<Self, SynthError> {
        Self::with_band(nu, phi0, DEFAULT_CARRIER_BAND)
    }

    pub fn with_band(nu: f64, phi0: f64, band: (f64, f64)) -> Result<Self, SynthError> {
        if !(nu >= band.0 && nu <= band.1) {
            return Err(SynthError::CarrierOutOfBand(nu, band.0, band.1));
        }
        Ok(Self { nu, phi0: phi0.rem_euclid(2.0 * PI), drift: 0.0 })
    }

    /// Carrier phase at time `t` seconds.
    pub fn phase_at(&self, t: f64) -> f64 {
        2.0 * PI * self.nu * t + PI * self.drift * t * t + self.phi0
    }
}

/// One realization of Δφ(t), sampled uniformly; linear interpolation in
/// between, clamped at the ends.
#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    pub sample_period: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl PhaseTrajectory {
    pub fn zero(duration: f64, sample_period: f64, seed: u64) -> Self {
        let n = (duration / sample_period).ceil() as usize + 1;
        Self { sample_period, samples: vec![0.0; n], seed }
    }

    pub fn duration(&self) -> f64 {
        self.sample_period * (self.samples.len().saturating_sub(1)) as f64
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        let x = t / self.sample_period;
        if x <= 0.0 {
            return self.samples[0];
        }
        let i = x.floor() as usize;
        if i + 1 >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    D0,
    D1,
}

/// One detector click, 1 ps resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionEvent {
    pub time_ps: u64,
    pub detector: Detector,
}

/// Time-sorted click record, the common currency between simulation and
/// recovery.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventStream {
    pub events: Vec<DetectionEvent>,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time_ps <= w[1].time_ps)
    }

    /// Events with time in `[t0_ps, t1_ps)`; requires sorted order.
    pub fn in_interval(&self, t0_ps: u64, t1_ps: u64) -> &[DetectionEvent] {
        let a = self.events.partition_point(|e| e.time_ps < t0_ps);
        let b = self.events.partition_point(|e| e.time_ps < t1_ps);
        &self.events[a..b]
    }
}

/// Per-detector count rates by frame type plus a constant dark floor.
#[derive(Debug, Clone, Copy)]
pub struct RateProfile {
    pub r_rate: f64,
    pub q_rate: f64,
    pub dark_rate: f64,
}

impl RateProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.r_rate < 0.0 || self.q_rate < 0.0 || self.dark_rate < 0.0 {
            return Err(SynthError::NegativeRate);
        }
        Ok(())
    }
}

/// Detection probabilities of the two detectors at interference phase φ.
pub fn beat_probability(phi: f64) -> (f64, f64) {
    let c = phi.cos();
    (0.5 * (1.0 + c), 0.5 * (1.0 - c))
}

const SAMPLE_CAP: u64 = 1 << 26;

/// Phase-noise PSD of `psd` at `f`, rad²/Hz, per the kind convention above.
fn phase_psd(psd: &PsdModel, f: f64) -> f64 {
    match &psd.kind {
        PsdKind::WhiteFrequency { h_w } => h_w / (f * f),
        PsdKind::Tabulated { .. } => psd.eval(f).unwrap_or(0.0),
        PsdKind::Sum(children) => children.iter().map(|c| phase_psd(c, f)).sum(),
    }
}

fn psd_is_zero(psd: &PsdModel) -> bool {
    match &psd.kind {
        PsdKind::WhiteFrequency { h_w } => *h_w == 0.0,
        PsdKind::Tabulated { points } => points.iter().all(|p| p.1 == 0.0),
        PsdKind::Sum(children) => children.iter().all(psd_is_zero),
    }
}

/// Synthesize one Δφ(t) realization from a PSD model.
///
/// Deterministic per seed; samples cover at least `duration` (the FFT
/// length rounds up to a power of two).
pub fn synthesize_trajectory(
    psd: &PsdModel,
    duration: f64,
    sample_period: f64,
    seed: u64,
) -> Result<PhaseTrajectory, SynthError> {
    if !(duration > 0.0 && sample_period > 0.0 && duration / sample_period < 1e18) {
        return Err(SynthError::BadTiming);
    }
    let n_req = (duration / sample_period).ceil() as u64 + 1;
    let n = n_req.next_power_of_two();
    if n > SAMPLE_CAP {
        return Err(SynthError::TrajectoryTooLong(n, SAMPLE_CAP));
    }
    if psd_is_zero(psd) {
        // two samples spanning the whole run; interpolation stays zero
        return Ok(PhaseTrajectory { sample_period: duration, samples: vec![0.0; 2], seed });
    }
    let n = n as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let df = 1.0 / (n as f64 * sample_period);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    // one-sided PSD: the k and n−k lines together carry S(f_k)·Δf, so
    // E|c_k|² = S·Δf/2, i.e. σ² = S·Δf/4 per real component
    for k in 1..n / 2 {
        let f = k as f64 * df;
        let sigma = (phase_psd(psd, f) * df / 4.0).sqrt();
        let g = Complex::new(sigma * gauss(&mut rng), sigma * gauss(&mut rng));
        spec[k] = g;
        spec[n - k] = g.conj();
    }
    let f_nyq = (n / 2) as f64 * df;
    spec[n / 2] = Complex::new((phase_psd(psd, f_nyq) * df).sqrt() * gauss(&mut rng), 0.0);
    let fft = FftPlanner::new().plan_fft_inverse(n);
    fft.process(&mut spec);
    Ok(PhaseTrajectory {
        sample_period,
        samples: spec.into_iter().map(|c| c.re).collect(),
        seed,
    })
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

/// Simulation knobs beyond the spec'd inputs.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub sample_period: f64,
    /// Gaussian timing jitter applied to recorded click times, s RMS.
    pub jitter_rms: f64,
    pub event_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { sample_period: 1e-9, jitter_rms: 0.0, event_cap: 50_000_000 }
    }
}

/// A finished simulation: the click stream plus the ground truth needed
/// by end-to-end checks (true carrier and the realized Δφ trajectory).
#[derive(Debug, Clone)]
pub struct SimRun {
    pub events: EventStream,
    pub carrier: BeatCarrier,
    pub delta_phi: PhaseTrajectory,
    pub seed: u64,
}

impl SimRun {
    /// True interference phase Φ(t) at time `t` seconds.
    pub fn true_phase(&self, t: f64) -> f64 {
        self.carrier.phase_at(t) + self.delta_phi.phase_at(t)
    }
}

/// Simulate clicks over `[0, duration)` with default options.
///
/// Homogeneous Poisson arrivals per frame type at the combined rate of
/// both detectors, each assigned by [`beat_probability`] at the true
/// phase; dark counts uniform over detectors; buffer zones emit nothing.
pub fn simulate_run(
    carrier: &BeatCarrier,
    noise: &LinkNoise,
    schedule: &FrameSchedule,
    rates: &RateProfile,
    duration: f64,
    seed: u64,
) -> Result<SimRun, SynthError> {
    simulate_run_opts(carrier, noise, schedule, rates, duration, seed, SimOptions::default())
}

pub fn simulate_run_opts(
    carrier: &BeatCarrier,
    noise: &LinkNoise,
    schedule: &FrameSchedule,
    rates: &RateProfile,
    duration: f64,
    seed: u64,
    opts: SimOptions,
) -> Result<SimRun, SynthError> {
    rates.validate()?;
    if !(duration > 0.0) {
        return Err(SynthError::BadTiming);
    }
    let expected = 2.0
        * duration
        * (rates.dark_rate
            + rates.r_rate * schedule.t_r / schedule.period()
            + rates.q_rate * schedule.t_q / schedule.period());
    if expected > opts.event_cap as f64 {
        return Err(SynthError::TooManyEvents(expected, opts.event_cap));
    }
    let delta_phi = synthesize_trajectory(&combined_phase_psd(noise)?, duration, opts.sample_period, seed)?;

    let mut events = Vec::with_capacity(expected as usize + 16);
    let n_frames = (duration / schedule.period()).ceil() as u64;
    for k in 0..n_frames {
        // substreams keep frames independent and order-insensitive;
        // stream 0 is the trajectory synthesis
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + 3 * k);
        let (r0, r1) = schedule.r_frame(k);
        let (q0, q1) = schedule.q_frame(k);
        for (a, b, rate) in [
            (r0, r1.min(duration), rates.r_rate + rates.dark_rate),
            (q0, q1.min(duration), rates.q_rate + rates.dark_rate),
        ] {
            if b <= a || rate <= 0.0 {
                continue;
            }
            let mean = 2.0 * rate * (b - a);
            let n: u64 = Poisson::new(mean).unwrap().sample(&mut rng) as u64;
            let p_dark = rates.dark_rate / rate;
            for _ in 0..n {
                let t = a + rng.gen::<f64>() * (b - a);
                let det = if rng.gen::<f64>() < p_dark {
                    if rng.gen::<bool>() {
                        Detector::D0
                    } else {
                        Detector::D1
                    }
                } else {
                    let phi = carrier.phase_at(t) + delta_phi.phase_at(t);
                    let (p0, _) = beat_probability(phi);
                    if rng.gen::<f64>() < p0 {
                        Detector::D0
                    } else {
                        Detector::D1
                    }
                };
                let t_rec = if opts.jitter_rms > 0.0 {
                    (t + opts.jitter_rms * gauss(&mut rng)).clamp(a, b)
                } else {
                    t
                };
                events.push(DetectionEvent { time_ps: (t_rec * 1e12).round() as u64, detector: det });
            }
        }
    }
    events.sort_by_key(|e| e.time_ps);
    Ok(SimRun { events: EventStream { events }, carrier: *carrier, delta_phi, seed })
}

/// Phase-noise PSD of the full beat note: both lasers plus any fiber
/// phase-PSD terms (independent processes, PSDs add).
fn combined_phase_psd(noise: &LinkNoise) -> Result<PsdModel, SynthError> {
    let mut children = vec![noise.laser_a.clone(), noise.laser_b.clone()];
    for fiber in [&noise.fiber_a, &noise.fiber_b] {
        match fiber {
            FiberPathModel::None => {}
            FiberPathModel::PhasePsd { psd } => children.push(psd.clone()),
            FiberPathModel::TabulatedPath { .. } => return Err(SynthError::FiberNotSynthesizable),
        }
    }
    Ok(PsdModel::sum(children).expect("bands validated at construction"))
}

/// Pulse slot centers within one Q-frame, as offsets from the frame start.
pub fn q_frame_pulse_tags(schedule: &FrameSchedule, pulse_period: f64) -> Result<Vec<f64>, SynthError> {
    if !(pulse_period > 0.0) {
        return Err(SynthError::BadTiming);
    }
    let n = (schedule.t_q / pulse_period).round();
    if n < 1.0 || (n * pulse_period - schedule.t_q).abs() > 1e-6 * schedule.t_q {
        return Err(SynthError::InconsistentPulsePeriod(pulse_period, schedule.t_q));
    }
    Ok((0..n as usize).map(|i| (i as f64 + 0.5) * pulse_period).collect())
}
