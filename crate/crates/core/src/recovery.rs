//! FFT carrier recovery from sparse R-frame clicks.
//!
//! Clicks map to ±1, are summed into 100 ps bins, and the beat tone is
//! taken as the largest spectral component inside the search window after
//! zero padding to the target resolution. Neighboring R-frames are
//! duplexed around each Q-frame: both series are placed at their true
//! absolute times with the gap zero-filled, so each R-frame serves two
//! Q-frames.

use crate::noise::FrameSchedule;
use crate::synth::{Detector, DetectionEvent, EventStream};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("event {0} lies outside the frame interval")]
    EventOutsideFrame(usize),
    #[error("bin series is empty or all zero")]
    EmptySeries,
    #[error("no spectral component inside the search window")]
    NoComponentInWindow,
    #[error("invalid recovery configuration")]
    BadConfig,
    #[error("frames {0} and {1} are not adjacent")]
    NonAdjacentFrames(u64, u64),
}

/// ±1-mapped click counts on a uniform bin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSeries {
    pub bin_width: f64,
    /// Absolute time of the left edge of bin 0, ps.
    pub origin_ps: u64,
    pub values: Vec<f64>,
    pub n_events: usize,
}

/// Recovered carrier for one Q-frame.
#[derive(Debug, Clone)]
pub struct CarrierEstimate {
    pub nu_hat: f64,
    /// Initial phase at `t_ref_ps`, in [0, 2π).
    pub phi0_hat: f64,
    pub frame_index: u64,
    pub peak_amplitude: f64,
    pub n_events: usize,
    /// Reference time of the phase model, ps (the series origin).
    pub t_ref_ps: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryConfig {
    pub bin_width: f64,
    pub search_window: (f64, f64),
    /// Zero-pad until the FFT grid step is at or below this, Hz.
    pub target_resolution: f64,
    pub duplex: bool,
    /// 3-point parabolic peak refinement, off by default: the padded-grid
    /// peak is used as-is.
    pub parabolic: bool,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            bin_width: 100e-12,
            search_window: (50e6, 200e6),
            target_resolution: 0.01e6,
            duplex: true,
            parabolic: false,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<(), RecoveryError> {
        if !(self.bin_width > 0.0
            && self.target_resolution > 0.0
            && self.search_window.0 < self.search_window.1
            && self.search_window.0 >= 0.0)
        {
            return Err(RecoveryError::BadConfig);
        }
        Ok(())
    }

    /// Padded FFT length for a raw series of `raw_len` bins.
    pub fn padded_len(&self, raw_len: usize) -> usize {
        let min = (1.0 / (self.bin_width * self.target_resolution)).ceil() as usize;
        raw_len.max(min).next_power_of_two()
    }
}

/// Map one frame's clicks to ±1 and sum into bins covering
/// `[t0_ps, t1_ps)`.
pub fn map_and_bin(
    events: &[DetectionEvent],
    t0_ps: u64,
    t1_ps: u64,
    cfg: &RecoveryConfig,
) -> Result<BinSeries, RecoveryError> {
    cfg.validate()?;
    let bw_ps = cfg.bin_width * 1e12;
    let n_bins = ((t1_ps - t0_ps) as f64 / bw_ps).ceil() as usize;
    let mut values = vec![0.0; n_bins];
    for (i, e) in events.iter().enumerate() {
        if e.time_ps < t0_ps || e.time_ps >= t1_ps {
            return Err(RecoveryError::EventOutsideFrame(i));
        }
        let j = (((e.time_ps - t0_ps) as f64) / bw_ps) as usize;
        let j = j.min(n_bins - 1);
        values[j] += match e.detector {
            Detector::D0 => 1.0,
            Detector::D1 => -1.0,
        };
    }
    Ok(BinSeries { bin_width: cfg.bin_width, origin_ps: t0_ps, values, n_events: events.len() })
}

/// Estimate (ν̂, φ̂₀) from one bin series (single frame or duplexed pair).
pub fn estimate_carrier(bins: &BinSeries, cfg: &RecoveryConfig) -> Result<CarrierEstimate, RecoveryError> {
    let n = cfg.padded_len(bins.values.len());
    let fft = FftPlanner::new().plan_fft_forward(n);
    estimate_with_plan(bins, cfg, &fft)
}

fn estimate_with_plan(
    bins: &BinSeries,
    cfg: &RecoveryConfig,
    fft: &Arc<dyn Fft<f64>>,
) -> Result<CarrierEstimate, RecoveryError> {
    cfg.validate()?;
    if bins.values.iter().all(|&v| v == 0.0) {
        return Err(RecoveryError::EmptySeries);
    }
    let n = fft.len();
    debug_assert_eq!(n, cfg.padded_len(bins.values.len()));
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (j, &v) in bins.values.iter().enumerate() {
        buf[j].re = v;
    }
    fft.process(&mut buf);
    let df = 1.0 / (n as f64 * bins.bin_width);
    let k_lo = (cfg.search_window.0 / df).ceil() as usize;
    let k_hi = ((cfg.search_window.1 / df).floor() as usize).min(n / 2);
    if k_lo > k_hi {
        return Err(RecoveryError::NoComponentInWindow);
    }
    // ascending scan with strict > implements the lowest-frequency
    // tie-break
    let mut best = k_lo;
    let mut best_mag = buf[k_lo].norm_sqr();
    for k in (k_lo + 1)..=k_hi {
        let m = buf[k].norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = k;
        }
    }
    if best_mag == 0.0 {
        return Err(RecoveryError::NoComponentInWindow);
    }
    let mut nu = best as f64 * df;
    if cfg.parabolic && best > k_lo && best < k_hi {
        let (a, b, c) = (buf[best - 1].norm(), buf[best].norm(), buf[best + 1].norm());
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            nu += 0.5 * (a - c) / denom * df;
        }
    }
    // bin j holds clicks centered at origin + (j+0.5)·bw, so the spectral
    // argument is the phase there; shift it back to the origin
    let phi0 = (buf[best].arg() - PI * nu * bins.bin_width).rem_euclid(2.0 * PI);
    Ok(CarrierEstimate {
        nu_hat: nu,
        phi0_hat: phi0,
        frame_index: 0,
        peak_amplitude: best_mag.sqrt(),
        n_events: bins.n_events,
        t_ref_ps: bins.origin_ps,
    })
}

/// Phase model at time `t` seconds (absolute, same clock as the events),
/// reduced to [0, 2π).
pub fn predict_phase(est: &CarrierEstimate, t: f64) -> f64 {
    let dt = t - est.t_ref_ps as f64 * 1e-12;
    (2.0 * PI * est.nu_hat * dt + est.phi0_hat).rem_euclid(2.0 * PI)
}

fn frame_ps(iv: (f64, f64)) -> (u64, u64) {
    ((iv.0 * 1e12).round() as u64, (iv.1 * 1e12).round() as u64)
}

/// Duplexed estimate for Q-frame `k` from R-frames `k` and `k+1`.
pub fn duplex_estimate(
    stream: &EventStream,
    schedule: &FrameSchedule,
    k: u64,
    cfg: &RecoveryConfig,
) -> Result<CarrierEstimate, RecoveryError> {
    let (l0, _) = frame_ps(schedule.r_frame(k));
    let (_, r1) = frame_ps(schedule.r_frame(k + 1));
    let bins = duplex_bins(stream, schedule, k, cfg)?;
    debug_assert!((l0, r1).0 == bins.origin_ps && r1 > l0);
    let mut est = estimate_carrier(&bins, cfg)?;
    est.frame_index = k;
    Ok(est)
}

fn duplex_bins(
    stream: &EventStream,
    schedule: &FrameSchedule,
    k: u64,
    cfg: &RecoveryConfig,
) -> Result<BinSeries, RecoveryError> {
    let (l0, l1) = frame_ps(schedule.r_frame(k));
    let (r0, r1) = frame_ps(schedule.r_frame(k + 1));
    let mut bins = map_and_bin(stream.in_interval(l0, l1), l0, r1, cfg)?;
    let right = map_and_bin(stream.in_interval(r0, r1), r0, r1, cfg)?;
    // place the right frame at its true absolute offset; the gap stays
    // zero-filled
    let off = ((r0 - l0) as f64 / (cfg.bin_width * 1e12)).round() as usize;
    for (j, &v) in right.values.iter().enumerate() {
        if off + j < bins.values.len() {
            bins.values[off + j] += v;
        }
    }
    bins.n_events += right.n_events;
    Ok(bins)
}

fn single_estimate(
    stream: &EventStream,
    schedule: &FrameSchedule,
    k: u64,
    cfg: &RecoveryConfig,
    fft: &Arc<dyn Fft<f64>>,
) -> Result<CarrierEstimate, RecoveryError> {
    let (l0, l1) = frame_ps(schedule.r_frame(k));
    let bins = map_and_bin(stream.in_interval(l0, l1), l0, l1, cfg)?;
    let mut est = estimate_with_plan(&bins, cfg, fft)?;
    est.frame_index = k;
    Ok(est)
}

/// Recover one estimate per Q-frame index in `0..n_frames`, in parallel.
pub fn recover_all(
    stream: &EventStream,
    schedule: &FrameSchedule,
    n_frames: u64,
    cfg: &RecoveryConfig,
) -> Vec<Result<CarrierEstimate, RecoveryError>> {
    // both layouts have a fixed series length, so one plan serves all
    let bw_ps = cfg.bin_width * 1e12;
    let len = if cfg.duplex {
        let (l0, _) = frame_ps(schedule.r_frame(0));
        let (_, r1) = frame_ps(schedule.r_frame(1));
        ((r1 - l0) as f64 / bw_ps).ceil() as usize
    } else {
        let (l0, l1) = frame_ps(schedule.r_frame(0));
        ((l1 - l0) as f64 / bw_ps).ceil() as usize
    };
    let fft = FftPlanner::new().plan_fft_forward(cfg.padded_len(len));
    (0..n_frames)
        .into_par_iter()
        .map(|k| {
            if cfg.duplex {
                let bins = duplex_bins(stream, schedule, k, cfg)?;
                let mut est = estimate_with_plan(&bins, cfg, &fft)?;
                est.frame_index = k;
                Ok(est)
            } else {
                single_estimate(stream, schedule, k, cfg, &fft)
            }
        })
        .collect()
}
