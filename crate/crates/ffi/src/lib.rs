//! C ABI for the core toolkit: error-code returns, opaque handles for
//! stateful objects, plain structs for value types. The header is
//! generated into `include/tfqkd.h` at build time.
//!
//! Every entry point is panic-safe: unwinds are caught and reported as
//! `TFQKD_STATUS_INTERNAL`.

use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use tfqkd::keyrate::{key_rate, skc0, CountTable, DecoyParams, FailureProbs};
use tfqkd::noise::{
    max_linewidth_for_er, mean_er_over_qframe, FrameSchedule, LinkNoise, SliceConfig,
};
use tfqkd::recovery::{estimate_carrier, map_and_bin, RecoveryConfig};
use tfqkd::synth::{DetectionEvent, Detector};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfqkdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    NoKey = 3,
    Internal = 4,
}

/// Opaque phase-noise model handle.
pub struct TfqkdLinkNoise {
    inner: LinkNoise,
}

/// Recovered carrier parameters for one frame.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfqkdCarrierEstimate {
    pub nu_hat_hz: f64,
    pub phi0_hat_rad: f64,
    pub peak_amplitude: f64,
    pub n_events: u64,
}

/// Source parameters of the 3-intensity decoy analysis. `finite` != 0
/// enables the finite-size corrections.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfqkdDecoyParams {
    pub mu_y: f64,
    pub mu_x: f64,
    pub mu_o: f64,
    pub p_z: f64,
    pub epsilon: f64,
    pub p_x: f64,
    pub n_total: f64,
    pub f_ec: f64,
    pub eps_est: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub eps_hat: f64,
    pub finite: i32,
}

/// Pooled window counts; same layout as the core count table.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfqkdCounts {
    pub sent_oo: f64,
    pub sent_ox: f64,
    pub sent_xo: f64,
    pub sent_oy: f64,
    pub sent_yo: f64,
    pub det_oo: f64,
    pub det_ox: f64,
    pub det_xo: f64,
    pub det_oy: f64,
    pub det_yo: f64,
    pub n_x: f64,
    pub m_x: f64,
    pub n_t: f64,
    pub qber_z: f64,
    pub n_g: f64,
    pub n_odd: f64,
    pub n_t_prime: f64,
    pub qber_z_prime: f64,
}

/// Key-rate result summary.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfqkdKeyRate {
    pub r_bits_per_pulse: f64,
    pub k_bits_per_s: f64,
    pub n1_prime: f64,
    pub e1ph_prime: f64,
    /// Nonzero when the analysis produced no key (r is 0 then).
    pub no_key: i32,
}

fn guard<F: FnOnce() -> TfqkdStatus>(f: F) -> TfqkdStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(TfqkdStatus::Internal)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tfqkd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Repeaterless secret-key capacity −log2(1 − η) at the given loss.
#[no_mangle]
pub extern "C" fn tfqkd_skc0(loss_db: f64, out: *mut f64) -> TfqkdStatus {
    if out.is_null() {
        return TfqkdStatus::NullArgument;
    }
    if !(loss_db >= 0.0) {
        return TfqkdStatus::InvalidArgument;
    }
    guard(|| {
        unsafe { *out = skc0(loss_db) };
        TfqkdStatus::Ok
    })
}

/// New white-frequency-noise link model from the two laser linewidths
/// (Hz). Free with `tfqkd_link_noise_free`.
#[no_mangle]
pub extern "C" fn tfqkd_link_noise_new_white(
    linewidth_a_hz: f64,
    linewidth_b_hz: f64,
) -> *mut TfqkdLinkNoise {
    match LinkNoise::white(linewidth_a_hz, linewidth_b_hz) {
        Ok(inner) => Box::into_raw(Box::new(TfqkdLinkNoise { inner })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Free a link-noise handle. NULL is a no-op.
///
/// # Safety
/// `noise` must be a pointer from `tfqkd_link_noise_new_white` not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn tfqkd_link_noise_free(noise: *mut TfqkdLinkNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

fn schedule_slice(
    t_r_s: f64,
    t_q_s: f64,
    t_buffer_s: f64,
    m: u32,
) -> Option<(FrameSchedule, SliceConfig)> {
    let schedule = FrameSchedule::new(t_r_s, t_q_s, t_buffer_s).ok()?;
    let slice = SliceConfig::sift_default(m).ok()?;
    Some((schedule, slice))
}

/// Mean interference error rate over the Q-frame for the given schedule
/// and an m-slice sift window.
///
/// # Safety
/// `noise` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tfqkd_mean_er_over_qframe(
    noise: *const TfqkdLinkNoise,
    t_r_s: f64,
    t_q_s: f64,
    t_buffer_s: f64,
    m: u32,
    out: *mut f64,
) -> TfqkdStatus {
    if noise.is_null() || out.is_null() {
        return TfqkdStatus::NullArgument;
    }
    let noise = &(*noise).inner;
    guard(|| {
        let Some((schedule, slice)) = schedule_slice(t_r_s, t_q_s, t_buffer_s, m) else {
            return TfqkdStatus::InvalidArgument;
        };
        match mean_er_over_qframe(noise, schedule, &slice) {
            Ok(er) => {
                *out = er;
                TfqkdStatus::Ok
            }
            Err(_) => TfqkdStatus::InvalidArgument,
        }
    })
}

/// Largest per-laser white-noise linewidth (Hz) whose mean Q-frame error
/// rate stays at `target_er`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tfqkd_max_linewidth_for_er(
    target_er: f64,
    t_r_s: f64,
    t_q_s: f64,
    t_buffer_s: f64,
    m: u32,
    out: *mut f64,
) -> TfqkdStatus {
    if out.is_null() {
        return TfqkdStatus::NullArgument;
    }
    guard(|| {
        let Some((schedule, slice)) = schedule_slice(t_r_s, t_q_s, t_buffer_s, m) else {
            return TfqkdStatus::InvalidArgument;
        };
        match max_linewidth_for_er(target_er, schedule, &slice) {
            Ok(lw) => {
                *out = lw;
                TfqkdStatus::Ok
            }
            Err(_) => TfqkdStatus::InvalidArgument,
        }
    })
}

/// Estimate the beat carrier from raw click arrays over the window
/// `[t0_ps, t1_ps)`. `channels[i]` is 0 for D0, 1 for D1. Times must be
/// sorted ascending. Uses 100 ps bins, the 50-200 MHz search window and
/// 0.01 MHz zero-padded resolution.
///
/// # Safety
/// `times_ps` and `channels` must point to `n` readable elements; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tfqkd_estimate_carrier(
    times_ps: *const u64,
    channels: *const u8,
    n: usize,
    t0_ps: u64,
    t1_ps: u64,
    out: *mut TfqkdCarrierEstimate,
) -> TfqkdStatus {
    if out.is_null() || (n > 0 && (times_ps.is_null() || channels.is_null())) {
        return TfqkdStatus::NullArgument;
    }
    let times = std::slice::from_raw_parts(times_ps, n);
    let chans = std::slice::from_raw_parts(channels, n);
    guard(|| {
        let mut events = Vec::with_capacity(n);
        for (&t, &c) in times.iter().zip(chans) {
            let detector = match c {
                0 => Detector::D0,
                1 => Detector::D1,
                _ => return TfqkdStatus::InvalidArgument,
            };
            events.push(DetectionEvent { time_ps: t, detector });
        }
        if events.windows(2).any(|w| w[1].time_ps < w[0].time_ps) {
            return TfqkdStatus::InvalidArgument;
        }
        let cfg = RecoveryConfig::default();
        let bins = match map_and_bin(&events, t0_ps, t1_ps, &cfg) {
            Ok(b) => b,
            Err(_) => return TfqkdStatus::InvalidArgument,
        };
        match estimate_carrier(&bins, &cfg) {
            Ok(est) => {
                *out = TfqkdCarrierEstimate {
                    nu_hat_hz: est.nu_hat,
                    phi0_hat_rad: est.phi0_hat,
                    peak_amplitude: est.peak_amplitude,
                    n_events: est.n_events as u64,
                };
                TfqkdStatus::Ok
            }
            Err(_) => TfqkdStatus::InvalidArgument,
        }
    })
}

fn counts_to_table(c: &TfqkdCounts) -> CountTable {
    CountTable {
        sent_oo: c.sent_oo,
        sent_ox: c.sent_ox,
        sent_xo: c.sent_xo,
        sent_oy: c.sent_oy,
        sent_yo: c.sent_yo,
        det_oo: c.det_oo,
        det_ox: c.det_ox,
        det_xo: c.det_xo,
        det_oy: c.det_oy,
        det_yo: c.det_yo,
        n_x: c.n_x,
        m_x: c.m_x,
        n_t: c.n_t,
        qber_z: c.qber_z,
        n_g: c.n_g,
        n_odd: c.n_odd,
        n_t_prime: c.n_t_prime,
        qber_z_prime: c.qber_z_prime,
    }
}

fn params_to_decoy(p: &TfqkdDecoyParams) -> DecoyParams {
    DecoyParams {
        mu_y: p.mu_y,
        mu_x: p.mu_x,
        mu_o: p.mu_o,
        p_z: p.p_z,
        epsilon: p.epsilon,
        p_x: p.p_x,
        n_total: p.n_total,
        f_ec: p.f_ec,
        failure: FailureProbs {
            eps_est: p.eps_est,
            eps_cor: p.eps_cor,
            eps_pa: p.eps_pa,
            eps_hat: p.eps_hat,
        },
        finite: p.finite != 0,
    }
}

/// Finite-size SNS key rate with AOPP from pooled counts.
/// Returns `TFQKD_STATUS_NO_KEY` when the analysis yields no key; `out`
/// is still filled (rate 0, `no_key` set).
///
/// # Safety
/// `counts`, `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfqkd_key_rate(
    counts: *const TfqkdCounts,
    params: *const TfqkdDecoyParams,
    slot_rate_hz: f64,
    duty_cycle: f64,
    out: *mut TfqkdKeyRate,
) -> TfqkdStatus {
    if counts.is_null() || params.is_null() || out.is_null() {
        return TfqkdStatus::NullArgument;
    }
    let table = counts_to_table(&*counts);
    let decoy = params_to_decoy(&*params);
    guard(|| {
        match key_rate(&table, &decoy, slot_rate_hz, duty_cycle) {
            Ok(report) => {
                let no_key = report.no_key.is_some();
                *out = TfqkdKeyRate {
                    r_bits_per_pulse: report.r_bits_per_pulse,
                    k_bits_per_s: report.k_bits_per_s,
                    n1_prime: report.n1_prime,
                    e1ph_prime: report.e1ph_prime,
                    no_key: no_key as i32,
                };
                if no_key {
                    TfqkdStatus::NoKey
                } else {
                    TfqkdStatus::Ok
                }
            }
            Err(_) => TfqkdStatus::InvalidArgument,
        }
    })
}
