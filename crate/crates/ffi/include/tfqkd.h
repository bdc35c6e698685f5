/* C interface for the tfqkd toolkit. */

#ifndef TFQKD_H
#define TFQKD_H

/* Generated by cbindgen from the tfqkd-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  TFQKD_STATUS_OK = 0,
  TFQKD_STATUS_NULL_ARGUMENT = 1,
  TFQKD_STATUS_INVALID_ARGUMENT = 2,
  TFQKD_STATUS_NO_KEY = 3,
  TFQKD_STATUS_INTERNAL = 4,
} TfqkdStatus;

/**
 * Opaque phase-noise model handle.
 */
typedef struct TfqkdLinkNoise TfqkdLinkNoise;

/**
 * Recovered carrier parameters for one frame.
 */
typedef struct {
  double nu_hat_hz;
  double phi0_hat_rad;
  double peak_amplitude;
  uint64_t n_events;
} TfqkdCarrierEstimate;

/**
 * Pooled window counts; same layout as the core count table.
 */
typedef struct {
  double sent_oo;
  double sent_ox;
  double sent_xo;
  double sent_oy;
  double sent_yo;
  double det_oo;
  double det_ox;
  double det_xo;
  double det_oy;
  double det_yo;
  double n_x;
  double m_x;
  double n_t;
  double qber_z;
  double n_g;
  double n_odd;
  double n_t_prime;
  double qber_z_prime;
} TfqkdCounts;

/**
 * Source parameters of the 3-intensity decoy analysis. `finite` != 0
 * enables the finite-size corrections.
 */
typedef struct {
  double mu_y;
  double mu_x;
  double mu_o;
  double p_z;
  double epsilon;
  double p_x;
  double n_total;
  double f_ec;
  double eps_est;
  double eps_cor;
  double eps_pa;
  double eps_hat;
  int32_t finite;
} TfqkdDecoyParams;

/**
 * Key-rate result summary.
 */
typedef struct {
  double r_bits_per_pulse;
  double k_bits_per_s;
  double n1_prime;
  double e1ph_prime;
  /**
   * Nonzero when the analysis produced no key (r is 0 then).
   */
  int32_t no_key;
} TfqkdKeyRate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tfqkd_version(void);

/**
 * Repeaterless secret-key capacity −log2(1 − η) at the given loss.
 */
TfqkdStatus tfqkd_skc0(double loss_db, double *out);

/**
 * New white-frequency-noise link model from the two laser linewidths
 * (Hz). Free with `tfqkd_link_noise_free`.
 */
TfqkdLinkNoise *tfqkd_link_noise_new_white(double linewidth_a_hz, double linewidth_b_hz);

/**
 * Free a link-noise handle. NULL is a no-op.
 *
 * # Safety
 * `noise` must be a pointer from `tfqkd_link_noise_new_white` not yet
 * freed.
 */
void tfqkd_link_noise_free(TfqkdLinkNoise *noise);

/**
 * Mean interference error rate over the Q-frame for the given schedule
 * and an m-slice sift window.
 *
 * # Safety
 * `noise` must be a live handle; `out` a valid pointer.
 */
TfqkdStatus tfqkd_mean_er_over_qframe(const TfqkdLinkNoise *noise,
                                      double t_r_s,
                                      double t_q_s,
                                      double t_buffer_s,
                                      uint32_t m,
                                      double *out);

/**
 * Largest per-laser white-noise linewidth (Hz) whose mean Q-frame error
 * rate stays at `target_er`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
TfqkdStatus tfqkd_max_linewidth_for_er(double target_er,
                                       double t_r_s,
                                       double t_q_s,
                                       double t_buffer_s,
                                       uint32_t m,
                                       double *out);

/**
 * Estimate the beat carrier from raw click arrays over the window
 * `[t0_ps, t1_ps)`. `channels[i]` is 0 for D0, 1 for D1. Times must be
 * sorted ascending. Uses 100 ps bins, the 50-200 MHz search window and
 * 0.01 MHz zero-padded resolution.
 *
 * # Safety
 * `times_ps` and `channels` must point to `n` readable elements; `out`
 * must be a valid pointer.
 */
TfqkdStatus tfqkd_estimate_carrier(const uint64_t *times_ps,
                                   const uint8_t *channels,
                                   uintptr_t n,
                                   uint64_t t0_ps,
                                   uint64_t t1_ps,
                                   TfqkdCarrierEstimate *out);

/**
 * Finite-size SNS key rate with AOPP from pooled counts.
 * Returns `TFQKD_STATUS_NO_KEY` when the analysis yields no key; `out`
 * is still filled (rate 0, `no_key` set).
 *
 * # Safety
 * `counts`, `params` and `out` must be valid pointers.
 */
TfqkdStatus tfqkd_key_rate(const TfqkdCounts *counts,
                           const TfqkdDecoyParams *params,
                           double slot_rate_hz,
                           double duty_cycle,
                           TfqkdKeyRate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TFQKD_H */
