//! Expected-value channel model: maps source and channel parameters to
//! the count table a long SNS run would produce on average.
//!
//! Scenario sweeps and oracle tests use this instead of per-pulse Monte
//! Carlo, which is hopeless at 10¹³ pulse pairs. The middle-node
//! interference of two phase-randomized coherent states with effective
//! intensities A, B gives detector loads λ± = (A + B ± 2√(AB)cosθ)/2;
//! heralding and dark counts are averaged over θ numerically.

use crate::keyrate::{CountTable, DecoyParams};
use crate::quad::gauss16;
use std::f64::consts::PI;

/// Symmetric channel: total fiber loss split evenly between the sides,
/// detector efficiency folded into each side's transmittance.
#[derive(Debug, Clone, Copy)]
pub struct ChannelModel {
    /// Total A-to-B fiber loss, dB.
    pub loss_db: f64,
    pub det_eff: f64,
    /// Dark-count probability per detector per gate.
    pub dark_prob: f64,
    /// Effective X-basis misalignment/phase error fraction (interference
    /// ER after carrier recovery).
    pub e_mis: f64,
}

impl ChannelModel {
    /// One side's transmittance, source to detector.
    pub fn eta_side(&self) -> f64 {
        self.det_eff * 10f64.powf(-self.loss_db / 20.0)
    }
}

/// One-detector heralding probability for a phase-randomized pair with
/// effective detector-plane intensities `a_eff`, `b_eff`.
pub fn heralded_prob(a_eff: f64, b_eff: f64, dark: f64) -> f64 {
    let f = |theta: f64| {
        let cross = 2.0 * (a_eff * b_eff).sqrt() * theta.cos();
        let lp = 0.5 * (a_eff + b_eff + cross);
        let lm = 0.5 * (a_eff + b_eff - cross);
        let p0 = 1.0 - (1.0 - dark) * (-lp).exp();
        let p1 = 1.0 - (1.0 - dark) * (-lm).exp();
        p0 * (1.0 - p1) + p1 * (1.0 - p0)
    };
    // θ-average; [0, π] suffices by symmetry
    (gauss16(&f, 0.0, PI / 2.0) + gauss16(&f, PI / 2.0, PI)) / PI
}

/// Wrong-detector heralding probability for a matched X-basis pair.
fn matched_error_prob(total_load: f64, dark: f64, e_mis: f64) -> f64 {
    let l_right = total_load * (1.0 - e_mis);
    let l_wrong = total_load * e_mis;
    let p_right = 1.0 - (1.0 - dark) * (-l_right).exp();
    let p_wrong = 1.0 - (1.0 - dark) * (-l_wrong).exp();
    p_wrong * (1.0 - p_right)
}

/// Expected count table for a run of `params.n_total` pulse pairs.
pub fn expected_count_table(ch: &ChannelModel, params: &DecoyParams) -> CountTable {
    let eta = ch.eta_side();
    let n = params.n_total;
    let (pz, px, po, eps) = (params.p_z, params.p_x, params.p_o(), params.epsilon);
    let (mu_y, mu_x, mu_o) = (params.mu_y, params.mu_x, params.mu_o);
    let s = |a: f64, b: f64| heralded_prob(a * eta, b * eta, ch.dark_prob);

    // decoy pools; effective vacuum = o-window or signal-window not-send
    let p_vac = po + pz * (1.0 - eps);
    let s_vac = |other: f64| (po * s(mu_o, other) + pz * (1.0 - eps) * s(0.0, other)) / p_vac;
    let mut t = CountTable {
        sent_oo: (po * po + 2.0 * po * pz * (1.0 - eps)) * n,
        sent_ox: p_vac * px * n,
        sent_xo: p_vac * px * n,
        sent_oy: po * pz * eps * n,
        sent_yo: po * pz * eps * n,
        ..Default::default()
    };
    // the oo pool excludes (not-send, not-send), which stays in Z data
    t.det_oo = (po * po * s(mu_o, mu_o) + po * pz * (1.0 - eps) * (s(0.0, mu_o) + s(mu_o, 0.0))) * n;
    t.det_ox = t.sent_ox * s_vac(mu_x);
    t.det_xo = t.sent_xo * s_vac(mu_x);
    t.det_oy = t.sent_oy * s(mu_o, mu_y);
    t.det_yo = t.sent_yo * s(mu_y, mu_o);

    // Z-basis rows
    let zz = pz * pz * n;
    let d_yy = zz * eps * eps * s(mu_y, mu_y);
    let d_yo = zz * eps * (1.0 - eps) * s(mu_y, 0.0);
    let d_oy = zz * eps * (1.0 - eps) * s(0.0, mu_y);
    let d_oo = zz * (1.0 - eps) * (1.0 - eps) * s(0.0, 0.0);
    t.n_t = d_yy + d_yo + d_oy + d_oo;
    t.qber_z = (d_yy + d_oo) / t.n_t.max(1e-300);
    let n_b0 = d_yy + d_oy; // Bob sent
    let n_b1 = d_yo + d_oo;
    t.n_g = n_b0.min(n_b1);
    t.n_odd = n_b0 * n_b1 / t.n_t.max(1e-300);
    // AOPP survivors: pairs (Bob 0, Bob 1) kept when Alice parity is odd
    let a0 = d_yy / n_b0.max(1e-300); // P(Alice sent | Bob sent)
    let a1 = d_yo / n_b1.max(1e-300); // P(Alice sent | Bob not)
    let keep = a0 * (1.0 - a1) + (1.0 - a0) * a1;
    t.n_t_prime = t.n_g * keep;
    t.qber_z_prime = if keep > 0.0 { a0 * (1.0 - a1) / keep } else { 0.0 };

    // matched X-basis pairs: continuous ψ_AB makes the acceptance
    // fraction of the postselection bands exactly 1/8
    t.n_x = n * px * px / 8.0;
    t.m_x = t.n_x * matched_error_prob(2.0 * mu_x * eta, ch.dark_prob, ch.e_mis);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::{
        decoy_lower_bounds, expected_counting_rates, key_rate, untagged_and_phase_error, FailureProbs,
    };

    fn params_202km() -> DecoyParams {
        DecoyParams {
            mu_y: 0.49,
            mu_x: 0.044,
            mu_o: 5e-5,
            p_z: 0.878,
            epsilon: 0.28,
            p_x: 0.115,
            n_total: 1e13,
            f_ec: 1.16,
            failure: FailureProbs::default(),
            finite: false,
        }
    }

    #[test]
    fn heralded_prob_limits() {
        // no light, no dark → nothing
        assert!(heralded_prob(0.0, 0.0, 0.0).abs() < 1e-15);
        // dark only: exactly one of two dark counts
        let d = 1e-3;
        assert!((heralded_prob(0.0, 0.0, d) - 2.0 * d * (1.0 - d)).abs() < 1e-12);
        // single-sided weak light: P ≈ a(1−a) + a·... → ≈ a for small a
        let a = 1e-4;
        assert!((heralded_prob(a, 0.0, 0.0) - a).abs() < 2.0 * a * a);
        // monotone in intensity
        let mut prev = 0.0;
        for i in 1..10 {
            let p = heralded_prob(1e-4 * i as f64, 1e-4 * i as f64, 1e-6);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn decoy_bounds_recover_true_single_photon_rate() {
        let ch = ChannelModel { loss_db: 38.4, det_eff: 0.75, dark_prob: 1e-8, e_mis: 0.03 };
        let p = params_202km();
        let table = expected_count_table(&ch, &p);
        table.validate().unwrap();
        let rates = expected_counting_rates(&table, &p).unwrap();
        let (s01, s10, s1, clamps) = decoy_lower_bounds(&rates, &p).unwrap();
        assert!(clamps.is_empty());
        // true |01> counting rate: photon survives one side w.p. η and
        // vetoes on the other detector's dark count; else dark-only
        let eta = ch.eta_side();
        let d = ch.dark_prob;
        let s01_true = eta * (1.0 - d) + (1.0 - eta) * 2.0 * d * (1.0 - d);
        assert!(s01 <= s01_true * 1.001, "s01={s01} true={s01_true}");
        assert!(s01 > 0.9 * s01_true, "decoy bound too loose: {s01} vs {s01_true}");
        assert!((s01 - s10).abs() / s01 < 1e-9, "symmetric channel");
        assert!(s1 > 0.0);
    }

    #[test]
    fn phase_error_bound_tracks_model_error() {
        let ch = ChannelModel { loss_db: 38.4, det_eff: 0.75, dark_prob: 1e-8, e_mis: 0.03 };
        let p = params_202km();
        let table = expected_count_table(&ch, &p);
        let rates = expected_counting_rates(&table, &p).unwrap();
        let (s01, s10, s1, _) = decoy_lower_bounds(&rates, &p).unwrap();
        let (_, _, e1ph) = untagged_and_phase_error(s01, s10, s1, &rates, &p).unwrap();
        // plug-in truth for a single-photon pair: wrong-detector fraction
        let eta = ch.eta_side();
        let d = ch.dark_prob;
        let e_true = (eta * ch.e_mis + d) / (eta + 2.0 * d);
        assert!((e1ph - e_true).abs() / e_true < 0.10, "e1ph={e1ph} true={e_true}");
    }

    #[test]
    fn key_rate_sign_versus_loss() {
        let p = DecoyParams { finite: true, n_total: 1e12, ..params_202km() };
        let mild = ChannelModel { loss_db: 30.0, det_eff: 0.75, dark_prob: 1e-8, e_mis: 0.03 };
        let r = key_rate(&expected_count_table(&mild, &p), &p, 1.25e9, 0.25).unwrap();
        assert!(r.r_bits_per_pulse > 0.0, "no key at 30 dB: {:?}", r.no_key);
        let hopeless = ChannelModel { loss_db: 130.0, ..mild };
        let r = key_rate(&expected_count_table(&hopeless, &p), &p, 1.25e9, 0.25).unwrap();
        assert_eq!(r.r_bits_per_pulse, 0.0);
    }

    #[test]
    fn qber_structure_matches_sns_expectations() {
        let ch = ChannelModel { loss_db: 50.0, det_eff: 0.75, dark_prob: 1e-8, e_mis: 0.03 };
        let p = params_202km();
        let t = expected_count_table(&ch, &p);
        // raw Z QBER is dominated by double-sends: close to ε but below
        assert!(t.qber_z > 0.1 && t.qber_z < 0.4, "qber_z={}", t.qber_z);
        // AOPP crushes it by orders of magnitude
        assert!(t.qber_z_prime < 0.02, "qber_z'={}", t.qber_z_prime);
        assert!(t.n_t_prime < t.n_t / 2.0);
        assert!(t.n_g <= t.n_t / 2.0 * 1.0001 + 1.0);
    }
}
