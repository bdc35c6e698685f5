//! Finite-size 3-intensity SNS decoy analysis with AOPP error rejection.
//!
//! The chain runs: observed window counts → Chernoff-bounded expected
//! counting rates → decoy lower bounds on the single-photon counting
//! rates s01/s10/s1 → untagged-bit counts and the phase-flip error bound
//! → AOPP survival accounting → key rate. Every bound direction is
//! security-pessimistic; any stage the formulas drive nonpositive yields
//! a no-key result naming the stage.

use std::f64::consts::LN_2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KeyRateError {
    #[error("invalid decoy parameters: {0}")]
    BadParams(String),
    #[error("zero denominator for source pair {0}")]
    ZeroDenominator(&'static str),
    #[error("count table inconsistent: {0}")]
    BadTable(String),
    #[error("error rate {0} outside [0, 0.5]")]
    BadErrorRate(f64),
}

/// Multiplicative Chernoff machinery.
///
/// `phi_upper`/`phi_lower` bound the realized value given an expected
/// value; `mean_upper`/`mean_lower` bound the expected value given an
/// observation. All solve the exact tail exponents
///   upper: x[(1+δ)ln(1+δ) − δ] = ln(1/ε)
///   lower: x[(1−δ)ln(1−δ) + δ] = ln(1/ε)
/// by Newton iteration with bisection fallback.
pub mod chernoff {
    /// φ^U(x): upper bound on the realized value at failure probability ε.
    pub fn phi_upper(x: f64, eps: f64) -> f64 {
        assert!(x >= 0.0 && eps > 0.0 && eps < 1.0);
        if x == 0.0 {
            return 0.0;
        }
        let target = -eps.ln() / x;
        // g(δ) = (1+δ)ln(1+δ) − δ, increasing from 0
        let g = |d: f64| (1.0 + d) * (1.0 + d).ln() - d;
        let dg = |d: f64| (1.0 + d).ln();
        let d = solve_increasing(g, dg, target);
        x * (1.0 + d)
    }

    /// φ^L(x): lower bound on the realized value; clamps at 0.
    pub fn phi_lower(x: f64, eps: f64) -> f64 {
        assert!(x >= 0.0 && eps > 0.0 && eps < 1.0);
        if x == 0.0 {
            return 0.0;
        }
        let target = -eps.ln() / x;
        // g(δ) = (1−δ)ln(1−δ) + δ on [0,1], increasing, g(1) = 1
        if target >= 1.0 {
            return 0.0;
        }
        let g = |d: f64| (1.0 - d) * (1.0 - d).ln() + d;
        let dg = |d: f64| -(1.0 - d).ln();
        let mut lo = 0.0;
        let mut hi = 1.0 - 1e-16;
        let mut d = (2.0 * target).sqrt().min(0.5);
        for _ in 0..100 {
            let gd = g(d);
            if (gd - target).abs() < 1e-14 * target.max(1e-300) {
                break;
            }
            if gd < target {
                lo = d;
            } else {
                hi = d;
            }
            let step = (gd - target) / dg(d).max(1e-300);
            d -= step;
            if !(d > lo && d < hi) {
                d = 0.5 * (lo + hi);
            }
        }
        (x * (1.0 - d)).max(0.0)
    }

    /// Upper confidence bound on the expected value given observation `n`.
    ///
    /// Solves x − n − n·ln(x/n) = ln(1/ε) on the branch x > n.
    pub fn mean_upper(n: f64, eps: f64) -> f64 {
        assert!(n >= 0.0 && eps > 0.0 && eps < 1.0);
        let l = -eps.ln();
        if n == 0.0 {
            return l;
        }
        let f = |x: f64| x - n - n * (x / n).ln();
        let df = |x: f64| 1.0 - n / x;
        let mut lo = n;
        let mut hi = n + l + (2.0 * n * l).sqrt() + 2.0 * l;
        while f(hi) < l {
            hi *= 2.0;
        }
        let mut x = n + (2.0 * n * l).sqrt() + l;
        for _ in 0..100 {
            let fx = f(x);
            if (fx - l).abs() < 1e-13 * l {
                break;
            }
            if fx < l {
                lo = x;
            } else {
                hi = x;
            }
            x -= (fx - l) / df(x).max(1e-300);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
        }
        x
    }

    /// Lower confidence bound on the expected value given observation `n`.
    pub fn mean_lower(n: f64, eps: f64) -> f64 {
        assert!(n >= 0.0 && eps > 0.0 && eps < 1.0);
        if n == 0.0 {
            return 0.0;
        }
        let l = -eps.ln();
        let f = |x: f64| x - n - n * (x / n).ln();
        // branch x < n: f decreasing in x toward f(n)=0; f(x→0) → ∞
        if f(1e-300) < l {
            return 0.0;
        }
        let mut lo = 1e-300;
        let mut hi = n;
        let mut x = (n - (2.0 * n * l).sqrt()).max(n * 1e-3);
        if x <= 0.0 {
            x = n * 0.5;
        }
        for _ in 0..200 {
            let fx = f(x);
            if (fx - l).abs() < 1e-13 * l {
                break;
            }
            if fx > l {
                lo = x;
            } else {
                hi = x;
            }
            let df = 1.0 - n / x; // negative on this branch
            let nx = x - (fx - l) / df;
            x = if nx > lo && nx < hi { nx } else { 0.5 * (lo + hi) };
        }
        x.max(0.0)
    }

    fn solve_increasing<G: Fn(f64) -> f64, D: Fn(f64) -> f64>(g: G, dg: D, target: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while g(hi) < target {
            hi *= 2.0;
        }
        let mut d = hi * 0.5;
        for _ in 0..100 {
            let gd = g(d);
            if (gd - target).abs() < 1e-14 * target.max(1e-300) {
                break;
            }
            if gd < target {
                lo = d;
            } else {
                hi = d;
            }
            let nd = d - (gd - target) / dg(d).max(1e-300);
            d = if nd > lo && nd < hi { nd } else { 0.5 * (lo + hi) };
        }
        d
    }
}

/// Failure probabilities of the finite-size analysis. The experiment does
/// not pin them down; defaults are 1e-10 across the board.
#[derive(Debug, Clone, Copy)]
pub struct FailureProbs {
    pub eps_est: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub eps_hat: f64,
}

impl Default for FailureProbs {
    fn default() -> Self {
        Self { eps_est: 1e-10, eps_cor: 1e-10, eps_pa: 1e-10, eps_hat: 1e-10 }
    }
}

/// 3-intensity SNS source and protocol parameters.
#[derive(Debug, Clone, Copy)]
pub struct DecoyParams {
    pub mu_y: f64,
    pub mu_x: f64,
    pub mu_o: f64,
    /// Signal-window probability p_y.
    pub p_z: f64,
    /// Sending probability within a signal window.
    pub epsilon: f64,
    /// Decoy-window probability.
    pub p_x: f64,
    /// Total pulse pairs sent.
    pub n_total: f64,
    /// Error-correction inefficiency f.
    pub f_ec: f64,
    pub failure: FailureProbs,
    /// When false, run the asymptotic variant: Chernoff maps become the
    /// identity and all finite-size deviation/log terms vanish.
    pub finite: bool,
}

impl DecoyParams {
    pub fn p_o(&self) -> f64 {
        1.0 - self.p_z - self.p_x
    }

    pub fn validate(&self) -> Result<(), KeyRateError> {
        let bad = |s: &str| Err(KeyRateError::BadParams(s.into()));
        if !(self.mu_o >= 0.0 && self.mu_o < self.mu_x && self.mu_x < self.mu_y) {
            return bad("need 0 <= mu_o < mu_x < mu_y");
        }
        if !(self.p_z > 0.0 && self.p_x > 0.0 && self.p_o() >= 0.0) {
            return bad("window probabilities must satisfy p_z, p_x > 0, p_o >= 0");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon in (0,1)");
        }
        if !(self.n_total > 0.0 && self.f_ec >= 1.0) {
            return bad("n_total > 0 and f_ec >= 1");
        }
        for e in [self.failure.eps_est, self.failure.eps_cor, self.failure.eps_pa, self.failure.eps_hat] {
            if !(e > 0.0 && e < 1.0) {
                return bad("failure probabilities in (0,1)");
            }
        }
        Ok(())
    }
}

/// Observed window counts, Table-S6 shaped.
#[derive(Debug, Clone, Copy, Default)]
pub struct CountTable {
    /// Sent pairs per pooled source pair.
    pub sent_oo: f64,
    pub sent_ox: f64,
    pub sent_xo: f64,
    pub sent_oy: f64,
    pub sent_yo: f64,
    /// One-detector heralded events per pooled source pair.
    pub det_oo: f64,
    pub det_ox: f64,
    pub det_xo: f64,
    pub det_oy: f64,
    pub det_yo: f64,
    /// X-basis matched pairs sent and matched error events.
    pub n_x: f64,
    pub m_x: f64,
    /// Raw Z keys and their QBER before AOPP.
    pub n_t: f64,
    pub qber_z: f64,
    /// AOPP pairing observables.
    pub n_g: f64,
    pub n_odd: f64,
    /// Survivors after AOPP and their QBER.
    pub n_t_prime: f64,
    pub qber_z_prime: f64,
}

impl CountTable {
    pub fn validate(&self) -> Result<(), KeyRateError> {
        let pairs = [
            (self.det_oo, self.sent_oo, "oo"),
            (self.det_ox, self.sent_ox, "ox"),
            (self.det_xo, self.sent_xo, "xo"),
            (self.det_oy, self.sent_oy, "oy"),
            (self.det_yo, self.sent_yo, "yo"),
        ];
        for (n, big_n, name) in pairs {
            if n < 0.0 || n > big_n {
                return Err(KeyRateError::BadTable(format!("0 <= n_{name} <= N_{name} violated")));
            }
        }
        if self.m_x < 0.0 || self.m_x > self.n_x {
            return Err(KeyRateError::BadTable("m_X must lie in [0, N_X]".into()));
        }
        if !(0.0..=0.5).contains(&self.qber_z_prime) && self.n_t_prime > 0.0 {
            return Err(KeyRateError::BadErrorRate(self.qber_z_prime));
        }
        Ok(())
    }
}

/// Which stage clamped or went nonpositive.
#[derive(Debug, Clone, PartialEq)]
pub enum Clamp {
    S01,
    S10,
    E1PhAtLeastHalf,
    AoppStage(&'static str),
    RateNegative,
}

/// Full key-rate computation record; every intermediate is kept for
/// auditability.
#[derive(Debug, Clone)]
pub struct KeyRateReport {
    pub s01_lo: f64,
    pub s10_lo: f64,
    pub s1_lo: f64,
    pub n10_lo: f64,
    pub n01_lo: f64,
    pub t_x_hi: f64,
    pub e1ph_hi: f64,
    pub n1_prime: f64,
    pub e1ph_prime: f64,
    pub n_t_prime: f64,
    pub e_prime: f64,
    /// Secret bits per pulse pair.
    pub r_bits_per_pulse: f64,
    /// Secret bits per second (given slot clock × duty cycle).
    pub k_bits_per_s: f64,
    pub clamps: Vec<Clamp>,
    pub no_key: Option<String>,
}

impl KeyRateReport {
    /// Key = value text with every intermediate, for audit trails.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("s01_lo", self.s01_lo),
            ("s10_lo", self.s10_lo),
            ("s1_lo", self.s1_lo),
            ("n10_lo", self.n10_lo),
            ("n01_lo", self.n01_lo),
            ("t_x_hi", self.t_x_hi),
            ("e1ph_hi", self.e1ph_hi),
            ("n1_prime", self.n1_prime),
            ("e1ph_prime", self.e1ph_prime),
            ("n_t_prime", self.n_t_prime),
            ("e_prime", self.e_prime),
            ("r_bits_per_pulse", self.r_bits_per_pulse),
            ("k_bits_per_s", self.k_bits_per_s),
        ] {
            s.push_str(&format!("{k} = {v:.8e}\n"));
        }
        s.push_str(&format!("clamps = {:?}\n", self.clamps));
        s.push_str(&format!("no_key = {}\n", self.no_key.as_deref().unwrap_or("none")));
        s
    }

    fn no_key(stage: &str, clamps: Vec<Clamp>) -> Self {
        Self {
            s01_lo: 0.0,
            s10_lo: 0.0,
            s1_lo: 0.0,
            n10_lo: 0.0,
            n01_lo: 0.0,
            t_x_hi: 0.0,
            e1ph_hi: 0.5,
            n1_prime: 0.0,
            e1ph_prime: 0.5,
            n_t_prime: 0.0,
            e_prime: 0.0,
            r_bits_per_pulse: 0.0,
            k_bits_per_s: 0.0,
            clamps,
            no_key: Some(stage.to_string()),
        }
    }
}

/// Binary Shannon entropy.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.ln() + (1.0 - x) * (1.0 - x).ln()) / LN_2
}

/// Repeaterless secret key capacity −log₂(1−η) at `loss_db` total loss.
/// Returns [`SKC0_CAP`] when the loss is so small the bound diverges.
pub const SKC0_CAP: f64 = 1e6;

pub fn skc0(loss_db: f64) -> f64 {
    assert!(loss_db >= 0.0, "loss must be >= 0 dB");
    let eta = 10f64.powf(-loss_db / 10.0);
    if eta >= 1.0 - 1e-12 {
        return SKC0_CAP;
    }
    (-(1.0 - eta).ln() / LN_2).min(SKC0_CAP)
}

/// Expected counting-rate confidence bounds per pooled source pair.
#[derive(Debug, Clone, Copy)]
pub struct RateBounds {
    pub s_oo_lo: f64,
    pub s_oo_hi: f64,
    pub s_ox_lo: f64,
    pub s_oy_hi: f64,
    pub s_xo_lo: f64,
    pub s_yo_hi: f64,
    pub t_x_hi: f64,
}

/// Invert observed counts into expected-value bounds at eps_est.
pub fn expected_counting_rates(table: &CountTable, params: &DecoyParams) -> Result<RateBounds, KeyRateError> {
    for (n, name) in [
        (table.sent_oo, "oo"),
        (table.sent_ox, "ox"),
        (table.sent_xo, "xo"),
        (table.sent_oy, "oy"),
        (table.sent_yo, "yo"),
    ] {
        if n <= 0.0 {
            return Err(KeyRateError::ZeroDenominator(match name {
                "oo" => "oo",
                "ox" => "ox",
                "xo" => "xo",
                "oy" => "oy",
                _ => "yo",
            }));
        }
    }
    let eps = params.failure.eps_est;
    let (lo, hi): (fn(f64, f64) -> f64, fn(f64, f64) -> f64) = if params.finite {
        (chernoff::mean_lower, chernoff::mean_upper)
    } else {
        (|n, _| n, |n, _| n)
    };
    let nx = if table.n_x > 0.0 { table.n_x } else { 1.0 };
    Ok(RateBounds {
        s_oo_lo: lo(table.det_oo, eps) / table.sent_oo,
        s_oo_hi: (hi(table.det_oo, eps) / table.sent_oo).min(1.0),
        s_ox_lo: lo(table.det_ox, eps) / table.sent_ox,
        s_oy_hi: (hi(table.det_oy, eps) / table.sent_oy).min(1.0),
        s_xo_lo: lo(table.det_xo, eps) / table.sent_xo,
        s_yo_hi: (hi(table.det_yo, eps) / table.sent_yo).min(1.0),
        t_x_hi: (hi(table.m_x, eps) / nx).min(1.0),
    })
}

/// Decoy-state lower bounds on the single-photon counting rates.
pub fn decoy_lower_bounds(
    rates: &RateBounds,
    params: &DecoyParams,
) -> Result<(f64, f64, f64, Vec<Clamp>), KeyRateError> {
    let (mx, my) = (params.mu_x, params.mu_y);
    if my <= mx {
        return Err(KeyRateError::BadParams("mu_y must exceed mu_x".into()));
    }
    let denom = my * mx * (my - mx);
    let mut clamps = Vec::new();
    // pessimistic directions: +lower on the positive term, +upper on the
    // subtracted terms
    let s01 = (my * my * mx.exp() * rates.s_ox_lo
        - mx * mx * my.exp() * rates.s_oy_hi
        - (my * my - mx * mx) * rates.s_oo_hi)
        / denom;
    let s10 = (my * my * mx.exp() * rates.s_xo_lo
        - mx * mx * my.exp() * rates.s_yo_hi
        - (my * my - mx * mx) * rates.s_oo_hi)
        / denom;
    let s01 = if s01 < 0.0 {
        clamps.push(Clamp::S01);
        0.0
    } else {
        s01
    };
    let s10 = if s10 < 0.0 {
        clamps.push(Clamp::S10);
        0.0
    } else {
        s10
    };
    Ok((s01, s10, 0.5 * (s01 + s10), clamps))
}

/// Untagged-bit lower bounds and the phase-flip error-rate upper bound.
pub fn untagged_and_phase_error(
    s01_lo: f64,
    s10_lo: f64,
    s1_lo: f64,
    rates: &RateBounds,
    params: &DecoyParams,
) -> Result<(f64, f64, f64), KeyRateError> {
    let p = params;
    let common = p.n_total * p.p_z * p.p_z * p.epsilon * (1.0 - p.epsilon) * p.mu_y * (-p.mu_y).exp();
    let n10_lo = common * s10_lo;
    let n01_lo = common * s01_lo;
    if s1_lo <= 0.0 {
        // phase error undefined; caller reports no key
        return Ok((n10_lo, n01_lo, f64::INFINITY));
    }
    // mu_A1 = mu_B1 = mu_x
    let mu1 = p.mu_x;
    let att = (-2.0 * mu1).exp();
    let e1ph = (rates.t_x_hi - att * rates.s_oo_lo / 2.0) / (att * 2.0 * mu1 * s1_lo);
    Ok((n10_lo, n01_lo, e1ph.max(0.0)))
}

/// AOPP survival accounting: lower bound on surviving untagged bits and
/// the post-pairing phase-flip error rate.
pub struct AoppOutput {
    pub n1_prime: f64,
    pub e1ph_prime: f64,
    pub n1_r: f64,
    pub failed_stage: Option<&'static str>,
}

pub fn aopp(
    n10_mean_lo: f64,
    n01_mean_lo: f64,
    e1ph_hi: f64,
    table: &CountTable,
    params: &DecoyParams,
) -> Result<AoppOutput, KeyRateError> {
    let eps = params.failure.eps_est;
    let fail = |s: &'static str| AoppOutput { n1_prime: 0.0, e1ph_prime: 0.5, n1_r: 0.0, failed_stage: Some(s) };
    if table.n_odd <= 0.0 || table.n_g <= 0.0 || table.n_t <= 0.0 {
        return Ok(fail("aopp pairing observables"));
    }
    let (phi_l, phi_u): (fn(f64, f64) -> f64, fn(f64, f64) -> f64) = if params.finite {
        (chernoff::phi_lower, chernoff::phi_upper)
    } else {
        (|x, _| x, |x, _| x)
    };
    let u = table.n_g / (2.0 * table.n_odd);
    let n10 = phi_l(u * n10_mean_lo, eps);
    let n01 = phi_l(u * n01_mean_lo, eps);
    let n1 = n10 + n01;
    if n1 <= 0.0 {
        return Ok(fail("untagged bits n1"));
    }
    let n1_r = phi_l(n1 * n1 / (2.0 * u * table.n_t), eps);
    if n1_r <= 0.0 {
        return Ok(fail("paired untagged bits n1^r"));
    }
    let dev = if params.finite { (-eps.ln() / (2.0 * n1_r)).sqrt() } else { 0.0 };
    let n01_p = 2.0 * n1_r * (n01 / n1 - dev);
    let n10_p = 2.0 * n1_r * (n10 / n1 - dev);
    let n_min = n01_p.min(n10_p);
    if n_min <= 0.0 {
        return Ok(fail("post-pairing minimum n01'/n10'"));
    }
    let n1_prime = 2.0 * phi_l(n_min * (1.0 - n_min / (2.0 * n1_r)), eps);
    if n1_prime <= 0.0 {
        return Ok(fail("surviving untagged bits n1'"));
    }
    // phase-flip error after pairing
    let r = if params.finite {
        let gap = n1 - 2.0 * n1_r;
        if gap <= 0.0 {
            return Ok(fail("finite-size margin n1 - 2 n1^r"));
        }
        n1 / gap * (3.0 * gap * gap / eps).ln()
    } else {
        0.0
    };
    if 2.0 * n1_r - r <= 0.0 {
        return Ok(fail("deviation r exceeds paired bits"));
    }
    let e1ph_hi = e1ph_hi.min(0.5);
    let e_tau = phi_u(2.0 * n1_r * e1ph_hi, eps) / (2.0 * n1_r - r);
    if e_tau >= 1.0 {
        return Ok(fail("pair error rate e_tau"));
    }
    let m_s = phi_u((n1_r - r).max(0.0) * e_tau * (1.0 - e_tau), eps) + r;
    let e1ph_prime = (2.0 * m_s / n1_prime).min(0.5);
    Ok(AoppOutput { n1_prime, e1ph_prime, n1_r, failed_stage: None })
}

/// Secret key rate per pulse pair and per second.
///
/// `slot_rate_hz` is the Q-frame slot clock; `duty_cycle` the Q-frame
/// fraction of wall time.
pub fn key_rate(
    table: &CountTable,
    params: &DecoyParams,
    slot_rate_hz: f64,
    duty_cycle: f64,
) -> Result<KeyRateReport, KeyRateError> {
    params.validate()?;
    table.validate()?;
    let rates = expected_counting_rates(table, params)?;
    let (s01_lo, s10_lo, s1_lo, mut clamps) = decoy_lower_bounds(&rates, params)?;
    let (n10_lo, n01_lo, e1ph_hi) = untagged_and_phase_error(s01_lo, s10_lo, s1_lo, &rates, params)?;
    if !e1ph_hi.is_finite() {
        return Ok(KeyRateReport::no_key("s1 lower bound is zero", clamps));
    }
    if e1ph_hi >= 0.5 {
        clamps.push(Clamp::E1PhAtLeastHalf);
        return Ok(KeyRateReport::no_key("phase-flip error bound >= 1/2", clamps));
    }
    let aopp_out = aopp(n10_lo, n01_lo, e1ph_hi, table, params)?;
    if let Some(stage) = aopp_out.failed_stage {
        clamps.push(Clamp::AoppStage(stage));
        return Ok(KeyRateReport::no_key(stage, clamps));
    }
    let e_prime = table.qber_z_prime;
    if !(0.0..=0.5).contains(&e_prime) {
        return Err(KeyRateError::BadErrorRate(e_prime));
    }
    let f = params.failure;
    let log_terms = if params.finite {
        2.0 * (2.0 / f.eps_cor).log2() + 4.0 * (1.0 / (std::f64::consts::SQRT_2 * f.eps_pa * f.eps_hat)).log2()
    } else {
        0.0
    };
    let secret = aopp_out.n1_prime * (1.0 - binary_entropy(aopp_out.e1ph_prime))
        - params.f_ec * table.n_t_prime * binary_entropy(e_prime)
        - log_terms;
    let mut r = secret / params.n_total;
    if r < 0.0 {
        clamps.push(Clamp::RateNegative);
        r = 0.0;
    }
    Ok(KeyRateReport {
        s01_lo,
        s10_lo,
        s1_lo,
        n10_lo,
        n01_lo,
        t_x_hi: rates.t_x_hi,
        e1ph_hi,
        n1_prime: aopp_out.n1_prime,
        e1ph_prime: aopp_out.e1ph_prime,
        n_t_prime: table.n_t_prime,
        e_prime,
        r_bits_per_pulse: r,
        k_bits_per_s: r * slot_rate_hz * duty_cycle,
        clamps,
        no_key: if r > 0.0 { None } else { Some("net rate nonpositive".into()) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the upper Chernoff tail probability bound
    /// P(X >= y) <= [e^δ / (1+δ)^{1+δ}]^x with δ = y/x − 1.
    fn upper_tail(x: f64, y: f64) -> f64 {
        let d = y / x - 1.0;
        (x * (d - (1.0 + d) * (1.0 + d).ln())).exp()
    }

    fn lower_tail(x: f64, y: f64) -> f64 {
        let d = 1.0 - y / x;
        (x * (-d - (1.0 - d) * (1.0 - d).ln())).exp()
    }

    #[test]
    fn phi_bounds_match_direct_tail_evaluation() {
        for &x in &[10.0, 1e3, 1e6, 1e9] {
            for &eps in &[1e-6, 1e-10] {
                let up = chernoff::phi_upper(x, eps);
                let lo = chernoff::phi_lower(x, eps);
                assert!(lo <= x && x <= up);
                assert!((upper_tail(x, up) - eps).abs() / eps < 1e-6, "x={x} eps={eps}");
                if lo > 0.0 {
                    assert!((lower_tail(x, lo) - eps).abs() / eps < 1e-6);
                }
            }
        }
    }

    #[test]
    fn chernoff_sandwich_and_width_decay() {
        let eps = 1e-10;
        let mut prev_rel = f64::INFINITY;
        for &x in &[1e2, 1e4, 1e6, 1e8, 1e10] {
            let up = chernoff::phi_upper(x, eps);
            let lo = chernoff::phi_lower(x, eps);
            assert!(lo <= x && x <= up);
            let rel = (up - lo) / x;
            assert!(rel < prev_rel, "width must shrink with x");
            // ~ 1/sqrt(x) decay: two decades in x → one decade in width
            prev_rel = rel;
        }
        // eps → 1 collapses the sandwich
        let near = chernoff::phi_upper(1e4, 0.999) - chernoff::phi_lower(1e4, 0.999);
        let far = chernoff::phi_upper(1e4, 1e-10) - chernoff::phi_lower(1e4, 1e-10);
        assert!(near < far * 0.05);
    }

    #[test]
    fn mean_bounds_bracket_and_match_root_finding() {
        // n = 1e4 observed out of N = 1e8: bounds bracket 1e-4
        let eps = 1e-10;
        let n = 1e4;
        let big_n = 1e8;
        let hi = chernoff::mean_upper(n, eps) / big_n;
        let lo = chernoff::mean_lower(n, eps) / big_n;
        assert!(lo < 1e-4 && 1e-4 < hi);
        assert!(hi - lo < 2e-5, "width {}", hi - lo);
        // oracle: scan f(x) = x − n − n ln(x/n) for the two roots of f = ln(1/ε)
        let l = -(eps as f64).ln();
        let f = |x: f64| x - n - n * (x / n).ln();
        let bisect = |mut a: f64, mut b: f64| {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (f(m) - l) * (f(a) - l) <= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        };
        let hi_oracle = bisect(n, 10.0 * n);
        let lo_oracle = bisect(1e-3 * n, n);
        assert!((chernoff::mean_upper(n, eps) - hi_oracle).abs() / hi_oracle < 1e-9);
        assert!((chernoff::mean_lower(n, eps) - lo_oracle).abs() / lo_oracle < 1e-9);
    }

    #[test]
    fn mean_bounds_edge_cases() {
        let eps = 1e-10;
        assert_eq!(chernoff::mean_lower(0.0, eps), 0.0);
        assert!((chernoff::mean_upper(0.0, eps) + eps.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_anchors() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-12);
        for &x in &[0.01, 0.1, 0.3] {
            assert!((binary_entropy(x) - binary_entropy(1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn skc0_anchors() {
        assert_eq!(skc0(0.0), SKC0_CAP);
        assert!((skc0(3.0103) - 1.0).abs() < 1e-4);
        let deep = skc0(96.8);
        assert!((deep - 3.0e-10).abs() / 3.0e-10 < 0.05, "skc0={deep}");
    }

    fn demo_params() -> DecoyParams {
        DecoyParams {
            mu_y: 0.43,
            mu_x: 0.064,
            mu_o: 0.0,
            p_z: 0.77,
            epsilon: 0.28,
            p_x: 0.2,
            n_total: 1e13,
            f_ec: 1.16,
            failure: FailureProbs::default(),
            finite: true,
        }
    }

    #[test]
    fn decoy_bounds_zero_rates() {
        let rates = RateBounds {
            s_oo_lo: 0.0,
            s_oo_hi: 0.0,
            s_ox_lo: 0.0,
            s_oy_hi: 0.0,
            s_xo_lo: 0.0,
            s_yo_hi: 0.0,
            t_x_hi: 0.0,
        };
        let (a, b, c, _) = decoy_lower_bounds(&rates, &demo_params()).unwrap();
        assert_eq!((a, b, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn decoy_bounds_recover_single_photon_yield() {
        // forward model: S_ox' = e^{-mu_x}(d + mu_x Y1 + O(mu²)); with
        // asymptotic statistics the bound must sit at or below Y1 and
        // approach it as mu_x → 0
        let p = DecoyParams { finite: false, ..demo_params() };
        let y1 = 3e-4;
        let d = 1e-8;
        let model = |mu: f64| (-mu).exp() * (d + mu * y1 + mu * mu / 2.0 * 2.0 * y1);
        let rates = RateBounds {
            s_oo_lo: d,
            s_oo_hi: d,
            s_ox_lo: model(p.mu_x),
            s_oy_hi: model(p.mu_y),
            s_xo_lo: model(p.mu_x),
            s_yo_hi: model(p.mu_y),
            t_x_hi: 0.0,
        };
        let (s01, s10, s1, clamps) = decoy_lower_bounds(&rates, &p).unwrap();
        assert!(clamps.is_empty());
        assert!(s01 <= y1 * 1.0001 && s01 > 0.8 * y1, "s01={s01} y1={y1}");
        assert!((s01 - s10).abs() < 1e-12);
        assert!((s1 - s01).abs() < 1e-12);
    }

    #[test]
    fn untagged_epsilon_extremes() {
        let rates = RateBounds {
            s_oo_lo: 1e-8,
            s_oo_hi: 1e-8,
            s_ox_lo: 1e-6,
            s_oy_hi: 1e-5,
            s_xo_lo: 1e-6,
            s_yo_hi: 1e-5,
            t_x_hi: 1e-7,
        };
        for eps in [1e-9, 1.0 - 1e-9] {
            let p = DecoyParams { epsilon: eps, ..demo_params() };
            let (n10, n01, _) = untagged_and_phase_error(1e-5, 1e-5, 1e-5, &rates, &p).unwrap();
            assert!(n10 < 1.0 && n01 < 1.0, "eps(1-eps) suppresses untagged counts");
        }
    }

    #[test]
    fn random_phase_limit_gives_no_key() {
        // m_X = N_X/2 with tiny s1 drives e1ph >= 0.5 → no key
        let mut t = CountTable {
            sent_oo: 1e10,
            sent_ox: 1e10,
            sent_xo: 1e10,
            sent_oy: 1e10,
            sent_yo: 1e10,
            det_oo: 1e4,
            det_ox: 1.1e4,
            det_xo: 1.1e4,
            det_oy: 1.2e4,
            det_yo: 1.2e4,
            n_x: 1e8,
            m_x: 5e7,
            n_t: 1e6,
            qber_z: 0.28,
            n_g: 4e5,
            n_odd: 2.4e5,
            n_t_prime: 2e5,
            qber_z_prime: 0.01,
        };
        let rep = key_rate(&t, &demo_params(), 1e9, 0.25).unwrap();
        assert!(rep.no_key.is_some());
        assert_eq!(rep.r_bits_per_pulse, 0.0);
        // all-zero counts → R = 0
        t.det_oo = 0.0;
        t.det_ox = 0.0;
        t.det_xo = 0.0;
        t.det_oy = 0.0;
        t.det_yo = 0.0;
        t.m_x = 0.0;
        t.n_t = 0.0;
        t.n_g = 0.0;
        t.n_odd = 0.0;
        let rep = key_rate(&t, &demo_params(), 1e9, 0.25).unwrap();
        assert_eq!(rep.r_bits_per_pulse, 0.0);
    }

    #[test]
    fn aopp_zero_error_input_keeps_finite_residual() {
        let table = CountTable {
            n_t: 1e7,
            n_g: 3.8e6,
            n_odd: 2.4e6,
            ..Default::default()
        };
        let out = aopp(2e6, 2.2e6, 0.0, &table, &demo_params()).unwrap();
        assert!(out.failed_stage.is_none());
        assert!(out.e1ph_prime > 0.0, "finite-size residual phase error");
        assert!(out.n1_prime > 0.0);
    }

    #[test]
    fn aopp_deviation_dominates_gives_no_key() {
        // tiny counts: the sqrt deviation exceeds the ratio → failure
        let table = CountTable { n_t: 100.0, n_g: 40.0, n_odd: 24.0, ..Default::default() };
        let out = aopp(4.0, 4.0, 0.01, &table, &demo_params()).unwrap();
        assert!(out.failed_stage.is_some());
    }

    #[test]
    fn key_rate_monotonicity_under_perturbation() {
        let base = CountTable {
            sent_oo: 3.4e11,
            sent_ox: 1.17e12,
            sent_xo: 1.17e12,
            sent_oy: 6.5e10,
            sent_yo: 6.5e10,
            det_oo: 11652.0,
            det_ox: 548509.0,
            det_xo: 527351.0,
            det_oy: 216947.0,
            det_yo: 235751.0,
            n_x: 5e10,
            m_x: 1948.0,
            n_t: 1.0132683e7,
            qber_z: 0.2879,
            n_g: 3812942.0,
            n_odd: 2378187.0,
            n_t_prime: 2111964.0,
            qber_z_prime: 0.015,
        };
        let p = demo_params();
        let r0 = key_rate(&base, &p, 1.25e9, 0.25).unwrap();
        assert!(r0.r_bits_per_pulse > 0.0, "base case must produce key: {:?}", r0.no_key);
        // more X errors → lower rate
        let worse = CountTable { m_x: base.m_x * 1.5, ..base };
        let r1 = key_rate(&worse, &p, 1.25e9, 0.25).unwrap();
        assert!(r1.r_bits_per_pulse < r0.r_bits_per_pulse);
        // higher surviving QBER → lower rate
        let worse = CountTable { qber_z_prime: 0.03, ..base };
        let r2 = key_rate(&worse, &p, 1.25e9, 0.25).unwrap();
        assert!(r2.r_bits_per_pulse < r0.r_bits_per_pulse);
        // more single-photon signal (better decoy statistics) → higher rate
        let better = CountTable { det_ox: base.det_ox * 1.1, det_xo: base.det_xo * 1.1, ..base };
        let r3 = key_rate(&better, &p, 1.25e9, 0.25).unwrap();
        assert!(r3.r_bits_per_pulse > r0.r_bits_per_pulse);
    }
}
