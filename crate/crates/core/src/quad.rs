//! Quadrature helpers for the spectral-density integrals.
//!
//! The integrands span many decades in frequency and oscillate with a
//! period set by the correlation lag, so panels are built from a union of
//! a log-spaced grid (resolves the spectral shape) and a linear per-period
//! grid (resolves the sinc²/cos oscillation). Each panel is integrated
//! with fixed-order Gauss-Legendre.

/// 16-point Gauss-Legendre nodes on [-1, 1] (positive half; symmetric).
const GL16_X: [f64; 8] = [
    0.09501250983763744,
    0.2816035507792589,
    0.45801677765722737,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_W: [f64; 8] = [
    0.189450610455068496,
    0.182603415044923589,
    0.169156519395002532,
    0.149595988816576731,
    0.124628971255533872,
    0.095158511682492785,
    0.062253523938647892,
    0.027152459411754095,
];

/// Integrate `f` over `[a, b]` with 16-point Gauss-Legendre.
pub fn gauss16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        let dx = h * GL16_X[i];
        acc += GL16_W[i] * (f(c + dx) + f(c - dx));
    }
    acc * h
}

/// Integrate `f` over the sorted panel edges, Gauss-Legendre per panel.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, edges: &[f64]) -> f64 {
    edges
        .windows(2)
        .map(|w| if w[1] > w[0] { gauss16(f, w[0], w[1]) } else { 0.0 })
        .sum()
}

/// Panel edges over `[lo, hi]`: log-spaced grid (points per decade) merged
/// with a linear grid of period `osc_period` (0 or non-finite disables it)
/// and any extra breakpoints (e.g. table knots).
pub fn spectral_edges(lo: f64, hi: f64, per_decade: usize, osc_period: f64, extra: &[f64]) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo);
    let mut edges = Vec::new();
    let decades = (hi / lo).log10();
    let n_log = (decades * per_decade as f64).ceil().max(1.0) as usize;
    for i in 0..=n_log {
        edges.push(lo * (hi / lo).powf(i as f64 / n_log as f64));
    }
    if osc_period.is_finite() && osc_period > 0.0 {
        let mut x = (lo / osc_period).floor() * osc_period;
        while x < hi {
            if x > lo {
                edges.push(x);
            }
            x += osc_period;
        }
    }
    for &x in extra {
        if x > lo && x < hi {
            edges.push(x);
        }
    }
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < f64::EPSILON * b.abs().max(1.0));
    edges
}

/// Remainder of the sinc² integral: `∫_b^∞ sinc²(π f τ) df`.
///
/// Uses T(a) = 1/(2a) − cos(2a)/(2a) + (π/2 − Si(2a)) with a = π b τ and the
/// asymptotic expansion of Si; accurate for a ≳ 20.
pub fn sinc_sq_tail(b: f64, tau: f64) -> f64 {
    let a = std::f64::consts::PI * b * tau;
    if a <= 0.0 {
        return f64::INFINITY;
    }
    let x = 2.0 * a;
    // π/2 − Si(x) ≈ cos(x)/x·(1 − 2/x² + 24/x⁴) + sin(x)/x²·(1 − 6/x² + 120/x⁴)
    let ix2 = 1.0 / (x * x);
    let fa = (1.0 - 2.0 * ix2 + 24.0 * ix2 * ix2) / x;
    let ga = (1.0 - 6.0 * ix2 + 120.0 * ix2 * ix2) * ix2;
    let si_rem = x.cos() * fa + x.sin() * ga;
    let t = 0.5 / a - (2.0 * a).cos() * 0.5 / a + si_rem;
    t / (std::f64::consts::PI * tau)
}

/// Normalized sinc with the π convention used here: sin(πx)/(πx).
pub fn sinc(x: f64) -> f64 {
    let y = std::f64::consts::PI * x;
    if y.abs() < 1e-8 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exact_on_polynomials() {
        let f = |x: f64| 3.0 * x * x + 2.0 * x + 1.0;
        let got = gauss16(&f, -1.0, 2.0);
        // ∫ = x³ + x² + x
        let want = (8.0 + 4.0 + 2.0) - (-1.0 + 1.0 - 1.0);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn sinc_sq_integral_matches_half_inverse_tau() {
        // ∫₀^∞ sinc²(πfτ) df = 1/(2τ)
        for &tau in &[1e-8, 1e-6, 1e-4] {
            let f = |x: f64| {
                let s = sinc(x * tau);
                s * s
            };
            let hi = 256.0 / tau;
            let edges = spectral_edges(1e-3, hi, 8, 1.0 / tau, &[]);
            let got = integrate_panels(&f, &edges) + sinc_sq_tail(hi, tau) + 1e-3;
            let want = 0.5 / tau;
            assert!(
                (got - want).abs() / want < 1e-5,
                "tau={tau} got={got} want={want}"
            );
        }
    }

    #[test]
    fn tail_formula_against_direct_quadrature() {
        let tau = 1e-6;
        let b = 64.0 / tau;
        // direct: integrate [b, 4096/τ] then the analytic remainder of that
        let f = |x: f64| {
            let s = sinc(x * tau);
            s * s
        };
        let far = 4096.0 / tau;
        let edges = spectral_edges(b, far, 4, 1.0 / tau, &[]);
        let direct = integrate_panels(&f, &edges) + sinc_sq_tail(far, tau);
        let got = sinc_sq_tail(b, tau);
        assert!((got - direct).abs() / direct < 1e-6);
    }
}
