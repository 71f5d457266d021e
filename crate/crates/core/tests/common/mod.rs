//! Shared test machinery: tolerance assertions, a panel-doubling adaptive
//! Gauss-Legendre integrator serving as the independent oracle for every
//! closed-form moment, and a seeded RNG for reproducible sampling.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slab_transport::quadrature::gauss_legendre;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
    let rel = (got - want).abs() / want.abs().max(1e-300);
    assert!(
        rel <= tol,
        "{what}: got {got:.17e}, want {want:.17e}, rel {rel:.3e} > {tol:.1e}"
    );
}

/// |got − want| ≤ tol·scale, for quantities whose natural size is `scale`.
pub fn assert_scaled(got: f64, want: f64, tol: f64, scale: f64, what: &str) {
    let err = (got - want).abs();
    assert!(
        err <= tol * scale,
        "{what}: got {got:.17e}, want {want:.17e}, err {err:.3e} > {:.3e}",
        tol * scale
    );
}

/// ∫_a^b f dv by 20-point Gauss-Legendre over 2^k equal panels, doubling k
/// until two refinements agree to `tol` relative. The integrands used here
/// are smooth (polynomial × exponential), so doubling gains many digits per
/// level and the loop terminates within a few rounds.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(20);
    let eval = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let mid = a + (p as f64 + 0.5) * h;
                let s: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| w * f(mid + 0.5 * h * x))
                    .sum();
                0.5 * h * s
            })
            .sum()
    };
    let mut panels = 1;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let next = eval(panels);
        if (next - prev).abs() <= tol * next.abs() {
            return next;
        }
        assert!(panels <= 4096, "quadrature oracle failed to converge");
        prev = next;
    }
}

/// Oracle ⟨v^k e^{α+βv}⟩ over [lo, hi] with the ½∫ dv angular normalization.
pub fn m1_moment_oracle(k: usize, alpha: f64, beta: f64, lo: f64, hi: f64) -> f64 {
    0.5 * integrate(|v| v.powi(k as i32) * (alpha + beta * v).exp(), lo, hi, 1e-13)
}

/// Oracle ⟨v^k e^{α+βv+γv²}⟩ over [lo, hi] with the ½∫ dv normalization.
pub fn m2_moment_oracle(k: usize, alpha: f64, beta: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
    0.5 * integrate(
        |v| v.powi(k as i32) * (alpha + beta * v + gamma * v * v).exp(),
        lo,
        hi,
        1e-13,
    )
}
