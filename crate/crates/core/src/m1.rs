//! Boltzmann-entropy M1 closure on v ∈ [-1,1]: ansatz f̂(v) = e^{α+βv}.
//!
//! The moment pair (ρ, j) determines (α, β) through the Langevin-type
//! function z(β) = coth β − 1/β = j/ρ; half-moments, the closure flux
//! q = ⟨v²f̂⟩, and the Jacobian ∂Λ/∂U then follow in closed form. Every
//! moment formula is evaluated either by a positive-term series or by a
//! sign-grouped developed form, so results stay relative-accurate from
//! β = 0 through the saturation regime |β| ≫ 1.

use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

/// Moments (ρ, j) = ⟨(1, v) f⟩ of a distribution on v ∈ [-1,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVectorM1 {
    pub rho: f64,
    pub j: f64,
}

impl MomentVectorM1 {
    pub fn new(rho: f64, j: f64) -> Self {
        Self { rho, j }
    }

    /// Normalized flux u = j/ρ; realizability requires |u| < 1.
    pub fn u(&self) -> f64 {
        self.j / self.rho
    }
}

/// Entropic variables Λ = (α, β) of the ansatz f̂(v) = e^{α+βv}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropicVarsM1 {
    pub alpha: f64,
    pub beta: f64,
}

/// Velocity half-interval selector for half-moments ⟨v^k f 1_{v≷0}⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// Cutoffs for degenerate moment states.
///
/// `rho_eps` is the vacuum cutoff below which the ansatz is not formed.
/// `beta_eps` bounds the β≈0 band treated as exactly isotropic by
/// classification helpers; the moment formulas themselves are series
/// evaluations that stay accurate through β = 0 and never switch on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureThresholds {
    pub beta_eps: f64,
    pub rho_eps: f64,
}

impl Default for ClosureThresholds {
    fn default() -> Self {
        Self {
            beta_eps: 1e-4,
            rho_eps: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosureError {
    #[error("moment vector (rho={rho}, j={j}) is not realizable")]
    NotRealizable { rho: f64, j: f64 },
    #[error("density {rho} is below the vacuum cutoff")]
    Vacuum { rho: f64 },
    #[error("normalized flux u={u} is outside the open interval (-1, 1)")]
    Saturated { u: f64 },
    #[error("moment inversion for u={u} did not converge in {iterations} iterations")]
    NoConvergence { u: f64, iterations: usize },
    #[error("moment Jacobian is singular (normalized determinant {det})")]
    SingularJacobian { det: f64 },
}

/// |u| is clamped to this just inside the realizable set; round-off in long
/// runs may graze the boundary and the clamp keeps them alive.
pub const SATURATION_LIMIT: f64 = 1.0 - 1e-9;

static SATURATION_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// Number of times moment states had |u| clamped to [`SATURATION_LIMIT`].
pub fn saturation_clamp_count() -> u64 {
    SATURATION_CLAMPS.load(Ordering::Relaxed)
}

pub fn reset_saturation_clamps() {
    SATURATION_CLAMPS.store(0, Ordering::Relaxed);
}

/// True iff some nonnegative distribution has these moments:
/// (ρ > 0 and |j| < ρ) or U = 0.
pub fn is_realizable_m1(u: &MomentVectorM1) -> bool {
    (u.rho > 0.0 && u.j.abs() < u.rho) || (u.rho == 0.0 && u.j == 0.0)
}

// Series seams. z and its derivative lose ~1.7 digits to cancellation just
// above Z_SERIES_SWITCH (coth β and 1/β agree to O(β)); the developed
// half-moment forms lose ~1 digit just above BETA_FORM_SWITCH for k ≤ 4.
const Z_SERIES_SWITCH: f64 = 0.25;
const BETA_FORM_SWITCH: f64 = 3.0;
const MAX_NEWTON_ITERS: usize = 100;

/// z(β) = coth β − 1/β = ⟨v e^{βv}⟩ / ⟨e^{βv}⟩, odd, increasing, (−1,1).
pub fn z_of_beta(beta: f64) -> f64 {
    let b2 = beta * beta;
    if beta.abs() < Z_SERIES_SWITCH {
        // Taylor to β¹³; next term ~2e-17 relative at the switch.
        beta * (1.0 / 3.0
            + b2 * (-1.0 / 45.0
                + b2 * (2.0 / 945.0
                    + b2 * (-1.0 / 4725.0
                        + b2 * (2.0 / 93555.0
                            + b2 * (-1382.0 / 638512875.0 + b2 * (4.0 / 18243225.0)))))))
    } else {
        1.0 / beta.tanh() - 1.0 / beta
    }
}

/// z'(β) = 1/β² − 1/sinh²β, even, positive, z'(0) = 1/3.
fn z_prime(beta: f64) -> f64 {
    let b = beta.abs();
    if b < Z_SERIES_SWITCH {
        let b2 = beta * beta;
        1.0 / 3.0
            + b2 * (-1.0 / 15.0
                + b2 * (2.0 / 189.0 + b2 * (-1.0 / 675.0 + b2 * (6.0 / 31185.0))))
    } else if b > 700.0 {
        // sinh overflows; its reciprocal is below the underflow threshold.
        1.0 / (beta * beta)
    } else {
        let s = 1.0 / beta.sinh();
        1.0 / (beta * beta) - s * s
    }
}

/// Invert z(β) = u by a bisection-safeguarded Newton iteration.
///
/// Stops when |z(β) − u| ≤ max(tol, 2 eps |u|) or the bracket collapses to
/// one ulp (pass tol = 0 to force the latter, machine-limited, convergence).
pub fn beta_of_u(u: f64, tol: f64) -> Result<f64, ClosureError> {
    if u.abs() >= 1.0 {
        return Err(ClosureError::Saturated { u });
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let sign = u.signum();
    let ua = u.abs();
    let tol_eff = tol.max(2.0 * f64::EPSILON * ua);

    // z is increasing with z(0) = 0, so [0, hi] brackets once z(hi) ≥ ua;
    // z(β) ≈ 1 − 1/β makes geometric growth reach any ua < 1.
    let mut lo = 0.0f64;
    let mut hi = (3.0 * ua).max(1.0);
    while z_of_beta(hi) < ua {
        hi *= 2.0;
    }
    // Interpolates both ends: z ≈ β/3 near 0 and β ≈ 1/(1−u) near saturation.
    let mut beta = (3.0 * ua / (1.0 - ua * ua)).clamp(lo, hi);

    for iter in 0..MAX_NEWTON_ITERS {
        let f = z_of_beta(beta) - ua;
        if f.abs() <= tol_eff {
            return Ok(sign * beta);
        }
        if f < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - f / z_prime(beta);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == beta {
            // Bracket collapsed to one ulp: converged to evaluation noise.
            return Ok(sign * beta);
        }
        beta = next;
        let _ = iter;
    }
    Err(ClosureError::NoConvergence {
        u,
        iterations: MAX_NEWTON_ITERS,
    })
}

/// ln(sinh β / β), even, continuous through β = 0.
pub(crate) fn ln_sinhc(beta: f64) -> f64 {
    let b = beta.abs();
    if b == 0.0 {
        0.0
    } else if b < 0.5 {
        (b.sinh() / b).ln()
    } else {
        // sinh β = e^β (1 − e^{−2β})/2 avoids overflow up to huge β.
        b - (2.0 * b).ln() + (-(-2.0 * b).exp()).ln_1p()
    }
}

/// Entropic variables (α, β) whose ansatz reproduces U.
///
/// α = ln ρ − ln(sinh β/β) makes ⟨f̂⟩ = ρ exact; β inverts z to machine
/// precision so ⟨v f̂⟩ matches j to ~1e-15 relative. |u| beyond
/// [`SATURATION_LIMIT`] is clamped (counted, see [`saturation_clamp_count`]).
pub fn entropic_from_moments_m1(
    u: &MomentVectorM1,
    th: &ClosureThresholds,
) -> Result<EntropicVarsM1, ClosureError> {
    if !is_realizable_m1(u) {
        return Err(ClosureError::NotRealizable { rho: u.rho, j: u.j });
    }
    if u.rho < th.rho_eps {
        return Err(ClosureError::Vacuum { rho: u.rho });
    }
    let beta = beta_of_u(clamped_u(u.u()), 0.0)?;
    Ok(EntropicVarsM1 {
        alpha: u.rho.ln() - ln_sinhc(beta),
        beta,
    })
}

fn clamped_u(u: f64) -> f64 {
    if u.abs() > SATURATION_LIMIT {
        SATURATION_CLAMPS.fetch_add(1, Ordering::Relaxed);
        SATURATION_LIMIT.copysign(u)
    } else {
        u
    }
}

/// Half-moment ⟨v^k f̂ 1_{v≷0}⟩ of the ansatz, k ≤ 4.
///
/// |β| ≥ 3 uses the developed integrated-by-parts forms with the exponential
/// factored per endpoint; below that they lose digits to cancellation and a
/// positive-term series takes over (exact through β = 0, where the value is
/// e^α/(2(k+1)) up to sign).
pub fn half_moment_m1(k: usize, lam: &EntropicVarsM1, side: Side) -> f64 {
    assert!(k <= 4, "half_moment_m1 supports k in 0..=4, got {k}");
    match side {
        Side::Positive => half_moment_pos(k, lam.alpha, lam.beta),
        // Parity: ⟨v^k f 1_{v<0}⟩(α,β) = (−1)^k ⟨v^k f 1_{v>0}⟩(α,−β).
        Side::Negative => parity_sign(k) * half_moment_pos(k, lam.alpha, -lam.beta),
    }
}

fn parity_sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn half_moment_pos(k: usize, alpha: f64, beta: f64) -> f64 {
    if beta.abs() < BETA_FORM_SWITCH {
        half_series_pos(k, alpha, beta)
    } else {
        half_developed_pos(k, alpha, beta)
    }
}

/// Generic-order half-moment ⟨v^k e^{α+βv} 1_{v≷0}⟩, any k.
///
/// k ≤ 4 delegates to the public branches (valid to arbitrarily large |β|
/// with grouped exponents); higher orders use the positive-term series,
/// which the small-γ expansion of the M2 moments needs for k ≤ ~50, and
/// beyond the series exponent bound the generic developed form (safe there:
/// its alternating endpoint polynomial decays once |β| ≥ 4k).
pub(crate) fn exp_half_moment(k: usize, alpha: f64, beta: f64, side: Side) -> f64 {
    let pos = if k <= 4 {
        half_moment_pos
    } else if beta.abs() < SERIES_BETA_LIMIT {
        half_series_pos
    } else {
        half_developed_general
    };
    match side {
        Side::Positive => pos(k, alpha, beta),
        Side::Negative => parity_sign(k) * pos(k, alpha, -beta),
    }
}

const MAX_SERIES_TERMS: usize = 500;
const SERIES_BETA_LIMIT: f64 = 650.0;

fn half_series_pos(k: usize, alpha: f64, beta: f64) -> f64 {
    assert!(
        beta.abs() < SERIES_BETA_LIMIT,
        "series half-moment of order {k} would overflow at beta={beta}"
    );
    let kf = k as f64;
    if beta >= 0.0 {
        // (1/2)∫₀¹ v^k e^{α+βv} dv = (e^α/2) Σ_m β^m / (m! (k+m+1)).
        let mut term = 1.0 / (kf + 1.0);
        let mut sum = term;
        for m in 0..MAX_SERIES_TERMS {
            let mf = m as f64;
            term *= beta * (kf + mf + 1.0) / ((mf + 1.0) * (kf + mf + 2.0));
            sum += term;
            if term < f64::EPSILON * sum && mf >= beta {
                break;
            }
        }
        0.5 * alpha.exp() * sum
    } else {
        // Kummer-transformed series, positive terms for decaying exponents:
        // (1/2)∫₀¹ v^k e^{α−bv} dv = (e^{α−b}/2) Σ_n b^n k!/(k+n+1)!.
        let b = -beta;
        let mut term = 1.0 / (kf + 1.0);
        let mut sum = term;
        for n in 0..MAX_SERIES_TERMS {
            let nf = n as f64;
            term *= b / (kf + nf + 2.0);
            sum += term;
            if term < f64::EPSILON * sum {
                break;
            }
        }
        0.5 * (alpha + beta).exp() * sum
    }
}

/// Developed forms for k ≤ 4, |β| ≥ 3: (1/2)[e^{α+β} P_k(1/β) − (−1)^k k! e^α/β^{k+1}]
/// with P_k(x) = Σ_{i≤k} (−1)^i (k!/(k−i)!) x^{i+1}.
fn half_developed_pos(k: usize, alpha: f64, beta: f64) -> f64 {
    let x = 1.0 / beta;
    let p = match k {
        0 => x,
        1 => x * (1.0 - x),
        2 => x * (1.0 + x * (-2.0 + 2.0 * x)),
        3 => x * (1.0 + x * (-3.0 + x * (6.0 - 6.0 * x))),
        4 => x * (1.0 + x * (-4.0 + x * (12.0 + x * (-24.0 + 24.0 * x)))),
        _ => unreachable!("developed forms exist for k <= 4"),
    };
    const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
    let endpoint = (alpha + beta).exp() * p;
    let origin = parity_sign(k) * FACT[k] * alpha.exp() * x.powi(k as i32 + 1);
    0.5 * (endpoint - origin)
}

/// Developed form for arbitrary order, iteratively built P_k; requires
/// |β| ≥ 4k so the alternating polynomial terms decay.
fn half_developed_general(k: usize, alpha: f64, beta: f64) -> f64 {
    debug_assert!(beta.abs() >= 4.0 * k as f64);
    let x = 1.0 / beta;
    let mut term = x;
    let mut poly = x;
    for i in 0..k {
        term *= -((k - i) as f64) * x;
        poly += term;
    }
    // After the loop term = (−1)^k k! x^{k+1}, the origin contribution.
    0.5 * ((alpha + beta).exp() * poly - alpha.exp() * term)
}

/// Full moment ⟨v^k e^{α+βv}⟩, any k.
///
/// For |β| < 3 a parity-split series (only terms with k+m even survive)
/// keeps odd moments relative-accurate where the two half-moments would
/// cancel; above, the halves no longer cancel and their sum is used.
pub(crate) fn exp_full_moment(k: usize, alpha: f64, beta: f64) -> f64 {
    if beta.abs() < BETA_FORM_SWITCH {
        let kf = k as f64;
        let b2 = beta * beta;
        let m0 = k % 2;
        let mut term = if m0 == 0 {
            1.0 / (kf + 1.0)
        } else {
            beta / (kf + 2.0)
        };
        let mut sum = term;
        let mut m = m0 as f64;
        for _ in 0..MAX_SERIES_TERMS {
            term *= b2 * (kf + m + 1.0) / ((m + 1.0) * (m + 2.0) * (kf + m + 3.0));
            sum += term;
            m += 2.0;
            if term.abs() < f64::EPSILON * sum.abs().max(1e-300) {
                break;
            }
        }
        alpha.exp() * sum
    } else {
        exp_half_moment(k, alpha, beta, Side::Positive)
            + exp_half_moment(k, alpha, beta, Side::Negative)
    }
}

/// Normalized closure flux r(β) = q/ρ = 1 − 2z(β)/β, with r(0) = 1/3.
fn r_of_beta(beta: f64) -> f64 {
    let b2 = beta * beta;
    if beta.abs() < Z_SERIES_SWITCH {
        1.0 / 3.0
            + b2 * (2.0 / 45.0
                + b2 * (-4.0 / 945.0
                    + b2 * (2.0 / 4725.0
                        + b2 * (-4.0 / 93555.0 + b2 * (2764.0 / 638512875.0)))))
    } else {
        1.0 - 2.0 * z_of_beta(beta) / beta
    }
}

/// Closure flux q = ⟨v² f̂⟩ = ρ (1 − 2u/β̂) with β̂ inverting z(β̂) = u.
///
/// Equilibrium limit q → ρ/3 as u → 0; vacuum (ρ below the default cutoff)
/// yields 0. Satisfies u² < q/ρ < 1 on the open realizable set.
pub fn closure_q(u: &MomentVectorM1) -> Result<f64, ClosureError> {
    if !is_realizable_m1(u) {
        return Err(ClosureError::NotRealizable { rho: u.rho, j: u.j });
    }
    if u.rho < ClosureThresholds::default().rho_eps {
        return Ok(0.0);
    }
    let beta = beta_of_u(clamped_u(u.u()), 0.0)?;
    Ok(u.rho * r_of_beta(beta))
}

/// Jacobian ∂Λ/∂U = ⟨m⊗m f̂⟩⁻¹ = (ρ⁻¹/(r−u²)) [[r, −u], [−u, 1]] with
/// r = q/ρ; equilibrium limit [[1/ρ, 0], [0, 3/ρ]].
pub fn jacobian_lambda_m1(u: &MomentVectorM1) -> Result<[[f64; 2]; 2], ClosureError> {
    if !is_realizable_m1(u) {
        return Err(ClosureError::NotRealizable { rho: u.rho, j: u.j });
    }
    if u.rho < ClosureThresholds::default().rho_eps {
        return Err(ClosureError::Vacuum { rho: u.rho });
    }
    let un = clamped_u(u.u());
    let beta = beta_of_u(un, 0.0)?;
    let r = r_of_beta(beta);
    // det is the normalized velocity variance of the ansatz, positive on the
    // open realizable set and vanishing only toward saturation.
    let det = r - un * un;
    if det <= 1e-14 {
        return Err(ClosureError::SingularJacobian { det });
    }
    let s = 1.0 / (u.rho * det);
    Ok([[s * r, -s * un], [-s * un, s]])
}
