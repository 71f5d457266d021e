//! Gaussian-kernel special functions used by the entropic closures:
//! the Dawson integral `Dp(x) = e^{-x²} ∫₀ˣ e^{t²} dt` and the scaled
//! complementary error integral `Dm(x) = e^{x²} ∫ₓ^∞ e^{-t²} dt`, plus their
//! truncated asymptotic expansions.
//!
//! Both satisfy first-order ODEs (`Dp' = 1 - 2x·Dp`, `Dm' = 2x·Dm - 1`) and
//! the asymptotic expansion `1/(2x)·(1 + Σⱼ (±1)ʲ (2j-1)!!/(2x²)ʲ)`.

use thiserror::Error;

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Arguments at or beyond this magnitude are served by the asymptotic series.
pub const X_SWITCH: f64 = 8.0;

/// Largest exponent for which `exp` is finite in f64.
const EXP_OVERFLOW: f64 = 709.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialFnError {
    #[error("asymptotic series requires |x| >= {X_SWITCH}, got {0}")]
    AsymptoticDomain(f64),
    #[error("exp({0}) is not representable in f64")]
    Overflow(f64),
    #[error("series order {0} outside {}..={}", SeriesOrder::MIN, SeriesOrder::MAX)]
    InvalidOrder(usize),
}

/// Term count for the truncated (divergent) asymptotic expansions.
///
/// At least 3 terms are required to recover every moment the M2 closure
/// needs; more than 12 never helps before the series turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOrder(usize);

impl SeriesOrder {
    pub const MIN: usize = 3;
    pub const MAX: usize = 12;

    pub fn new(n: usize) -> Result<Self, SpecialFnError> {
        if (Self::MIN..=Self::MAX).contains(&n) {
            Ok(Self(n))
        } else {
            Err(SpecialFnError::InvalidOrder(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for SeriesOrder {
    fn default() -> Self {
        Self(4)
    }
}

/// Dawson integral `e^{-x²} ∫₀ˣ e^{t²} dt`. Odd, bounded, total on finite x.
///
/// Branches: Maclaurin series on |x| ≤ 2.5, a sampling-series evaluation on
/// 2.5 < |x| < 7 (trapezoidal expansion of the Hilbert transform of the
/// Gaussian, error ~e^{-(π/2h)²}), and the adaptive asymptotic series beyond.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    let val = if ax <= 2.5 {
        dawson_maclaurin(ax)
    } else if ax < 7.0 {
        dawson_sampling(ax)
    } else {
        dawson_asymptotic_adaptive(ax)
    };
    if x < 0.0 {
        -val
    } else {
        val
    }
}

/// Maclaurin series Σ (-2)ⁿ x^{2n+1}/(2n+1)!!; largest term ~e^{x²}·x/(2x²+1)
/// keeps the round-off amplification below ~e^{x²} (≤ 5e2 at x = 2.5).
fn dawson_maclaurin(x: f64) -> f64 {
    let m2x2 = -2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        term *= m2x2 / f64::from(2 * n + 3);
        let next = sum + term;
        if next == sum || n > 100 {
            return next;
        }
        sum = next;
        n += 1;
    }
}

/// Sampling series (1/√π) Σ_{n odd} e^{-(x-nh)²}/n with h = 1/4.
/// Discretization error is e^{-(π/2h)²} ≈ 7e-18; the window |x-nh| ≤ 6.5
/// truncates tails below 5e-19.
fn dawson_sampling(x: f64) -> f64 {
    const H: f64 = 0.25;
    const WINDOW: f64 = 6.5;
    let mut n = {
        let lo = ((x - WINDOW) / H).ceil() as i64;
        if lo % 2 == 0 {
            lo + 1
        } else {
            lo
        }
    };
    let n_hi = ((x + WINDOW) / H).floor() as i64;
    let mut sum = 0.0;
    while n <= n_hi {
        let d = x - (n as f64) * H;
        sum += (-d * d).exp() / (n as f64);
        n += 2;
    }
    sum / SQRT_PI
}

/// Asymptotic series with adaptive truncation: terms are added while they
/// keep shrinking, which at x ≥ 7 reaches ≤ 4e-14 relative well before the
/// divergent tail turns around.
pub(crate) fn dawson_asymptotic_adaptive(x: f64) -> f64 {
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=40u32 {
        let next_term = term * f64::from(2 * j - 1) * inv2x2;
        if next_term.abs() >= term.abs() || next_term.abs() <= f64::EPSILON * sum {
            sum += next_term;
            break;
        }
        term = next_term;
        sum += term;
    }
    sum / (2.0 * x)
}

/// Scaled complementary error integral `Dm(x) = e^{x²} ∫ₓ^∞ e^{-t²} dt`.
///
/// `Dm(0) = √π/2`; decreasing on x ≥ 0; grows like √π e^{x²} for x < 0,
/// which overflows for x ≲ -26.6 (reported as an error).
pub fn erfc_scaled(x: f64) -> Result<f64, SpecialFnError> {
    if x >= 0.0 {
        Ok(erfc_scaled_nonneg(x))
    } else {
        let x2 = x * x;
        if x2 > EXP_OVERFLOW {
            return Err(SpecialFnError::Overflow(x2));
        }
        // Reflection Dm(-x) = √π e^{x²} - Dm(x); no cancellation since the
        // subtracted part is at most half of the total for x ≤ 0.
        Ok(SQRT_PI * x2.exp() - erfc_scaled_nonneg(-x))
    }
}

/// Dm on x ≥ 0, total: Gauss-integral series below 1.5, Laplace continued
/// fraction up to `X_SWITCH`, adaptive asymptotic series beyond.
pub(crate) fn erfc_scaled_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1.5 {
        // Dm = e^{x²} (√π/2 - ∫₀ˣ e^{-t²} dt); the subtraction loses at most
        // a factor ~30 at x = 1.5 ⇒ ≤ 1e-14 relative.
        (x * x).exp() * (SQRT_PI / 2.0 - gauss_integral_series(x))
    } else if x < X_SWITCH {
        erfc_scaled_cf(x)
    } else {
        erfc_scaled_asymptotic_adaptive(x)
    }
}

/// ∫₀ˣ e^{-t²} dt = Σ (-1)ⁿ x^{2n+1}/(n!(2n+1)) for small x.
fn gauss_integral_series(x: f64) -> f64 {
    let mx2 = -x * x;
    let mut u = 1.0; // (-x²)ⁿ/n!
    let mut sum = x;
    for n in 1..=60u32 {
        u *= mx2 / f64::from(n);
        let term = u * x / f64::from(2 * n + 1);
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
    }
    sum
}

/// Laplace continued fraction Dm(x) = (1/2)/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))),
/// evaluated by the modified Lentz algorithm. Converges to round-off in well
/// under 100 iterations for x ≥ 1.5.
fn erfc_scaled_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..=200u32 {
        let a = if k == 1 { 0.5 } else { f64::from(k - 1) * 0.5 };
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    f
}

/// Truncated asymptotic series (1/2x)(1 + Σ_{j=1..n} (2j-1)!!/(2x²)ʲ) for the
/// Dawson integral. Valid only for |x| ≥ `X_SWITCH`.
pub fn dawson_asymptotic(x: f64, order: SeriesOrder) -> Result<f64, SpecialFnError> {
    if x.abs() < X_SWITCH {
        return Err(SpecialFnError::AsymptoticDomain(x));
    }
    Ok(asymptotic_sum(x, order.get(), false) / (2.0 * x))
}

/// Truncated asymptotic series (1/2x)(1 + Σ (-1)ʲ(2j-1)!!/(2x²)ʲ) plus the
/// reflection term √π e^{x²} active for x ≤ 0. Valid only for |x| ≥ `X_SWITCH`.
pub fn erfc_scaled_asymptotic(x: f64, order: SeriesOrder) -> Result<f64, SpecialFnError> {
    if x.abs() < X_SWITCH {
        return Err(SpecialFnError::AsymptoticDomain(x));
    }
    let series = asymptotic_sum(x, order.get(), true) / (2.0 * x);
    if x > 0.0 {
        Ok(series)
    } else {
        let x2 = x * x;
        if x2 > EXP_OVERFLOW {
            return Err(SpecialFnError::Overflow(x2));
        }
        Ok(SQRT_PI * x2.exp() + series)
    }
}

fn asymptotic_sum(x: f64, n: usize, alternating: bool) -> f64 {
    let r = 1.0 / (2.0 * x * x);
    let r = if alternating { -r } else { r };
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=n {
        term *= (2 * j - 1) as f64 * r;
        sum += term;
    }
    sum
}

/// Adaptive alternating asymptotic series for Dm at large positive x, used by
/// closure internals where the default 4-term truncation is too coarse.
pub(crate) fn erfc_scaled_asymptotic_adaptive(x: f64) -> f64 {
    let mr = -1.0 / (2.0 * x * x);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for j in 1..=40u32 {
        let next_term = term * f64::from(2 * j - 1) * mr;
        if next_term.abs() >= term.abs() || next_term.abs() <= f64::EPSILON * sum.abs() {
            sum += next_term;
            break;
        }
        term = next_term;
        sum += term;
    }
    sum / (2.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // mpmath (50 digits): Dp(x) = exp(-x²)·quad(exp(t²), [0,x]).
    const DAWSON_REFS: [(f64, f64); 18] = [
        (0.1, 0.099335992397852867),
        (0.5, 0.42443638350202230),
        (1.0, 0.53807950691276842),
        (2.0, 0.30134038892379197),
        (2.4, 0.23531305566384259),
        (2.5, 0.22308372216743548),
        (2.6, 0.21216512424249899),
        (3.0, 0.17827103061055829),
        (5.0, 0.10213407442427684),
        (6.9, 0.073250120258635384),
        (7.0, 0.072180974658236292),
        (7.1, 0.071142926911234731),
        (8.0, 0.063000198707553388),
        (10.0, 0.050253847187598528),
        (15.0, 0.033407906808639226),
        (30.0, 0.016675941401059176),
        (100.0, 0.0050002500375093783),
        (1e4, 5.0000000250000004e-5),
    ];

    // mpmath (50 digits): Dm(x) = (√π/2)·erfcx(x).
    const ERFC_SCALED_REFS: [(f64, f64); 21] = [
        (0.0, 0.88622692545275801),
        (0.1, 0.79446431315870378),
        (0.5, 0.54564136076504704),
        (1.0, 0.37893607807065605),
        (1.4, 0.30020364657358250),
        (1.5, 0.28499765489475458),
        (1.6, 0.27114377967334752),
        (2.0, 0.22633852499058729),
        (3.0, 0.15863563986398754),
        (5.0, 0.098109430731538791),
        (7.0, 0.070720956799088256),
        (8.0, 0.062022738669506982),
        (10.0, 0.049753659391223487),
        (26.0, 0.019216576734908366),
        (100.0, 0.0049997500374906283),
        (-0.5, 1.7302344337037002),
        (-1.0, 4.4390930166280660),
        (-2.0, 96.546362753573047),
        (-5.0, 127625361114.51552),
        (-10.0, 4.7645635796971384e43),
        (-25.0, 4.8153307839895175e271),
    ];

    fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
        let rel = ((got - want) / want).abs();
        assert!(
            rel <= tol,
            "{what}: got {got:.17e}, want {want:.17e}, rel err {rel:.2e} > {tol:.1e}"
        );
    }

    #[test]
    fn dawson_matches_reference_values() {
        for &(x, want) in &DAWSON_REFS {
            assert_rel(dawson(x), want, 1e-13, &format!("dawson({x})"));
        }
    }

    #[test]
    fn dawson_is_odd() {
        for &(x, _) in &DAWSON_REFS {
            assert_eq!(dawson(-x), -dawson(x), "oddness at x={x}");
        }
        assert_eq!(dawson(0.0), 0.0);
    }

    #[test]
    fn erfc_scaled_matches_reference_values() {
        for &(x, want) in &ERFC_SCALED_REFS {
            assert_rel(
                erfc_scaled(x).unwrap(),
                want,
                1e-13,
                &format!("erfc_scaled({x})"),
            );
        }
    }

    #[test]
    fn erfc_scaled_overflows_far_negative() {
        assert!(matches!(
            erfc_scaled(-27.0),
            Err(SpecialFnError::Overflow(_))
        ));
    }

    #[test]
    fn branch_seams_are_continuous() {
        // Across each branch switch the jump must be the true variation
        // f'(x)·2h, not a discontinuity; residual tolerance is a few ulps of
        // the function value.
        for x in [2.5, 7.0] {
            let h = 1e-9;
            let below = dawson(x - h);
            let above = dawson(x + h);
            let slope = 1.0 - 2.0 * x * dawson(x);
            let jump = above - below - slope * 2.0 * h;
            assert!(jump.abs() < 1e-13, "Dp seam at {x}: residual {jump:.2e}");
        }
        let x = 1.5;
        let h = 1e-9;
        let below = erfc_scaled(x - h).unwrap();
        let above = erfc_scaled(x + h).unwrap();
        let slope = 2.0 * x * erfc_scaled(x).unwrap() - 1.0;
        let jump = above - below - slope * 2.0 * h;
        assert!(jump.abs() < 1e-13, "Dm seam: residual {jump:.2e}");
    }

    #[test]
    fn asymptotic_ops_enforce_domain() {
        let n = SeriesOrder::default();
        assert!(matches!(
            dawson_asymptotic(7.9, n),
            Err(SpecialFnError::AsymptoticDomain(_))
        ));
        assert!(matches!(
            erfc_scaled_asymptotic(-7.9, n),
            Err(SpecialFnError::AsymptoticDomain(_))
        ));
        assert!(dawson_asymptotic(8.0, n).is_ok());
    }

    #[test]
    fn asymptotic_series_value_x10_n3() {
        // (1/20)(1 + 1/200 + 3/40000 + 15/8e6) explicitly.
        let n3 = SeriesOrder::new(3).unwrap();
        let want = (1.0 + 1.0 / 200.0 + 3.0 / 40000.0 + 15.0 / 8e6) / 20.0;
        assert_eq!(dawson_asymptotic(10.0, n3).unwrap(), want);
        // Alternating counterpart.
        let want = (1.0 - 1.0 / 200.0 + 3.0 / 40000.0 - 15.0 / 8e6) / 20.0;
        assert_eq!(erfc_scaled_asymptotic(10.0, n3).unwrap(), want);
    }

    #[test]
    fn asymptotic_matches_direct_in_band() {
        let n3 = SeriesOrder::new(3).unwrap();
        let n4 = SeriesOrder::new(4).unwrap();
        assert_rel(
            dawson_asymptotic(10.0, n3).unwrap(),
            dawson(10.0),
            1e-7,
            "dawson asymptotic x=10",
        );
        assert_rel(
            dawson_asymptotic(30.0, n4).unwrap(),
            dawson(30.0),
            1e-10,
            "dawson asymptotic x=30",
        );
        assert_rel(
            erfc_scaled_asymptotic(10.0, n3).unwrap(),
            erfc_scaled(10.0).unwrap(),
            1e-7,
            "erfc_scaled asymptotic x=10",
        );
    }

    #[test]
    fn negative_branch_of_asymptotic_erfc_scaled() {
        let n3 = SeriesOrder::new(3).unwrap();
        let got = erfc_scaled_asymptotic(-10.0, n3).unwrap();
        let series = (1.0 - 1.0 / 200.0 + 3.0 / 40000.0 - 15.0 / 8e6) / (-20.0);
        let want = SQRT_PI * (100f64).exp() + series;
        assert_rel(got, want, 1e-15, "erfc_scaled_asymptotic(-10)");
    }

    #[test]
    fn series_order_bounds() {
        assert!(SeriesOrder::new(2).is_err());
        assert!(SeriesOrder::new(13).is_err());
        assert_eq!(SeriesOrder::default().get(), 4);
    }
}
