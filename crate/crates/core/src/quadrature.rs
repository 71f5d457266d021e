//! Velocity-space quadrature for moments ⟨g⟩ = ½∫₋₁¹ g(v) dv.
//!
//! Upwind fluxes integrate over the half-intervals v ≷ 0 separately, so the
//! rule is a *double* Gauss-Legendre quadrature: an (nv/2)-point rule mapped
//! onto each of [-1,0] and [0,1]. Half-range moments of polynomials are then
//! exact and smooth integrands converge spectrally per half; a single
//! full-range rule would be limited to O(nv⁻²) on the kinked upwind
//! integrands. Nodes are mirrored so ⟨v^odd⟩ vanishes exactly and no node
//! sits at v = 0.

/// Quadrature nodes and weights with the convention ⟨g⟩ = ½ Σ w_k g(v_k),
/// so Σ w_k = 2. Nodes are sorted ascending; the first nv/2 lie in (-1,0).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl VelocityQuadrature {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ⟨g⟩ for node values g_k.
    pub fn moment(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        0.5 * self
            .weights
            .iter()
            .zip(values)
            .map(|(w, g)| w * g)
            .sum::<f64>()
    }

    /// ⟨v g⟩ for node values g_k.
    pub fn moment_v(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        0.5 * self
            .weights
            .iter()
            .zip(&self.nodes)
            .zip(values)
            .map(|((w, v), g)| w * v * g)
            .sum::<f64>()
    }

    /// ⟨v² g⟩ for node values g_k.
    pub fn moment_v2(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        0.5 * self
            .weights
            .iter()
            .zip(&self.nodes)
            .zip(values)
            .map(|((w, v), g)| w * v * v * g)
            .sum::<f64>()
    }

    /// ⟨vᵏ f(v)⟩ of a function evaluated on the nodes.
    pub fn moment_fn(&self, k: u32, f: impl Fn(f64) -> f64) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&self.nodes)
            .map(|(w, &v)| w * v.powi(k as i32) * f(v))
            .sum::<f64>()
    }
}

/// Build the double Gauss-Legendre velocity quadrature with `nv` total nodes.
///
/// `nv` must be even and at least 4 (nv/2 points per half-interval).
pub fn make_velocity_quadrature(nv: usize) -> VelocityQuadrature {
    assert!(nv >= 4 && nv % 2 == 0, "nv must be even and >= 4, got {nv}");
    let half = nv / 2;
    let (xs, ws) = gauss_legendre(half);
    let mut nodes = Vec::with_capacity(nv);
    let mut weights = Vec::with_capacity(nv);
    // Map the [-1,1] rule onto [0,1]: v = (x+1)/2, weight w/2; mirror onto
    // [-1,0] by reflection so the full set is exactly symmetric.
    for i in (0..half).rev() {
        nodes.push(-(xs[i] + 1.0) / 2.0);
        weights.push(ws[i] / 2.0);
    }
    for i in 0..half {
        nodes.push((xs[i] + 1.0) / 2.0);
        weights.push(ws[i] / 2.0);
    }
    VelocityQuadrature { nodes, weights }
}

/// Gauss-Legendre nodes (ascending) and weights on [-1,1] by Newton iteration
/// on Pₙ with the Chebyshev-based initial guess; w = 2/((1-x²) Pₙ'²).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        // Newton converges quadratically from the Chebyshev guess; 100 is a
        // safety bound never reached in practice.
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // cos ordering above is descending; store ascending.
        xs[i] = -x;
        ws[i] = w;
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// (Pₙ(x), Pₙ'(x)) via the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_normalize_and_symmetrize() {
        for nv in [4, 8, 50, 128] {
            let q = make_velocity_quadrature(nv);
            let ones = vec![1.0; nv];
            assert!((q.moment(&ones) - 1.0).abs() < 1e-15, "⟨1⟩ at nv={nv}");
            assert!(q.moment_v(&ones).abs() < 1e-16, "⟨v⟩ at nv={nv}");
            for k in 0..nv / 2 {
                assert_eq!(q.nodes()[k], -q.nodes()[nv - 1 - k]);
                assert_eq!(q.weights()[k], q.weights()[nv - 1 - k]);
            }
            assert!(q.nodes().iter().all(|&v| v != 0.0 && v.abs() < 1.0));
        }
    }

    #[test]
    fn polynomial_half_moments_are_exact() {
        // nv/2-point Gauss rules are exact through degree nv-1 on each half.
        let q = make_velocity_quadrature(8);
        // ⟨vᵏ 1_{v>0}⟩ = 1/(2(k+1)).
        for k in 0..7u32 {
            let got: f64 = 0.5
                * q.weights()
                    .iter()
                    .zip(q.nodes())
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(w, &v)| w * v.powi(k as i32))
                    .sum::<f64>();
            let want = 0.5 / f64::from(k + 1);
            assert!(
                (got - want).abs() < 1e-15,
                "half moment k={k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn second_moment_value() {
        let q = make_velocity_quadrature(50);
        let ones = vec![1.0; 50];
        assert!((q.moment_v2(&ones) - 1.0 / 3.0).abs() < 1e-14);
        assert!((q.moment_fn(1, |_| 1.0)).abs() < 1e-16);
    }

    #[test]
    fn exponential_half_moment_accuracy() {
        // ⟨v 1_{v>0} e^{v}⟩ = (1/2)∫₀¹ v eᵛ dv = 1/2 exactly.
        let q = make_velocity_quadrature(50);
        let got: f64 = 0.5
            * q.weights()
                .iter()
                .zip(q.nodes())
                .filter(|(_, &v)| v > 0.0)
                .map(|(w, &v)| w * v * v.exp())
                .sum::<f64>();
        assert!((got - 0.5).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn gauss_legendre_small_rules_match_tabulated() {
        let (xs, ws) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((xs[0] + r).abs() < 1e-15 && (xs[1] - r).abs() < 1e-15);
        assert!((ws[0] - 1.0).abs() < 1e-15 && (ws[1] - 1.0).abs() < 1e-15);
        let (xs, ws) = gauss_legendre(3);
        assert!(xs[1].abs() < 1e-15);
        assert!((xs[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((ws[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((ws[0] - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "nv must be even")]
    fn odd_nv_rejected() {
        make_velocity_quadrature(5);
    }
}
