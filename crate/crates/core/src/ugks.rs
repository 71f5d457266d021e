//! Reference discrete-velocity solver for the scaled linear kinetic equation
//!
//!   ∂t f + (v/η) ∂x f = ν (ρ − f),   ν = σ/(εη),   ρ = ⟨f⟩,
//!
//! as a finite-volume scheme whose interface fluxes integrate the exact
//! characteristic solution of the relaxation equation over one time step.
//! Each flux blends a transported part (upwind cell reconstruction, weights
//! `A`, `B`) with a scattered part (interface density and its half-cell
//! gradients, weights `C`, `D`); the blend adapts to the local collisionality
//! w = −νΔt, which keeps one scheme uniformly accurate from free transport
//! (ε → ∞, pure second-order upwinding) to the diffusion regime (ε = η → 0,
//! where the density flux collapses to −(1/3σ) ∂x ρ). The collision term is
//! implicit: the density updates first from conservative macro fluxes, then
//! the distribution relaxes toward it.

use thiserror::Error;

use crate::m1::Side;
use crate::quadrature::VelocityQuadrature;

/// |w| below which the interface coefficients switch to Maclaurin sums.
pub const W_SERIES_SWITCH: f64 = 0.5;

/// Density floor below which a step reports an instability.
pub const INSTABILITY_FLOOR: f64 = -1e-12;

/// Default CFL safety factor for [`stable_dt`].
pub const DEFAULT_CFL_SAFETY: f64 = 0.9;

/// Uniform grid of `nx` cells on [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    nx: usize,
    dx: f64,
}

impl SpatialGrid {
    /// Uniform grid with `nx ≥ 2` cells, `dx = 1/nx`.
    pub fn unit(nx: usize) -> Self {
        assert!(nx >= 2, "need at least two cells, got {nx}");
        SpatialGrid { nx, dx: 1.0 / nx as f64 }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Left edge x_{i-1/2} of cell `i`.
    pub fn cell_left(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Center x_i of cell `i`.
    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }
}

/// Scaling parameters and the per-cell opacity profile.
///
/// `eta` is the velocity-scale ratio, `epsilon` the Knudsen number; the
/// collision rate in cell `i` is ν_i = σ_i/(εη).
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeParams {
    pub eta: f64,
    pub epsilon: f64,
    sigma: Vec<f64>,
}

impl RegimeParams {
    /// Constant opacity `sigma` in every one of `nx` cells.
    pub fn uniform(eta: f64, epsilon: f64, sigma: f64, nx: usize) -> Self {
        Self::with_profile(eta, epsilon, vec![sigma; nx])
    }

    /// Per-cell opacity profile.
    pub fn with_profile(eta: f64, epsilon: f64, sigma: Vec<f64>) -> Self {
        assert!(eta > 0.0 && epsilon > 0.0, "eta and epsilon must be positive");
        assert!(!sigma.is_empty() && sigma.iter().all(|&s| s > 0.0), "opacities must be positive");
        RegimeParams { eta, epsilon, sigma }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Collision rate ν_i = σ_i/(εη) of cell `i`.
    pub fn nu(&self, i: usize) -> f64 {
        self.sigma[i] / (self.epsilon * self.eta)
    }

    /// Interface opacity: arithmetic mean of the adjacent cells.
    pub fn sigma_between(&self, left: usize, right: usize) -> f64 {
        0.5 * (self.sigma[left] + self.sigma[right])
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Interface flux weights for one time step at one interface.
///
/// With w = −νΔt and s = (e^w−1)/w:
/// A = s/η weights the upwind reconstruction, B = (ε/ση)(e^w − s) its slope,
/// C = (1−s)/η the interface density, D = (ε/ση)(2s − 1 − e^w) its half-cell
/// gradients. Limits: ε = η → 0 gives A,B → 0, C → 1/(εη)·ε = 1/η with
/// εC → 1 and D → −1/σ (diffusion); ε → ∞ gives A → 1/η, B → −Δt/(2η²),
/// C,D → 0 (free transport).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Interface flux weights at collisionality w = −νΔt, ν = σ_iface/(εη).
///
/// The B and D parentheses vanish to first and second order in w, so for
/// |w| < [`W_SERIES_SWITCH`] all four are accumulated as cancellation-free
/// Maclaurin sums sharing the power ladder p_k = w^k/(k+1)!:
/// A·η = Σ_{k≥0} p_k, B·(ση/ε) = Σ k p_k, C·η = −Σ_{k≥1} p_k,
/// D·(ση/ε) = −Σ (k−1) p_k.
pub fn flux_coefficients(dt: f64, params: &RegimeParams, sigma_iface: f64) -> FluxCoefficients {
    debug_assert!(dt > 0.0 && sigma_iface > 0.0);
    let eta = params.eta;
    let pref = params.epsilon / (sigma_iface * eta);
    let nu = sigma_iface / (params.epsilon * eta);
    let w = -nu * dt;
    if w.abs() < W_SERIES_SWITCH {
        let mut p = 1.0; // w^k/(k+1)!
        let mut sa = 1.0;
        let mut sb = 0.0;
        let mut sc = 0.0;
        let mut sd = 0.0;
        for k in 1..=24 {
            let kf = k as f64;
            p *= w / (kf + 1.0);
            sa += p;
            sb += kf * p;
            sc += p;
            sd += (kf - 1.0) * p;
            // Terms beyond this floor cannot move any of the sums: the
            // smallest, Σ(k-1)p_k ~ w²/6, exceeds it by a safe margin for
            // every w that reaches the k ≥ 2 iterations.
            if p.abs() < 1e-22 {
                break;
            }
        }
        FluxCoefficients { a: sa / eta, b: pref * sb, c: -sc / eta, d: -pref * sd }
    } else {
        let ew = w.exp();
        let s = f64::exp_m1(w) / w;
        FluxCoefficients {
            a: s / eta,
            b: pref * (ew - s),
            c: (1.0 - s) / eta,
            d: pref * (2.0 * s - 1.0 - ew),
        }
    }
}

/// van Leer limited slope of two one-sided difference quotients:
/// (sign a + sign b)·|a||b|/(|a|+|b|), zero when they oppose or vanish.
pub fn van_leer(a: f64, b: f64) -> f64 {
    let denom = a.abs() + b.abs();
    if denom == 0.0 {
        0.0
    } else {
        (a.signum() + b.signum()) * a.abs() * b.abs() / denom
    }
}

/// Upwind interface density ⟨f_left 1_{v>0} + f_right 1_{v<0}⟩ from
/// edge-reconstructed node values on each side.
pub fn interface_density(quad: &VelocityQuadrature, f_left: &[f64], f_right: &[f64]) -> f64 {
    debug_assert_eq!(f_left.len(), quad.len());
    debug_assert_eq!(f_right.len(), quad.len());
    let mut s = 0.0;
    for (k, (&v, &w)) in quad.nodes().iter().zip(quad.weights()).enumerate() {
        s += w * if v > 0.0 { f_left[k] } else { f_right[k] };
    }
    0.5 * s
}

/// Everything an interface flux needs from the two adjacent cells:
/// cell-average node values, limited slopes, and the three densities
/// ρ_left, ρ_half (from [`interface_density`] on the edges), ρ_right.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceState<'a> {
    pub f_left: &'a [f64],
    pub f_right: &'a [f64],
    pub slope_left: &'a [f64],
    pub slope_right: &'a [f64],
    pub rho_left: f64,
    pub rho_half: f64,
    pub rho_right: f64,
}

/// Node values of the kinetic interface flux, written into `phi`:
///
///   φ_k = A v f_edge + B v² δf + C v ρ_half + D v² δρ,
///
/// where f_edge and δf are taken from the upwind cell (edge value
/// f ± (Δx/2)δf) and δρ is the half-cell density gradient on the upwind
/// side of the interface.
pub fn micro_flux(
    quad: &VelocityQuadrature,
    state: &InterfaceState,
    coeffs: &FluxCoefficients,
    dx: f64,
    phi: &mut [f64],
) {
    debug_assert_eq!(phi.len(), quad.len());
    let half = 0.5 * dx;
    let dl = (state.rho_half - state.rho_left) / half;
    let dr = (state.rho_right - state.rho_half) / half;
    for (k, &v) in quad.nodes().iter().enumerate() {
        let (edge, slope, drho) = if v > 0.0 {
            (state.f_left[k] + half * state.slope_left[k], state.slope_left[k], dl)
        } else {
            (state.f_right[k] - half * state.slope_right[k], state.slope_right[k], dr)
        };
        phi[k] = coeffs.a * v * edge
            + coeffs.b * v * v * slope
            + coeffs.c * v * state.rho_half
            + coeffs.d * v * v * drho;
    }
}

/// Density flux Φ = ⟨φ⟩ assembled in closed form: the C-term integrates to
/// zero by symmetry and the D-term's half-range v² weights are exactly 1/6
/// each, collapsing to (D/3Δx)(ρ_right − ρ_left).
pub fn macro_flux(
    quad: &VelocityQuadrature,
    state: &InterfaceState,
    coeffs: &FluxCoefficients,
    dx: f64,
) -> f64 {
    let half = 0.5 * dx;
    let mut adv = 0.0;
    let mut slp = 0.0;
    for (k, (&v, &w)) in quad.nodes().iter().zip(quad.weights()).enumerate() {
        if v > 0.0 {
            adv += w * v * (state.f_left[k] + half * state.slope_left[k]);
            slp += w * v * v * state.slope_left[k];
        } else {
            adv += w * v * (state.f_right[k] - half * state.slope_right[k]);
            slp += w * v * v * state.slope_right[k];
        }
    }
    coeffs.a * 0.5 * adv
        + coeffs.b * 0.5 * slp
        + coeffs.d / (3.0 * dx) * (state.rho_right - state.rho_left)
}

/// Domain boundary selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySide {
    Left,
    Right,
}

/// Prescribed boundary distribution, restricted to the shapes whose moments
/// have elementary closed forms: vacuum, an isotropic constant, and a
/// half-range beam c·1_{v>0} (forward) or c·1_{v<0} (backward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryAnsatz {
    Vacuum,
    Isotropic(f64),
    Beam { value: f64, forward: bool },
}

impl BoundaryAnsatz {
    /// Node values on the quadrature, for the kinetic scheme.
    pub fn sample(&self, quad: &VelocityQuadrature) -> Vec<f64> {
        quad.nodes()
            .iter()
            .map(|&v| match *self {
                BoundaryAnsatz::Vacuum => 0.0,
                BoundaryAnsatz::Isotropic(c) => c,
                BoundaryAnsatz::Beam { value, forward } => {
                    if (v > 0.0) == forward {
                        value
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }

    /// Exact half moment ⟨v^k (·) 1_{v≷0}⟩; on its half-range a constant c
    /// contributes c/(2(k+1)), with sign (−1)^k on the negative side.
    pub fn half_moment(&self, k: u32, side: Side) -> f64 {
        let base = 0.5 / (k as f64 + 1.0);
        let sign = if side == Side::Negative && k % 2 == 1 { -1.0 } else { 1.0 };
        match *self {
            BoundaryAnsatz::Vacuum => 0.0,
            BoundaryAnsatz::Isotropic(c) => sign * base * c,
            BoundaryAnsatz::Beam { value, forward } => {
                let lives_on_side = forward == (side == Side::Positive);
                if lives_on_side {
                    sign * base * value
                } else {
                    0.0
                }
            }
        }
    }
}

/// Artificial interface density at a Dirichlet boundary: minus the incoming
/// partial current of the prescribed state over the outgoing partial current
/// of a unit isotropic one, so an isotropic inflow c reproduces ρ_half = c.
pub fn boundary_interface_density(
    quad: &VelocityQuadrature,
    side: BoundarySide,
    f_bnd: &[f64],
) -> f64 {
    debug_assert_eq!(f_bnd.len(), quad.len());
    let mut inflow = 0.0;
    let mut unit_out = 0.0;
    for (k, (&v, &w)) in quad.nodes().iter().zip(quad.weights()).enumerate() {
        let entering = match side {
            BoundarySide::Left => v > 0.0,
            BoundarySide::Right => v < 0.0,
        };
        if entering {
            inflow += w * v * f_bnd[k];
        } else {
            unit_out += w * v;
        }
    }
    -inflow / unit_out
}

/// Kinetic flux at a Dirichlet boundary, written into `phi`.
///
/// Entering nodes carry the free stream (v/η)·f_bnd of the prescribed
/// distribution; exiting nodes carry the first-order interface flux built
/// from the first interior cell, the boundary interface density, and the
/// half-cell density gradient between them.
#[allow(clippy::too_many_arguments)]
pub fn boundary_flux_dirichlet(
    quad: &VelocityQuadrature,
    side: BoundarySide,
    f_bnd: &[f64],
    f_first: &[f64],
    rho_first: f64,
    coeffs: &FluxCoefficients,
    eta: f64,
    dx: f64,
    phi: &mut [f64],
) {
    debug_assert_eq!(phi.len(), quad.len());
    let rho_half = boundary_interface_density(quad, side, f_bnd);
    let half = 0.5 * dx;
    let drho = match side {
        BoundarySide::Left => (rho_first - rho_half) / half,
        BoundarySide::Right => (rho_half - rho_first) / half,
    };
    for (k, &v) in quad.nodes().iter().enumerate() {
        let entering = match side {
            BoundarySide::Left => v > 0.0,
            BoundarySide::Right => v < 0.0,
        };
        phi[k] = if entering {
            v / eta * f_bnd[k]
        } else {
            coeffs.a * v * f_first[k] + coeffs.c * v * rho_half + coeffs.d * v * v * drho
        };
    }
}

/// Heuristic uniformly stable step: dt = safety·((3/2)σ_min Δx² + η Δx).
/// The parabolic term governs the diffusion regime, the hyperbolic one free
/// transport; the sum is safe across the whole range.
pub fn stable_dt(grid: &SpatialGrid, params: &RegimeParams, safety: f64) -> f64 {
    assert!(safety > 0.0 && safety <= 1.0, "safety must lie in (0,1]");
    safety * (1.5 * params.sigma_min() * grid.dx() * grid.dx() + params.eta * grid.dx())
}

/// Boundary closure of the kinetic update.
#[derive(Debug, Clone, PartialEq)]
pub enum KineticBc {
    Periodic,
    /// Prescribed boundary distributions on the full node set; only the
    /// entering half of each is read.
    Dirichlet { left: Vec<f64>, right: Vec<f64> },
}

/// Cell-averaged distribution values with their density moments.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    nv: usize,
    f: Vec<f64>,
    rho: Vec<f64>,
}

impl KineticField {
    /// Field from a node initializer `init(cell, v)`.
    pub fn from_fn(
        nx: usize,
        quad: &VelocityQuadrature,
        mut init: impl FnMut(usize, f64) -> f64,
    ) -> Self {
        let mut f = Vec::with_capacity(nx * quad.len());
        for i in 0..nx {
            for &v in quad.nodes() {
                f.push(init(i, v));
            }
        }
        Self::from_values(nx, quad, f)
    }

    /// Field from flat node values `f[i·nv + k]`; densities are taken.
    pub fn from_values(nx: usize, quad: &VelocityQuadrature, f: Vec<f64>) -> Self {
        let nv = quad.len();
        assert_eq!(f.len(), nx * nv, "need nx·nv node values");
        let rho = (0..nx).map(|i| quad.moment(&f[i * nv..(i + 1) * nv])).collect();
        KineticField { nv, f, rho }
    }

    pub fn nx(&self) -> usize {
        self.rho.len()
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    /// Node values of cell `i`.
    pub fn cell(&self, i: usize) -> &[f64] {
        &self.f[i * self.nv..(i + 1) * self.nv]
    }

    /// All node values, flat `f[i·nv + k]`.
    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// Cell densities ρ_i = ⟨f_i⟩.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Smallest node value (positivity monitor; never enforced).
    pub fn min_value(&self) -> f64 {
        self.f.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UgksError {
    #[error("density {rho:.6e} in cell {cell} fell below the stability floor")]
    Instability { cell: usize, rho: f64 },
}

/// Limited slopes per cell and node; boundary cells keep zero slope under
/// Dirichlet closure.
fn limited_slopes(field: &KineticField, dx: f64, bc: &KineticBc) -> Vec<f64> {
    let nx = field.nx();
    let nv = field.nv();
    let f = field.values();
    let mut slopes = vec![0.0; nx * nv];
    for i in 0..nx {
        let (prev, next) = match bc {
            KineticBc::Periodic => ((i + nx - 1) % nx, (i + 1) % nx),
            KineticBc::Dirichlet { .. } => {
                if i == 0 || i == nx - 1 {
                    continue;
                }
                (i - 1, i + 1)
            }
        };
        for k in 0..nv {
            slopes[i * nv + k] = van_leer(
                (f[i * nv + k] - f[prev * nv + k]) / dx,
                (f[next * nv + k] - f[i * nv + k]) / dx,
            );
        }
    }
    slopes
}

/// One finite-volume step: interface fluxes, explicit conservative density
/// update, then the implicit relaxation update of the distribution,
///
///   f_i^{n+1} = (f_i − (Δt/Δx)(φ_{i+1/2}−φ_{i-1/2}) + Δt ν_i ρ_i^{n+1})
///               / (1 + Δt ν_i),
///
/// whose moment reproduces ρ_i^{n+1} because the macro flux is the exact
/// quadrature moment of the micro flux.
pub fn step_kinetic(
    field: &KineticField,
    grid: &SpatialGrid,
    params: &RegimeParams,
    quad: &VelocityQuadrature,
    bc: &KineticBc,
    dt: f64,
) -> Result<KineticField, UgksError> {
    let nx = grid.nx();
    let nv = quad.len();
    assert_eq!(field.nx(), nx, "field/grid cell counts differ");
    assert_eq!(field.nv(), nv, "field/quadrature node counts differ");
    assert_eq!(params.sigma().len(), nx, "opacity profile length differs");
    assert!(dt > 0.0);

    let dx = grid.dx();
    let half = 0.5 * dx;
    let slopes = limited_slopes(field, dx, bc);
    let mut phi = vec![0.0; (nx + 1) * nv];
    let mut cap_phi = vec![0.0; nx + 1];
    let mut left_edge = vec![0.0; nv];
    let mut right_edge = vec![0.0; nv];

    // Interface j sits between cells j-1 and j; periodic closure computes the
    // wrap interface once as j = nx and copies it to j = 0.
    let interfaces: Vec<(usize, usize, usize)> = match bc {
        KineticBc::Periodic => (1..=nx)
            .map(|j| if j < nx { (j, j - 1, j) } else { (nx, nx - 1, 0) })
            .collect(),
        KineticBc::Dirichlet { .. } => (1..nx).map(|j| (j, j - 1, j)).collect(),
    };
    for &(j, l, r) in &interfaces {
        let coeffs = flux_coefficients(dt, params, params.sigma_between(l, r));
        let fl = field.cell(l);
        let fr = field.cell(r);
        let sl = &slopes[l * nv..(l + 1) * nv];
        let sr = &slopes[r * nv..(r + 1) * nv];
        for k in 0..nv {
            left_edge[k] = fl[k] + half * sl[k];
            right_edge[k] = fr[k] - half * sr[k];
        }
        let state = InterfaceState {
            f_left: fl,
            f_right: fr,
            slope_left: sl,
            slope_right: sr,
            rho_left: field.rho()[l],
            rho_half: interface_density(quad, &left_edge, &right_edge),
            rho_right: field.rho()[r],
        };
        micro_flux(quad, &state, &coeffs, dx, &mut phi[j * nv..(j + 1) * nv]);
        cap_phi[j] = macro_flux(quad, &state, &coeffs, dx);
    }

    match bc {
        KineticBc::Periodic => {
            let (head, tail) = phi.split_at_mut(nx * nv);
            head[..nv].copy_from_slice(&tail[..nv]);
            cap_phi[0] = cap_phi[nx];
        }
        KineticBc::Dirichlet { left, right } => {
            let coeffs = flux_coefficients(dt, params, params.sigma()[0]);
            boundary_flux_dirichlet(
                quad,
                BoundarySide::Left,
                left,
                field.cell(0),
                field.rho()[0],
                &coeffs,
                params.eta,
                dx,
                &mut phi[..nv],
            );
            cap_phi[0] = quad.moment(&phi[..nv]);
            let coeffs = flux_coefficients(dt, params, params.sigma()[nx - 1]);
            boundary_flux_dirichlet(
                quad,
                BoundarySide::Right,
                right,
                field.cell(nx - 1),
                field.rho()[nx - 1],
                &coeffs,
                params.eta,
                dx,
                &mut phi[nx * nv..],
            );
            cap_phi[nx] = quad.moment(&phi[nx * nv..]);
        }
    }

    let r = dt / dx;
    let f = field.values();
    let mut f_new = vec![0.0; nx * nv];
    let mut rho_new = vec![0.0; nx];
    for i in 0..nx {
        let rho = field.rho()[i] - r * (cap_phi[i + 1] - cap_phi[i]);
        if rho < INSTABILITY_FLOOR {
            return Err(UgksError::Instability { cell: i, rho });
        }
        rho_new[i] = rho;
        let nu = params.nu(i);
        let denom = 1.0 + dt * nu;
        let src = dt * nu * rho;
        for k in 0..nv {
            f_new[i * nv + k] =
                (f[i * nv + k] - r * (phi[(i + 1) * nv + k] - phi[i * nv + k]) + src) / denom;
        }
    }
    Ok(KineticField { nv, f: f_new, rho: rho_new })
}
