//! Moment scheme closed by the M2 entropy ansatz f̂ = e^{α+βv+γv²}.
//!
//! The update evolves U = (ρ, j, q) with the interface coefficients A–D of
//! the kinetic reference scheme; fluxes are the (1, v, v²) moments of the
//! kinetic interface flux taken of the piecewise-constant ansatz, so each
//! interface costs the half-range moments of its two cells and no
//! quadrature. The moment inversion runs once per cell and step, seeded with
//! the multipliers found on the previous step; a failed inversion aborts the
//! step with the offending cell's state attached, since substituting a
//! different closure would silently change the scheme. The collision source
//! S = (0, −j, ρ/3 − q) is implicit, with the already-updated density
//! feeding the q relaxation.

use thiserror::Error;

use crate::m1::Side;
use crate::m1_scheme::MomentBc;
use crate::m2::{
    half_moments_m2, is_realizable_m2, lambda_from_moments_m2, lambda_from_moments_m2_seeded,
    EntropicVarsM2, HalfMomentsM2, M2Error, MomentVectorM2, DEFAULT_INVERSION_TOL,
};
use crate::special::SeriesOrder;
use crate::ugks::{
    flux_coefficients, BoundaryAnsatz, BoundarySide, FluxCoefficients, RegimeParams, SpatialGrid,
};

/// Per-cell moment vectors U_i = (ρ_i, j_i, q_i), with the multipliers of the
/// last closure evaluation cached per cell to seed the next inversion.
#[derive(Debug, Clone)]
pub struct MomentFieldM2 {
    rho: Vec<f64>,
    j: Vec<f64>,
    q: Vec<f64>,
    lam: Vec<Option<EntropicVarsM2>>,
}

impl MomentFieldM2 {
    pub fn new(rho: Vec<f64>, j: Vec<f64>, q: Vec<f64>) -> Self {
        assert_eq!(rho.len(), j.len(), "component lengths differ");
        assert_eq!(rho.len(), q.len(), "component lengths differ");
        assert!(!rho.is_empty());
        let lam = vec![None; rho.len()];
        MomentFieldM2 { rho, j, q, lam }
    }

    /// Field from a cell initializer.
    pub fn from_fn(nx: usize, mut init: impl FnMut(usize) -> MomentVectorM2) -> Self {
        let cells: Vec<MomentVectorM2> = (0..nx).map(&mut init).collect();
        MomentFieldM2 {
            rho: cells.iter().map(|u| u.rho).collect(),
            j: cells.iter().map(|u| u.j).collect(),
            q: cells.iter().map(|u| u.q).collect(),
            lam: vec![None; nx],
        }
    }

    pub fn nx(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn j(&self) -> &[f64] {
        &self.j
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn cell(&self, i: usize) -> MomentVectorM2 {
        MomentVectorM2::new(self.rho[i], self.j[i], self.q[i])
    }

    /// Entropy ∫⟨f̂ ln f̂ − f̂⟩dx of the cellwise ansatz, which reduces to
    /// Σ(αρ + βj + γq − ρ)Δx since ln f̂ = α + βv + γv². Inversions are
    /// seeded from the cached multipliers. Vacuum cells contribute zero; a
    /// cell that fails to close makes the result NaN.
    pub fn entropy(&self, dx: f64, opts: &M2StepOptions) -> f64 {
        let mut h = 0.0;
        for i in 0..self.nx() {
            let u = self.cell(i);
            if u.rho.abs() <= opts.rho_eps
                && u.j.abs() <= opts.rho_eps
                && u.q.abs() <= opts.rho_eps
            {
                continue;
            }
            let found = match self.lam[i] {
                Some(seed) => lambda_from_moments_m2_seeded(&seed, &u, opts.inversion_tol),
                None => lambda_from_moments_m2(&u, opts.inversion_tol),
            };
            match found {
                Ok((lam, _)) => {
                    h += (lam.alpha * u.rho + lam.beta * u.j + lam.gamma * u.q - u.rho) * dx;
                }
                Err(_) => return f64::NAN,
            }
        }
        h
    }
}

/// Step configuration: vacuum cutoff and the moment-matching tolerance
/// passed to the inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2StepOptions {
    pub rho_eps: f64,
    pub inversion_tol: f64,
}

impl Default for M2StepOptions {
    fn default() -> Self {
        M2StepOptions { rho_eps: 1e-12, inversion_tol: DEFAULT_INVERSION_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum M2SchemeError {
    #[error(
        "closure failed at cell {cell} (rho={rho:.6e}, j={j:.6e}, q={q:.6e}): {source}"
    )]
    Closure {
        cell: usize,
        rho: f64,
        j: f64,
        q: f64,
        #[source]
        source: M2Error,
    },
    #[error("cell {cell} lost realizability: rho={rho:.6e}, j={j:.6e}, q={q:.6e}")]
    RealizabilityLoss { cell: usize, rho: f64, j: f64, q: f64 },
}

/// Moments an interface flux needs from one cell: the full density and the
/// half-range moments of its ansatz. The zero value represents a vacuum cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellMomentsM2 {
    pub rho: f64,
    pub half: HalfMomentsM2,
}

impl CellMomentsM2 {
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// Half moments of the ansatz at Λ.
    pub fn from_multipliers(lam: &EntropicVarsM2) -> Result<Self, M2Error> {
        let half = half_moments_m2(lam, SeriesOrder::default())?;
        Ok(CellMomentsM2 { rho: half.rho_pos + half.rho_neg, half })
    }
}

/// Interface flux (Φ^ρ, Φ^j, Φ^q) of the M2 scheme.
///
/// A-terms take the upwind half moments, the C-term survives only in Φ^j as
/// (C/3)ρ_half, and the D-term collapses to (D/3Δx)Δρ in Φ^ρ, to
/// (D/8)(δ^Lρ − δ^Rρ) in Φ^j, and to (D/5Δx)Δρ in Φ^q.
pub fn m2_flux_first_order(
    left: &CellMomentsM2,
    right: &CellMomentsM2,
    coeffs: &FluxCoefficients,
    dx: f64,
) -> [f64; 3] {
    let rho_half = left.half.rho_pos + right.half.rho_neg;
    let half = 0.5 * dx;
    let d_l = (rho_half - left.rho) / half;
    let d_r = (right.rho - rho_half) / half;
    let d_rho = right.rho - left.rho;
    [
        coeffs.a * (left.half.j_pos + right.half.j_neg) + coeffs.d / (3.0 * dx) * d_rho,
        coeffs.a * (left.half.q_pos + right.half.q_neg)
            + coeffs.c / 3.0 * rho_half
            + coeffs.d / 8.0 * (d_l - d_r),
        coeffs.a * (left.half.k_pos + right.half.k_neg) + coeffs.d / (5.0 * dx) * d_rho,
    ]
}

/// Boundary flux (Φ^ρ, Φ^j, Φ^q) at a Dirichlet boundary: closed-form
/// entering half of the boundary data against the exiting half of the first
/// interior cell's ansatz.
pub fn m2_boundary_flux(
    side: BoundarySide,
    data: &BoundaryAnsatz,
    first: &CellMomentsM2,
    coeffs: &FluxCoefficients,
    eta: f64,
    dx: f64,
) -> [f64; 3] {
    let half = 0.5 * dx;
    match side {
        BoundarySide::Left => {
            let rho_half = 4.0 * data.half_moment(1, Side::Positive);
            let d_r = (first.rho - rho_half) / half;
            [
                data.half_moment(1, Side::Positive) / eta
                    + coeffs.a * first.half.j_neg
                    - coeffs.c / 4.0 * rho_half
                    + coeffs.d / 6.0 * d_r,
                data.half_moment(2, Side::Positive) / eta
                    + coeffs.a * first.half.q_neg
                    + coeffs.c / 6.0 * rho_half
                    - coeffs.d / 8.0 * d_r,
                data.half_moment(3, Side::Positive) / eta
                    + coeffs.a * first.half.k_neg
                    - coeffs.c / 8.0 * rho_half
                    + coeffs.d / 10.0 * d_r,
            ]
        }
        BoundarySide::Right => {
            let rho_half = -4.0 * data.half_moment(1, Side::Negative);
            let d_l = (rho_half - first.rho) / half;
            [
                data.half_moment(1, Side::Negative) / eta
                    + coeffs.a * first.half.j_pos
                    + coeffs.c / 4.0 * rho_half
                    + coeffs.d / 6.0 * d_l,
                data.half_moment(2, Side::Negative) / eta
                    + coeffs.a * first.half.q_pos
                    + coeffs.c / 6.0 * rho_half
                    + coeffs.d / 8.0 * d_l,
                data.half_moment(3, Side::Negative) / eta
                    + coeffs.a * first.half.k_pos
                    + coeffs.c / 8.0 * rho_half
                    + coeffs.d / 10.0 * d_l,
            ]
        }
    }
}

/// Closure pass: one inversion per non-vacuum cell, warm-started from the
/// field's cached multipliers.
fn close_cells(
    field: &MomentFieldM2,
    opts: &M2StepOptions,
) -> Result<(Vec<CellMomentsM2>, Vec<Option<EntropicVarsM2>>), M2SchemeError> {
    let nx = field.nx();
    let mut cells = vec![CellMomentsM2::vacuum(); nx];
    let mut lam_new = vec![None; nx];
    for i in 0..nx {
        let u = field.cell(i);
        if u.rho.abs() <= opts.rho_eps && u.j.abs() <= opts.rho_eps && u.q.abs() <= opts.rho_eps
        {
            continue;
        }
        let closure_err = |source| M2SchemeError::Closure {
            cell: i,
            rho: u.rho,
            j: u.j,
            q: u.q,
            source,
        };
        let (lam, _) = match field.lam[i] {
            Some(seed) => lambda_from_moments_m2_seeded(&seed, &u, opts.inversion_tol),
            None => lambda_from_moments_m2(&u, opts.inversion_tol),
        }
        .map_err(closure_err)?;
        cells[i] = CellMomentsM2::from_multipliers(&lam).map_err(closure_err)?;
        lam_new[i] = Some(lam);
    }
    Ok((cells, lam_new))
}

/// One finite-volume step of the M2 moment scheme: explicit conservative
/// density update, implicit relaxation of j and q,
///
///   q_i^{n+1} = (q_i − (Δt/Δx)ΔΦ^q + Δt ν_i ρ_i^{n+1}/3) / (1 + Δt ν_i).
pub fn step_m2(
    field: &MomentFieldM2,
    grid: &SpatialGrid,
    params: &RegimeParams,
    bc: &MomentBc,
    dt: f64,
    opts: &M2StepOptions,
) -> Result<MomentFieldM2, M2SchemeError> {
    let nx = grid.nx();
    assert_eq!(field.nx(), nx, "field/grid cell counts differ");
    assert_eq!(params.sigma().len(), nx, "opacity profile length differs");
    assert!(dt > 0.0);
    let dx = grid.dx();

    let (cells, lam_new) = close_cells(field, opts)?;

    let mut flux = vec![[0.0; 3]; nx + 1];
    match bc {
        MomentBc::Periodic => {
            for j in 1..=nx {
                let (l, r) = if j < nx { (j - 1, j) } else { (nx - 1, 0) };
                let coeffs = flux_coefficients(dt, params, params.sigma_between(l, r));
                flux[j] = m2_flux_first_order(&cells[l], &cells[r], &coeffs, dx);
            }
            flux[0] = flux[nx];
        }
        MomentBc::Dirichlet { left, right } => {
            for j in 1..nx {
                let coeffs = flux_coefficients(dt, params, params.sigma_between(j - 1, j));
                flux[j] = m2_flux_first_order(&cells[j - 1], &cells[j], &coeffs, dx);
            }
            let coeffs = flux_coefficients(dt, params, params.sigma()[0]);
            flux[0] =
                m2_boundary_flux(BoundarySide::Left, left, &cells[0], &coeffs, params.eta, dx);
            let coeffs = flux_coefficients(dt, params, params.sigma()[nx - 1]);
            flux[nx] = m2_boundary_flux(
                BoundarySide::Right,
                right,
                &cells[nx - 1],
                &coeffs,
                params.eta,
                dx,
            );
        }
    }

    let r = dt / dx;
    let mut rho_new = vec![0.0; nx];
    let mut j_new = vec![0.0; nx];
    let mut q_new = vec![0.0; nx];
    for i in 0..nx {
        let relax = 1.0 + dt * params.nu(i);
        let rho = field.rho[i] - r * (flux[i + 1][0] - flux[i][0]);
        let j = (field.j[i] - r * (flux[i + 1][1] - flux[i][1])) / relax;
        let q =
            (field.q[i] - r * (flux[i + 1][2] - flux[i][2]) + dt * params.nu(i) * rho / 3.0)
                / relax;
        let vacuum =
            rho.abs() <= opts.rho_eps && j.abs() <= opts.rho_eps && q.abs() <= opts.rho_eps;
        if !(is_realizable_m2(&MomentVectorM2::new(rho, j, q)) || vacuum) {
            return Err(M2SchemeError::RealizabilityLoss { cell: i, rho, j, q });
        }
        rho_new[i] = rho;
        j_new[i] = j;
        q_new[i] = q;
    }
    Ok(MomentFieldM2 { rho: rho_new, j: j_new, q: q_new, lam: lam_new })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::m2::moments_from_lambda_m2;
    use crate::quadrature::make_velocity_quadrature;
    use crate::ugks::{interface_density, micro_flux, stable_dt, InterfaceState};

    fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
        let denom = want.abs().max(1e-300);
        let rel = (got - want).abs() / denom;
        assert!(rel <= tol, "{what}: got {got:.17e}, want {want:.17e}, rel {rel:.3e}");
    }

    fn equilibrium_cell(c: f64) -> MomentVectorM2 {
        MomentVectorM2::new(c, 0.0, c / 3.0)
    }

    #[test]
    fn flux_at_shared_equilibrium() {
        let params = RegimeParams::uniform(0.8, 1.0, 1.0, 2);
        let coeffs = flux_coefficients(0.01, &params, 1.0);
        let lam = lambda_from_moments_m2(&equilibrium_cell(1.0), 1e-12).unwrap().0;
        let cell = CellMomentsM2::from_multipliers(&lam).unwrap();
        let [phi_rho, phi_j, phi_q] = m2_flux_first_order(&cell, &cell, &coeffs, 0.01);
        assert!(phi_rho.abs() <= 1e-15, "density flux {phi_rho:.3e}");
        // A(1/6+1/6) + C/3 with rho_half = 1: exactly (A+C)/3 = 1/(3η).
        assert_rel(phi_j, 1.0 / (3.0 * 0.8), 1e-12, "j flux");
        assert!(phi_q.abs() <= 1e-15, "q flux {phi_q:.3e}");
    }

    /// Kinetic oracle: moments of the kinetic interface flux evaluated on
    /// the two cells' ansatz node values must match the closed-form flux.
    fn assert_matches_kinetic(lam_l: EntropicVarsM2, lam_r: EntropicVarsM2, what: &str) {
        let quad = make_velocity_quadrature(50);
        let nv = quad.len();
        let dx = 0.02;
        let params = RegimeParams::uniform(0.9, 0.7, 1.1, 2);
        let coeffs = flux_coefficients(0.004, &params, 1.1);

        let shape = |lam: &EntropicVarsM2| -> Vec<f64> {
            quad.nodes()
                .iter()
                .map(|&v| (lam.alpha + lam.beta * v + lam.gamma * v * v).exp())
                .collect()
        };
        let fl = shape(&lam_l);
        let fr = shape(&lam_r);
        let zeros = vec![0.0; nv];
        let left = CellMomentsM2::from_multipliers(&lam_l).unwrap();
        let right = CellMomentsM2::from_multipliers(&lam_r).unwrap();
        let state = InterfaceState {
            f_left: &fl,
            f_right: &fr,
            slope_left: &zeros,
            slope_right: &zeros,
            rho_left: left.rho,
            rho_half: interface_density(&quad, &fl, &fr),
            rho_right: right.rho,
        };
        let mut phi = vec![0.0; nv];
        micro_flux(&quad, &state, &coeffs, dx, &mut phi);

        let got = m2_flux_first_order(&left, &right, &coeffs, dx);
        let want = [quad.moment(&phi), quad.moment_v(&phi), quad.moment_v2(&phi)];
        let scale = 1.0 + want.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        for k in 0..3 {
            assert!(
                (got[k] - want[k]).abs() <= 1e-10 * scale,
                "{what}: component {k}: {:.6e} vs kinetic {:.6e}",
                got[k],
                want[k]
            );
        }
    }

    #[test]
    fn fluxes_match_the_kinetic_oracle() {
        assert_matches_kinetic(
            EntropicVarsM2 { alpha: 0.0, beta: 0.5, gamma: -1.0 },
            EntropicVarsM2 { alpha: -0.3, beta: -0.8, gamma: 0.6 },
            "moderate pair",
        );
        assert_matches_kinetic(
            EntropicVarsM2 { alpha: 0.4, beta: 2.0, gamma: 1.5 },
            EntropicVarsM2 { alpha: -1.0, beta: 0.1, gamma: -1.8 },
            "skewed pair",
        );
    }

    #[test]
    fn vacuum_side_contributes_nothing() {
        let params = RegimeParams::uniform(1.0, 1.0, 1.0, 2);
        let dx = 0.01;
        let coeffs = flux_coefficients(0.01, &params, 1.0);
        let lam = lambda_from_moments_m2(&equilibrium_cell(1.0), 1e-12).unwrap().0;
        let right = CellMomentsM2::from_multipliers(&lam).unwrap();
        let got = m2_flux_first_order(&CellMomentsM2::vacuum(), &right, &coeffs, dx);
        // rho_half = 1/2, so the half-cell gradients agree and the odd
        // D-term cancels exactly.
        assert_rel(got[0], -coeffs.a / 4.0 + coeffs.d / (3.0 * dx), 1e-12, "density flux");
        assert_rel(got[1], coeffs.a / 6.0 + coeffs.c / 6.0, 1e-12, "j flux");
        assert_rel(got[2], -coeffs.a / 8.0 + coeffs.d / (5.0 * dx), 1e-12, "q flux");
    }

    #[test]
    fn equilibrated_wall_has_zero_density_flux() {
        let params = RegimeParams::uniform(0.5, 1.0, 1.0, 2);
        let coeffs = flux_coefficients(0.01, &params, 1.0);
        let c = 0.6;
        let lam = lambda_from_moments_m2(&equilibrium_cell(c), 1e-12).unwrap().0;
        let first = CellMomentsM2::from_multipliers(&lam).unwrap();
        let got = m2_boundary_flux(
            BoundarySide::Left,
            &BoundaryAnsatz::Isotropic(c),
            &first,
            &coeffs,
            params.eta,
            0.01,
        );
        assert!(got[0].abs() <= 1e-14, "equilibrated wall leaks {:.3e}", got[0]);

        // Beam wall against vacuum: the entering parts are exact.
        let got = m2_boundary_flux(
            BoundarySide::Right,
            &BoundaryAnsatz::Beam { value: 1.0, forward: false },
            &CellMomentsM2::vacuum(),
            &coeffs,
            params.eta,
            0.01,
        );
        let rho_half = 1.0;
        let d_l = (rho_half - 0.0) / 0.005;
        let eta = params.eta;
        assert_rel(
            got[0],
            -0.25 / eta + coeffs.c / 4.0 * rho_half + coeffs.d / 6.0 * d_l,
            1e-13,
            "entering rho flux",
        );
        assert_rel(
            got[1],
            (1.0 / 6.0) / eta + coeffs.c / 6.0 * rho_half + coeffs.d / 8.0 * d_l,
            1e-13,
            "entering j flux",
        );
        assert_rel(
            got[2],
            -0.125 / eta + coeffs.c / 8.0 * rho_half + coeffs.d / 10.0 * d_l,
            1e-13,
            "entering q flux",
        );
    }

    #[test]
    fn step_preserves_equilibrium_and_mass() {
        let nx = 25;
        let grid = SpatialGrid::unit(nx);
        let params = RegimeParams::uniform(1.0, 1.0, 1.0, nx);
        let dt = stable_dt(&grid, &params, 0.9);
        let opts = M2StepOptions::default();

        let mut uniform = MomentFieldM2::from_fn(nx, |_| equilibrium_cell(0.7));
        for _ in 0..100 {
            uniform = step_m2(&uniform, &grid, &params, &MomentBc::Periodic, dt, &opts).unwrap();
        }
        for i in 0..nx {
            assert!((uniform.rho[i] - 0.7).abs() <= 1e-14, "rho drift {:.3e}", uniform.rho[i]);
            assert!(uniform.j[i].abs() <= 1e-14, "j drift {:.3e}", uniform.j[i]);
            assert!((uniform.q[i] - 0.7 / 3.0).abs() <= 1e-14, "q drift {:.3e}", uniform.q[i]);
        }

        let wavy = MomentFieldM2::from_fn(nx, |i| {
            let x = grid.cell_center(i);
            let rho = 1.0 + 0.4 * (2.0 * std::f64::consts::PI * x).sin();
            let u = 0.3;
            // q/ρ halfway between the Cauchy–Schwarz floor u² and 1
            MomentVectorM2::new(rho, u * rho, 0.5 * (u * u + 1.0) * rho)
        });
        let mass0: f64 = wavy.rho().iter().sum();
        let mut field = wavy;
        for _ in 0..200 {
            field = step_m2(&field, &grid, &params, &MomentBc::Periodic, dt, &opts).unwrap();
        }
        let mass: f64 = field.rho().iter().sum();
        assert_rel(mass, mass0, 1e-13, "mass");
        for i in 0..nx {
            assert!(is_realizable_m2(&field.cell(i)), "cell {i} lost realizability");
        }
    }

    #[test]
    fn cached_multipliers_still_reproduce_their_cells() {
        let nx = 8;
        let grid = SpatialGrid::unit(nx);
        let params = RegimeParams::uniform(1.0, 1.0, 1.0, nx);
        let field = MomentFieldM2::from_fn(nx, |i| {
            let rho = 1.0 + 0.2 * (i as f64).cos();
            MomentVectorM2::new(rho, 0.1 * rho, 0.4 * rho)
        });
        let next = step_m2(
            &field,
            &grid,
            &params,
            &MomentBc::Periodic,
            0.001,
            &M2StepOptions::default(),
        )
        .unwrap();
        // the cache holds the multipliers of the pre-step states
        for i in 0..nx {
            let lam = next.lam[i].expect("non-vacuum cell must cache multipliers");
            let back = moments_from_lambda_m2(&lam, SeriesOrder::default()).unwrap();
            assert_rel(back.rho, field.rho[i], 1e-9, "cached rho");
        }
        // and the second step accepts them as seeds
        step_m2(&next, &grid, &params, &MomentBc::Periodic, 0.001, &M2StepOptions::default())
            .unwrap();
    }

    #[test]
    fn strong_collisions_relax_j_and_q() {
        let nx = 10;
        let grid = SpatialGrid::unit(nx);
        let params = RegimeParams::uniform(1.0, 1.0, 1e12, nx);
        let field = MomentFieldM2::from_fn(nx, |i| {
            let rho = 1.0 + 0.3 * (i as f64).sin();
            MomentVectorM2::new(rho, 0.3 * rho, 0.6 * rho)
        });
        let next = step_m2(
            &field,
            &grid,
            &params,
            &MomentBc::Periodic,
            0.01,
            &M2StepOptions::default(),
        )
        .unwrap();
        for i in 0..nx {
            assert!(next.j[i].abs() <= 1e-9, "cell {i} kept j = {:.3e}", next.j[i]);
            assert!(
                (next.q[i] - next.rho[i] / 3.0).abs() <= 1e-9,
                "cell {i} kept q excess {:.3e}",
                next.q[i] - next.rho[i] / 3.0
            );
        }
    }

    #[test]
    fn diffusion_regime_update_matches_explicit_diffusion() {
        let nx = 50;
        let grid = SpatialGrid::unit(nx);
        let dx = grid.dx();
        let params = RegimeParams::uniform(1e-8, 1e-8, 1.0, nx);
        let dt = 3e-5;
        let field = MomentFieldM2::from_fn(nx, |i| {
            let x = grid.cell_center(i);
            equilibrium_cell(1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).sin())
        });
        let next =
            step_m2(&field, &grid, &params, &MomentBc::Periodic, dt, &M2StepOptions::default())
                .unwrap();
        let kappa = 1.0 / 3.0;
        for i in 0..nx {
            let (prev, nxt) = ((i + nx - 1) % nx, (i + 1) % nx);
            let ftcs = field.rho[i]
                + dt * kappa * (field.rho[nxt] - 2.0 * field.rho[i] + field.rho[prev]) / (dx * dx);
            assert!(
                (next.rho[i] - ftcs).abs() <= 1e-6,
                "cell {i}: {:.3e} vs FTCS {:.3e}",
                next.rho[i],
                ftcs
            );
        }
    }

    #[test]
    fn failures_carry_the_cell_state() {
        let nx = 4;
        let grid = SpatialGrid::unit(nx);
        let params = RegimeParams::uniform(1.0, 1.0, 1.0, nx);
        // Non-interior initial data: q > ρ cannot be closed.
        let bad = MomentFieldM2::from_fn(nx, |_| MomentVectorM2::new(1.0, 0.0, 1.5));
        let got = step_m2(
            &bad,
            &grid,
            &params,
            &MomentBc::Periodic,
            0.01,
            &M2StepOptions::default(),
        );
        assert!(
            matches!(got, Err(M2SchemeError::Closure { cell: 0, .. })),
            "expected closure failure, got {got:?}"
        );

        // A violent step on alternating peaks drives the peak cells negative.
        let peaks = MomentFieldM2::from_fn(nx, |i| {
            equilibrium_cell(if i % 2 == 0 { 1.0 } else { 0.01 })
        });
        let got = step_m2(
            &peaks,
            &grid,
            &params,
            &MomentBc::Periodic,
            50.0,
            &M2StepOptions::default(),
        );
        assert!(
            matches!(got, Err(M2SchemeError::RealizabilityLoss { cell: 0, .. })),
            "expected loss at cell 0, got {got:?}"
        );
    }

    #[test]
    fn dirichlet_inflow_fills_a_vacuum_domain() {
        let nx = 20;
        let grid = SpatialGrid::unit(nx);
        let params = RegimeParams::uniform(1.0, 1.0, 1.0, nx);
        let dt = stable_dt(&grid, &params, 0.9);
        let bc = MomentBc::Dirichlet {
            left: BoundaryAnsatz::Vacuum,
            right: BoundaryAnsatz::Beam { value: 1.0, forward: false },
        };
        let mut field = MomentFieldM2::from_fn(nx, |_| MomentVectorM2::new(0.0, 0.0, 0.0));
        for _ in 0..100 {
            field =
                step_m2(&field, &grid, &params, &bc, dt, &M2StepOptions::default()).unwrap();
        }
        assert!(field.rho[nx - 1] > field.rho[0], "profile should decay from the lit wall");
        assert!(field.rho[nx - 1] > 0.1 && field.rho[nx - 1] < 1.0);
        assert!(field.j[nx - 1] < 0.0, "flux should point into the domain");
    }
}
