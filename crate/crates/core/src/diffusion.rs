//! Explicit solver for the diffusion equation ∂tρ = ∂x(κ ∂xρ), κ = 1/(3σ),
//! the small-ε limit of the kinetic model. Serves as the reference the
//! asymptotic-preserving schemes must approach in that regime.
//!
//! Centered fluxes F = −κ(ρ_{i+1}−ρ_i)/Δx with the interface κ taken as the
//! arithmetic mean of the cell values; forward-Euler in time. A Dirichlet
//! boundary prescribes the density at the wall and drives the flux
//! −κ(ρ_first − ρ_wall)/Δx over a full cell width, which is where the
//! kinetic boundary flux lands as ε → 0.

use crate::ugks::SpatialGrid;

/// Diffusivity of the continuum limit at opacity σ.
pub fn diffusivity(sigma: f64) -> f64 {
    1.0 / (3.0 * sigma)
}

/// Boundary closure for the diffusion solver. Dirichlet values are wall
/// densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionBc {
    Periodic,
    Dirichlet { left: f64, right: f64 },
}

/// Forward-Euler stability bound Δt ≤ safety · Δx²/(2 max κ).
pub fn stable_dt_diffusion(grid: &SpatialGrid, sigma: &[f64], safety: f64) -> f64 {
    assert!(safety > 0.0 && safety <= 1.0);
    let kappa_max = sigma.iter().copied().map(diffusivity).fold(0.0, f64::max);
    safety * grid.dx() * grid.dx() / (2.0 * kappa_max)
}

/// One forward-Euler step. `dt` must respect [`stable_dt_diffusion`].
pub fn step_diffusion(
    rho: &[f64],
    grid: &SpatialGrid,
    sigma: &[f64],
    bc: &DiffusionBc,
    dt: f64,
) -> Vec<f64> {
    let nx = grid.nx();
    assert_eq!(rho.len(), nx, "field/grid cell counts differ");
    assert_eq!(sigma.len(), nx, "opacity profile length differs");
    assert!(dt > 0.0);
    let dx = grid.dx();

    let mut flux = vec![0.0; nx + 1];
    for i in 0..nx - 1 {
        let kappa = 0.5 * (diffusivity(sigma[i]) + diffusivity(sigma[i + 1]));
        flux[i + 1] = -kappa * (rho[i + 1] - rho[i]) / dx;
    }
    match *bc {
        DiffusionBc::Periodic => {
            let kappa = 0.5 * (diffusivity(sigma[nx - 1]) + diffusivity(sigma[0]));
            flux[nx] = -kappa * (rho[0] - rho[nx - 1]) / dx;
            flux[0] = flux[nx];
        }
        DiffusionBc::Dirichlet { left, right } => {
            flux[0] = -diffusivity(sigma[0]) * (rho[0] - left) / dx;
            flux[nx] = -diffusivity(sigma[nx - 1]) * (right - rho[nx - 1]) / dx;
        }
    }

    let r = dt / dx;
    (0..nx).map(|i| rho[i] - r * (flux[i + 1] - flux[i])).collect()
}
