//! 1D slab-geometry linear transport on `x ∈ [0,1]`, `v ∈ [-1,1]`:
//!
//!   ∂t f + (v/η) ∂x f = (σ/(εη)) (ρ - f),   ρ = ⟨f⟩ = ½∫ f dv.
//!
//! The crate provides a discrete-velocity unified gas-kinetic scheme (UGKS),
//! entropic moment schemes built on the M1 (`e^{α+βv}`) and M2 (`e^{α+βv+γv²}`)
//! minimum-entropy ansätze, a finite-difference solver for the diffusion-limit
//! equation ∂t ρ = ∂x(κ ∂x ρ) with κ = 1/(3σ), and a simulation harness with a
//! test-case registry, monitors, and convergence studies.
//!
//! All schemes are asymptotic preserving: with mesh fixed and ε = η → 0 they
//! degenerate into consistent discretizations of the diffusion equation.

pub mod diffusion;
pub mod harness;
pub mod m1;
pub mod m1_scheme;
pub mod m2;
pub mod m2_scheme;
pub mod quadrature;
pub mod special;
pub mod ugks;
