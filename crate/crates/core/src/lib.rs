//! Bending energies of axisymmetric two-phase membranes.
//!
//! A closed surface of revolution is described by a generator curve
//! γ(t) = (x(t), z(t)), t ∈ [0,1], sampled on a uniform grid and revolved
//! about the z-axis. A piecewise-constant phase field on the same parameter
//! interval marks each point of the surface as material A or B. This crate
//! evaluates the bending + line-tension energy of such a configuration,
//!
//!   F = ∫ [κ_H(φ)/2 · (k₁+k₂ − H₀(φ))² + κ_G(φ) k₁k₂] dS + σ · len(Γ),
//!
//! together with its exact gradient with respect to the curve nodes and the
//! phase-jump locations, and minimizes it under prescribed total area,
//! phase-A area, and enclosed volume using an augmented Lagrangian.
//!
//! Module map:
//! - [`geometry`]: generator curves, discrete derivatives, principal
//!   curvatures, area/volume quadrature, admissibility diagnostics,
//!   constant-speed resampling.
//! - [`phase`]: piecewise-constant phase layouts, jump editing, phase area
//!   and interface length.
//! - [`energy`]: material parameters and the energy terms.
//! - [`gradient`]: reverse-mode differentiation of the discretized energy
//!   and of the constraint functionals.
//! - [`analysis`]: coercivity certificates, constraint feasibility, the
//!   Gauss–Bonnet consistency audit.
//! - [`optimizer`]: constrained minimization and initialization.
//! - [`meshio`]: mesh export (OBJ/VTK), curve/phase/checkpoint files.
//!
//! Everything is deterministic: no global RNG, no threading inside the
//! library, fixed summation order.

pub mod analysis;
pub mod energy;
pub mod geometry;
pub mod gradient;
pub mod meshio;
pub mod optimizer;
pub mod phase;

pub use analysis::{CoercivityCertificate, FeasibilityReport};
pub use energy::{EnergyBreakdown, MaterialParams, VesicleSystem};
pub use geometry::{CurvatureField, GeneratorCurve};
pub use optimizer::{ConstraintSet, OptimizationReport, OptimizerConfig};
pub use phase::PhaseLayout;
