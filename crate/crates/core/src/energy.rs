//! Material parameters and the membrane energy.
//!
//! For a surface of revolution with nodal principal curvatures k₁, k₂ and a
//! two-phase layout φ, the energy is
//!
//!   F = ∫ [κ_H(φ)/2·(k₁+k₂ − H₀(φ))² + κ_G(φ)·k₁k₂] dS + σ·len(Γ),
//!
//! with phase-wise constants κ(φ) = φ·κ^A + (1−φ)·κ^B (φ = 1 is material A)
//! and Γ the union of interface circles. As curve integrals the three terms
//! are
//!
//!   bending  = π ∫ κ_H(φ)(k₁+k₂−H₀(φ))²·x|γ̇| dt,
//!   gaussian = 2π ∫ κ_G(φ)·k₁k₂·x|γ̇| dt,
//!   line     = 2πσ Σ_j x(t_j).
//!
//! Quadrature: composite trapezoid on the uniform grid, with cells straddling
//! a phase jump split exactly at it. Within a cell the nodal fields k₁, k₂
//! and a = x|γ̇| are interpolated linearly and the densities composed from
//! the interpolated values. Interpolating the (k₁, k₂) pair rather than
//! prebuilt products keeps every quadrature evaluation a genuine curvature
//! pair, so pointwise inequalities between densities (the coercivity bound in
//! [`crate::analysis`]) survive discretization exactly; on cells without a
//! jump the evaluation points are the nodes and the rule reduces to the plain
//! trapezoid sum.
//!
//! The material constants must satisfy κ_H > 0 and κ_G/κ_H ∈ (−2, 0) per
//! phase and σ > 0; these are exactly the conditions under which the energy
//! density admits a positive coercivity constant, and they are enforced at
//! construction.

use crate::geometry::{CurveFields, GeneratorCurve, GeometryError};
use crate::phase::{interface_length, lerp, phase_area, subcells, PhaseLayout};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from parameter validation and energy evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// The bending modulus of a phase must be finite and positive.
    #[error("bending modulus of phase {phase} is {value}, must be positive")]
    InvalidBendingModulus { phase: char, value: f64 },
    /// κ_G/κ_H must lie strictly inside (−2, 0).
    #[error("rigidity ratio κ_G/κ_H of phase {phase} is {ratio}, must be in (-2, 0)")]
    RigidityRatioOutOfRange { phase: char, ratio: f64 },
    /// Spontaneous curvature must be finite.
    #[error("spontaneous curvature of phase {phase} is not finite")]
    NonFiniteSpontaneousCurvature { phase: char },
    /// Line tension must be finite and positive.
    #[error("line tension {value} must be positive")]
    InvalidLineTension { value: f64 },
    /// A system needs at least one component.
    #[error("vesicle system has no components")]
    EmptySystem,
}

/// Bending constants of one material phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMaterial {
    /// Bending modulus κ_H > 0.
    pub kappa_h: f64,
    /// Gaussian modulus κ_G with κ_G/κ_H ∈ (−2, 0).
    pub kappa_g: f64,
    /// Spontaneous curvature H₀ (of the sum k₁+k₂).
    pub h0: f64,
}

impl PhaseMaterial {
    fn validate(&self, phase: char) -> Result<(), EnergyError> {
        if !(self.kappa_h.is_finite() && self.kappa_h > 0.0) {
            return Err(EnergyError::InvalidBendingModulus {
                phase,
                value: self.kappa_h,
            });
        }
        let ratio = self.kappa_g / self.kappa_h;
        if !(ratio.is_finite() && ratio > -2.0 && ratio < 0.0) {
            return Err(EnergyError::RigidityRatioOutOfRange { phase, ratio });
        }
        if !self.h0.is_finite() {
            return Err(EnergyError::NonFiniteSpontaneousCurvature { phase });
        }
        Ok(())
    }
}

/// Full two-phase material: constants for A (phase value 1) and B (value 0)
/// plus the interface line tension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    a: PhaseMaterial,
    b: PhaseMaterial,
    sigma: f64,
}

impl MaterialParams {
    /// Validates the parameter regime (κ_H > 0, κ_G/κ_H ∈ (−2,0), σ > 0).
    pub fn new(a: PhaseMaterial, b: PhaseMaterial, sigma: f64) -> Result<Self, EnergyError> {
        a.validate('A')?;
        b.validate('B')?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(EnergyError::InvalidLineTension { value: sigma });
        }
        Ok(Self { a, b, sigma })
    }

    /// Identical constants in both phases.
    pub fn uniform(m: PhaseMaterial, sigma: f64) -> Result<Self, EnergyError> {
        Self::new(m, m, sigma)
    }

    pub fn phase_a(&self) -> &PhaseMaterial {
        &self.a
    }

    pub fn phase_b(&self) -> &PhaseMaterial {
        &self.b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Constants seen by phase value φ ∈ {0, 1}: φ = 1 is material A.
    pub fn material(&self, value: u8) -> &PhaseMaterial {
        debug_assert!(value <= 1);
        if value == 1 {
            &self.a
        } else {
            &self.b
        }
    }
}

/// Coefficient triple (κ_H(φ), κ_G(φ), H₀(φ)) for a phase value.
pub fn coeffs_at(params: &MaterialParams, value: u8) -> (f64, f64, f64) {
    let m = params.material(value);
    (m.kappa_h, m.kappa_g, m.h0)
}

/// The energy split into its three terms; `total` is their sum in the same
/// arithmetic (so total == bending + gaussian + line exactly).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub gaussian: f64,
    pub line: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(bending: f64, gaussian: f64, line: f64) -> Self {
        Self {
            bending,
            gaussian,
            line,
            total: bending + gaussian + line,
        }
    }

    fn accumulate(terms: impl Iterator<Item = EnergyBreakdown>) -> Self {
        let mut b = 0.0;
        let mut g = 0.0;
        let mut l = 0.0;
        for t in terms {
            b += t.bending;
            g += t.gaussian;
            l += t.line;
        }
        Self::new(b, g, l)
    }
}

/// One membrane: a generator curve with its phase layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub curve: GeneratorCurve,
    pub layout: PhaseLayout,
}

/// A family of disjoint membranes sharing the material parameters; the
/// functionals of the system are the sums over components.
#[derive(Debug, Clone, PartialEq)]
pub struct VesicleSystem {
    components: Vec<Component>,
}

impl VesicleSystem {
    pub fn new(components: Vec<Component>) -> Result<Self, EnergyError> {
        if components.is_empty() {
            return Err(EnergyError::EmptySystem);
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Component] {
        &mut self.components
    }

    pub fn surface_area(&self) -> f64 {
        self.components.iter().map(|c| c.curve.surface_area()).sum()
    }

    pub fn enclosed_volume(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.curve.enclosed_volume())
            .sum()
    }

    pub fn phase_area(&self) -> f64 {
        self.components
            .iter()
            .map(|c| phase_area(&c.curve, &c.layout))
            .sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.components
            .iter()
            .map(|c| interface_length(&c.curve, &c.layout))
            .sum()
    }
}

/// Bending term π ∫ κ_H(φ)(k₁+k₂−H₀(φ))²·x|γ̇| dt.
pub fn bending_energy(
    curve: &GeneratorCurve,
    layout: &PhaseLayout,
    params: &MaterialParams,
) -> Result<f64, EnergyError> {
    Ok(helfrich_energy(curve, layout, params)?.bending)
}

/// Gaussian term 2π ∫ κ_G(φ)·k₁k₂·x|γ̇| dt.
pub fn gaussian_energy(
    curve: &GeneratorCurve,
    layout: &PhaseLayout,
    params: &MaterialParams,
) -> Result<f64, EnergyError> {
    Ok(helfrich_energy(curve, layout, params)?.gaussian)
}

/// Line term σ·2π Σ_j x(t_j).
pub fn line_energy(curve: &GeneratorCurve, layout: &PhaseLayout, params: &MaterialParams) -> f64 {
    params.sigma() * interface_length(curve, layout)
}

/// All three terms of one component.
pub fn helfrich_energy(
    curve: &GeneratorCurve,
    layout: &PhaseLayout,
    params: &MaterialParams,
) -> Result<EnergyBreakdown, EnergyError> {
    let fields = CurveFields::build(curve)?;
    Ok(helfrich_energy_from_fields(&fields, layout, params))
}

/// Energy evaluation on prebuilt fields; shared with the gradient sweep.
pub(crate) fn helfrich_energy_from_fields(
    fields: &CurveFields,
    layout: &PhaseLayout,
    params: &MaterialParams,
) -> EnergyBreakdown {
    let (cells, sites) = subcells(layout, fields.n);
    let h = fields.h;
    let mut bending = 0.0;
    let mut gaussian = 0.0;
    for sc in &cells {
        let m = params.material(sc.value);
        let w = 0.5 * (sc.s1 - sc.s0) * h;
        for s in [sc.s0, sc.s1] {
            let k1 = lerp(fields.k1[sc.cell], fields.k1[sc.cell + 1], s);
            let k2 = lerp(fields.k2[sc.cell], fields.k2[sc.cell + 1], s);
            let a = lerp(fields.a[sc.cell], fields.a[sc.cell + 1], s);
            let dev = k1 + k2 - m.h0;
            bending += w * m.kappa_h * dev * dev * a;
            gaussian += w * m.kappa_g * k1 * k2 * a;
        }
    }
    bending *= std::f64::consts::PI;
    gaussian *= 2.0 * std::f64::consts::PI;
    let mut line = 0.0;
    for site in &sites {
        let x0 = fields.x[site.cell_r];
        let x1 = fields.x[site.cell_r + 1];
        line += lerp(x0, x1, site.s_r);
    }
    line *= 2.0 * std::f64::consts::PI * params.sigma();
    EnergyBreakdown::new(bending, gaussian, line)
}

/// Per-component breakdowns plus their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemEnergy {
    pub per_component: Vec<EnergyBreakdown>,
    pub total: EnergyBreakdown,
}

/// Energy of a whole system: the component sum, no interaction terms.
pub fn system_energy(
    system: &VesicleSystem,
    params: &MaterialParams,
) -> Result<SystemEnergy, EnergyError> {
    let per_component: Vec<EnergyBreakdown> = system
        .components()
        .iter()
        .map(|c| helfrich_energy(&c.curve, &c.layout, params))
        .collect::<Result<_, _>>()?;
    let total = EnergyBreakdown::accumulate(per_component.iter().copied());
    Ok(SystemEnergy {
        per_component,
        total,
    })
}
