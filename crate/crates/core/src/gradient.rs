//! Exact gradients of the discretized functionals.
//!
//! Everything here differentiates the *discretization*, not the continuum
//! limit: the chain runs backwards through the composite-trapezoid sums, the
//! interpolated subcell evaluations, the curvature formulas, and finally the
//! transposed finite-difference stencils. Central finite differences on the
//! assembled functionals therefore agree with these gradients to the order of
//! the difference scheme, which the test suite asserts.
//!
//! Layout of the reverse pass, per node i:
//!
//! 1. adjoint seeds on the nodal fields k₁, k₂, a = x|γ̇| (from the subcell
//!    quadrature), on x directly (line term, volume), and on γ̇₂ (volume);
//! 2. at a pole, the adjoint of k₂ folds into k₁ (the field uses k₂ := k₁
//!    there);
//! 3. chains k₂ = γ̇₂/(x·v), k₁ = (γ̈₂γ̇₁ − γ̈₁γ̇₂)/v³, a = x·v, v = |γ̇|,
//!    accumulating adjoints of x, γ̇, γ̈;
//! 4. the transposed derivative stencils scatter γ̇/γ̈ adjoints to nodes. At
//!    an axis endpoint the reflection stencil makes γ̇₂ and γ̈₁ structurally
//!    zero, so their adjoints are discarded, which is exactly the projection
//!    onto admissible variations (poles stay on the axis).
//!
//! Jump locations: phase-weighted integrals are piecewise smooth in t_j with
//! kinks where a jump crosses a grid node. Strictly inside a cell the
//! derivative of the split trapezoid rule is used verbatim; exactly on a node
//! the mean of the two one-sided derivatives is reported (the optimizer never
//! compares that case against finite differences, and the symmetric choice
//! reproduces the zero line-term gradient of an equatorial jump on the
//! sphere).

use crate::energy::{EnergyError, MaterialParams, PhaseMaterial};
use crate::geometry::{CurveFields, GeneratorCurve};
use crate::phase::{lerp, subcells, JumpSite, PhaseLayout, SubCell};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Gradient of a functional with respect to one component's unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGradient {
    /// d/d(node i) as [∂/∂x_i, ∂/∂z_i]. Entries are also produced for the
    /// pinned pole radii; minimizers must mask those out.
    pub curve: Vec<[f64; 2]>,
    /// d/d(t_j), one entry per jump of the layout.
    pub jumps: Vec<f64>,
}

/// Adjoint seeds on the nodal fields (stage 1 of the reverse pass).
#[derive(Debug, Clone)]
pub(crate) struct Adjoints {
    k1: Vec<f64>,
    k2: Vec<f64>,
    a: Vec<f64>,
    x: Vec<f64>,
    zdot: Vec<f64>,
}

impl Adjoints {
    fn zeros(n: usize) -> Self {
        Self {
            k1: vec![0.0; n + 1],
            k2: vec![0.0; n + 1],
            a: vec![0.0; n + 1],
            x: vec![0.0; n + 1],
            zdot: vec![0.0; n + 1],
        }
    }
}

/// Linear combination weights for one fused gradient assembly.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Weights {
    pub energy: f64,
    pub area: f64,
    pub volume: f64,
    pub phase_area: f64,
}

/// Gradient of the total energy (bending + gaussian + line) of a component.
pub fn energy_gradient(
    curve: &GeneratorCurve,
    layout: &PhaseLayout,
    params: &MaterialParams,
) -> Result<EnergyGradient, EnergyError> {
    let fields = CurveFields::build(curve)?;
    Ok(weighted_gradient(
        &fields,
        layout,
        params,
        &Weights {
            energy: 1.0,
            ..Weights::default()
        },
    ))
}

/// Gradient of the surface area with respect to the node coordinates.
pub fn area_gradient(curve: &GeneratorCurve) -> Result<Vec<[f64; 2]>, EnergyError> {
    let fields = CurveFields::build(curve)?;
    let mut adj = Adjoints::zeros(fields.n);
    scatter_area(&fields, 1.0, &mut adj);
    Ok(backprop(&fields, &adj))
}

/// Gradient of the signed enclosed volume with respect to the nodes.
pub fn volume_gradient(curve: &GeneratorCurve) -> Result<Vec<[f64; 2]>, EnergyError> {
    let fields = CurveFields::build(curve)?;
    let mut adj = Adjoints::zeros(fields.n);
    scatter_volume(&fields, 1.0, &mut adj);
    Ok(backprop(&fields, &adj))
}

/// Gradient of the A-phase area with respect to nodes and jump locations.
pub fn phase_area_gradient(
    curve: &GeneratorCurve,
    layout: &PhaseLayout,
) -> Result<EnergyGradient, EnergyError> {
    let fields = CurveFields::build(curve)?;
    let (cells, sites) = subcells(layout, fields.n);
    let mut adj = Adjoints::zeros(fields.n);
    let mut jumps = vec![0.0; layout.jump_count()];
    scatter_phase_area(&fields, &cells, 1.0, &mut adj);
    for site in &sites {
        jumps[site.jump] = jump_derivative(&fields, site, None, 1.0);
    }
    Ok(EnergyGradient {
        curve: backprop(&fields, &adj),
        jumps,
    })
}

/// Fused gradient of w_E·F + w_A·area + w_V·volume + w_Π·phase_area, built
/// with one adjoint accumulation and one reverse pass. The optimizer's
/// augmented objective is exactly such a combination.
pub(crate) fn weighted_gradient(
    fields: &CurveFields,
    layout: &PhaseLayout,
    params: &MaterialParams,
    w: &Weights,
) -> EnergyGradient {
    let (cells, sites) = subcells(layout, fields.n);
    let mut adj = Adjoints::zeros(fields.n);
    let mut jumps = vec![0.0; layout.jump_count()];
    if w.energy != 0.0 {
        scatter_energy(fields, &cells, &sites, params, w.energy, &mut adj);
    }
    if w.area != 0.0 {
        scatter_area(fields, w.area, &mut adj);
    }
    if w.volume != 0.0 {
        scatter_volume(fields, w.volume, &mut adj);
    }
    if w.phase_area != 0.0 {
        scatter_phase_area(fields, &cells, w.phase_area, &mut adj);
    }
    for site in &sites {
        let mut g = 0.0;
        if w.energy != 0.0 {
            g += jump_derivative(fields, site, Some(params), 0.0) * w.energy;
            g += line_jump_derivative(fields, site, params.sigma()) * w.energy;
        }
        if w.phase_area != 0.0 {
            g += jump_derivative(fields, site, None, 1.0) * w.phase_area;
        }
        jumps[site.jump] = g;
    }
    EnergyGradient {
        curve: backprop(fields, &adj),
        jumps,
    }
}

fn scatter_area(fields: &CurveFields, w: f64, adj: &mut Adjoints) {
    for i in 0..=fields.n {
        adj.a[i] += w * TWO_PI * fields.trap_weight(i);
    }
}

fn scatter_volume(fields: &CurveFields, w: f64, adj: &mut Adjoints) {
    for i in 0..=fields.n {
        let tw = std::f64::consts::PI * fields.trap_weight(i);
        adj.x[i] += w * tw * 2.0 * fields.x[i] * fields.vel[i][1];
        adj.zdot[i] += w * tw * fields.x[i] * fields.x[i];
    }
}

fn scatter_phase_area(fields: &CurveFields, cells: &[SubCell], w: f64, adj: &mut Adjoints) {
    for sc in cells {
        if sc.value != 1 {
            continue;
        }
        let wq = w * TWO_PI * 0.5 * (sc.s1 - sc.s0) * fields.h;
        for s in [sc.s0, sc.s1] {
            adj.a[sc.cell] += wq * (1.0 - s);
            adj.a[sc.cell + 1] += wq * s;
        }
    }
}

fn scatter_energy(
    fields: &CurveFields,
    cells: &[SubCell],
    sites: &[JumpSite],
    params: &MaterialParams,
    w: f64,
    adj: &mut Adjoints,
) {
    let pi = std::f64::consts::PI;
    for sc in cells {
        let m = params.material(sc.value);
        let wq = w * 0.5 * (sc.s1 - sc.s0) * fields.h;
        for s in [sc.s0, sc.s1] {
            let c = sc.cell;
            let k1 = lerp(fields.k1[c], fields.k1[c + 1], s);
            let k2 = lerp(fields.k2[c], fields.k2[c + 1], s);
            let a = lerp(fields.a[c], fields.a[c + 1], s);
            let dev = k1 + k2 - m.h0;
            // bending density κ_H·dev²·a (outer π), gaussian κ_G·k₁k₂·a (2π)
            let dk_b = pi * m.kappa_h * 2.0 * dev * a;
            let da_b = pi * m.kappa_h * dev * dev;
            let dk1_g = TWO_PI * m.kappa_g * k2 * a;
            let dk2_g = TWO_PI * m.kappa_g * k1 * a;
            let da_g = TWO_PI * m.kappa_g * k1 * k2;
            let (w0, w1) = (wq * (1.0 - s), wq * s);
            adj.k1[c] += w0 * (dk_b + dk1_g);
            adj.k1[c + 1] += w1 * (dk_b + dk1_g);
            adj.k2[c] += w0 * (dk_b + dk2_g);
            adj.k2[c + 1] += w1 * (dk_b + dk2_g);
            adj.a[c] += w0 * (da_b + da_g);
            adj.a[c + 1] += w1 * (da_b + da_g);
        }
    }
    // Line term σ·2π·x̃(t_j): direct x adjoints at the straddling nodes.
    for site in sites {
        let w_line = w * TWO_PI * params.sigma();
        adj.x[site.cell_r] += w_line * (1.0 - site.s_r);
        adj.x[site.cell_r + 1] += w_line * site.s_r;
    }
}

/// Density of the t-integrand at local coordinate s of a cell, together with
/// its s-derivative. With `params` set, this is the full curvature density
/// π·κ_H·dev²·a + 2π·κ_G·k₁k₂·a of the given phase value; without, it is
/// `phase_weight`·2π·a for the phase-area functional (value 1 only).
fn density(
    fields: &CurveFields,
    cell: usize,
    s: f64,
    value: u8,
    params: Option<&MaterialParams>,
    phase_weight: f64,
) -> (f64, f64) {
    let c = cell;
    let a = lerp(fields.a[c], fields.a[c + 1], s);
    let da = fields.a[c + 1] - fields.a[c];
    match params {
        Some(p) => {
            let m: &PhaseMaterial = p.material(value);
            let k1 = lerp(fields.k1[c], fields.k1[c + 1], s);
            let k2 = lerp(fields.k2[c], fields.k2[c + 1], s);
            let dk1 = fields.k1[c + 1] - fields.k1[c];
            let dk2 = fields.k2[c + 1] - fields.k2[c];
            let pi = std::f64::consts::PI;
            let dev = k1 + k2 - m.h0;
            let f = pi * m.kappa_h * dev * dev * a + TWO_PI * m.kappa_g * k1 * k2 * a;
            let df = pi * m.kappa_h * (2.0 * dev * (dk1 + dk2) * a + dev * dev * da)
                + TWO_PI * m.kappa_g * (dk1 * k2 * a + k1 * dk2 * a + k1 * k2 * da);
            (f, df)
        }
        None => {
            if value == 1 {
                (phase_weight * TWO_PI * a, phase_weight * TWO_PI * da)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// d(integral term)/d(t_j) for one jump site: the derivative of the split
/// trapezoid rule, or the mean of the one-sided derivatives at a grid-node
/// kink. The grid factor h cancels against ds/dt = 1/h, so the result is
/// already per unit t.
fn jump_derivative(
    fields: &CurveFields,
    site: &JumpSite,
    params: Option<&MaterialParams>,
    phase_weight: f64,
) -> f64 {
    let eval =
        |cell: usize, s: f64, value: u8| density(fields, cell, s, value, params, phase_weight);
    let left_part = |cell: usize, prev: f64, s: f64, value: u8| {
        let (fp, _) = eval(cell, prev, value);
        let (fs, dfs) = eval(cell, s, value);
        0.5 * (fp + fs) + 0.5 * (s - prev) * dfs
    };
    let right_part = |cell: usize, s: f64, next: f64, value: u8| {
        let (fs, dfs) = eval(cell, s, value);
        let (fnx, _) = eval(cell, next, value);
        -0.5 * (fs + fnx) + 0.5 * (next - s) * dfs
    };
    if !site.coincident {
        left_part(site.cell_l, site.prev, site.s_l, site.value_l)
            + right_part(site.cell_r, site.s_r, site.next, site.value_r)
    } else {
        // One-sided derivatives: moving right grows a sliver of the left
        // value in cell_r; moving left shrinks the right value in cell_l.
        let d_right = right_part(site.cell_r, 0.0, site.next, site.value_r)
            + eval(site.cell_r, 0.0, site.value_l).0;
        let d_left = left_part(site.cell_l, site.prev, 1.0, site.value_l)
            - eval(site.cell_l, 1.0, site.value_r).0;
        0.5 * (d_right + d_left)
    }
}

/// d(line term)/d(t_j): σ·2π times the slope of the piecewise-linear radius,
/// with the node-kink handled by the same one-sided mean.
fn line_jump_derivative(fields: &CurveFields, site: &JumpSite, sigma: f64) -> f64 {
    let slope = |cell: usize| (fields.x[cell + 1] - fields.x[cell]) / fields.h;
    let s = if !site.coincident {
        slope(site.cell_r)
    } else {
        0.5 * (slope(site.cell_r) + slope(site.cell_l))
    };
    TWO_PI * sigma * s
}

/// Stages 2–4 of the reverse pass: nodal field adjoints to coordinate
/// gradient.
pub(crate) fn backprop(f: &CurveFields, adj: &Adjoints) -> Vec<[f64; 2]> {
    let n = f.n;
    let h = f.h;
    let mut grad = vec![[0.0; 2]; n + 1];
    for i in 0..=n {
        let pole = (i == 0 && f.closed_start) || (i == n && f.closed_end);
        let mut bk1 = adj.k1[i];
        let mut bk2 = adj.k2[i];
        if pole {
            bk1 += bk2;
            bk2 = 0.0;
        }
        let x = f.x[i];
        let (xd, zd) = (f.vel[i][0], f.vel[i][1]);
        let (xdd, _zdd) = (f.acc[i][0], f.acc[i][1]);
        let v = f.speed[i];
        let mut bx = adj.x[i];
        let mut bv = 0.0;
        let mut bxd = 0.0;
        let mut bzd = adj.zdot[i];
        let mut bxdd = 0.0;
        let mut bzdd = 0.0;
        if bk2 != 0.0 {
            // k₂ = γ̇₂/(x·v)
            let k2 = f.k2[i];
            bzd += bk2 / (x * v);
            bx -= bk2 * k2 / x;
            bv -= bk2 * k2 / v;
        }
        if bk1 != 0.0 {
            // k₁ = (γ̈₂γ̇₁ − γ̈₁γ̇₂)/v³
            let iv3 = 1.0 / (v * v * v);
            bxd += bk1 * f.acc[i][1] * iv3;
            bzdd += bk1 * xd * iv3;
            bxdd -= bk1 * zd * iv3;
            bzd -= bk1 * xdd * iv3;
            bv -= 3.0 * bk1 * f.k1[i] / v;
        }
        // a = x·v
        bx += adj.a[i] * v;
        bv += adj.a[i] * x;
        // v = |γ̇|
        bxd += bv * xd / v;
        bzd += bv * zd / v;
        grad[i][0] += bx;
        // Transposed stencils.
        if i > 0 && i < n {
            let c1 = 1.0 / (2.0 * h);
            let c2 = 1.0 / (h * h);
            grad[i + 1][0] += bxd * c1 + bxdd * c2;
            grad[i - 1][0] += -bxd * c1 + bxdd * c2;
            grad[i][0] += -2.0 * bxdd * c2;
            grad[i + 1][1] += bzd * c1 + bzdd * c2;
            grad[i - 1][1] += -bzd * c1 + bzdd * c2;
            grad[i][1] += -2.0 * bzdd * c2;
        } else if i == 0 {
            if f.closed_start {
                // γ̇₀ = (x₁/h, 0), γ̈₀ = (0, 2(z₁−z₀)/h²): the γ̇₂ and γ̈₁
                // adjoints stop here (structural zeros of the reflection).
                grad[1][0] += bxd / h;
                let c = 2.0 / (h * h);
                grad[1][1] += bzdd * c;
                grad[0][1] -= bzdd * c;
            } else {
                let c1 = 1.0 / (2.0 * h);
                let c2 = 1.0 / (h * h);
                for (node, (wv, wa)) in [
                    (0, (-3.0, 2.0)),
                    (1, (4.0, -5.0)),
                    (2, (-1.0, 4.0)),
                    (3, (0.0, -1.0)),
                ] {
                    grad[node][0] += bxd * wv * c1 + bxdd * wa * c2;
                    grad[node][1] += bzd * wv * c1 + bzdd * wa * c2;
                }
            }
        } else if f.closed_end {
            // γ̇_N = (−x_{N−1}/h, 0), γ̈_N = (0, 2(z_{N−1}−z_N)/h²)
            grad[n - 1][0] -= bxd / h;
            let c = 2.0 / (h * h);
            grad[n - 1][1] += bzdd * c;
            grad[n][1] -= bzdd * c;
        } else {
            let c1 = 1.0 / (2.0 * h);
            let c2 = 1.0 / (h * h);
            for (off, (wv, wa)) in [
                (0, (3.0, 2.0)),
                (1, (-4.0, -5.0)),
                (2, (1.0, 4.0)),
                (3, (0.0, -1.0)),
            ] {
                grad[n - off][0] += bxd * wv * c1 + bxdd * wa * c2;
                grad[n - off][1] += bzd * wv * c1 + bzdd * wa * c2;
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::helfrich_energy;
    use crate::phase::phase_area;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn test_params() -> MaterialParams {
        MaterialParams::new(
            PhaseMaterial {
                kappa_h: 1.0,
                kappa_g: -1.0,
                h0: 0.3,
            },
            PhaseMaterial {
                kappa_h: 2.0,
                kappa_g: -1.5,
                h0: -0.2,
            },
            0.7,
        )
        .unwrap()
    }

    fn base_curve(n: usize) -> GeneratorCurve {
        GeneratorCurve::perturbed_sphere(n, 1.0, &[0.05, 0.03, -0.04]).unwrap()
    }

    fn base_layout() -> PhaseLayout {
        PhaseLayout::new(1, vec![0.31, 0.77]).unwrap()
    }

    /// 4th-order central difference of f along one scalar parameter.
    fn diff5(mut f: impl FnMut(f64) -> f64, eps: f64) -> f64 {
        (f(-2.0 * eps) - 8.0 * f(-eps) + 8.0 * f(eps) - f(2.0 * eps)) / (12.0 * eps)
    }

    fn perturbed(curve: &GeneratorCurve, node: usize, coord: usize, d: f64) -> GeneratorCurve {
        let mut s = curve.samples().to_vec();
        s[node][coord] += d;
        GeneratorCurve::new(s).unwrap()
    }

    #[test]
    fn per_coordinate_agreement_with_finite_differences() {
        let n = 48;
        let curve = base_curve(n);
        let layout = base_layout();
        let params = test_params();
        let g = energy_gradient(&curve, &layout, &params).unwrap();
        let eps = 1e-5;
        let gmax = g
            .curve
            .iter()
            .flat_map(|p| p.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        let mut worst = 0.0_f64;
        for i in 0..=n {
            for coord in 0..2 {
                if coord == 0 && (i == 0 || i == n) {
                    continue; // pole radii are pinned to the axis
                }
                let fd = diff5(
                    |d| {
                        helfrich_energy(&perturbed(&curve, i, coord, d), &layout, &params)
                            .unwrap()
                            .total
                    },
                    eps,
                );
                let got = g.curve[i][coord];
                let rel = (got - fd).abs() / fd.abs().max(1e-8 * gmax);
                worst = worst.max(rel);
                assert!(
                    rel < 1e-5,
                    "node {i} coord {coord}: {got} vs {fd} (rel {rel:.2e})"
                );
            }
        }
        assert!(worst > 0.0, "finite differences degenerate");
    }

    #[test]
    fn jump_locations_agree_with_finite_differences() {
        let curve = base_curve(48);
        let layout = base_layout();
        let params = test_params();
        let g = energy_gradient(&curve, &layout, &params).unwrap();
        for j in 0..layout.jump_count() {
            let fd = diff5(
                |d| {
                    let mut jumps = layout.jumps().to_vec();
                    jumps[j] += d;
                    let moved = PhaseLayout::new(layout.leading_value(), jumps).unwrap();
                    helfrich_energy(&curve, &moved, &params).unwrap().total
                },
                1e-6,
            );
            let rel = (g.jumps[j] - fd).abs() / fd.abs().max(1e-10);
            assert!(rel < 1e-5, "jump {j}: {} vs {fd}", g.jumps[j]);
        }
    }

    #[test]
    fn directional_derivatives_along_smooth_fields() {
        let n = 200;
        let curve = base_curve(n);
        let layout = base_layout();
        let params = test_params();
        let g = energy_gradient(&curve, &layout, &params).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let ax: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let az: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dj: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // sin(kπt) vanishes at the poles only up to rounding, which is
            // enough to push a pole radius negative; pin those exactly so
            // the direction stays admissible.
            let dir = |i: usize| -> [f64; 2] {
                let t = i as f64 / n as f64;
                let dx: f64 = if i == 0 || i == n {
                    0.0
                } else {
                    ax.iter()
                        .enumerate()
                        .map(|(k, a)| a * ((k + 1) as f64 * PI * t).sin())
                        .sum()
                };
                let dz: f64 = az
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * ((k + 1) as f64 * PI * t).cos())
                    .sum();
                [dx, dz]
            };
            let evaluate = |d: f64| {
                let samples: Vec<[f64; 2]> = curve
                    .samples()
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let v = dir(i);
                        [p[0] + d * v[0], p[1] + d * v[1]]
                    })
                    .collect();
                let moved = GeneratorCurve::new(samples).unwrap();
                let jumps: Vec<f64> = layout
                    .jumps()
                    .iter()
                    .zip(&dj)
                    .map(|(t, w)| t + d * w)
                    .collect();
                let ml = PhaseLayout::new(layout.leading_value(), jumps).unwrap();
                helfrich_energy(&moved, &ml, &params).unwrap().total
            };
            let eps = 1e-5;
            let fd = (evaluate(eps) - evaluate(-eps)) / (2.0 * eps);
            let mut analytic = 0.0;
            for (i, gi) in g.curve.iter().enumerate() {
                let v = dir(i);
                analytic += gi[0] * v[0] + gi[1] * v[1];
            }
            for (gj, w) in g.jumps.iter().zip(&dj) {
                analytic += gj * w;
            }
            let rel = (analytic - fd).abs() / fd.abs().max(analytic.abs());
            assert!(
                rel < 1e-5,
                "directional: {analytic} vs {fd} (rel {rel:.2e})"
            );
        }
    }

    #[test]
    fn z_translation_is_in_the_kernel() {
        let curve = base_curve(400);
        let g = energy_gradient(&curve, &base_layout(), &test_params()).unwrap();
        let sum: f64 = g.curve.iter().map(|p| p[1]).sum();
        assert!(sum.abs() < 1e-8, "z-translation leak {sum}");
    }

    #[test]
    fn equatorial_node_jump_has_symmetric_zero_line_gradient() {
        // On the unit sphere an equatorial jump sits exactly on a grid node
        // (N even); the one-sided line derivatives are ±σ2π·slope and cancel.
        let curve = GeneratorCurve::spheroid(400, 1.0, 1.0).unwrap();
        let layout = PhaseLayout::new(1, vec![0.5]).unwrap();
        let params = crate::energy::MaterialParams::uniform(
            PhaseMaterial {
                kappa_h: 1.0,
                kappa_g: -1.0,
                h0: 0.0,
            },
            1.0,
        )
        .unwrap();
        let fields = CurveFields::build(&curve).unwrap();
        let (_, sites) = subcells(&layout, fields.n);
        assert!(sites[0].coincident);
        let lg = line_jump_derivative(&fields, &sites[0], params.sigma());
        assert!(lg.abs() < 1e-12, "line gradient {lg}");
    }

    #[test]
    fn area_and_volume_gradients_match_finite_differences() {
        let n = 48;
        let curve = base_curve(n);
        let ga = area_gradient(&curve).unwrap();
        let gv = volume_gradient(&curve).unwrap();
        let eps = 1e-5;
        for i in (0..=n).step_by(5) {
            for coord in 0..2 {
                if coord == 0 && (i == 0 || i == n) {
                    continue;
                }
                let fa = diff5(|d| perturbed(&curve, i, coord, d).surface_area(), eps);
                let fv = diff5(|d| perturbed(&curve, i, coord, d).enclosed_volume(), eps);
                assert!(
                    (ga[i][coord] - fa).abs() < 1e-7 * (1.0 + fa.abs()),
                    "area node {i}/{coord}: {} vs {fa}",
                    ga[i][coord]
                );
                assert!(
                    (gv[i][coord] - fv).abs() < 1e-7 * (1.0 + fv.abs()),
                    "volume node {i}/{coord}: {} vs {fv}",
                    gv[i][coord]
                );
            }
        }
    }

    #[test]
    fn phase_area_gradient_matches_finite_differences() {
        let n = 48;
        let curve = base_curve(n);
        let layout = base_layout();
        let g = phase_area_gradient(&curve, &layout).unwrap();
        let eps = 1e-5;
        for i in (1..n).step_by(7) {
            for coord in 0..2 {
                let fd = diff5(
                    |d| phase_area(&perturbed(&curve, i, coord, d), &layout),
                    eps,
                );
                assert!(
                    (g.curve[i][coord] - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                    "node {i}/{coord}: {} vs {fd}",
                    g.curve[i][coord]
                );
            }
        }
        for j in 0..layout.jump_count() {
            let fd = diff5(
                |d| {
                    let mut jumps = layout.jumps().to_vec();
                    jumps[j] += d;
                    phase_area(
                        &curve,
                        &PhaseLayout::new(layout.leading_value(), jumps).unwrap(),
                    )
                },
                1e-6,
            );
            assert!(
                (g.jumps[j] - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                "jump {j}: {} vs {fd}",
                g.jumps[j]
            );
        }
    }

    #[test]
    fn fused_gradient_matches_the_sum_of_parts() {
        let curve = base_curve(64);
        let layout = base_layout();
        let params = test_params();
        let fields = CurveFields::build(&curve).unwrap();
        let w = Weights {
            energy: 1.25,
            area: -0.5,
            volume: 2.0,
            phase_area: 0.75,
        };
        let fused = weighted_gradient(&fields, &layout, &params, &w);
        let ge = energy_gradient(&curve, &layout, &params).unwrap();
        let ga = area_gradient(&curve).unwrap();
        let gv = volume_gradient(&curve).unwrap();
        let gp = phase_area_gradient(&curve, &layout).unwrap();
        for i in 0..fused.curve.len() {
            for c in 0..2 {
                let want = w.energy * ge.curve[i][c]
                    + w.area * ga[i][c]
                    + w.volume * gv[i][c]
                    + w.phase_area * gp.curve[i][c];
                assert!(
                    (fused.curve[i][c] - want).abs() < 1e-9 * (1.0 + want.abs()),
                    "node {i}/{c}"
                );
            }
        }
        for j in 0..fused.jumps.len() {
            let want = w.energy * ge.jumps[j] + w.phase_area * gp.jumps[j];
            assert!((fused.jumps[j] - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }
}
