//! Generator curves for surfaces of revolution and their discrete geometry.
//!
//! A surface is produced by revolving a planar curve γ(t) = (x(t), z(t)),
//! t ∈ [0,1], about the z-axis; x is the distance from the axis and must be
//! nonnegative. The curve is stored as N+1 samples on the uniform grid
//! t_i = i/N. An endpoint lying exactly on the axis (x = 0) closes the
//! surface there with a pole; a surface closed at both ends is a topological
//! sphere.
//!
//! Discrete derivatives use second-order stencils with spacing h = 1/N:
//! central differences at interior nodes, and at the ends either
//!
//! - the reflection rule at an axis endpoint, which extends the curve through
//!   the pole by the ghost node (−x₁, z₁) (and mirrored at t = 1). This bakes
//!   in γ̇₂ = 0 at the pole, exactly the orthogonality a smooth closed
//!   surface requires, and yields γ̇₀ = (x₁/h, 0), γ̈₀ = (0, 2(z₁−z₀)/h²);
//! - one-sided second-order stencils at an open end.
//!
//! Principal curvatures at a node: k₁ = (γ̈₂γ̇₁ − γ̈₁γ̇₂)/|γ̇|³ along the
//! meridian and k₂ = γ̇₂/(γ₁|γ̇|) along the parallel. At a pole the parallel
//! curvature formula is 0/0; poles of smooth surfaces are umbilical, so
//! k₂ := k₁ there. Surface area and enclosed volume are composite-trapezoid
//! sums of 2π·x|γ̇| and π·x²γ̇₂; the volume is signed (positive when the
//! curve runs counterclockwise around the enclosed region) and is reported,
//! never clamped.
//!
//! [`admissibility_check`] is a diagnostic, not a validator: it recomputes
//! endpoint tangents with *raw one-sided* stencils, so a curve that meets the
//! axis at a slant (a cone tip) is flagged even though the reflection rule
//! used by the curvature pipeline would hide the defect by construction.

use thiserror::Error;

/// Default relative tolerance on |γ̇₂|/|γ̇| at an axis endpoint, above which
/// [`admissibility_check`] reports a non-orthogonal meridian. The one-sided
/// stencil applied to an exact hemisphere leaves a residual of roughly
/// π⁴h³/4, so grids coarser than N ≈ 150 need a looser value.
pub const DEFAULT_ORTHOGONALITY_TOL: f64 = 1e-6;

/// Everything that can go wrong while building or differentiating a curve.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// Fewer than 8 segments cannot support the second-order stencils.
    #[error("curve has {n} segments, need at least 8")]
    TooFewSegments { n: usize },
    /// NaN or infinite coordinate.
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    /// Radius x_i < 0 makes the revolved surface ill-defined.
    #[error("sample {index} has negative radius")]
    NegativeRadius { index: usize },
    /// x_i = 0 strictly inside the parameter interval pinches the surface.
    #[error("interior sample {index} touches the axis")]
    InteriorAxisTouch { index: usize },
    /// Two consecutive samples coincide; the chord has zero length.
    #[error("segment {index} is degenerate (coincident samples)")]
    DegenerateSegment { index: usize },
    /// The finite-difference velocity vanished at a node, so curvature is
    /// undefined there (e.g. a hairpin where γ(t_{i−1}) = γ(t_{i+1})).
    #[error("finite-difference speed vanishes at node {index}")]
    DegenerateSpeed { index: usize },
    /// Operation requires a surface closed at both ends.
    #[error("curve is not closed at both axis endpoints")]
    NotClosed,
}

/// A sampled generator curve on the uniform grid t_i = i/N.
///
/// Construction validates the hard invariants: at least 8 segments, finite
/// coordinates, x_i ≥ 0 everywhere, x_i > 0 strictly inside, and no
/// zero-length segment. Whether an end is an axis pole is decided by exact
/// comparison x = 0 and fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorCurve {
    samples: Vec<[f64; 2]>,
    closed_start: bool,
    closed_end: bool,
}

impl GeneratorCurve {
    /// Validates `samples` and wraps them as a curve.
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self, GeometryError> {
        if samples.len() < 9 {
            return Err(GeometryError::TooFewSegments {
                n: samples.len().saturating_sub(1),
            });
        }
        let last = samples.len() - 1;
        for (i, p) in samples.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(GeometryError::NonFiniteSample { index: i });
            }
            if p[0] < 0.0 {
                return Err(GeometryError::NegativeRadius { index: i });
            }
            if p[0] == 0.0 && i != 0 && i != last {
                return Err(GeometryError::InteriorAxisTouch { index: i });
            }
        }
        for i in 0..last {
            let dx = samples[i + 1][0] - samples[i][0];
            let dz = samples[i + 1][1] - samples[i][1];
            if dx == 0.0 && dz == 0.0 {
                return Err(GeometryError::DegenerateSegment { index: i });
            }
        }
        let closed_start = samples[0][0] == 0.0;
        let closed_end = samples[last][0] == 0.0;
        Ok(Self {
            samples,
            closed_start,
            closed_end,
        })
    }

    /// Spheroid generator γ(t) = (a·sin πt, −c·cos πt): the sphere of radius
    /// a when a = c, prolate for c > a, oblate for c < a. Closed at both
    /// ends, counterclockwise, enclosed volume 4πa²c/3.
    pub fn spheroid(n_segments: usize, a: f64, c: f64) -> Result<Self, GeometryError> {
        let n = n_segments;
        let samples = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let x = if i == 0 || i == n {
                    0.0
                } else {
                    a * (std::f64::consts::PI * t).sin()
                };
                [x, -c * (std::f64::consts::PI * t).cos()]
            })
            .collect();
        Self::new(samples)
    }

    /// Radially perturbed sphere γ(t) = (ρ(t) sin πt, −ρ(t) cos πt) with
    /// ρ(t) = r₀ + Σ_k amps[k]·cos((k+1)πt). Since ρ̇ vanishes at t ∈ {0,1},
    /// the curve meets the axis orthogonally in exact arithmetic for any
    /// amplitude choice; keep Σ|amps| < r₀ so the radius stays positive.
    pub fn perturbed_sphere(
        n_segments: usize,
        r0: f64,
        amps: &[f64],
    ) -> Result<Self, GeometryError> {
        let n = n_segments;
        let pi = std::f64::consts::PI;
        let samples = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let rho: f64 = r0
                    + amps
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a * ((k + 1) as f64 * pi * t).cos())
                        .sum::<f64>();
                if i == 0 || i == n {
                    [0.0, -rho * (pi * t).cos()]
                } else {
                    [rho * (pi * t).sin(), -rho * (pi * t).cos()]
                }
            })
            .collect();
        Self::new(samples)
    }

    /// Number of segments N (one less than the number of samples).
    pub fn n_segments(&self) -> usize {
        self.samples.len() - 1
    }

    /// Grid spacing h = 1/N.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_segments() as f64
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    /// True when the start (t = 0) lies on the axis.
    pub fn closed_start(&self) -> bool {
        self.closed_start
    }

    /// True when the end (t = 1) lies on the axis.
    pub fn closed_end(&self) -> bool {
        self.closed_end
    }

    /// True when both ends are poles, i.e. the revolved surface is closed.
    pub fn is_closed(&self) -> bool {
        self.closed_start && self.closed_end
    }

    /// Radius x(t) by piecewise-linear interpolation of the samples.
    pub fn radius_at(&self, t: f64) -> f64 {
        let n = self.n_segments();
        let u = (t.clamp(0.0, 1.0)) * n as f64;
        let cell = (u.floor() as usize).min(n - 1);
        let s = u - cell as f64;
        (1.0 - s) * self.samples[cell][0] + s * self.samples[cell + 1][0]
    }

    /// The same curve with both coordinates multiplied by `s` (> 0).
    pub fn scaled(&self, s: f64) -> GeneratorCurve {
        GeneratorCurve {
            samples: self.samples.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
            closed_start: self.closed_start,
            closed_end: self.closed_end,
        }
    }

    /// Nodal velocity γ̇ and acceleration γ̈ (see the module doc for the
    /// stencil rules at the two kinds of endpoint).
    pub fn derivatives(&self) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let n = self.n_segments();
        let h = self.spacing();
        let p = &self.samples;
        let mut vel = vec![[0.0; 2]; n + 1];
        let mut acc = vec![[0.0; 2]; n + 1];
        for i in 1..n {
            vel[i] = [
                (p[i + 1][0] - p[i - 1][0]) / (2.0 * h),
                (p[i + 1][1] - p[i - 1][1]) / (2.0 * h),
            ];
            acc[i] = [
                (p[i + 1][0] - 2.0 * p[i][0] + p[i - 1][0]) / (h * h),
                (p[i + 1][1] - 2.0 * p[i][1] + p[i - 1][1]) / (h * h),
            ];
        }
        if self.closed_start {
            vel[0] = [p[1][0] / h, 0.0];
            acc[0] = [0.0, 2.0 * (p[1][1] - p[0][1]) / (h * h)];
        } else {
            vel[0] = [
                (-3.0 * p[0][0] + 4.0 * p[1][0] - p[2][0]) / (2.0 * h),
                (-3.0 * p[0][1] + 4.0 * p[1][1] - p[2][1]) / (2.0 * h),
            ];
            acc[0] = [
                (2.0 * p[0][0] - 5.0 * p[1][0] + 4.0 * p[2][0] - p[3][0]) / (h * h),
                (2.0 * p[0][1] - 5.0 * p[1][1] + 4.0 * p[2][1] - p[3][1]) / (h * h),
            ];
        }
        if self.closed_end {
            vel[n] = [-p[n - 1][0] / h, 0.0];
            acc[n] = [0.0, 2.0 * (p[n - 1][1] - p[n][1]) / (h * h)];
        } else {
            vel[n] = [
                (3.0 * p[n][0] - 4.0 * p[n - 1][0] + p[n - 2][0]) / (2.0 * h),
                (3.0 * p[n][1] - 4.0 * p[n - 1][1] + p[n - 2][1]) / (2.0 * h),
            ];
            acc[n] = [
                (2.0 * p[n][0] - 5.0 * p[n - 1][0] + 4.0 * p[n - 2][0] - p[n - 3][0]) / (h * h),
                (2.0 * p[n][1] - 5.0 * p[n - 1][1] + 4.0 * p[n - 2][1] - p[n - 3][1]) / (h * h),
            ];
        }
        (vel, acc)
    }

    /// Nodal principal curvatures together with the speed |γ̇| and the area
    /// quadrature weights.
    pub fn principal_curvatures(&self) -> Result<CurvatureField, GeometryError> {
        let f = CurveFields::build(self)?;
        let n = self.n_segments();
        let h = self.spacing();
        let weight = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 * h } else { h };
                2.0 * std::f64::consts::PI * f.a[i] * w
            })
            .collect();
        Ok(CurvatureField {
            k1: f.k1,
            k2: f.k2,
            speed: f.speed,
            weight,
        })
    }

    /// Surface area 2π ∫ x|γ̇| dt by the composite trapezoid rule.
    pub fn surface_area(&self) -> f64 {
        let (vel, _) = self.derivatives();
        let n = self.n_segments();
        let h = self.spacing();
        let mut total = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            let speed = (vel[i][0] * vel[i][0] + vel[i][1] * vel[i][1]).sqrt();
            total += w * self.samples[i][0] * speed;
        }
        2.0 * std::f64::consts::PI * total
    }

    /// Signed enclosed volume π ∫ x² γ̇₂ dt: positive for a counterclockwise
    /// generator (interior on the left), negative when orientation reverses.
    pub fn enclosed_volume(&self) -> f64 {
        let (vel, _) = self.derivatives();
        let n = self.n_segments();
        let h = self.spacing();
        let mut total = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            total += w * self.samples[i][0] * self.samples[i][0] * vel[i][1];
        }
        std::f64::consts::PI * total
    }

    /// Admissibility diagnostics with the default orthogonality tolerance.
    pub fn admissibility_check(&self) -> AdmissibilityReport {
        admissibility_check(&self.samples, DEFAULT_ORTHOGONALITY_TOL)
    }

    /// Cumulative polyline (chord) length at every node, starting at 0.
    pub fn chord_lengths(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.samples.len());
        acc.push(0.0);
        let mut total = 0.0;
        for w in self.samples.windows(2) {
            let dx = w[1][0] - w[0][0];
            let dz = w[1][1] - w[0][1];
            total += (dx * dx + dz * dz).sqrt();
            acc.push(total);
        }
        acc
    }

    /// Resamples the curve so nodes sit at equal fractions of arc length.
    ///
    /// Cumulative chord length is interpolated by a monotone cubic, inverted
    /// at the target fractions k·L/N, and the positions are evaluated with a
    /// cubic Hermite interpolant of the samples. Node count, endpoints, and
    /// axis-closure flags are preserved; a curve that is already constant
    /// speed is a fixed point up to rounding.
    pub fn reparametrize_constant_speed(&self) -> Result<GeneratorCurve, GeometryError> {
        let n = self.n_segments();
        let arc = MonotoneCubic::new(self.chord_lengths());
        let total = arc.last();
        let hermite_x = CubicHermite::new(self.samples.iter().map(|p| p[0]).collect());
        let hermite_z = CubicHermite::new(self.samples.iter().map(|p| p[1]).collect());
        let mut samples = Vec::with_capacity(n + 1);
        samples.push(self.samples[0]);
        for k in 1..n {
            let target = total * k as f64 / n as f64;
            let t = arc.solve(target);
            samples.push([hermite_x.eval(t), hermite_z.eval(t)]);
        }
        samples.push(self.samples[n]);
        // Interpolation can leave harmless negative rounding dust in x next
        // to a pole; clamp it rather than reject the resample.
        for (i, p) in samples.iter_mut().enumerate() {
            if i != 0 && i != n && p[0] < 0.0 && p[0] > -1e-12 * total {
                p[0] = -p[0];
            }
        }
        GeneratorCurve::new(samples)
    }

    /// Arc-length fraction ℓ(t)/L of the parameter t under the same monotone
    /// cubic model [`reparametrize_constant_speed`] uses. A point at old
    /// parameter t sits at new parameter `arc_fraction(t)` after resampling;
    /// phase jumps must be transported through this map.
    pub fn arc_fraction(&self, t: f64) -> f64 {
        let arc = MonotoneCubic::new(self.chord_lengths());
        let n = self.n_segments() as f64;
        (arc.eval(t.clamp(0.0, 1.0) * n) / arc.last()).clamp(0.0, 1.0)
    }
}

/// Nodal curvature data of a generator curve.
///
/// `weight[i]` is the trapezoid weight of node i for surface integrals, so
/// Σ weight = surface area and ∫ f dS ≈ Σ f_i·weight_i for nodal fields f.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    /// Meridian curvature k₁ per node.
    pub k1: Vec<f64>,
    /// Parallel curvature k₂ per node (equal to k₁ at a pole).
    pub k2: Vec<f64>,
    /// Finite-difference speed |γ̇| per node; strictly positive.
    pub speed: Vec<f64>,
    /// Area quadrature weight 2π·x|γ̇|·w_i per node.
    pub weight: Vec<f64>,
}

/// One defect found by [`admissibility_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibilityViolation {
    /// x_i < 0.
    NegativeRadius { index: usize },
    /// x_i = 0 (or below) strictly between the endpoints.
    InteriorAxisTouch { index: usize },
    /// An axis endpoint whose meridian does not meet the axis at a right
    /// angle: |γ̇₂|/|γ̇| of the raw one-sided tangent exceeds the tolerance.
    /// A cone tip shows up here with ratio ≈ 1/√2.
    NonOrthogonalAxisEnd { index: usize, ratio: f64 },
    /// The second-difference roughness proxy Σ|Δ²γ|²/h³ is NaN or infinite,
    /// which means some coordinate is.
    NonFiniteRoughness,
}

impl std::fmt::Display for AdmissibilityViolation {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NegativeRadius { index } => write!(fm, "negative radius at node {index}"),
            Self::InteriorAxisTouch { index } => write!(fm, "interior axis touch at node {index}"),
            Self::NonOrthogonalAxisEnd { index, ratio } => write!(
                fm,
                "axis endpoint at node {index} meets the axis at a slant (|dz|/|dγ| = {ratio:.3e})"
            ),
            Self::NonFiniteRoughness => write!(fm, "non-finite coordinates (roughness proxy)"),
        }
    }
}

/// Result of the admissibility diagnostics; empty means admissible.
#[derive(Debug, Clone, Default)]
pub struct AdmissibilityReport {
    pub violations: Vec<AdmissibilityViolation>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Diagnoses raw samples against the admissible class: nonnegative radius,
/// no interior axis touch, meridians orthogonal to the axis at poles, finite
/// coordinates. Runs on arbitrary sample data (including data too broken to
/// construct a [`GeneratorCurve`] from) and never fails.
pub fn admissibility_check(samples: &[[f64; 2]], orthogonality_tol: f64) -> AdmissibilityReport {
    let mut violations = Vec::new();
    if samples.len() < 2 {
        return AdmissibilityReport { violations };
    }
    let last = samples.len() - 1;
    let h = 1.0 / last as f64;
    let mut roughness = 0.0;
    for (i, p) in samples.iter().enumerate() {
        if p[0] < 0.0 {
            violations.push(AdmissibilityViolation::NegativeRadius { index: i });
        } else if p[0] <= 0.0 && i != 0 && i != last {
            violations.push(AdmissibilityViolation::InteriorAxisTouch { index: i });
        }
    }
    for i in 1..last {
        let ddx = samples[i + 1][0] - 2.0 * samples[i][0] + samples[i - 1][0];
        let ddz = samples[i + 1][1] - 2.0 * samples[i][1] + samples[i - 1][1];
        roughness += (ddx * ddx + ddz * ddz) / (h * h * h);
    }
    if !roughness.is_finite() {
        violations.push(AdmissibilityViolation::NonFiniteRoughness);
    }
    // Orthogonality at axis endpoints, judged from the raw one-sided tangent
    // so that the defect is visible at all (see the module doc).
    if samples.len() >= 3 {
        for (index, sign) in [(0usize, 1.0), (last, -1.0)] {
            if samples[index][0] != 0.0 {
                continue;
            }
            let (p0, p1, p2) = if index == 0 {
                (samples[0], samples[1], samples[2])
            } else {
                (samples[last], samples[last - 1], samples[last - 2])
            };
            let dx = sign * (-3.0 * p0[0] + 4.0 * p1[0] - p2[0]) / (2.0 * h);
            let dz = sign * (-3.0 * p0[1] + 4.0 * p1[1] - p2[1]) / (2.0 * h);
            let speed = (dx * dx + dz * dz).sqrt();
            if speed == 0.0 || !(dz / speed).is_finite() {
                continue;
            }
            let ratio = (dz / speed).abs();
            if ratio > orthogonality_tol {
                violations.push(AdmissibilityViolation::NonOrthogonalAxisEnd { index, ratio });
            }
        }
    }
    AdmissibilityReport { violations }
}

/// Shared per-curve finite-difference data used by the energy and gradient
/// code: derivatives, speed, the area density a = x|γ̇|, and curvatures.
#[derive(Debug, Clone)]
pub(crate) struct CurveFields {
    pub n: usize,
    pub h: f64,
    pub closed_start: bool,
    pub closed_end: bool,
    pub x: Vec<f64>,
    pub vel: Vec<[f64; 2]>,
    pub acc: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
    /// Area density a_i = x_i·|γ̇|_i; dS = 2π·a dt.
    pub a: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

impl CurveFields {
    pub fn build(curve: &GeneratorCurve) -> Result<Self, GeometryError> {
        let n = curve.n_segments();
        let (vel, acc) = curve.derivatives();
        let mut speed = Vec::with_capacity(n + 1);
        let mut a = Vec::with_capacity(n + 1);
        let mut k1 = Vec::with_capacity(n + 1);
        let mut k2 = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = curve.samples[i][0];
            let v = (vel[i][0] * vel[i][0] + vel[i][1] * vel[i][1]).sqrt();
            if v == 0.0 || !v.is_finite() {
                return Err(GeometryError::DegenerateSpeed { index: i });
            }
            let meridian = (acc[i][1] * vel[i][0] - acc[i][0] * vel[i][1]) / (v * v * v);
            let pole = (i == 0 && curve.closed_start) || (i == n && curve.closed_end);
            let parallel = if pole {
                meridian
            } else {
                if x == 0.0 {
                    return Err(GeometryError::InteriorAxisTouch { index: i });
                }
                vel[i][1] / (x * v)
            };
            speed.push(v);
            a.push(x * v);
            k1.push(meridian);
            k2.push(parallel);
        }
        Ok(Self {
            n,
            h: curve.spacing(),
            closed_start: curve.closed_start,
            closed_end: curve.closed_end,
            x: curve.samples.iter().map(|p| p[0]).collect(),
            vel,
            acc,
            speed,
            a,
            k1,
            k2,
        })
    }

    /// Trapezoid weight of node i on the parameter interval (no 2π factor).
    pub fn trap_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }
}

/// Monotone cubic (Fritsch–Carlson) interpolant of values y_i given at the
/// integer abscissae 0..len-1, specialized to strictly increasing data so it
/// can be inverted. Used for the cumulative arc-length map.
struct MonotoneCubic {
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    fn new(y: Vec<f64>) -> Self {
        let n = y.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            let sec: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
            d[0] = sec[0];
            d[n - 1] = sec[n - 2];
            if n >= 3 {
                d[0] = limit_end_slope(1.5 * sec[0] - 0.5 * sec[1], sec[0]);
                d[n - 1] = limit_end_slope(1.5 * sec[n - 2] - 0.5 * sec[n - 3], sec[n - 2]);
                for i in 1..n - 1 {
                    d[i] = if sec[i - 1] * sec[i] <= 0.0 {
                        0.0
                    } else {
                        2.0 * sec[i - 1] * sec[i] / (sec[i - 1] + sec[i])
                    };
                }
            }
        }
        Self { y, d }
    }

    fn last(&self) -> f64 {
        *self.y.last().unwrap()
    }

    /// Evaluates at u ∈ [0, len-1].
    fn eval(&self, u: f64) -> f64 {
        let cells = self.y.len() - 1;
        let c = (u.floor() as usize).min(cells - 1);
        let s = u - c as f64;
        hermite(self.y[c], self.y[c + 1], self.d[c], self.d[c + 1], s)
    }

    /// Solves eval(u) = target for strictly increasing data by bisection.
    fn solve(&self, target: f64) -> f64 {
        let cells = self.y.len() - 1;
        // Locate the cell by the nodal values, then bisect inside it.
        let c = match self.y.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
            Ok(i) => return i as f64,
            Err(i) => i.clamp(1, cells) - 1,
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let val = hermite(self.y[c], self.y[c + 1], self.d[c], self.d[c + 1], mid);
            if val < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c as f64 + 0.5 * (lo + hi)
    }
}

fn limit_end_slope(d: f64, sec: f64) -> f64 {
    if d * sec <= 0.0 {
        0.0
    } else if d.abs() > 3.0 * sec.abs() {
        3.0 * sec
    } else {
        d
    }
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d0 * (s3 - 2.0 * s2 + s)
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + d1 * (s3 - s2)
}

/// Cubic Hermite interpolant with centered-difference slopes (one-sided,
/// second-order at the ends), on integer abscissae. Reproduces the samples
/// exactly at the nodes; used to evaluate positions when resampling.
struct CubicHermite {
    y: Vec<f64>,
    d: Vec<f64>,
}

impl CubicHermite {
    fn new(y: Vec<f64>) -> Self {
        let n = y.len();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = 0.5 * (y[i + 1] - y[i - 1]);
        }
        d[0] = -1.5 * y[0] + 2.0 * y[1] - 0.5 * y[2];
        d[n - 1] = 1.5 * y[n - 1] - 2.0 * y[n - 2] + 0.5 * y[n - 3];
        Self { y, d }
    }

    fn eval(&self, u: f64) -> f64 {
        let cells = self.y.len() - 1;
        let c = (u.floor() as usize).min(cells - 1);
        let s = u - c as f64;
        hermite(self.y[c], self.y[c + 1], self.d[c], self.d[c + 1], s)
    }
}
