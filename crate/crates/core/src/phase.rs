//! Piecewise-constant two-phase fields on the parameter interval.
//!
//! A phase layout assigns material A (value 1) or B (value 0) to every
//! parameter t ∈ [0,1]. It is stored as the value on the first segment plus
//! the strictly increasing jump locations in the open interval (0,1); values
//! alternate across jumps by construction, so non-alternating patterns are
//! unrepresentable rather than checked.
//!
//! The integral quantities attached to a layout live here too: the area of
//! the A-phase region, 2π ∫ φ·x|γ̇| dt, and the total interface length,
//! 2π Σ_j x(t_j). Each jump circle is a parallel of radius x(t_j), with the
//! radius taken from the piecewise-linear interpolant of the curve samples.
//!
//! Quadrature cells that straddle a jump are split exactly at it (see
//! [`subcells`]); the nodal integrand is interpolated linearly within a
//! cell. This makes every phase-weighted integral continuous and piecewise
//! differentiable in the jump locations, which the optimizer relies on.

use crate::geometry::GeneratorCurve;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from layout construction, sampling, and editing.
#[derive(Debug, Error, PartialEq)]
pub enum PhaseError {
    /// Phase values are the two materials, 0 and 1.
    #[error("phase value {value} is not 0 or 1")]
    InvalidValue { value: u8 },
    /// Jumps must lie strictly inside (0,1).
    #[error("jump location {t} outside the open interval (0,1)")]
    JumpOutOfRange { t: f64 },
    /// Jumps must be strictly increasing.
    #[error("jump list not strictly increasing at position {index}")]
    JumpsNotIncreasing { index: usize },
    /// The phase value exactly at a jump is deliberately undefined.
    #[error("phase sampled exactly at the jump t = {t}")]
    SampledAtJump { t: f64 },
    /// Parameter outside [0,1].
    #[error("parameter {t} outside [0,1]")]
    OutOfDomain { t: f64 },
    /// Referenced a jump that does not exist.
    #[error("no jump with index {index}")]
    NoSuchJump { index: usize },
    /// Referenced a segment that does not exist.
    #[error("no segment with index {index}")]
    NoSuchSegment { index: usize },
    /// An edit would bring two jumps (or a jump and an endpoint) closer than
    /// the minimum separation.
    #[error("edit at t = {t} violates the minimum jump separation {min_sep}")]
    SeparationViolated { t: f64, min_sep: f64 },
    /// An inserted pair must fall inside a single existing segment.
    #[error("inserted pair ({a}, {b}) straddles an existing jump")]
    PairStraddlesJump { a: f64, b: f64 },
}

/// Piecewise-constant phase field: `leading_value` on the first segment,
/// flipping at each jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLayout {
    leading_value: u8,
    jumps: Vec<f64>,
}

impl PhaseLayout {
    /// Layout with the given value everywhere and no interface.
    pub fn constant(value: u8) -> Result<Self, PhaseError> {
        Self::new(value, Vec::new())
    }

    /// Validates and builds a layout from the leading value and jump list.
    pub fn new(leading_value: u8, jumps: Vec<f64>) -> Result<Self, PhaseError> {
        if leading_value > 1 {
            return Err(PhaseError::InvalidValue {
                value: leading_value,
            });
        }
        for (i, &t) in jumps.iter().enumerate() {
            if !(t > 0.0 && t < 1.0) {
                return Err(PhaseError::JumpOutOfRange { t });
            }
            if i > 0 && t <= jumps[i - 1] {
                return Err(PhaseError::JumpsNotIncreasing { index: i });
            }
        }
        Ok(Self {
            leading_value,
            jumps,
        })
    }

    pub fn leading_value(&self) -> u8 {
        self.leading_value
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Value on segment k (segments are numbered 0..=jump_count).
    pub fn segment_value(&self, k: usize) -> Result<u8, PhaseError> {
        if k > self.jumps.len() {
            return Err(PhaseError::NoSuchSegment { index: k });
        }
        Ok(self.leading_value ^ (k as u8 & 1))
    }

    /// The segments as (start, end, value) triples covering [0,1].
    pub fn segments(&self) -> Vec<(f64, f64, u8)> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut start = 0.0;
        for (k, &j) in self.jumps.iter().enumerate() {
            out.push((start, j, self.leading_value ^ (k as u8 & 1)));
            start = j;
        }
        out.push((
            start,
            1.0,
            self.leading_value ^ (self.jumps.len() as u8 & 1),
        ));
        out
    }

    /// Phase value at parameter t. Sampling exactly at a jump is an error;
    /// there is no privileged side.
    pub fn phase_at(&self, t: f64) -> Result<u8, PhaseError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PhaseError::OutOfDomain { t });
        }
        if self
            .jumps
            .binary_search_by(|j| j.partial_cmp(&t).unwrap())
            .is_ok()
        {
            return Err(PhaseError::SampledAtJump { t });
        }
        let below = self.jumps.partition_point(|&j| j < t);
        Ok(self.leading_value ^ (below as u8 & 1))
    }

    /// The layout with both materials swapped everywhere.
    pub fn complement(&self) -> PhaseLayout {
        PhaseLayout {
            leading_value: self.leading_value ^ 1,
            jumps: self.jumps.clone(),
        }
    }

    /// Flips the value on segment k, merging it with its neighbors. The two
    /// bounding jumps (one at the ends of the interval) disappear.
    pub fn toggle_segment(&self, k: usize) -> Result<PhaseLayout, PhaseError> {
        let j = self.jumps.len();
        if k > j {
            return Err(PhaseError::NoSuchSegment { index: k });
        }
        let mut out = self.clone();
        if j == 0 {
            out.leading_value ^= 1;
        } else if k == 0 {
            out.leading_value ^= 1;
            out.jumps.remove(0);
        } else if k == j {
            out.jumps.pop();
        } else {
            out.jumps.drain(k - 1..=k);
        }
        Ok(out)
    }

    /// Moves jump `index` to `t`, keeping at least `min_sep` from its
    /// neighbors and from the interval endpoints.
    pub fn move_jump(&self, index: usize, t: f64, min_sep: f64) -> Result<PhaseLayout, PhaseError> {
        if index >= self.jumps.len() {
            return Err(PhaseError::NoSuchJump { index });
        }
        if !t.is_finite() {
            return Err(PhaseError::JumpOutOfRange { t });
        }
        let prev = if index == 0 {
            0.0
        } else {
            self.jumps[index - 1]
        };
        let next = if index + 1 == self.jumps.len() {
            1.0
        } else {
            self.jumps[index + 1]
        };
        if t - prev < min_sep || next - t < min_sep {
            return Err(PhaseError::SeparationViolated { t, min_sep });
        }
        let mut out = self.clone();
        out.jumps[index] = t;
        Ok(out)
    }

    /// Inserts the jump pair a < b inside a single existing segment, toggling
    /// the value on (a, b) and leaving every other point unchanged.
    pub fn insert_jump_pair(
        &self,
        a: f64,
        b: f64,
        min_sep: f64,
    ) -> Result<PhaseLayout, PhaseError> {
        for t in [a, b] {
            if !(t > 0.0 && t < 1.0) || !t.is_finite() {
                return Err(PhaseError::JumpOutOfRange { t });
            }
        }
        if b - a < min_sep {
            return Err(PhaseError::SeparationViolated { t: b, min_sep });
        }
        let pos = self.jumps.partition_point(|&j| j < a);
        if pos < self.jumps.len() && self.jumps[pos] < b {
            return Err(PhaseError::PairStraddlesJump { a, b });
        }
        let prev = if pos == 0 { 0.0 } else { self.jumps[pos - 1] };
        let next = if pos == self.jumps.len() {
            1.0
        } else {
            self.jumps[pos]
        };
        if a - prev < min_sep {
            return Err(PhaseError::SeparationViolated { t: a, min_sep });
        }
        if next - b < min_sep {
            return Err(PhaseError::SeparationViolated { t: b, min_sep });
        }
        let mut out = self.clone();
        out.jumps.insert(pos, b);
        out.jumps.insert(pos, a);
        Ok(out)
    }

    /// Removes the adjacent jump pair (index, index+1), merging the segment
    /// between them into its neighbors.
    pub fn remove_jump_pair(&self, index: usize) -> Result<PhaseLayout, PhaseError> {
        if index + 1 >= self.jumps.len() {
            return Err(PhaseError::NoSuchJump { index: index + 1 });
        }
        let mut out = self.clone();
        out.jumps.drain(index..=index + 1);
        Ok(out)
    }
}

/// One maximal single-phase piece of a quadrature cell: the parameter range
/// [s0, s1] in local cell coordinates (0 at the left node, 1 at the right),
/// carrying phase `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SubCell {
    pub cell: usize,
    pub s0: f64,
    pub s1: f64,
    pub value: u8,
}

/// Where a jump sits relative to the grid, with everything the jump-location
/// derivative needs. For a jump strictly inside a cell, the left and right
/// contexts share the cell; for a jump exactly on a grid node the energy has
/// a kink, and the two contexts describe the one-sided configurations in the
/// adjacent cells.
#[derive(Debug, Clone, Copy)]
pub(crate) struct JumpSite {
    pub jump: usize,
    pub coincident: bool,
    /// Cell holding the right-side subcell, the jump's local coordinate in
    /// it, and the local coordinate of the next boundary (split or node).
    pub cell_r: usize,
    pub s_r: f64,
    pub next: f64,
    /// Cell holding the left-side subcell, the jump's local coordinate in
    /// it, and the local coordinate of the previous boundary.
    pub cell_l: usize,
    pub s_l: f64,
    pub prev: f64,
    pub value_l: u8,
    pub value_r: u8,
}

/// Splits the n grid cells at the jump locations. Returns the subcells in
/// parameter order (every cell contributes at least one) and one
/// [`JumpSite`] per jump. Zero-width subcells are never emitted: a jump
/// landing exactly on a grid node flips the value between cells instead.
pub(crate) fn subcells(layout: &PhaseLayout, n: usize) -> (Vec<SubCell>, Vec<JumpSite>) {
    let jumps = layout.jumps();
    let mut cells = Vec::with_capacity(n + 2 * jumps.len());
    let mut sites = Vec::with_capacity(jumps.len());
    let mut value = layout.leading_value();
    let mut j = 0;
    for cell in 0..n {
        // Local coordinates of the splits inside this cell.
        let mut boundaries: Vec<(f64, usize)> = Vec::new();
        while j < jumps.len() {
            let u = jumps[j] * n as f64;
            if u >= (cell + 1) as f64 {
                break;
            }
            let s = u - cell as f64;
            if s == 0.0 {
                // Node-coincident: the flip happens at the cell boundary.
                sites.push(JumpSite {
                    jump: j,
                    coincident: true,
                    cell_r: cell,
                    s_r: 0.0,
                    next: 1.0, // patched below once this cell's splits are known
                    cell_l: cell - 1,
                    s_l: 1.0,
                    prev: last_boundary(&cells, cell - 1),
                    value_l: value,
                    value_r: value ^ 1,
                });
                value ^= 1;
            } else {
                boundaries.push((s, j));
            }
            j += 1;
        }
        // Patch `next` of a coincident site at this cell's left node.
        if let Some(site) = sites.last_mut() {
            if site.coincident && site.cell_r == cell {
                site.next = boundaries.first().map_or(1.0, |b| b.0);
            }
        }
        let mut s0 = 0.0;
        for (k, &(s, jump)) in boundaries.iter().enumerate() {
            cells.push(SubCell {
                cell,
                s0,
                s1: s,
                value,
            });
            let next = boundaries.get(k + 1).map_or(1.0, |b| b.0);
            sites.push(JumpSite {
                jump,
                coincident: false,
                cell_r: cell,
                s_r: s,
                next,
                cell_l: cell,
                s_l: s,
                prev: s0,
                value_l: value,
                value_r: value ^ 1,
            });
            value ^= 1;
            s0 = s;
        }
        cells.push(SubCell {
            cell,
            s0,
            s1: 1.0,
            value,
        });
    }
    sites.sort_by_key(|s| s.jump);
    (cells, sites)
}

fn last_boundary(cells: &[SubCell], cell: usize) -> f64 {
    cells
        .iter()
        .rev()
        .find(|c| c.cell == cell)
        .map_or(0.0, |c| c.s0)
}

/// Area of the A-phase (value 1) region: 2π ∫ φ·x|γ̇| dt with the nodal area
/// density interpolated linearly and cells split exactly at the jumps.
pub fn phase_area(curve: &GeneratorCurve, layout: &PhaseLayout) -> f64 {
    let (vel, _) = curve.derivatives();
    let n = curve.n_segments();
    let h = curve.spacing();
    let a: Vec<f64> = (0..=n)
        .map(|i| curve.samples()[i][0] * (vel[i][0] * vel[i][0] + vel[i][1] * vel[i][1]).sqrt())
        .collect();
    let (cells, _) = subcells(layout, n);
    let mut total = 0.0;
    for sc in &cells {
        if sc.value != 1 {
            continue;
        }
        let a0 = lerp(a[sc.cell], a[sc.cell + 1], sc.s0);
        let a1 = lerp(a[sc.cell], a[sc.cell + 1], sc.s1);
        total += 0.5 * (sc.s1 - sc.s0) * (a0 + a1) * h;
    }
    2.0 * std::f64::consts::PI * total
}

/// Total interface length 2π Σ_j x(t_j): each jump is a circle of parallel
/// radius x(t_j), with the radius from piecewise-linear interpolation.
pub fn interface_length(curve: &GeneratorCurve, layout: &PhaseLayout) -> f64 {
    // fold, not sum: an empty `sum::<f64>()` is -0.0, and a length that
    // prints as "-0" reads like a bug.
    2.0 * std::f64::consts::PI
        * layout
            .jumps()
            .iter()
            .fold(0.0, |acc, &t| acc + curve.radius_at(t))
}

pub(crate) fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn sphere(n: usize) -> GeneratorCurve {
        GeneratorCurve::spheroid(n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn constructor_enforces_representation() {
        assert_eq!(
            PhaseLayout::constant(2).unwrap_err(),
            PhaseError::InvalidValue { value: 2 }
        );
        assert_eq!(
            PhaseLayout::new(1, vec![0.0]).unwrap_err(),
            PhaseError::JumpOutOfRange { t: 0.0 }
        );
        assert_eq!(
            PhaseLayout::new(1, vec![0.5, 0.5]).unwrap_err(),
            PhaseError::JumpsNotIncreasing { index: 1 }
        );
        assert_eq!(
            PhaseLayout::new(0, vec![0.3, 0.2]).unwrap_err(),
            PhaseError::JumpsNotIncreasing { index: 1 }
        );
    }

    #[test]
    fn phase_at_alternates_and_rejects_jump_points() {
        let l = PhaseLayout::new(1, vec![0.25, 0.75]).unwrap();
        assert_eq!(l.phase_at(0.0).unwrap(), 1);
        assert_eq!(l.phase_at(0.5).unwrap(), 0);
        assert_eq!(l.phase_at(0.9).unwrap(), 1);
        assert_eq!(l.phase_at(1.0).unwrap(), 1);
        assert_eq!(
            l.phase_at(0.25).unwrap_err(),
            PhaseError::SampledAtJump { t: 0.25 }
        );
        assert_eq!(
            l.phase_at(-0.1).unwrap_err(),
            PhaseError::OutOfDomain { t: -0.1 }
        );
        assert_eq!(l.segment_value(0).unwrap(), 1);
        assert_eq!(l.segment_value(1).unwrap(), 0);
        assert_eq!(l.segment_value(2).unwrap(), 1);
    }

    #[test]
    fn equatorial_split_area_on_the_sphere() {
        // 2π ∫₀^½ sin(πt)·π dt = 2π.
        let c = sphere(400);
        let l = PhaseLayout::new(1, vec![0.5]).unwrap();
        let got = phase_area(&c, &l);
        assert!((got - 2.0 * PI).abs() < 1e-4 * 2.0 * PI, "area {got}");

        let whole = PhaseLayout::constant(1).unwrap();
        let area = phase_area(&c, &whole);
        assert!((area - c.surface_area()).abs() < 1e-12 * area);
        assert_eq!(phase_area(&c, &PhaseLayout::constant(0).unwrap()), 0.0);
    }

    #[test]
    fn phase_and_complement_partition_the_area() {
        let c = GeneratorCurve::perturbed_sphere(193, 1.0, &[0.02, -0.01, 0.015]).unwrap();
        let l = PhaseLayout::new(1, vec![0.21, 0.47, 0.62, 0.88]).unwrap();
        let total = c.surface_area();
        let sum = phase_area(&c, &l) + phase_area(&c, &l.complement());
        assert!((sum - total).abs() < 1e-10 * total, "partition defect");
        assert_eq!(
            interface_length(&c, &l),
            interface_length(&c, &l.complement())
        );
    }

    #[test]
    fn interface_lengths_on_the_sphere() {
        let c = sphere(400);
        let equator = PhaseLayout::new(1, vec![0.5]).unwrap();
        assert!((interface_length(&c, &equator) - 2.0 * PI).abs() < 1e-12);

        let pair = PhaseLayout::new(0, vec![0.25, 0.75]).unwrap();
        let want = 2.0 * PI * 2.0_f64.sqrt();
        assert!((interface_length(&c, &pair) - want).abs() < 1e-12);

        assert_eq!(
            interface_length(&c, &PhaseLayout::constant(1).unwrap()),
            0.0
        );
    }

    #[test]
    fn interface_shrinks_monotonically_toward_the_pole() {
        let c = sphere(400);
        let mut prev = f64::INFINITY;
        for &t in &[0.4, 0.2, 0.1, 0.05, 0.004, 0.0004] {
            let len = interface_length(&c, &PhaseLayout::new(1, vec![t]).unwrap());
            assert!(len < prev, "t={t}: {len} !< {prev}");
            prev = len;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn toggle_merges_segments() {
        let l = PhaseLayout::new(1, vec![0.5]).unwrap();
        let t = l.toggle_segment(0).unwrap();
        assert_eq!(t, PhaseLayout::constant(0).unwrap());
        let t = l.toggle_segment(1).unwrap();
        assert_eq!(t, PhaseLayout::constant(1).unwrap());

        let l = PhaseLayout::new(0, vec![0.2, 0.5, 0.8]).unwrap();
        let t = l.toggle_segment(1).unwrap();
        assert_eq!(t, PhaseLayout::new(0, vec![0.8]).unwrap());
        // Values outside the toggled segment are untouched.
        assert_eq!(t.phase_at(0.1).unwrap(), l.phase_at(0.1).unwrap());
        assert_eq!(t.phase_at(0.9).unwrap(), l.phase_at(0.9).unwrap());
        assert_eq!(t.phase_at(0.3).unwrap(), l.phase_at(0.3).unwrap() ^ 1);

        let flip = PhaseLayout::constant(1).unwrap().toggle_segment(0).unwrap();
        assert_eq!(flip, PhaseLayout::constant(0).unwrap());
    }

    #[test]
    fn insert_and_remove_pair_are_inverse() {
        let l = PhaseLayout::new(1, vec![0.5]).unwrap();
        let ins = l.insert_jump_pair(0.6, 0.7, 0.01).unwrap();
        assert_eq!(ins.jumps(), &[0.5, 0.6, 0.7]);
        assert_eq!(ins.phase_at(0.65).unwrap(), 1);
        assert_eq!(ins.remove_jump_pair(1).unwrap(), l);

        assert_eq!(
            l.insert_jump_pair(0.4, 0.6, 0.01).unwrap_err(),
            PhaseError::PairStraddlesJump { a: 0.4, b: 0.6 }
        );
        assert!(matches!(
            l.insert_jump_pair(0.505, 0.6, 0.01).unwrap_err(),
            PhaseError::SeparationViolated { .. }
        ));
        assert_eq!(
            l.remove_jump_pair(0).unwrap_err(),
            PhaseError::NoSuchJump { index: 1 }
        );
    }

    #[test]
    fn move_jump_respects_neighbors() {
        let l = PhaseLayout::new(1, vec![0.3, 0.6]).unwrap();
        let m = l.move_jump(0, 0.4, 0.01).unwrap();
        assert_eq!(m.jumps(), &[0.4, 0.6]);
        assert!(matches!(
            l.move_jump(0, 0.65, 0.01).unwrap_err(),
            PhaseError::SeparationViolated { .. }
        ));
        assert!(matches!(
            l.move_jump(1, 0.9999, 0.01).unwrap_err(),
            PhaseError::SeparationViolated { .. }
        ));
        assert_eq!(
            l.move_jump(5, 0.5, 0.01).unwrap_err(),
            PhaseError::NoSuchJump { index: 5 }
        );
    }

    #[test]
    fn random_editor_sequences_keep_the_representation_valid() {
        let mut rng = StdRng::seed_from_u64(0x0eed);
        let min_sep = 1.0 / 128.0;
        let mut layout = PhaseLayout::new(1, vec![0.5]).unwrap();
        let mut applied = 0;
        for _ in 0..400 {
            let op = rng.gen_range(0..4);
            let result = match op {
                0 => layout.toggle_segment(rng.gen_range(0..=layout.jump_count())),
                1 if layout.jump_count() > 0 => {
                    let j = rng.gen_range(0..layout.jump_count());
                    layout.move_jump(j, rng.gen_range(0.0..1.0), min_sep)
                }
                2 => {
                    let a = rng.gen_range(0.0..0.9);
                    layout.insert_jump_pair(a, a + rng.gen_range(0.0..0.1), min_sep)
                }
                3 if layout.jump_count() >= 2 => {
                    layout.remove_jump_pair(rng.gen_range(0..layout.jump_count() - 1))
                }
                _ => continue,
            };
            if let Ok(next) = result {
                // Every edit must produce a layout the constructor accepts.
                PhaseLayout::new(next.leading_value(), next.jumps().to_vec()).unwrap();
                for pair in next.jumps().windows(2) {
                    assert!(pair[1] - pair[0] >= min_sep * 0.999);
                }
                layout = next;
                applied += 1;
            }
        }
        assert!(applied > 50, "only {applied} edits applied");
    }

    #[test]
    fn subcells_partition_every_cell() {
        let l = PhaseLayout::new(1, vec![0.125, 0.21, 0.23, 0.8]).unwrap();
        let n = 16;
        let (cells, sites) = subcells(&l, n);
        assert_eq!(sites.len(), 4);
        // 0.125·16 = 2 exactly: a coincident jump, no extra subcell.
        assert!(sites[0].coincident);
        assert_eq!(sites[0].cell_r, 2);
        assert_eq!(sites[0].cell_l, 1);

        let mut covered = vec![0.0; n];
        for sc in &cells {
            assert!(sc.s1 > sc.s0);
            covered[sc.cell] += sc.s1 - sc.s0;
            let mid = (sc.cell as f64 + 0.5 * (sc.s0 + sc.s1)) / n as f64;
            assert_eq!(l.phase_at(mid).unwrap(), sc.value, "cell {sc:?}");
        }
        for (c, &sum) in covered.iter().enumerate() {
            assert!((sum - 1.0).abs() < 1e-14, "cell {c} covers {sum}");
        }
        // Cell 3 holds two jumps (0.21, 0.23) and therefore three subcells.
        assert_eq!(cells.iter().filter(|sc| sc.cell == 3).count(), 3);
    }

    #[test]
    fn node_coincident_jump_matches_interior_limit() {
        // Phase area must be continuous as a jump crosses a grid node.
        let c = sphere(16);
        let at_node = phase_area(&c, &PhaseLayout::new(1, vec![0.25]).unwrap());
        let just_left = phase_area(&c, &PhaseLayout::new(1, vec![0.25 - 1e-9]).unwrap());
        let just_right = phase_area(&c, &PhaseLayout::new(1, vec![0.25 + 1e-9]).unwrap());
        assert!((at_node - just_left).abs() < 1e-7);
        assert!((at_node - just_right).abs() < 1e-7);
    }
}
