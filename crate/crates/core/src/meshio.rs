//! File formats and mesh export.
//!
//! Four interchange surfaces, all plain text:
//!
//! - curve CSV (`t,x,z` header, one node per row, uniform t required);
//! - phase files (`leading=<0|1>`, then one jump location per line);
//! - revolved triangle meshes in OBJ (faces grouped `phaseA`/`phaseB`) and
//!   legacy ASCII VTK (`CELL_DATA` scalar `phase`);
//! - JSON checkpoints carrying curves, phases, materials, constraint targets
//!   and optimizer state, for resuming runs.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! checkpoint survives write → read bit-exactly; the tests assert that.
//! Readers report the 1-based line number of the first offending line.

use crate::energy::{Component, MaterialParams, PhaseMaterial, VesicleSystem};
use crate::geometry::{GeneratorCurve, GeometryError};
use crate::phase::{PhaseError, PhaseLayout};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("checkpoint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("stored data fails validation on restore: {0}")]
    Restore(String),
    #[error("mesh export requires a curve closed at both axis endpoints")]
    OpenCurve,
    #[error("angular resolution {m} too coarse, need at least 8 segments")]
    TooFewAngularSegments { m: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Triangulated surface of revolution with per-face phase labels.
///
/// Vertex layout: index 0 is the start pole, then (N−1) rings of M vertices
/// each in parameter order, then the end pole. All interior edges are shared
/// by exactly two triangles, so the mesh is watertight by construction.
#[derive(Debug, Clone)]
pub struct RevolvedMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// 1 for phase A, 0 for phase B, per triangle.
    pub face_phase: Vec<u8>,
}

/// Revolves a closed-to-axis generator into a triangle mesh with M angular
/// segments. Faces are labeled with the phase at their band's parameter
/// midpoint (the value just right of the midpoint when a jump lands on it
/// exactly); export is for viewing, so no area weighting is attempted.
pub fn revolve_to_mesh(
    curve: &GeneratorCurve,
    layout: &PhaseLayout,
    angular_segments: usize,
) -> Result<RevolvedMesh, MeshError> {
    if !curve.is_closed() {
        return Err(MeshError::OpenCurve);
    }
    let m = angular_segments;
    if m < 8 {
        return Err(MeshError::TooFewAngularSegments { m });
    }
    let samples = curve.samples();
    let n = curve.n_segments();
    let mut vertices = Vec::with_capacity((n - 1) * m + 2);
    vertices.push([0.0, 0.0, samples[0][1]]);
    for ring in 1..n {
        let [x, z] = samples[ring];
        for j in 0..m {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            vertices.push([x * theta.cos(), x * theta.sin(), z]);
        }
    }
    vertices.push([0.0, 0.0, samples[n][1]]);
    let end_pole = vertices.len() - 1;
    let ring_start = |ring: usize| 1 + (ring - 1) * m;

    // Value just right of the band midpoint, settled by jump parity so a
    // jump exactly on the midpoint cannot make labeling fail.
    let band_phase = |band: usize| {
        let mid = (band as f64 + 0.5) / n as f64;
        let k = layout.jumps().partition_point(|&t| t <= mid);
        layout.leading_value() ^ (k as u8 & 1)
    };

    let mut triangles = Vec::with_capacity(2 * m * (n - 1));
    let mut face_phase = Vec::with_capacity(2 * m * (n - 1));
    // Start-pole fan, wound so normals point out of the enclosed volume.
    let p = band_phase(0);
    for j in 0..m {
        let a = ring_start(1) + j;
        let b = ring_start(1) + (j + 1) % m;
        triangles.push([0, b, a]);
        face_phase.push(p);
    }
    for band in 1..n - 1 {
        let p = band_phase(band);
        let lo = ring_start(band);
        let hi = ring_start(band + 1);
        for j in 0..m {
            let j1 = (j + 1) % m;
            triangles.push([lo + j, lo + j1, hi + j1]);
            triangles.push([lo + j, hi + j1, hi + j]);
            face_phase.push(p);
            face_phase.push(p);
        }
    }
    let p = band_phase(n - 1);
    for j in 0..m {
        let a = ring_start(n - 1) + j;
        let b = ring_start(n - 1) + (j + 1) % m;
        triangles.push([end_pole, a, b]);
        face_phase.push(p);
    }
    Ok(RevolvedMesh {
        vertices,
        triangles,
        face_phase,
    })
}

/// Sum of triangle areas.
pub fn mesh_area(mesh: &RevolvedMesh) -> f64 {
    mesh.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = [
                mesh.vertices[t[0]],
                mesh.vertices[t[1]],
                mesh.vertices[t[2]],
            ];
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let cx = u[1] * v[2] - u[2] * v[1];
            let cy = u[2] * v[0] - u[0] * v[2];
            let cz = u[0] * v[1] - u[1] * v[0];
            0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
        })
        .sum()
}

/// Signed enclosed volume by the divergence theorem; positive when the
/// triangle normals point outward.
pub fn mesh_volume(mesh: &RevolvedMesh) -> f64 {
    mesh.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = [
                mesh.vertices[t[0]],
                mesh.vertices[t[1]],
                mesh.vertices[t[2]],
            ];
            (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0
        })
        .sum()
}

/// Number of undirected edges not shared by exactly two triangles. Zero
/// means watertight.
pub fn watertightness_defects(mesh: &RevolvedMesh) -> usize {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    edges.values().filter(|&&c| c != 2).count()
}

/// Writes a mesh as Wavefront OBJ with faces split into `phaseA` and
/// `phaseB` groups (1-based indices).
pub fn write_mesh_obj(path: &Path, mesh: &RevolvedMesh) -> Result<(), MeshError> {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for (name, phase) in [("phaseA", 1u8), ("phaseB", 0u8)] {
        let _ = writeln!(out, "g {name}");
        for (t, &p) in mesh.triangles.iter().zip(&mesh.face_phase) {
            if p == phase {
                let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a mesh as legacy ASCII VTK PolyData with a per-cell `phase`
/// scalar.
pub fn write_mesh_vtk(path: &Path, mesh: &RevolvedMesh) -> Result<(), MeshError> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("revolved membrane surface\n");
    out.push_str("ASCII\nDATASET POLYDATA\n");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
    }
    let _ = writeln!(
        out,
        "POLYGONS {} {}",
        mesh.triangles.len(),
        4 * mesh.triangles.len()
    );
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.triangles.len());
    out.push_str("SCALARS phase int 1\nLOOKUP_TABLE default\n");
    for p in &mesh.face_phase {
        let _ = writeln!(out, "{p}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a generator curve as `t,x,z` CSV, one row per node.
pub fn write_curve_csv(path: &Path, curve: &GeneratorCurve) -> Result<(), MeshError> {
    let n = curve.n_segments();
    let mut out = String::from("t,x,z\n");
    for (i, p) in curve.samples().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i as f64 / n as f64, p[0], p[1]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a `t,x,z` CSV back into a validated curve. The t column must be
/// the uniform grid i/N within 1e-12; anything else is rejected with the
/// offending line number.
pub fn read_curve_csv(path: &Path) -> Result<GeneratorCurve, MeshError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "t,x,z" => {}
        Some((_, header)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header 't,x,z', got '{header}'"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut rows: Vec<(usize, f64, [f64; 2])> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let mut vals = [0.0_f64; 3];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("'{}' is not a number", f.trim())))?;
        }
        rows.push((line_no, vals[0], [vals[1], vals[2]]));
    }
    if rows.len() < 2 {
        return Err(parse_err(
            path,
            text.lines().count(),
            "need at least 2 node rows",
        ));
    }
    let n = rows.len() - 1;
    for (k, &(line_no, t, _)) in rows.iter().enumerate() {
        let want = k as f64 / n as f64;
        if (t - want).abs() > 1e-12 {
            return Err(parse_err(
                path,
                line_no,
                format!("nonuniform t: got {t}, expected {want} for row {k} of 0..={n}"),
            ));
        }
    }
    Ok(GeneratorCurve::new(
        rows.into_iter().map(|(_, _, p)| p).collect(),
    )?)
}

/// Writes a phase layout as `leading=<0|1>` plus one jump per line.
pub fn write_phase_file(path: &Path, layout: &PhaseLayout) -> Result<(), MeshError> {
    let mut out = format!("leading={}\n", layout.leading_value());
    for j in layout.jumps() {
        let _ = writeln!(out, "{j}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a phase layout file; jump ordering and range are re-validated.
pub fn read_phase_file(path: &Path) -> Result<PhaseLayout, MeshError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let leading = match lines.next() {
        Some((_, line)) => match line.trim().strip_prefix("leading=") {
            Some("0") => 0,
            Some("1") => 1,
            _ => {
                return Err(parse_err(
                    path,
                    1,
                    format!("expected 'leading=<0|1>', got '{line}'"),
                ))
            }
        },
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let mut jumps = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let j: f64 = line
            .trim()
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("'{}' is not a number", line.trim())))?;
        jumps.push(j);
    }
    Ok(PhaseLayout::new(leading, jumps)?)
}

/// Optimizer progress stored in a checkpoint: enough to warm-start a run
/// (multipliers, penalty, RNG position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Lagrange multipliers for (area, volume, phase-area).
    pub lambda: [f64; 3],
    pub mu: f64,
    pub outer_iter: usize,
    pub inner_iters_done: usize,
    pub rng_seed: u64,
    pub rng_word_pos: u128,
}

/// Constraint targets in raw form (re-validated on restore).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConstraints {
    pub total_area: f64,
    pub phase_area: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointComponent {
    pub samples: Vec<[f64; 2]>,
    pub leading_value: u8,
    pub jumps: Vec<f64>,
}

/// One resumable snapshot: system, materials, targets, optimizer state.
/// Stored as raw values and re-validated through the normal constructors on
/// restore, so a hand-edited checkpoint cannot smuggle in invalid state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub components: Vec<CheckpointComponent>,
    pub phase_a: PhaseMaterial,
    pub phase_b: PhaseMaterial,
    pub sigma: f64,
    pub constraints: Option<CheckpointConstraints>,
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn capture(
        system: &VesicleSystem,
        params: &MaterialParams,
        constraints: Option<CheckpointConstraints>,
        optimizer: Option<OptimizerState>,
    ) -> Self {
        Checkpoint {
            format_version: 1,
            components: system
                .components()
                .iter()
                .map(|c| CheckpointComponent {
                    samples: c.curve.samples().to_vec(),
                    leading_value: c.layout.leading_value(),
                    jumps: c.layout.jumps().to_vec(),
                })
                .collect(),
            phase_a: *params.phase_a(),
            phase_b: *params.phase_b(),
            sigma: params.sigma(),
            constraints,
            optimizer,
        }
    }

    pub fn system(&self) -> Result<VesicleSystem, MeshError> {
        let comps = self
            .components
            .iter()
            .map(|c| {
                Ok(Component {
                    curve: GeneratorCurve::new(c.samples.clone())
                        .map_err(|e| MeshError::Restore(e.to_string()))?,
                    layout: PhaseLayout::new(c.leading_value, c.jumps.clone())
                        .map_err(|e| MeshError::Restore(e.to_string()))?,
                })
            })
            .collect::<Result<Vec<_>, MeshError>>()?;
        VesicleSystem::new(comps).map_err(|e| MeshError::Restore(e.to_string()))
    }

    pub fn params(&self) -> Result<MaterialParams, MeshError> {
        MaterialParams::new(self.phase_a, self.phase_b, self.sigma)
            .map_err(|e| MeshError::Restore(e.to_string()))
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), MeshError> {
    let mut text = serde_json::to_string_pretty(checkpoint)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, MeshError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One line of the optimizer's per-step trace in report-CSV form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub iter: usize,
    pub energy: f64,
    pub res_area: f64,
    pub res_vol: f64,
    pub res_phase: f64,
    pub step: f64,
}

/// Writes the optimization trace as CSV with the fixed header
/// `iter,energy,res_area,res_vol,res_phase,step`.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<(), MeshError> {
    let mut out = String::from("iter,energy,res_area,res_vol,res_phase,step\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter, r.energy, r.res_area, r.res_vol, r.res_phase, r.step
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere(n: usize) -> GeneratorCurve {
        GeneratorCurve::spheroid(n, 1.0, 1.0).unwrap()
    }

    fn whole() -> PhaseLayout {
        PhaseLayout::constant(1).unwrap()
    }

    #[test]
    fn mesh_counts_match_the_formulas() {
        let mesh = revolve_to_mesh(&sphere(400), &whole(), 64).unwrap();
        assert_eq!(mesh.vertices.len(), 399 * 64 + 2);
        assert_eq!(mesh.vertices.len(), 25538);
        assert_eq!(mesh.triangles.len(), 2 * 64 * 399);
        assert_eq!(mesh.face_phase.len(), mesh.triangles.len());
    }

    #[test]
    fn mesh_area_and_volume_approach_the_analytic_sphere() {
        let mesh = revolve_to_mesh(&sphere(400), &whole(), 64).unwrap();
        let area = mesh_area(&mesh);
        let vol = mesh_volume(&mesh);
        assert!((area - 4.0 * PI).abs() < 1e-2 * 4.0 * PI, "area {area}");
        assert!(
            (vol - 4.0 * PI / 3.0).abs() < 1e-2 * 4.0 * PI / 3.0,
            "vol {vol}"
        );
        assert!(vol > 0.0, "outward orientation gives positive volume");
    }

    #[test]
    fn mesh_quantities_converge_at_second_order() {
        let defect = |n: usize, m: usize| {
            let mesh = revolve_to_mesh(&sphere(n), &whole(), m).unwrap();
            (mesh_area(&mesh) - 4.0 * PI).abs() + (mesh_volume(&mesh) - 4.0 * PI / 3.0).abs()
        };
        let ratio = defect(100, 16) / defect(200, 32);
        assert!((3.3..100.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn meshes_are_watertight() {
        let mesh = revolve_to_mesh(&sphere(64), &whole(), 16).unwrap();
        assert_eq!(watertightness_defects(&mesh), 0);
    }

    #[test]
    fn equatorial_layout_flips_face_phase_once_along_the_meridian() {
        let layout = PhaseLayout::new(1, vec![0.5]).unwrap();
        let n = 64;
        let mesh = revolve_to_mesh(&sphere(n), &layout, 16).unwrap();
        // Triangles are emitted band by band; collect one phase per band.
        let mut band_phases = Vec::new();
        for t in 0..mesh.triangles.len() {
            let band = if t < 16 {
                0
            } else if t >= mesh.triangles.len() - 16 {
                n - 1
            } else {
                1 + (t - 16) / 32
            };
            if band_phases.len() == band {
                band_phases.push(mesh.face_phase[t]);
            } else {
                assert_eq!(
                    band_phases[band], mesh.face_phase[t],
                    "band {band} not uniform"
                );
            }
        }
        let flips = band_phases.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1);
        assert_eq!(band_phases[0], 1);
        assert_eq!(*band_phases.last().unwrap(), 0);
    }

    #[test]
    fn mesh_rejects_open_curves_and_coarse_angular_grids() {
        let arc = GeneratorCurve::new((0..=32).map(|i| [1.0, i as f64 / 32.0]).collect()).unwrap();
        assert!(matches!(
            revolve_to_mesh(&arc, &whole(), 64),
            Err(MeshError::OpenCurve)
        ));
        assert!(matches!(
            revolve_to_mesh(&sphere(64), &whole(), 7),
            Err(MeshError::TooFewAngularSegments { m: 7 })
        ));
    }

    #[test]
    fn obj_and_vtk_files_have_the_advertised_structure() {
        let dir = tempfile::tempdir().unwrap();
        let layout = PhaseLayout::new(1, vec![0.5]).unwrap();
        let mesh = revolve_to_mesh(&sphere(32), &layout, 8).unwrap();

        let obj = dir.path().join("m.obj");
        write_mesh_obj(&obj, &mesh).unwrap();
        let text = std::fs::read_to_string(&obj).unwrap();
        let v_count = text.lines().filter(|l| l.starts_with("v ")).count();
        let f_count = text.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(v_count, mesh.vertices.len());
        assert_eq!(f_count, mesh.triangles.len());
        assert!(text.contains("g phaseA\n") && text.contains("g phaseB\n"));
        for line in text.lines().filter(|l| l.starts_with("f ")) {
            for tok in line[2..].split_whitespace() {
                let idx: usize = tok.parse().unwrap();
                assert!(
                    idx >= 1 && idx <= mesh.vertices.len(),
                    "index {idx} out of range"
                );
            }
        }

        let vtk = dir.path().join("m.vtk");
        write_mesh_vtk(&vtk, &mesh).unwrap();
        let text = std::fs::read_to_string(&vtk).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains(&format!("POINTS {} double", mesh.vertices.len())));
        assert!(text.contains(&format!("CELL_DATA {}", mesh.triangles.len())));
        assert!(text.contains("SCALARS phase int 1"));
    }

    #[test]
    fn curve_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let curve = GeneratorCurve::perturbed_sphere(48, 1.0, &[0.07, -0.02]).unwrap();
        write_curve_csv(&path, &curve).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back.samples(), curve.samples());
    }

    #[test]
    fn curve_csv_rejects_malformed_input_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, "x,y,z\n0,0,0\n").unwrap();
        match read_curve_csv(&path) {
            Err(MeshError::Parse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }

        // Row 3 (t=0.9) breaks uniformity of the 0, 0.5, 1 grid.
        std::fs::write(&path, "t,x,z\n0,0,-1\n0.5,1,0\n0.9,0,1\n").unwrap();
        match read_curve_csv(&path) {
            Err(MeshError::Parse {
                line: 4, message, ..
            }) => {
                assert!(message.contains("nonuniform"), "{message}")
            }
            other => panic!("expected nonuniform-t error, got {other:?}"),
        }

        std::fs::write(&path, "t,x,z\n0,0,-1\n0.5,oops,0\n1,0,1\n").unwrap();
        match read_curve_csv(&path) {
            Err(MeshError::Parse {
                line: 3, message, ..
            }) => assert!(message.contains("oops")),
            other => panic!("expected number error, got {other:?}"),
        }
    }

    #[test]
    fn phase_file_round_trips_and_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.phase");
        let layout = PhaseLayout::new(0, vec![0.125, 0.625, 0.75]).unwrap();
        write_phase_file(&path, &layout).unwrap();
        assert_eq!(read_phase_file(&path).unwrap(), layout);

        std::fs::write(&path, "leading=2\n").unwrap();
        assert!(matches!(
            read_phase_file(&path),
            Err(MeshError::Parse { line: 1, .. })
        ));

        std::fs::write(&path, "leading=1\n0.5\nnope\n").unwrap();
        assert!(matches!(
            read_phase_file(&path),
            Err(MeshError::Parse { line: 3, .. })
        ));

        // Out-of-order jumps parse but fail layout validation.
        std::fs::write(&path, "leading=1\n0.75\n0.25\n").unwrap();
        assert!(matches!(read_phase_file(&path), Err(MeshError::Phase(_))));
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let system = VesicleSystem::new(vec![Component {
            curve: GeneratorCurve::perturbed_sphere(32, 1.0, &[0.1 + 0.2 - 0.3 + 0.05]).unwrap(),
            layout: PhaseLayout::new(1, vec![0.1 + 0.2, 2.0 / 3.0]).unwrap(),
        }])
        .unwrap();
        let params = MaterialParams::new(
            PhaseMaterial {
                kappa_h: 1.0 / 3.0,
                kappa_g: -0.1,
                h0: 0.3,
            },
            PhaseMaterial {
                kappa_h: 2.0,
                kappa_g: -1e-7,
                h0: -1.0 / 7.0,
            },
            0.1 + 0.2,
        )
        .unwrap();
        let ckpt = Checkpoint::capture(
            &system,
            &params,
            Some(CheckpointConstraints {
                total_area: 4.0 * PI,
                phase_area: 2.0 * PI,
                volume: 4.0,
            }),
            Some(OptimizerState {
                lambda: [0.1, -2.5e-13, 3.0],
                mu: 1e7,
                outer_iter: 3,
                inner_iters_done: 417,
                rng_seed: 42,
                rng_word_pos: (1u128 << 70) + 9,
            }),
        );
        write_checkpoint(&path, &ckpt).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        // Restored objects pass the normal constructors.
        assert_eq!(
            back.system().unwrap().components()[0].curve.samples(),
            system.components()[0].curve.samples()
        );
        assert_eq!(back.params().unwrap().sigma(), params.sigma());
    }

    #[test]
    fn corrupted_checkpoints_fail_restore_not_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let system = VesicleSystem::new(vec![Component {
            curve: sphere(16),
            layout: whole(),
        }])
        .unwrap();
        let params = MaterialParams::uniform(
            PhaseMaterial {
                kappa_h: 1.0,
                kappa_g: -1.0,
                h0: 0.0,
            },
            1.0,
        )
        .unwrap();
        let mut ckpt = Checkpoint::capture(&system, &params, None, None);
        ckpt.sigma = -1.0;
        write_checkpoint(&path, &ckpt).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert!(matches!(back.params(), Err(MeshError::Restore(_))));

        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(read_checkpoint(&path), Err(MeshError::Json(_))));
    }

    #[test]
    fn report_csv_has_the_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(
            &path,
            &[ReportRow {
                iter: 0,
                energy: 4.0 * PI,
                res_area: 1e-3,
                res_vol: -2e-4,
                res_phase: 0.0,
                step: 0.5,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("iter,energy,res_area,res_vol,res_phase,step")
        );
        assert_eq!(lines.next().unwrap().split(',').count(), 6);
    }
}
