//! File writers: legacy VTK snapshots, JSON documents.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tm_core::simulator::{RunConfig, State};
use tm_core::{Parameters, SurfaceMesh};

use crate::error::CliError;

/// Legacy ASCII POLYDATA with u and v as point scalars.
pub fn vtk_string(mesh: &SurfaceMesh, state: &State) -> String {
    let n = mesh.vertex_count();
    let t = mesh.triangle_count();
    let mut out = String::with_capacity(64 * n);
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "u v t={:.6} step={} V={:.12e}", state.t, state.step, state.pool);
    out.push_str("ASCII\nDATASET POLYDATA\n");
    let _ = writeln!(out, "POINTS {n} double");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.12e} {:.12e} {:.12e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "POLYGONS {t} {}", 4 * t);
    for tri in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, field) in [("u", &state.u), ("v", &state.v)] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for x in field {
            let _ = writeln!(out, "{x:.12e}");
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialise");
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshDescriptor {
    /// Icosphere level, absent for meshes loaded from file.
    pub level: Option<u32>,
    pub path: Option<PathBuf>,
    pub vertices: usize,
    pub triangles: usize,
    pub surface_area: f64,
    pub enclosed_volume: f64,
}

impl MeshDescriptor {
    pub fn new(mesh: &SurfaceMesh, level: Option<u32>, path: Option<PathBuf>) -> Self {
        Self {
            level,
            path,
            vertices: mesh.vertex_count(),
            triangles: mesh.triangle_count(),
            surface_area: mesh.surface_area(),
            enclosed_volume: mesh.enclosed_volume(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

/// Everything needed to repeat a run; rewritten when the run ends.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub preset: Option<String>,
    pub parameters: Parameters,
    pub run: RunConfig,
    pub seed: u64,
    pub mesh: MeshDescriptor,
    /// The fully expanded configuration, as accepted by `--config`.
    pub config: String,
    pub outputs: Vec<PathBuf>,
    pub status: RunStatus,
    pub error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use tm_core::icosphere;

    #[test]
    fn vtk_layout() {
        let mesh = icosphere(0).unwrap();
        let state = State {
            u: vec![0.5; 12],
            v: vec![0.25; 12],
            pool: 1.0,
            t: 0.0,
            step: 0,
        };
        let text = vtk_string(&mesh, &state);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&"POINTS 12 double"));
        assert!(lines.contains(&"POLYGONS 20 80"));
        assert!(lines.contains(&"POINT_DATA 12"));
        assert_eq!(lines.iter().filter(|l| l.starts_with("SCALARS")).count(), 2);
        // header + points + polygons + two scalar blocks
        assert_eq!(lines.len(), 5 + 12 + 1 + 20 + 1 + 2 * (2 + 12));
    }
}
