//! Post-processing of simulated fields: heterogeneity, spot counting and
//! projections onto the discrete Laplace–Beltrami eigenbasis.

use serde::{Deserialize, Serialize};

use crate::fem::FemOperators;
use crate::mesh::SurfaceMesh;
use crate::simulator::State;

/// Floor on |mean| in the relative heterogeneity.
pub const MEAN_FLOOR: f64 = 1e-12;
pub const DEFAULT_PROMINENCE: f64 = 0.5;
pub const DEFAULT_HOMOGENEITY_THRESHOLD: f64 = 1e-3;

fn total_area(ops: &FemOperators) -> f64 {
    ops.lumped_mass().iter().sum()
}

fn mean(field: &[f64], ops: &FemOperators) -> f64 {
    let area = total_area(ops);
    ops.lumped_mass().iter().zip(field).map(|(m, f)| m * f).sum::<f64>() / area
}

/// Relative L2 deviation from the mean: sqrt(∫(f − f̄)²/|Γ|) / max(|f̄|, 1e-12).
pub fn heterogeneity(field: &[f64], ops: &FemOperators) -> f64 {
    assert_eq!(field.len(), ops.dim(), "field length must match the mesh");
    let area = total_area(ops);
    let m = mean(field, ops);
    let centred: Vec<f64> = field.iter().map(|f| f - m).collect();
    let var = ops.mass().bilinear(&centred, &centred).max(0.0) / area;
    var.sqrt() / m.abs().max(MEAN_FLOOR)
}

/// Vertices that strictly exceed every one-ring neighbour and lie above
/// mean + prominence·(max − mean). Mean is the plain vertex average.
pub fn count_local_maxima(mesh: &SurfaceMesh, field: &[f64], prominence: f64) -> Vec<usize> {
    assert_eq!(field.len(), mesh.vertex_count(), "field length must match the mesh");
    assert!(prominence >= 0.0, "prominence must be nonnegative");
    if field.is_empty() {
        return Vec::new();
    }
    let avg = field.iter().sum::<f64>() / field.len() as f64;
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = avg + prominence * (max - avg);
    (0..field.len())
        .filter(|&i| {
            field[i] > floor && mesh.neighbors(i).iter().all(|&j| field[i] > field[j])
        })
        .collect()
}

/// ⟨field − mean, w⟩_M for an M-normalised eigenvector w.
pub fn mode_amplitude(field: &[f64], eigenvector: &[f64], ops: &FemOperators) -> f64 {
    let m = mean(field, ops);
    let centred: Vec<f64> = field.iter().map(|f| f - m).collect();
    ops.mass().bilinear(&centred, eigenvector)
}

/// Least-squares slope of log|a(t)| against t.
pub fn fit_exponential_rate(times: &[f64], amplitudes: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(amplitudes)
        .filter(|(_, a)| a.abs() > 0.0)
        .map(|(&t, a)| (t, a.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternClass {
    Homogeneous,
    Pattern,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub homogeneity: f64,
    pub prominence: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            homogeneity: DEFAULT_HOMOGENEITY_THRESHOLD,
            prominence: DEFAULT_PROMINENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub classification: PatternClass,
    /// Zero for homogeneous states.
    pub n_maxima: usize,
    pub maxima: Vec<usize>,
    pub heterogeneity: f64,
    /// Vertex of the global maximum of u.
    pub max_location: usize,
    pub converged: bool,
}

pub fn classify(
    state: &State,
    converged: bool,
    mesh: &SurfaceMesh,
    ops: &FemOperators,
    thresholds: &Thresholds,
) -> PatternSummary {
    let h = heterogeneity(&state.u, ops);
    let max_location = state
        .u
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0;
    let homogeneous = h < thresholds.homogeneity;
    let maxima = if homogeneous {
        Vec::new()
    } else {
        count_local_maxima(mesh, &state.u, thresholds.prominence)
    };
    let classification = match (converged, homogeneous, maxima.is_empty()) {
        (true, true, _) => PatternClass::Homogeneous,
        (true, false, false) => PatternClass::Pattern,
        _ => PatternClass::NotConverged,
    };
    PatternSummary {
        classification,
        n_maxima: maxima.len(),
        maxima,
        heterogeneity: h,
        max_location,
        converged,
    }
}
