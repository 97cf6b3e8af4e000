use std::path::{Path, PathBuf};

use serde::Serialize;
use tm_core::analysis::{classify, PatternSummary, Thresholds};
use tm_core::fem::{laplace_beltrami_eigs, FemOperators};
use tm_core::simulator::{conservation_check, run, State};
use tm_core::stability::{analyze, check_conditions, ConditionRecord, TuringReport};
use tm_core::Parameters;

use crate::config::Config;
use crate::error::CliError;
use crate::output::{vtk_string, write_json, write_text, MeshDescriptor, RunManifest, RunStatus};

/// Parameters used by `analyze`: the smooth geometry from the config, or the
/// geometry of an explicitly loaded mesh.
pub fn analysis_parameters(cfg: &Config) -> Result<Parameters, CliError> {
    if cfg.mesh.path.is_some() {
        cfg.parameters_for(&cfg.build_mesh()?)
    } else {
        cfg.base_parameters()
    }
}

pub fn cmd_analyze(cfg: &Config) -> Result<TuringReport, CliError> {
    Ok(analyze(&analysis_parameters(cfg)?)?)
}

/// What `analyze` still reports when no steady state is available.
#[derive(Debug, Clone, Serialize)]
pub struct PartialReport {
    pub parameters: Parameters,
    pub conditions: Vec<ConditionRecord>,
    pub error: String,
}

pub fn partial_report(cfg: &Config, error: &CliError) -> Option<PartialReport> {
    let p = analysis_parameters(cfg).ok()?;
    Some(PartialReport {
        parameters: p,
        conditions: check_conditions(&p),
        error: error.to_string(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NondimReport {
    pub parameters: Parameters,
    pub cytosolic_diffusion_ratio: f64,
    /// Sufficient conditions for diffusion-driven instability (cdt:8, cdt:d1, cdt:d2).
    pub instability_conditions: Vec<ConditionRecord>,
}

pub fn cmd_nondim(cfg: &Config) -> Result<NondimReport, CliError> {
    let dp = cfg
        .dimensional
        .ok_or_else(|| CliError::Config("nondim needs a [dimensional] section".into()))?;
    let p = cfg.base_parameters()?;
    let instability_conditions = check_conditions(&p)
        .into_iter()
        .filter(|r| matches!(r.name.as_str(), "cdt:8" | "cdt:d1" | "cdt:d2"))
        .collect();
    Ok(NondimReport {
        parameters: p,
        cytosolic_diffusion_ratio: dp.cytosolic_diffusion_ratio(),
        instability_conditions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenCluster {
    pub mean: f64,
    pub multiplicity: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenTable {
    pub values: Vec<f64>,
    pub clusters: Vec<EigenCluster>,
}

impl EigenTable {
    pub fn clusters_csv(&self) -> String {
        let mut s = String::from("cluster,mean,multiplicity,min,max\n");
        for (i, c) in self.clusters.iter().enumerate() {
            s.push_str(&format!("{i},{:.10e},{},{:.10e},{:.10e}\n", c.mean, c.multiplicity, c.min, c.max));
        }
        s
    }

    pub fn values_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{v:.12e}\n"));
        }
        s
    }
}

/// Groups sorted values; a new group starts when the gap to the previous
/// value exceeds `rel_tol·max(|x|, 1)`.
pub fn cluster_values(values: &[f64], rel_tol: f64) -> Vec<EigenCluster> {
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &x in values {
        match groups.last_mut() {
            Some(g) if x - g[g.len() - 1] <= rel_tol * x.abs().max(1.0) => g.push(x),
            _ => groups.push(vec![x]),
        }
    }
    groups
        .into_iter()
        .map(|g| EigenCluster {
            mean: g.iter().sum::<f64>() / g.len() as f64,
            multiplicity: g.len(),
            min: g[0],
            max: g[g.len() - 1],
        })
        .collect()
}

pub fn cmd_eigs(cfg: &Config, k: usize, rel_tol: f64) -> Result<EigenTable, CliError> {
    let mesh = cfg.build_mesh()?;
    let ops = FemOperators::new(&mesh)?;
    let eig = laplace_beltrami_eigs(ops.mass(), ops.stiffness(), k)?;
    Ok(EigenTable {
        clusters: cluster_values(&eig.values, rel_tol),
        values: eig.values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub pattern: PatternSummary,
    pub t_final: f64,
    pub steps: u64,
    pub final_stationarity: f64,
    pub int_u: f64,
    pub int_v: f64,
    pub pool: f64,
    /// Largest relative violation of the lagged pool identity.
    pub conservation_error: f64,
    pub negative_warnings: usize,
}

pub struct SimulationOutcome {
    pub summary: SimulationSummary,
    pub manifest: RunManifest,
    pub final_state: State,
}

pub fn cmd_simulate(cfg: &Config, preset: Option<&str>, out: &Path) -> Result<SimulationOutcome, CliError> {
    let mesh = cfg.build_mesh()?;
    let ops = FemOperators::new(&mesh)?;
    let p = cfg.parameters_for(&mesh)?;
    cfg.run.validate()?;
    let level = cfg.mesh.path.is_none().then_some(cfg.mesh.level);
    let manifest_path = out.join("manifest.json");
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        preset: preset.map(str::to_owned),
        parameters: p,
        run: cfg.run,
        seed: cfg.run.seed,
        mesh: MeshDescriptor::new(&mesh, level, cfg.mesh.path.clone()),
        config: cfg.to_toml(),
        outputs: vec![PathBuf::from("manifest.json")],
        status: RunStatus::Running,
        error: None,
    };
    write_json(&manifest_path, &manifest)?;

    let mut snapshots = Vec::new();
    let mut write_error = None;
    let result = run(&mesh, &ops, &p, &cfg.run, &mut |s: &State| {
        if !cfg.output.vtk || write_error.is_some() {
            return;
        }
        let rel = PathBuf::from("snapshots").join(format!("state_{:07}.vtk", s.step));
        match write_text(&out.join(&rel), &vtk_string(&mesh, s)) {
            Ok(()) => snapshots.push(rel),
            Err(e) => write_error = Some(e),
        }
    });
    manifest.outputs.extend(snapshots);
    let output = match result {
        Ok(o) if write_error.is_none() => o,
        other => {
            let err = match other {
                Err(e) => CliError::from(e),
                Ok(_) => write_error.expect("checked above"),
            };
            manifest.status = RunStatus::Failed;
            manifest.error = Some(err.to_string());
            write_json(&manifest_path, &manifest)?;
            return Err(err);
        }
    };

    let pattern = classify(&output.state, output.converged, &mesh, &ops, &Thresholds::default());
    let last = *output.series.last().expect("series holds the initial record");
    let summary = SimulationSummary {
        pattern,
        t_final: output.state.t,
        steps: output.state.step,
        final_stationarity: last.stationarity,
        int_u: last.int_u,
        int_v: last.int_v,
        pool: last.pool,
        conservation_error: conservation_check(&output.series, &p),
        negative_warnings: output.negative_warnings,
    };
    write_text(&out.join("series.csv"), &output.series.to_csv())?;
    write_json(&out.join("summary.json"), &summary)?;
    manifest.outputs.push(PathBuf::from("series.csv"));
    manifest.outputs.push(PathBuf::from("summary.json"));
    manifest.status = RunStatus::Completed;
    write_json(&manifest_path, &manifest)?;
    Ok(SimulationOutcome {
        summary,
        manifest,
        final_state: output.state,
    })
}
