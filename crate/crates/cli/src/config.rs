//! TOML run configuration and the bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tm_core::kinetics::nondimensionalize;
use tm_core::simulator::RunConfig;
use tm_core::{icosphere, load_off, DimensionalParameters, Parameters, SurfaceMesh};

use crate::error::CliError;

/// Overrides on top of the baseline (or nondimensionalised) parameter set.
/// `c` and `area` are taken from the mesh when left out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSection {
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub a4: Option<f64>,
    pub a5: Option<f64>,
    pub a6: Option<f64>,
    pub a_neg6: Option<f64>,
    pub d: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(rename = "V0")]
    pub v0: Option<f64>,
    pub c: Option<f64>,
    pub area: Option<f64>,
}

impl ParameterSection {
    fn apply(&self, mut p: Parameters) -> Parameters {
        let fields = [
            (self.a1, &mut p.a1),
            (self.a2, &mut p.a2),
            (self.a3, &mut p.a3),
            (self.a4, &mut p.a4),
            (self.a5, &mut p.a5),
            (self.a6, &mut p.a6),
            (self.a_neg6, &mut p.a_neg6),
            (self.d, &mut p.d),
            (self.gamma, &mut p.gamma),
            (self.v0, &mut p.v0),
            (self.c, &mut p.c),
            (self.area, &mut p.gamma_area),
        ];
        for (value, slot) in fields {
            if let Some(v) = value {
                *slot = v;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    /// Icosphere refinement level; ignored when `path` is set.
    pub level: u32,
    /// OFF file to load instead of the icosphere.
    pub path: Option<PathBuf>,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            level: 4,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write a VTK file per snapshot.
    pub vtk: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub parameters: ParameterSection,
    pub dimensional: Option<DimensionalParameters>,
    pub mesh: MeshSection,
    pub run: RunConfig,
    pub output: OutputSection,
}

pub const PRESETS: [(&str, &str); 7] = [
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3-a2-double", include_str!("../presets/fig3-a2-double.toml")),
    ("fig3-a2-half", include_str!("../presets/fig3-a2-half.toml")),
    ("fig3-a3-half", include_str!("../presets/fig3-a3-half.toml")),
    ("fig3-a3-double", include_str!("../presets/fig3-a3-double.toml")),
    ("fig4-stable", include_str!("../presets/fig4-stable.toml")),
    ("fig4-unstable", include_str!("../presets/fig4-unstable.toml")),
];

pub fn preset_source(name: &str) -> Result<&'static str, CliError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| {
            let known: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown preset {name:?}; known presets: {}", known.join(", ")))
        })
}

const DIMENSIONAL_KEYS: [&str; 16] = [
    "k1", "k2", "k3", "k4", "k5", "k_neg5", "b6", "b_neg6", "g0bar", "du", "dv", "d_cyt", "cmax",
    "r", "vol_over_area", "v_init",
];

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        // serde stops at the first missing field; list them all instead
        if let Some(toml::Value::Table(dim)) = table.get("dimensional") {
            let missing: Vec<_> = DIMENSIONAL_KEYS.iter().filter(|k| !dim.contains_key(**k)).copied().collect();
            if !missing.is_empty() {
                return Err(CliError::Config(format!(
                    "[dimensional] is missing: {}",
                    missing.join(", ")
                )));
            }
        }
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        Self::parse(preset_source(name)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn build_mesh(&self) -> Result<SurfaceMesh, CliError> {
        Ok(match &self.mesh.path {
            Some(path) => load_off(path)?,
            None => icosphere(self.mesh.level)?,
        })
    }

    /// Parameters before geometry is fixed: the nondimensionalised set when a
    /// [dimensional] section is present, the baseline otherwise, then the
    /// [parameters] overrides.
    pub fn base_parameters(&self) -> Result<Parameters, CliError> {
        let base = match &self.dimensional {
            Some(dp) => nondimensionalize(dp)?,
            None => Parameters::baseline(),
        };
        let p = self.parameters.apply(base);
        p.validate()?;
        Ok(p)
    }

    /// Parameters with the pool geometry (c, area) taken from `mesh` unless
    /// set explicitly.
    pub fn parameters_for(&self, mesh: &SurfaceMesh) -> Result<Parameters, CliError> {
        let mut p = self.base_parameters()?.for_mesh(mesh);
        if let Some(c) = self.parameters.c {
            p.c = c;
        }
        if let Some(area) = self.parameters.area {
            p.gamma_area = area;
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for (name, _) in PRESETS {
            let cfg = Config::preset(name).unwrap();
            assert!(cfg.run.validate().is_ok(), "{name}");
            assert_eq!(cfg.mesh.level, 4);
        }
        assert!(Config::preset("nope").is_err());
    }

    #[test]
    fn empty_config_is_baseline() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg.base_parameters().unwrap(), Parameters::baseline());
    }

    #[test]
    fn overrides_apply() {
        let cfg = Config::parse("[parameters]\na2 = 40.0\nV0 = 5.0\n").unwrap();
        let p = cfg.base_parameters().unwrap();
        assert_eq!((p.a2, p.v0), (40.0, 5.0));
        assert!(Config::parse("[parameters]\nbogus = 1.0\n").is_err());
    }

    #[test]
    fn missing_dimensional_keys_are_listed() {
        let err = Config::parse("[dimensional]\nk1 = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("k2") && err.contains("v_init") && !err.contains("k1,"));
    }

    #[test]
    fn expanded_config_round_trips() {
        let cfg = Config::preset("fig3-a2-half").unwrap();
        assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
