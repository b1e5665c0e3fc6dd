//! Run configuration: JSON schema, defaults, validation, and assembly of an
//! `EnergySystem` from a validated config.
//!
//! Every section has defaults, so a partial (or empty) config file is valid;
//! unknown keys are rejected to catch typos.

use crate::demag::{BoxGrid, DemagSolver};
use crate::energy::StoredEnergyModel;
use crate::fields::{BoundaryDatum, GammaSelector, GridSpec};
use crate::functional::{EnergySystem, LoadSpec};
use crate::loads::FieldSpec;
use crate::solver::SolverOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub gamma: GammaSelector,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 17,
            gamma: GammaSelector::LeftEdge,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub p: f64,
    pub a: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { p: 4.0, a: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnetostaticsConfig {
    pub mu0: f64,
    pub pad: f64,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl Default for MagnetostaticsConfig {
    fn default() -> Self {
        MagnetostaticsConfig {
            mu0: 1.0,
            pad: 1.0,
            n_cells: 128,
            cg_tol: 1e-10,
            cg_max: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadsConfig {
    pub f: FieldSpec,
    pub h: FieldSpec,
}

impl Default for LoadsConfig {
    fn default() -> Self {
        LoadsConfig {
            f: FieldSpec::Zero,
            h: FieldSpec::Constant { value: [0.1, 0.0] },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Zero,
    UniaxialStretch,
    Shear,
    Bending,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub w: BoundaryKind,
    pub alpha: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            w: BoundaryKind::UniaxialStretch,
            alpha: 0.1,
        }
    }
}

impl BoundaryConfig {
    pub fn datum(&self) -> BoundaryDatum {
        match self.w {
            BoundaryKind::Zero => BoundaryDatum::Zero,
            BoundaryKind::UniaxialStretch => BoundaryDatum::UniaxialStretch { alpha: self.alpha },
            BoundaryKind::Shear => BoundaryDatum::Shear { alpha: self.alpha },
            BoundaryKind::Bending => BoundaryDatum::Bending { alpha: self.alpha },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 5000,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_start: f64,
    pub eps_factor: f64,
    pub num_eps: usize,
    pub warm_start: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_start: 0.4,
            eps_factor: 0.5,
            num_eps: 7,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub magnetostatics: MagnetostaticsConfig,
    pub loads: LoadsConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub seed: u64,
}

fn check_field_spec(name: &str, spec: &FieldSpec) -> Result<(), ConfigError> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match spec {
        FieldSpec::Zero => Ok(()),
        FieldSpec::Constant { value } if finite(value) => Ok(()),
        FieldSpec::GaussianBump {
            amplitude,
            center,
            sigma,
        } if finite(amplitude) && finite(center) && sigma.is_finite() && *sigma > 0.0 => Ok(()),
        FieldSpec::Shear { alpha } if alpha.is_finite() => Ok(()),
        _ => Err(ConfigError::Invalid(format!(
            "load {name} has a non-finite parameter or non-positive sigma"
        ))),
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Config = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.grid.n < 3 {
            return bad(format!("grid.n = {} but at least 3 nodes per side are needed", self.grid.n));
        }
        if !(self.model.p > 2.0) || !self.model.p.is_finite() {
            return bad(format!("model.p = {} must be finite and exceed 2", self.model.p));
        }
        if !(self.model.a > 1.0) || !self.model.a.is_finite() {
            return bad(format!("model.a = {} must be finite and exceed 1", self.model.a));
        }
        let m = &self.magnetostatics;
        if !(m.mu0 >= 0.0) || !m.mu0.is_finite() {
            return bad(format!("magnetostatics.mu0 = {} must be finite and nonnegative", m.mu0));
        }
        if !(m.pad > 0.0) || !m.pad.is_finite() {
            return bad(format!("magnetostatics.pad = {} must be finite and positive", m.pad));
        }
        if m.n_cells < 2 {
            return bad(format!("magnetostatics.N = {} needs at least 2 cells", m.n_cells));
        }
        if !(m.cg_tol > 0.0) || m.cg_max == 0 {
            return bad("magnetostatics solver needs cg_tol > 0 and cg_max >= 1".into());
        }
        check_field_spec("f", &self.loads.f)?;
        check_field_spec("h", &self.loads.h)?;
        if !self.boundary.alpha.is_finite() {
            return bad("boundary.alpha must be finite".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 || self.solver.memory == 0 {
            return bad("solver needs tol > 0, max_iter >= 1, memory >= 1".into());
        }
        let s = &self.sweep;
        if !(s.eps_start > 0.0) || !s.eps_start.is_finite() {
            return bad(format!("sweep.eps_start = {} must be finite and positive", s.eps_start));
        }
        if !(s.eps_factor > 0.0 && s.eps_factor < 1.0) {
            return bad(format!("sweep.eps_factor = {} must lie strictly between 0 and 1", s.eps_factor));
        }
        if s.num_eps == 0 {
            return bad("sweep.num_eps must be at least 1".into());
        }
        Ok(())
    }

    /// The descending ladder of loading scales.
    pub fn eps_ladder(&self) -> Vec<f64> {
        (0..self.sweep.num_eps)
            .map(|k| self.sweep.eps_start * self.sweep.eps_factor.powi(k as i32))
            .collect()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            memory: self.solver.memory,
        }
    }

    /// Assemble the energy system this config describes.
    pub fn build_system(&self) -> Result<EnergySystem, ConfigError> {
        self.validate()?;
        let grid = GridSpec::build(self.grid.n, self.grid.gamma)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let model = StoredEnergyModel::new(self.model.p, self.model.a)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let demag = DemagSolver {
            box_grid: BoxGrid::new(self.magnetostatics.pad, self.magnetostatics.n_cells),
            mu0: self.magnetostatics.mu0,
            cg_tol: self.magnetostatics.cg_tol,
            cg_max: self.magnetostatics.cg_max,
        };
        Ok(EnergySystem::new(
            grid,
            model,
            LoadSpec {
                f: self.loads.f.clone(),
                h: self.loads.h.clone(),
            },
            self.boundary.datum(),
            demag,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_yields_defaults() {
        let cfg: Config = serde_json::from_str("{}").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.n, 17);
        assert_eq!(cfg.magnetostatics.n_cells, 128);
        assert_eq!(cfg.loads.h, FieldSpec::Constant { value: [0.1, 0.0] });
        assert_eq!(cfg.boundary.w, BoundaryKind::UniaxialStretch);
        assert_eq!(cfg.sweep.num_eps, 7);
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg: Config = serde_json::from_str(
            r#"{"grid": {"n": 9}, "magnetostatics": {"N": 64, "mu0": 0.0},
                "loads": {"h": {"type": "zero"}}, "seed": 7}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.n, 9);
        assert!(matches!(cfg.grid.gamma, GammaSelector::LeftEdge));
        assert_eq!(cfg.magnetostatics.n_cells, 64);
        assert_eq!(cfg.magnetostatics.mu0, 0.0);
        assert_eq!(cfg.magnetostatics.pad, 1.0);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"grids": {}}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"grid": {"m": 4}}"#).is_err());
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let cases = [
            r#"{"grid": {"n": 2}}"#,
            r#"{"model": {"p": 2.0}}"#,
            r#"{"model": {"a": 1.0}}"#,
            r#"{"magnetostatics": {"pad": 0.0}}"#,
            r#"{"magnetostatics": {"mu0": -1.0}}"#,
            r#"{"sweep": {"eps_factor": 1.0}}"#,
            r#"{"sweep": {"num_eps": 0}}"#,
            r#"{"solver": {"tol": 0.0}}"#,
            r#"{"loads": {"f": {"type": "gaussian-bump", "amplitude": [1,0], "center": [0,0], "sigma": 0.0}}}"#,
        ];
        for text in cases {
            let cfg: Config = serde_json::from_str(text).unwrap();
            assert!(cfg.validate().is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn ladder_descends_geometrically() {
        let cfg = Config::default();
        let ladder = cfg.eps_ladder();
        assert_eq!(ladder.len(), 7);
        assert_eq!(ladder[0], 0.4);
        assert_eq!(*ladder.last().unwrap(), 0.00625);
        for w in ladder.windows(2) {
            assert!((w[1] - 0.5 * w[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn default_system_builds() {
        let mut cfg = Config::default();
        cfg.grid.n = 5;
        cfg.magnetostatics.n_cells = 16;
        let sys = cfg.build_system().unwrap();
        assert!(sys.has_demag());
        assert_eq!(sys.grid.n, 5);
        assert!((sys.h_inf - 0.1).abs() < 1e-15);
    }
}
