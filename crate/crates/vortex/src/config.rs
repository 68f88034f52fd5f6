//! Run configuration: a JSON document with defaults and validation.
//!
//! Unknown keys are rejected everywhere. After [`parse_config`] every optional
//! field holds its resolved value, so serializing the result and parsing it
//! again yields the same configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vortex_core::conformal::ConformalMapSeries;
use vortex_core::evolution::{dealiased_angular_nodes, Boundary, ControlSchedule, Dynamics, StepperConfig};
use vortex_core::grid::{FarFieldFlow, RadialGrid, Stretching};
use vortex_core::Complex64;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    pub dynamics: DynamicsKind,
    pub stepper: StepperSection,
    #[serde(default)]
    pub initial_condition: InitialCondition,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default = "yes")]
    pub project_initial: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "GeometryConfig::default_r0")]
    pub r0: f64,
    /// Defaults to `20 r0`.
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "GeometryConfig::default_n_r")]
    pub n_r: usize,
    #[serde(default)]
    pub stretching: StretchingConfig,
    #[serde(default = "GeometryConfig::default_k_max")]
    pub k_max: usize,
    /// Defaults to the dealiased resolution `3K + 3` (plus the map bandwidth).
    #[serde(default)]
    pub n_phi: Option<usize>,
}

impl GeometryConfig {
    fn default_r0() -> f64 {
        1.0
    }
    fn default_n_r() -> usize {
        512
    }
    fn default_k_max() -> usize {
        16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StretchingConfig {
    Uniform,
    Geometric { ratio: f64 },
}

impl Default for StretchingConfig {
    fn default() -> Self {
        StretchingConfig::Geometric { ratio: 1.005 }
    }
}

impl From<StretchingConfig> for Stretching {
    fn from(s: StretchingConfig) -> Self {
        match s {
            StretchingConfig::Uniform => Stretching::Uniform,
            StretchingConfig::Geometric { ratio } => Stretching::Geometric(ratio),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
}

/// Laurent coefficients `b_1..b_N` as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub b: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynamicsKind {
    Stokes,
    Oseen,
    NavierStokes,
}

impl From<DynamicsKind> for Dynamics {
    fn from(d: DynamicsKind) -> Self {
        match d {
            DynamicsKind::Stokes => Dynamics::Stokes,
            DynamicsKind::Oseen => Dynamics::Oseen,
            DynamicsKind::NavierStokes => Dynamics::NavierStokes,
        }
    }
}

/// Time integrator for the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Solver {
    /// Crank-Nicolson diffusion with Adams-Bashforth advection.
    #[default]
    CrankNicolson,
    /// Exact Stokes propagation through the Weber-Orr transform (Stokes, homogeneous Robin, no map).
    WeberOrr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryConfig {
    RobinHomogeneous,
    OseenCoupled,
    NavierStokesIntegral,
    /// `samples[step][k]` is `u_k` as `[re, im]`, `k = 0..=K`.
    Controlled {
        samples: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    pub t_end: f64,
    /// Defaults to the closure matching the dynamics.
    #[serde(default)]
    pub boundary: Option<BoundaryConfig>,
    #[serde(default = "StepperSection::default_reynolds")]
    pub reynolds_scale: f64,
    #[serde(default)]
    pub solver: Solver,
}

impl StepperSection {
    fn default_reynolds() -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum InitialCondition {
    /// `w_k(r) = amplitude · exp(−(r − center)²/width²)` in a single mode `k`.
    GaussianRing {
        center: f64,
        width: f64,
        mode: usize,
        #[serde(default = "InitialCondition::default_amplitude")]
        amplitude: f64,
    },
    FromSnapshot {
        path: PathBuf,
    },
}

impl InitialCondition {
    fn default_amplitude() -> f64 {
        0.1
    }
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::GaussianRing {
            center: 3.0,
            width: 0.5,
            mode: 0,
            amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    /// Write a snapshot every this many steps; 0 keeps only the first and last.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Relative paths are resolved against the output directory.
    #[serde(default = "OutputsConfig::default_diagnostics")]
    pub diagnostics_path: PathBuf,
    #[serde(default = "OutputsConfig::default_snapshots")]
    pub snapshot_dir: PathBuf,
}

impl OutputsConfig {
    fn default_diagnostics() -> PathBuf {
        PathBuf::from("diagnostics.csv")
    }
    fn default_snapshots() -> PathBuf {
        PathBuf::from("snapshots")
    }
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            snapshot_every: 0,
            diagnostics_path: Self::default_diagnostics(),
            snapshot_dir: Self::default_snapshots(),
        }
    }
}

/// Parses, fills defaults and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(path, e.into_inner().to_string())
    })?;
    cfg.resolve_defaults();
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn resolve_defaults(&mut self) {
        let g = &mut self.geometry;
        g.r_max.get_or_insert(20.0 * g.r0);
        let band = self.map.as_ref().map_or(0, |m| m.b.len() + 1);
        g.n_phi.get_or_insert(dealiased_angular_nodes(g.k_max) + band);
        self.stepper.boundary.get_or_insert(match self.dynamics {
            DynamicsKind::Stokes => BoundaryConfig::RobinHomogeneous,
            DynamicsKind::Oseen => BoundaryConfig::OseenCoupled,
            DynamicsKind::NavierStokes => BoundaryConfig::NavierStokesIntegral,
        });
    }

    pub fn r_max(&self) -> f64 {
        self.geometry.r_max.unwrap_or(20.0 * self.geometry.r0)
    }

    pub fn n_phi(&self) -> usize {
        self.geometry
            .n_phi
            .unwrap_or_else(|| dealiased_angular_nodes(self.geometry.k_max))
    }

    /// Number of steps to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.stepper.t_end / self.stepper.dt).round() as usize
    }

    /// Checks every invariant and reports the first violated one.
    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.geometry;
        let bad = |path: &str, msg: String| Err(CliError::config(path, msg));
        if !(g.r0 > 0.0 && g.r0.is_finite()) {
            return bad("geometry.r0", format!("must be positive, got {}", g.r0));
        }
        let r_max = self.r_max();
        if !(r_max > g.r0 && r_max.is_finite()) {
            return bad("geometry.r_max", format!("must exceed r0 = {}, got {r_max}", g.r0));
        }
        if g.n_r < vortex_core::grid::MIN_RADIAL_NODES {
            return bad(
                "geometry.n_r",
                format!(
                    "needs at least {} nodes, got {}",
                    vortex_core::grid::MIN_RADIAL_NODES,
                    g.n_r
                ),
            );
        }
        if let StretchingConfig::Geometric { ratio } = g.stretching {
            if !(ratio >= 1.0 && ratio.is_finite()) {
                return bad("geometry.stretching.ratio", format!("must be at least 1, got {ratio}"));
            }
        }
        let n_phi = self.n_phi();
        let min_phi = 2 * g.k_max + 2;
        if n_phi < min_phi {
            return bad(
                "geometry.n_phi",
                format!("n_phi = {n_phi} must be at least 2·k_max + 2 = {min_phi}"),
            );
        }
        if self.dynamics == DynamicsKind::NavierStokes && n_phi < 3 * g.k_max {
            return bad(
                "geometry.n_phi",
                format!(
                    "n_phi = {n_phi} must be at least 3·k_max = {} for NavierStokes",
                    3 * g.k_max
                ),
            );
        }
        let s = &self.stepper;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return bad("stepper.dt", format!("must be positive, got {}", s.dt));
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            return bad("stepper.t_end", format!("must be non-negative, got {}", s.t_end));
        }
        let n = (s.t_end / s.dt).round();
        if (n * s.dt - s.t_end).abs() > 1e-9 * s.t_end.max(1.0) {
            return bad(
                "stepper.t_end",
                format!("t_end = {} is not a multiple of dt = {}", s.t_end, s.dt),
            );
        }
        if !(s.reynolds_scale > 0.0 && s.reynolds_scale.is_finite()) {
            return bad(
                "stepper.reynolds_scale",
                format!("must be positive, got {}", s.reynolds_scale),
            );
        }
        if let Some(BoundaryConfig::Controlled { samples }) = &s.boundary {
            if samples.len() < self.steps() {
                return bad(
                    "stepper.boundary.Controlled.samples",
                    format!("{} samples cannot cover {} steps", samples.len(), self.steps()),
                );
            }
        }
        if s.solver == Solver::WeberOrr
            && (self.dynamics != DynamicsKind::Stokes
                || !matches!(s.boundary, None | Some(BoundaryConfig::RobinHomogeneous))
                || self.map.is_some())
        {
            return bad(
                "stepper.solver",
                "WeberOrr propagates Stokes flow with the homogeneous Robin closure in the disc exterior only".into(),
            );
        }
        if self.map.is_some() {
            if self.dynamics == DynamicsKind::Oseen || matches!(s.boundary, Some(BoundaryConfig::OseenCoupled)) {
                return bad(
                    "dynamics",
                    "Oseen dynamics are not available with a conformal map".into(),
                );
            }
            self.conformal_map()
                .map_err(|e| CliError::config("map.b", e.to_string()))?;
        }
        if let InitialCondition::GaussianRing {
            center,
            width,
            mode,
            amplitude,
        } = &self.initial_condition
        {
            if *mode > g.k_max {
                return bad(
                    "initial_condition.GaussianRing.mode",
                    format!("mode {mode} exceeds k_max = {}", g.k_max),
                );
            }
            if !(*width > 0.0) || !center.is_finite() || !amplitude.is_finite() {
                return bad(
                    "initial_condition.GaussianRing",
                    "width must be positive, center and amplitude finite".into(),
                );
            }
        }
        if self.outputs.diagnostics_path.as_os_str().is_empty() {
            return bad("outputs.diagnostics_path", "must not be empty".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> vortex_core::Result<RadialGrid> {
        RadialGrid::new(
            self.geometry.r0,
            self.r_max(),
            self.geometry.n_r,
            self.geometry.stretching.into(),
        )
    }

    pub fn flow(&self) -> FarFieldFlow {
        FarFieldFlow::new(self.flow.vx, self.flow.vy)
    }

    /// The conformal map, if the run is in a mapped domain.
    pub fn conformal_map(&self) -> vortex_core::Result<Option<ConformalMapSeries>> {
        self.map
            .as_ref()
            .map(|m| {
                let b = m.b.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                ConformalMapSeries::new(b, self.geometry.r0)
            })
            .transpose()
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let boundary = match self
            .stepper
            .boundary
            .clone()
            .unwrap_or(BoundaryConfig::RobinHomogeneous)
        {
            BoundaryConfig::RobinHomogeneous => Boundary::RobinHomogeneous,
            BoundaryConfig::OseenCoupled => Boundary::OseenCoupled,
            BoundaryConfig::NavierStokesIntegral => Boundary::NavierStokesIntegral,
            BoundaryConfig::Controlled { samples } => Boundary::Controlled(ControlSchedule {
                samples: samples
                    .into_iter()
                    .map(|row| row.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                    .collect(),
            }),
        };
        let mut cfg = StepperConfig::new(self.stepper.dt, boundary);
        cfg.reynolds_scale = self.stepper.reynolds_scale;
        cfg
    }
}
