//! Batch execution of a [`RunConfig`].

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use vortex_core::biot_savart::project_to_manifold;
use vortex_core::conformal::{project_to_generalized_manifold, ConformalMapSeries};
use vortex_core::diagnostics::{self, Diagnostics};
use vortex_core::evolution::{MappedStepper, Stepper};
use vortex_core::grid::{FarFieldFlow, RadialGrid, SpectralField};
use vortex_core::weber_orr::{apply_heat, BandSpec, SpectralBand, WeberOrr};
use vortex_core::Complex64;

use crate::config::{InitialCondition, RunConfig, Solver};
use crate::error::{CliError, Context};
use crate::snapshot;

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: usize,
    pub final_time: f64,
    pub diagnostics_path: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub final_diagnostics: Diagnostics,
}

/// Resolves `p` against `base` unless it is absolute.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `amplitude · exp(−(r − center)²/width²)` in mode `mode`, zero elsewhere.
pub fn gaussian_ring(
    grid: &RadialGrid,
    k_max: usize,
    center: f64,
    width: f64,
    mode: usize,
    amplitude: f64,
) -> SpectralField {
    let mut w = SpectralField::zeros(grid.clone(), k_max);
    for (v, &r) in w.mode_mut(mode).iter_mut().zip(grid.nodes()) {
        let x = (r - center) / width;
        *v = Complex64::new(amplitude * (-x * x).exp(), 0.0);
    }
    w
}

fn initial_field(cfg: &RunConfig, grid: &RadialGrid) -> Result<SpectralField, CliError> {
    let k_max = cfg.geometry.k_max;
    match &cfg.initial_condition {
        InitialCondition::GaussianRing {
            center,
            width,
            mode,
            amplitude,
        } => Ok(gaussian_ring(grid, k_max, *center, *width, *mode, *amplitude)),
        InitialCondition::FromSnapshot { path } => {
            let w = snapshot::read(path)?;
            if w.grid() != grid {
                return Err(CliError::config(
                    "initial_condition.FromSnapshot.path",
                    format!("{} was written on a different radial grid", path.display()),
                ));
            }
            Ok(w.with_k_max(k_max))
        }
    }
}

struct Outputs {
    csv: BufWriter<fs::File>,
    csv_path: PathBuf,
    snapshot_dir: PathBuf,
    snapshots: Vec<PathBuf>,
}

impl Outputs {
    fn create(cfg: &RunConfig, out_dir: &Path) -> Result<Self, CliError> {
        let csv_path = resolve(out_dir, &cfg.outputs.diagnostics_path);
        let snapshot_dir = resolve(out_dir, &cfg.outputs.snapshot_dir);
        fs::create_dir_all(&snapshot_dir).map_err(|e| CliError::io(&snapshot_dir, e))?;
        if let Some(parent) = csv_path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
        let mut out = Self {
            csv: BufWriter::new(file),
            csv_path,
            snapshot_dir,
            snapshots: Vec::new(),
        };
        out.line(&csv_header(cfg.geometry.k_max))?;
        Ok(out)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.csv, "{s}").map_err(|e| CliError::io(&self.csv_path, e))
    }

    fn row(&mut self, d: &Diagnostics) -> Result<(), CliError> {
        self.line(&csv_row(d))
    }

    fn snapshot(&mut self, step: usize, w: &SpectralField) -> Result<(), CliError> {
        let path = self.snapshot_dir.join(format!("snapshot_{step:06}.vxt"));
        snapshot::write(&path, w)?;
        self.snapshots.push(path);
        Ok(())
    }

    fn finish(mut self) -> Result<(PathBuf, Vec<PathBuf>), CliError> {
        self.csv.flush().map_err(|e| CliError::io(&self.csv_path, e))?;
        Ok((self.csv_path, self.snapshots))
    }
}

pub fn csv_header(k_max: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for k in 0..=k_max {
        cols.push(format!("m{k}_re"));
        cols.push(format!("m{k}_im"));
    }
    cols.extend(["circulation", "boundary_slip_max", "l2_norm", "manifold_residual"].map(String::from));
    cols.join(",")
}

/// One CSV line; `{:.16e}` keeps 17 significant digits.
pub fn csv_row(d: &Diagnostics) -> String {
    let mut vals = vec![d.t];
    for k in 0..=d.moments.k_max() as i64 {
        let m = d.moments.get(k);
        vals.push(m.re);
        vals.push(m.im);
    }
    vals.extend([d.circulation, d.boundary_slip_max, d.l2_norm, d.manifold_residual]);
    vals.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

enum Integrator {
    Disc(Stepper),
    Mapped(MappedStepper),
    Spectral {
        wo: WeberOrr,
        bands: Vec<SpectralBand>,
        dt: f64,
    },
}

impl Integrator {
    /// State after step `n`, given the state after step `n − 1`.
    fn advance(&mut self, n: usize, w: &SpectralField) -> vortex_core::Result<SpectralField> {
        match self {
            Integrator::Disc(s) => s.step(w),
            Integrator::Mapped(s) => s.step(w),
            Integrator::Spectral { wo, bands, dt } => {
                let t = n as f64 * *dt;
                let mut b = bands.clone();
                for band in &mut b {
                    apply_heat(band, t);
                }
                let mut out = wo.inverse_modes(&b)?;
                for v in &mut out[0] {
                    v.im = 0.0;
                }
                SpectralField::from_modes(w.grid().clone(), out)
            }
        }
    }

    /// The spectral integrator propagates from the initial state directly, so
    /// intermediate steps are skipped unless they produce output.
    fn evaluates_every_step(&self) -> bool {
        !matches!(self, Integrator::Spectral { .. })
    }
}

fn build_integrator(
    cfg: &RunConfig,
    grid: &RadialGrid,
    flow: FarFieldFlow,
    map: Option<&ConformalMapSeries>,
    w0: &SpectralField,
) -> Result<Integrator, CliError> {
    let k_max = cfg.geometry.k_max;
    let scfg = cfg.stepper_config();
    let dynamics = cfg.dynamics.into();
    if cfg.stepper.solver == Solver::WeberOrr {
        let wo = WeberOrr::new(grid, k_max, BandSpec::for_radius(grid.r0())).during("weber_orr", "new", 0.0)?;
        let modes: Vec<usize> = (0..=k_max).collect();
        let profiles: Vec<&[Complex64]> = modes.iter().map(|&k| w0.mode(k)).collect();
        let bands = wo
            .forward_modes(&modes, &profiles)
            .during("weber_orr", "forward", 0.0)?;
        return Ok(Integrator::Spectral {
            wo,
            bands,
            dt: cfg.stepper.dt,
        });
    }
    match map {
        Some(map) => MappedStepper::new(grid, k_max, flow, dynamics, scfg, map.clone())
            .map(Integrator::Mapped)
            .during("evolution", "MappedStepper::new", 0.0),
        None => Stepper::new(grid, k_max, flow, dynamics, scfg)
            .and_then(|s| s.with_angular_nodes(cfg.n_phi()))
            .map(Integrator::Disc)
            .during("evolution", "Stepper::new", 0.0),
    }
}

/// Runs `cfg`, writing all outputs below `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let grid = cfg.grid().during("grid", "RadialGrid::new", 0.0)?;
    let flow = cfg.flow();
    let map = cfg
        .conformal_map()
        .during("conformal", "ConformalMapSeries::new", 0.0)?;
    let map = map.filter(|m| !m.is_identity());

    let mut w = initial_field(cfg, &grid)?;
    if cfg.project_initial {
        w = match &map {
            Some(m) => project_to_generalized_manifold(&w, m, &flow).during(
                "conformal",
                "project_to_generalized_manifold",
                0.0,
            )?,
            None => project_to_manifold(&w, &flow).during("biot_savart", "project_to_manifold", 0.0)?,
        };
    }

    let steps = cfg.steps();
    let every = cfg.outputs.snapshot_every;
    let dt = cfg.stepper.dt;
    let diag =
        |w: &SpectralField, t: f64| diagnostics::compute(w, &flow, map.as_ref(), t).during("diagnostics", "compute", t);

    let mut out = Outputs::create(cfg, out_dir)?;
    let mut last = diag(&w, 0.0)?;
    out.row(&last)?;
    out.snapshot(0, &w)?;

    let mut integrator = build_integrator(cfg, &grid, flow, map.as_ref(), &w)?;
    for n in 1..=steps {
        let t = n as f64 * dt;
        let snap = n == steps || (every > 0 && n % every == 0);
        if !snap && !integrator.evaluates_every_step() {
            continue;
        }
        w = integrator.advance(n, &w).during("evolution", "step", t)?;
        if !w.is_finite() {
            return Err(CliError::Numerical {
                module: "evolution",
                operation: "step",
                time: t,
                source: vortex_core::Error::NonFinite {
                    mode: first_nonfinite_mode(&w),
                },
            });
        }
        last = diag(&w, t)?;
        out.row(&last)?;
        if snap {
            out.snapshot(n, &w)?;
        }
    }
    let (diagnostics_path, snapshots) = out.finish()?;
    Ok(RunReport {
        steps,
        final_time: steps as f64 * dt,
        diagnostics_path,
        snapshots,
        final_diagnostics: last,
    })
}

fn first_nonfinite_mode(w: &SpectralField) -> Option<i64> {
    w.modes()
        .iter()
        .position(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        .map(|k| k as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small(extra: &str) -> RunConfig {
        parse_config(&format!(
            r#"{{"geometry": {{"n_r": 64, "k_max": 2, "stretching": {{"kind": "geometric", "ratio": 1.04}}}},
                "flow": {{"vx": 0.5}}, "dynamics": "Stokes",
                "stepper": {{"dt": 0.01, "t_end": 0.05}} {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn header_matches_rows() {
        let cfg = small("");
        let dir = tempfile::tempdir().unwrap();
        let report = run(&cfg, dir.path()).unwrap();
        let text = fs::read_to_string(&report.diagnostics_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], csv_header(2));
        assert_eq!(lines.len(), 1 + 6);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 1 + 6 + 4);
        }
        assert_eq!(report.snapshots.len(), 2);
    }

    #[test]
    fn zero_horizon_writes_initial_state_only() {
        let cfg = small("").clone();
        let mut cfg = cfg;
        cfg.stepper.t_end = 0.0;
        let dir = tempfile::tempdir().unwrap();
        let report = run(&cfg, dir.path()).unwrap();
        assert_eq!(report.snapshots.len(), 1);
        let text = fs::read_to_string(&report.diagnostics_path).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn snapshot_cadence() {
        let cfg = small(r#", "outputs": {"snapshot_every": 2}"#);
        let dir = tempfile::tempdir().unwrap();
        let report = run(&cfg, dir.path()).unwrap();
        let names: Vec<String> = report
            .snapshots
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "snapshot_000000.vxt",
                "snapshot_000002.vxt",
                "snapshot_000004.vxt",
                "snapshot_000005.vxt"
            ]
        );
    }

    #[test]
    fn from_snapshot_on_other_grid_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let g = RadialGrid::new(1.0, 20.0, 32, vortex_core::grid::Stretching::Uniform).unwrap();
        let p = dir.path().join("w.vxt");
        snapshot::write(&p, &SpectralField::zeros(g, 2)).unwrap();
        let mut cfg = small("");
        cfg.initial_condition = InitialCondition::FromSnapshot { path: p };
        assert!(matches!(run(&cfg, dir.path()), Err(CliError::Config { .. })));
    }
}
