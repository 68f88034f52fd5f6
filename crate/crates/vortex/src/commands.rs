//! The `compare`, `project` and `moments` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use vortex_core::biot_savart::{moments, project_to_manifold, residual_of};
use vortex_core::diagnostics::{compare, Discrepancy};
use vortex_core::grid::FarFieldFlow;

use crate::error::{CliError, Context};
use crate::snapshot;

/// Relative L² discrepancies of `b` against `a`.
pub fn compare_snapshots(a: &Path, b: &Path) -> Result<Discrepancy, CliError> {
    let wa = snapshot::read(a)?;
    let wb = snapshot::read(b)?;
    if wa.grid() != wb.grid() || wa.k_max() != wb.k_max() {
        return Err(CliError::Format {
            path: b.to_path_buf(),
            message: format!("grid or mode count differs from {}", a.display()),
        });
    }
    compare(&wa, &wb).during("diagnostics", "compare", 0.0)
}

pub fn format_discrepancy(d: &Discrepancy) -> String {
    let mut s = String::from("k,relative_l2\n");
    for (k, e) in d.per_mode.iter().enumerate() {
        let _ = writeln!(s, "{k},{e:.16e}");
    }
    let _ = writeln!(s, "total,{:.16e}", d.total);
    s
}

/// Projects a snapshot onto the no-slip manifold of `flow` and writes the result.
pub fn project(input: &Path, output: &Path, flow: FarFieldFlow) -> Result<f64, CliError> {
    let w = snapshot::read(input)?;
    let p = project_to_manifold(&w, &flow).during("biot_savart", "project_to_manifold", 0.0)?;
    snapshot::write(output, &p)?;
    let m = moments(&p).during("biot_savart", "moments", 0.0)?;
    Ok(residual_of(&m, &flow))
}

/// Moment vector and manifold residual (for the given far field) as text.
pub fn moments_report(path: &Path, flow: FarFieldFlow) -> Result<String, CliError> {
    let w = snapshot::read(path)?;
    let m = moments(&w).during("biot_savart", "moments", 0.0)?;
    let mut s = String::from("k,re,im\n");
    for k in 0..=m.k_max() as i64 {
        let z = m.get(k);
        let _ = writeln!(s, "{k},{:.16e},{:.16e}", z.re, z.im);
    }
    let _ = writeln!(s, "manifold_residual,{:.16e}", residual_of(&m, &flow));
    Ok(s)
}
