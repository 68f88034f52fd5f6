//! Scalar monitors of a vorticity state: moments, circulation, wall slip,
//! L² norm and distance to the no-slip manifold.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::biot_savart::{circulation, manifold_residual, moments, reconstruct, residual_of, MomentVector};
use crate::conformal::{
    generalized_circulation, generalized_moments, generalized_reconstruct, transformed_sources, ConformalMapSeries,
};
use crate::grid::{FarFieldFlow, RadialGrid, SpectralField};
use crate::{Error, Result};

/// One row of monitored quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub moments: MomentVector,
    pub circulation: f64,
    /// Largest velocity coefficient on `r = r0`.
    pub boundary_slip_max: f64,
    pub l2_norm: f64,
    pub manifold_residual: f64,
}

/// Diagnostics of `w` in the disc exterior or, with a map, in the mapped domain.
pub fn compute(
    w: &SpectralField,
    flow: &FarFieldFlow,
    map: Option<&ConformalMapSeries>,
    t: f64,
) -> Result<Diagnostics> {
    let (m, circ, slip) = match map {
        Some(map) if !map.is_identity() => {
            let m = generalized_moments(w, map)?;
            let v = generalized_reconstruct(&transformed_sources(w, map)?, flow)?;
            (m, generalized_circulation(w, map)?, v.boundary_speed())
        }
        _ => (moments(w)?, circulation(w)?, reconstruct(w, flow)?.boundary_speed()),
    };
    Ok(Diagnostics {
        t,
        manifold_residual: residual_of(&m, flow),
        moments: m,
        circulation: circ,
        boundary_slip_max: slip,
        l2_norm: l2_norm(w),
    })
}

/// `‖w‖ = (∫ |w|² dA)^{1/2} = (2π Σ_k ∫ |w_k|² r dr)^{1/2}` over all signed modes.
pub fn l2_norm(w: &SpectralField) -> f64 {
    let wt = w.grid().trapezoid_weights();
    let nodes = w.grid().nodes();
    let mut acc = 0.0;
    for (k, mode) in w.modes().iter().enumerate() {
        let s: f64 = mode
            .iter()
            .zip(&wt)
            .zip(nodes)
            .map(|((z, a), r)| z.norm_sqr() * a * r)
            .sum();
        acc += if k == 0 { s } else { 2.0 * s };
    }
    (2.0 * PI * acc).sqrt()
}

fn mode_norm_sqr(profile: &[Complex64], grid: &RadialGrid) -> f64 {
    let wt = grid.trapezoid_weights();
    profile
        .iter()
        .zip(&wt)
        .zip(grid.nodes())
        .map(|((z, a), r)| z.norm_sqr() * a * r)
        .sum()
}

/// Relative L² discrepancies between two fields on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    /// `‖a_k − b_k‖ / ‖a_k‖` per mode (absolute when `a_k = 0`).
    pub per_mode: Vec<f64>,
    /// `‖a − b‖ / ‖a‖` (absolute when `a = 0`).
    pub total: f64,
}

/// Discrepancy of `b` against the reference `a`.
pub fn compare(a: &SpectralField, b: &SpectralField) -> Result<Discrepancy> {
    if a.grid() != b.grid() {
        return Err(Error::ShapeMismatch {
            expected: a.n_r(),
            found: b.n_r(),
        });
    }
    if a.k_max() != b.k_max() {
        return Err(Error::ShapeMismatch {
            expected: a.k_max(),
            found: b.k_max(),
        });
    }
    let grid = a.grid();
    let mut per_mode = Vec::with_capacity(a.k_max() + 1);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=a.k_max() {
        let diff: Vec<Complex64> = a.mode(k).iter().zip(b.mode(k)).map(|(x, y)| x - y).collect();
        let d = mode_norm_sqr(&diff, grid);
        let n = mode_norm_sqr(a.mode(k), grid);
        per_mode.push(if n > 0.0 { (d / n).sqrt() } else { d.sqrt() });
        let f = if k == 0 { 1.0 } else { 2.0 };
        num += f * d;
        den += f * n;
    }
    let total = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(Discrepancy { per_mode, total })
}

/// `max_k |m_k − 2ik v_{∞,r,k}|` of the disc moments (re-exported for drivers).
pub fn residual(w: &SpectralField, flow: &FarFieldFlow) -> Result<f64> {
    manifold_residual(w, flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biot_savart::project_to_manifold;
    use crate::grid::Stretching;

    fn field(g: &RadialGrid) -> SpectralField {
        let mut w = SpectralField::zeros(g.clone(), 3);
        for (k, a) in [(0usize, 1.0), (2, 0.5)] {
            for (v, &s) in w.mode_mut(k).iter_mut().zip(g.nodes()) {
                *v = Complex64::new(a * (-(s - 3.0) * (s - 3.0)).exp(), 0.0);
            }
        }
        w
    }

    #[test]
    fn norm_of_gaussian_ring() {
        let g = RadialGrid::new(1.0, 12.0, 4001, Stretching::Uniform).unwrap();
        let mut w = SpectralField::zeros(g.clone(), 0);
        for (v, &s) in w.mode_mut(0).iter_mut().zip(g.nodes()) {
            *v = Complex64::new((-(s - 4.0) * (s - 4.0)).exp(), 0.0);
        }
        // ∫ e^{−2(s−4)²} s ds over the real line is 4 √(π/2).
        let exact = (2.0 * PI * 4.0 * (PI / 2.0).sqrt()).sqrt();
        assert!((l2_norm(&w) - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn compare_examples() {
        let g = RadialGrid::new(1.0, 20.0, 256, Stretching::Geometric(1.01)).unwrap();
        let a = field(&g);
        let d = compare(&a, &a).unwrap();
        assert_eq!(d.total, 0.0);
        assert!(d.per_mode.iter().all(|x| *x == 0.0));
        let mut p = SpectralField::zeros(g.clone(), 3);
        p.mode_mut(1)[100] = Complex64::new(1.0, 0.0);
        let scale = 1e-6 / l2_norm(&p);
        let b = a.axpby(1.0, &p, scale).unwrap();
        let d = compare(&a, &b).unwrap();
        assert!((d.total - 1e-6 / l2_norm(&a)).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_of_projected_field() {
        let g = RadialGrid::new(1.0, 20.0, 512, Stretching::Geometric(1.005)).unwrap();
        let flow = FarFieldFlow::new(0.5, 0.0);
        let w = project_to_manifold(&field(&g), &flow).unwrap();
        let d = compute(&w, &flow, None, 0.0).unwrap();
        assert!(d.manifold_residual < 1e-12);
        assert!(d.boundary_slip_max < 1e-10);
        assert!(d.circulation.abs() < 1e-12);
        let id = ConformalMapSeries::identity(1.0);
        let e = compute(&w, &flow, Some(&id), 0.0).unwrap();
        assert_eq!(d, e);
    }
}
