//! Velocity from vorticity in the exterior of the disc `|x| > r0`, the no-slip
//! moment constraints and the affine manifold `M` they define.
//!
//! With `I_k(r) = ∫_{r0}^r s^{|k|+1} w_k ds` and `O_k(r) = ∫_r^∞ s^{1−|k|} w_k ds`,
//!
//! ```text
//! v_{r,k} = sign(k) i/2 (r^{−|k|−1} I_k + r^{|k|−1} O_k) + v_{∞,r,k}
//! v_{φ,k} =        1/2 (r^{−|k|−1} I_k − r^{|k|−1} O_k) + v_{∞,φ,k}
//! ```
//!
//! The velocity vanishes on `r = r0` exactly when every moment
//! `m_k = O_k(r0)` equals `2ik v_{∞,r,k}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::grid::{
    cumulative_from_start, cumulative_to_end, derivative, power_law_tail, radial_moment, FarFieldFlow, RadialGrid,
    SpectralField, SpectralVelocity, TailRule,
};
use crate::par::try_map_modes;
use crate::{Error, Result};

/// Moments `m_k = ∫_{r0}^∞ s^{1−k} w_k(s) ds` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub values: Vec<Complex64>,
}

impl MomentVector {
    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    /// `m_k` for signed `k` (conjugate for `k < 0`).
    pub fn get(&self, k: i64) -> Complex64 {
        let v = self.values[k.unsigned_abs() as usize];
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }
}

/// Moment target `2ik v_{∞,r,k}` of the no-slip manifold.
pub fn moment_target(flow: &FarFieldFlow, k: i64) -> Complex64 {
    Complex64::new(0.0, 2.0 * k as f64) * flow.radial(k)
}

pub(crate) fn with_mode(e: Error, k: usize) -> Error {
    match e {
        Error::DivergentTail { power, exponent, .. } => Error::DivergentTail {
            mode: Some(k as i64),
            power,
            exponent,
        },
        other => other,
    }
}

/// Weighted source `s^p f(s)` at every node.
pub(crate) fn weighted(profile: &[Complex64], nodes: &[f64], p: i32) -> Vec<Complex64> {
    profile.iter().zip(nodes).map(|(f, s)| f * s.powi(p)).collect()
}

/// `∫_r^∞ s^{1−k} f ds` at every node, with the power-law tail beyond `r_max`.
///
/// Accumulated from the far end, which keeps the value at `r0` identical to
/// [`radial_moment`] and avoids cancellation where `r^{k−1}` is large.
pub(crate) fn outer_integral(profile: &[Complex64], k: usize, grid: &RadialGrid) -> Result<Vec<Complex64>> {
    let p = 1 - k as i32;
    let tail = power_law_tail(profile, p, grid).map_err(|e| with_mode(e, k))?;
    let mut out = cumulative_to_end(&weighted(profile, grid.nodes(), p), grid.nodes());
    for v in &mut out {
        *v += tail;
    }
    Ok(out)
}

pub(crate) fn inner_integral(profile: &[Complex64], k: usize, grid: &RadialGrid) -> Vec<Complex64> {
    cumulative_from_start(&weighted(profile, grid.nodes(), k as i32 + 1), grid.nodes())
}

/// Velocity of mode `k ≥ 0` from separate inner and outer sources.
pub(crate) fn mode_velocity(
    inner_src: &[Complex64],
    outer_src: &[Complex64],
    k: usize,
    grid: &RadialGrid,
    flow: &FarFieldFlow,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let inner = inner_integral(inner_src, k, grid);
    let outer = outer_integral(outer_src, k, grid)?;
    let kk = k as i32;
    let vr_inf = flow.radial(k as i64);
    let vp_inf = flow.angular(k as i64);
    let half_i = Complex64::new(0.0, 0.5);
    let n = grid.n_r();
    let mut vr = vec![Complex64::zero(); n];
    let mut vp = vec![Complex64::zero(); n];
    for (i, &r) in grid.nodes().iter().enumerate() {
        let a = inner[i] * r.powi(-kk - 1);
        let b = outer[i] * r.powi(kk - 1);
        vr[i] = if k == 0 { vr_inf } else { half_i * (a + b) + vr_inf };
        vp[i] = (a - b) * 0.5 + vp_inf;
    }
    Ok((vr, vp))
}

/// Biot-Savart reconstruction of the velocity.
pub fn reconstruct(w: &SpectralField, flow: &FarFieldFlow) -> Result<SpectralVelocity> {
    let grid = w.grid();
    let pairs = try_map_modes(w.k_max() + 1, |k| mode_velocity(w.mode(k), w.mode(k), k, grid, flow))?;
    let (v_r, v_phi) = pairs.into_iter().unzip();
    Ok(SpectralVelocity {
        grid: grid.clone(),
        v_r,
        v_phi,
    })
}

/// No-slip moments with power-law tail extrapolation.
pub fn moments(w: &SpectralField) -> Result<MomentVector> {
    let values = try_map_modes(w.k_max() + 1, |k| {
        radial_moment(w.mode(k), 1 - k as i32, w.grid(), TailRule::PowerLawExtrapolate)
            .map(|m| m.value)
            .map_err(|e| with_mode(e, k))
    })?;
    Ok(MomentVector { values })
}

/// `max_k |m_k − 2ik v_{∞,r,k}|`.
pub fn manifold_residual(w: &SpectralField, flow: &FarFieldFlow) -> Result<f64> {
    let m = moments(w)?;
    Ok(residual_of(&m, flow))
}

/// `max_k |m_k − 2ik v_{∞,r,k}|` for an already computed moment vector.
pub fn residual_of(m: &MomentVector, flow: &FarFieldFlow) -> f64 {
    m.values
        .iter()
        .enumerate()
        .map(|(k, v)| (v - moment_target(flow, k as i64)).norm())
        .fold(0.0, f64::max)
}

/// The quartic bump `(s − r0)²(2r0 − s)²` on `[r0, 2r0]`, zero beyond.
pub fn projection_bump(grid: &RadialGrid) -> Vec<f64> {
    let r0 = grid.r0();
    grid.nodes()
        .iter()
        .map(|&s| {
            if s < 2.0 * r0 {
                let a = s - r0;
                let b = 2.0 * r0 - s;
                a * a * b * b
            } else {
                0.0
            }
        })
        .collect()
}

/// Nearest point of `M` along the bump directions: every mode `k` receives
/// `(target − m_k)/μ_k · B(s)`, where `μ_k` is the discrete moment of `B`.
pub fn project_to_manifold(w: &SpectralField, flow: &FarFieldFlow) -> Result<SpectralField> {
    let grid = w.grid();
    let bump = projection_bump(grid);
    let bump_c: Vec<Complex64> = bump.iter().map(|&b| Complex64::new(b, 0.0)).collect();
    let m = moments(w)?;
    let mut out = w.clone();
    for k in 0..=w.k_max() {
        let mu = radial_moment(&bump_c, 1 - k as i32, grid, TailRule::Truncate)?.value.re;
        if !(mu > 0.0) {
            return Err(Error::InvalidGrid("grid does not resolve the projection bump"));
        }
        let deficit = moment_target(flow, k as i64) - m.values[k];
        if deficit.is_zero() {
            continue;
        }
        let scale = deficit / mu;
        for (v, &b) in out.mode_mut(k).iter_mut().zip(&bump) {
            *v += scale * b;
        }
        if k == 0 {
            for v in out.mode_mut(0) {
                v.im = 0.0;
            }
        }
    }
    Ok(out)
}

/// Total circulation `2π ∫ s w_0 ds`.
pub fn circulation(w: &SpectralField) -> Result<f64> {
    let m = radial_moment(w.mode(0), 1, w.grid(), TailRule::PowerLawExtrapolate).map_err(|e| with_mode(e, 0))?;
    Ok(2.0 * PI * m.value.re)
}

/// Divergence `(1/r)∂_r(r v_{r,k}) + (ik/r) v_{φ,k}` of the reconstructed
/// velocity, differentiating the running integrals exactly
/// (`I_k' = r^{k+1} w_k`, `O_k' = −r^{1−k} w_k`).
pub fn divergence(w: &SpectralField, flow: &FarFieldFlow) -> Result<Vec<Vec<Complex64>>> {
    let grid = w.grid();
    try_map_modes(w.k_max() + 1, |k| {
        let inner = inner_integral(w.mode(k), k, grid);
        let outer = outer_integral(w.mode(k), k, grid)?;
        let (_, vp) = mode_velocity(w.mode(k), w.mode(k), k, grid, flow)?;
        let kk = k as i32;
        let kf = k as f64;
        let vr_inf = flow.radial(k as i64);
        let out = grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                // ∂_r (r v_r) with r v_r = (i/2)(r^{−k} I + r^k O) + r v_∞
                let d_rvr = if k == 0 {
                    vr_inf
                } else {
                    let wi = w.mode(k)[i];
                    let d = -kf * r.powi(-kk - 1) * inner[i]
                        + r.powi(-kk) * r.powi(kk + 1) * wi
                        + kf * r.powi(kk - 1) * outer[i]
                        - r.powi(kk) * r.powi(1 - kk) * wi;
                    Complex64::new(0.0, 0.5) * d + vr_inf
                };
                (d_rvr + Complex64::new(0.0, kf) * vp[i]) / r
            })
            .collect();
        Ok(out)
    })
}

/// Curl `(1/r)∂_r(r v_{φ,k}) − (ik/r) v_{r,k}` by second-order finite differences.
pub fn curl(v: &SpectralVelocity) -> Vec<Vec<Complex64>> {
    let nodes = v.grid.nodes();
    (0..=v.k_max())
        .map(|k| {
            let rvp: Vec<Complex64> = v.v_phi[k].iter().zip(nodes).map(|(z, r)| z * r).collect();
            let d = derivative(&rvp, nodes);
            d.iter()
                .zip(&v.v_r[k])
                .zip(nodes)
                .map(|((dz, vr), &r)| (dz - Complex64::new(0.0, k as f64) * vr) / r)
                .collect()
        })
        .collect()
}
