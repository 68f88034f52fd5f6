//! Weber-Orr transform pair for the Robin problem of `Δ_k` and the exact
//! Stokes propagator.
//!
//! ```text
//! f̂(λ) = ∫_{r0}^∞ R_{k,k−1}(λ, s) f(s) s ds
//! f(r) = ∫_0^∞ R_{k,k−1}(λ, r) f̂(λ) λ dλ / (J_{k−1}(λr0)² + Y_{k−1}(λr0)²)
//! ```
//!
//! The λ integral runs over a band that is geometric from a small floor up to
//! the uniform spacing `λ_max/n_λ` and uniform from there to `λ_max`. Two
//! pieces of the spectrum are not captured by quadrature and are added in
//! closed form from the moment `m_k = ∫ s^{1−k} f ds`:
//!
//! * `k ≥ 2`: `r^{−k}` is a square-integrable eigenfunction with eigenvalue 0
//!   that the transform annihilates; its share is `m_k (2k−2) r0^{2k−2} r^{−k}`.
//! * `k = 1`: the integrand behaves like `m_1 / (r λ (ln²λ + …))` below the
//!   floor and is integrated analytically there.
//!
//! Both pieces sit at `λ = 0`, so the heat factor leaves them unchanged.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::biot_savart::with_mode;
use crate::grid::{radial_moment, RadialGrid, SpectralField, TailRule};
use crate::par::try_map_modes;
use crate::specfun::{bessel_jy_sequences, MIN_SECOND_KIND_ARG};
use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Heat factors below `e^{−36}` are dropped.
pub const HEAT_CUTOFF: f64 = 36.0;

/// Relative size of the last band value above which the band is reported as
/// not decayed.
pub const BAND_DECAY_TOL: f64 = 1e-6;

/// λ-quadrature layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    /// Upper end of the band.
    pub lambda_max: f64,
    /// Number of uniform cells; the uniform spacing is `lambda_max / n_lambda`.
    pub n_lambda: usize,
    /// Lowest node of the geometric part.
    pub floor: f64,
    /// Growth ratio of the geometric part.
    pub ratio: f64,
}

impl BandSpec {
    /// Default band for a body of radius `r0`: `λ ≤ 20/r0`, 2000 uniform cells,
    /// geometric part from `10^{−6}/r0` with ratio 1.02.
    pub fn for_radius(r0: f64) -> Self {
        Self {
            lambda_max: 20.0 / r0,
            n_lambda: 2000,
            floor: 1e-6 / r0,
            ratio: 1.02,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_max > 0.0) || !(self.floor > 0.0) || self.n_lambda < 2 || !(self.ratio > 1.0) {
            return Err(Error::InvalidGrid("invalid λ band"));
        }
        if self.floor >= self.lambda_max / self.n_lambda as f64 {
            return Err(Error::InvalidGrid("λ floor must lie below the uniform spacing"));
        }
        Ok(())
    }

    /// Band nodes, strictly increasing from `floor`: geometric until the
    /// spacing reaches `lambda_max / n_lambda`, then uniform up to `lambda_max`.
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let du = self.lambda_max / self.n_lambda as f64;
        let mut out = vec![self.floor];
        let mut lam = self.floor;
        while lam * (self.ratio - 1.0) < du {
            lam *= self.ratio;
            out.push(lam);
        }
        let mut j = 1.0;
        loop {
            let x = lam + j * du;
            if x > self.lambda_max * (1.0 + 1e-12) {
                break;
            }
            out.push(x);
            j += 1.0;
        }
        Ok(out)
    }

    /// Below this λ the contribution of mode `k ≥ 2` (which vanishes like
    /// `λ^{2k−3}`) is dropped; for `k ≤ 1` this is the floor itself.
    pub fn mode_floor(&self, k: usize, r0: f64) -> f64 {
        if k <= 1 {
            self.floor
        } else {
            let e = 36.0 / (2 * k - 2) as f64;
            self.floor.max(10f64.powf(-e) / r0)
        }
    }
}

fn trapezoid(x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; x.len()];
    for i in 0..x.len().saturating_sub(1) {
        let h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Transformed profile of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBand {
    pub k: usize,
    pub r0: f64,
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `∫ s^{1−k} f ds` of the source profile (zero for bands built by hand).
    pub moment: Complex64,
    /// Lower end of the band used for mode `k`.
    pub floor: f64,
}

impl SpectralBand {
    /// `true` when the last value is small against the peak.
    pub fn decayed(&self) -> bool {
        let peak = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.values.last().map_or(true, |z| z.norm() <= BAND_DECAY_TOL * peak)
    }
}

/// Per-λ Bessel data for every active mode, evaluated once and shared.
struct KernelRow {
    /// `J_{k−1}(λr0)`, `Y_{k−1}(λr0)` for `k = 0..=k_active`.
    lower: Vec<(f64, f64)>,
    k_active: usize,
}

fn kernel_row(lambda: f64, r0: f64, k_active: usize, j: &mut [f64], y: &mut [f64]) -> Result<KernelRow> {
    let n = k_active.max(1) + 1;
    bessel_jy_sequences((lambda * r0).max(MIN_SECOND_KIND_ARG), &mut j[..n], &mut y[..n])?;
    let lower = (0..=k_active)
        .map(|k| if k == 0 { (-j[1], -y[1]) } else { (j[k - 1], y[k - 1]) })
        .collect();
    Ok(KernelRow { lower, k_active })
}

/// Weber-Orr machinery for all modes `0..=K` on one grid.
#[derive(Debug, Clone)]
pub struct WeberOrr {
    grid: RadialGrid,
    k_max: usize,
    spec: BandSpec,
    lambdas: Vec<f64>,
    lweights: Vec<f64>,
    rweights: Vec<f64>,
    floors: Vec<f64>,
}

impl WeberOrr {
    pub fn new(grid: &RadialGrid, k_max: usize, spec: BandSpec) -> Result<Self> {
        let lambdas = spec.lambdas()?;
        let r0 = grid.r0();
        let floors = (0..=k_max).map(|k| spec.mode_floor(k, r0)).collect();
        Ok(Self {
            grid: grid.clone(),
            k_max,
            spec,
            lweights: trapezoid(&lambdas),
            lambdas,
            rweights: grid.trapezoid_weights(),
            floors,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    fn active(&self, lambda: f64, modes: &[usize]) -> usize {
        modes
            .iter()
            .copied()
            .filter(|&k| lambda >= self.floors[k])
            .max()
            .unwrap_or(0)
    }

    /// First band index used by mode `k`.
    fn first_index(&self, k: usize) -> usize {
        self.lambdas
            .iter()
            .position(|&l| l >= self.floors[k])
            .unwrap_or(self.lambdas.len())
    }

    /// Forward transforms of the given profiles (`profiles[n]` belongs to `modes[n]`).
    pub fn forward_modes(&self, modes: &[usize], profiles: &[&[Complex64]]) -> Result<Vec<SpectralBand>> {
        let r0 = self.grid.r0();
        let nodes = self.grid.nodes();
        let kmax = modes.iter().copied().max().unwrap_or(0);
        if kmax > self.k_max {
            return Err(Error::ShapeMismatch {
                expected: self.k_max,
                found: kmax,
            });
        }
        for p in profiles {
            if p.len() != nodes.len() {
                return Err(Error::ShapeMismatch {
                    expected: nodes.len(),
                    found: p.len(),
                });
            }
        }
        let weighted: Vec<Vec<Complex64>> = profiles
            .iter()
            .map(|p| {
                p.iter()
                    .zip(nodes)
                    .zip(&self.rweights)
                    .map(|((f, s), w)| f * (s * w))
                    .collect()
            })
            .collect();
        let rows = try_map_modes(self.lambdas.len(), |jl| -> Result<Vec<Complex64>> {
            let lam = self.lambdas[jl];
            let mut out = vec![Complex64::zero(); modes.len()];
            let k_active = self.active(lam, modes);
            let mut jb = vec![0.0; k_active + 2];
            let mut yb = vec![0.0; k_active + 2];
            let row = kernel_row(lam, r0, k_active, &mut jb, &mut yb)?;
            for (i, &s) in nodes.iter().enumerate() {
                bessel_jy_sequences(
                    (lam * s).max(MIN_SECOND_KIND_ARG),
                    &mut jb[..=row.k_active],
                    &mut yb[..=row.k_active],
                )?;
                for (n, &k) in modes.iter().enumerate() {
                    if lam < self.floors[k] {
                        continue;
                    }
                    let (jl_, yl_) = row.lower[k];
                    let r = jb[k] * yl_ - yb[k] * jl_;
                    out[n] += weighted[n][i] * r;
                }
            }
            Ok(out)
        })?;
        modes
            .iter()
            .enumerate()
            .map(|(n, &k)| {
                let first = self.first_index(k);
                let moment = radial_moment(profiles[n], 1 - k as i32, &self.grid, TailRule::PowerLawExtrapolate)
                    .map_err(|e| with_mode(e, k))?
                    .value;
                Ok(SpectralBand {
                    k,
                    r0,
                    lambda_max: self.spec.lambda_max,
                    lambdas: self.lambdas[first..].to_vec(),
                    values: rows[first..].iter().map(|row| row[n]).collect(),
                    moment,
                    floor: self.floors[k],
                })
            })
            .collect()
    }

    /// Inverse transforms onto the grid nodes.
    pub fn inverse_modes(&self, bands: &[SpectralBand]) -> Result<Vec<Vec<Complex64>>> {
        let r0 = self.grid.r0();
        let nodes = self.grid.nodes();
        let modes: Vec<usize> = bands.iter().map(|b| b.k).collect();
        if let Some(&k) = modes.iter().find(|&&k| k > self.k_max) {
            return Err(Error::ShapeMismatch {
                expected: self.k_max,
                found: k,
            });
        }
        // Band values aligned with the shared λ nodes.
        let aligned: Vec<Vec<Complex64>> = bands
            .iter()
            .map(|b| {
                let first = self.first_index(b.k);
                let mut v = vec![Complex64::zero(); self.lambdas.len()];
                if b.lambdas.len() + first == self.lambdas.len() {
                    v[first..].copy_from_slice(&b.values);
                    Ok(v)
                } else {
                    Err(Error::ShapeMismatch {
                        expected: self.lambdas.len() - first,
                        found: b.lambdas.len(),
                    })
                }
            })
            .collect::<Result<_>>()?;
        let rows = try_map_modes(self.lambdas.len(), |jl| -> Result<Vec<Vec<Complex64>>> {
            let lam = self.lambdas[jl];
            let k_active = self.active(lam, &modes);
            let mut jb = vec![0.0; k_active + 2];
            let mut yb = vec![0.0; k_active + 2];
            let row = kernel_row(lam, r0, k_active, &mut jb, &mut yb)?;
            let mut out = vec![Vec::new(); modes.len()];
            let coef: Vec<Option<Complex64>> = modes
                .iter()
                .enumerate()
                .map(|(n, &k)| {
                    let v = aligned[n][jl];
                    if lam < self.floors[k] || v.is_zero() {
                        None
                    } else {
                        let (a, b) = row.lower[k];
                        Some(v * (self.lweights[jl] * lam / (a * a + b * b)))
                    }
                })
                .collect();
            if coef.iter().all(Option::is_none) {
                return Ok(out);
            }
            for (n, c) in coef.iter().enumerate() {
                if c.is_some() {
                    out[n] = vec![Complex64::zero(); nodes.len()];
                }
            }
            for (i, &s) in nodes.iter().enumerate() {
                bessel_jy_sequences(
                    (lam * s).max(MIN_SECOND_KIND_ARG),
                    &mut jb[..=row.k_active],
                    &mut yb[..=row.k_active],
                )?;
                for (n, &k) in modes.iter().enumerate() {
                    if let Some(c) = coef[n] {
                        let (a, b) = row.lower[k];
                        out[n][i] = c * (jb[k] * b - yb[k] * a);
                    }
                }
            }
            Ok(out)
        })?;
        let mut result = vec![vec![Complex64::zero(); nodes.len()]; modes.len()];
        for row in &rows {
            for (n, contrib) in row.iter().enumerate() {
                for (acc, c) in result[n].iter_mut().zip(contrib) {
                    *acc += c;
                }
            }
        }
        for (n, band) in bands.iter().enumerate() {
            add_zero_spectrum(&mut result[n], band, nodes);
        }
        Ok(result)
    }

    /// `w(t)` for every mode of `w0`.
    pub fn propagate(&self, w0: &SpectralField, t: f64) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(Error::InvalidConfig("propagation time must be non-negative"));
        }
        let modes: Vec<usize> = (0..=w0.k_max()).collect();
        let profiles: Vec<&[Complex64]> = modes.iter().map(|&k| w0.mode(k)).collect();
        let mut bands = self.forward_modes(&modes, &profiles)?;
        for b in &mut bands {
            apply_heat(b, t);
        }
        let mut out = self.inverse_modes(&bands)?;
        for v in &mut out[0] {
            v.im = 0.0;
        }
        SpectralField::from_modes(w0.grid().clone(), out)
    }
}

/// Multiplies by `e^{−λ²t}`, zeroing values with `λ²t > 36`.
pub fn apply_heat(band: &mut SpectralBand, t: f64) {
    for (v, &l) in band.values.iter_mut().zip(&band.lambdas) {
        let a = l * l * t;
        if a > HEAT_CUTOFF {
            *v = Complex64::zero();
        } else {
            *v *= (-a).exp();
        }
    }
}

fn add_zero_spectrum(out: &mut [Complex64], band: &SpectralBand, nodes: &[f64]) {
    let k = band.k;
    let r0 = band.r0;
    match k {
        0 => {}
        1 => {
            let l = (band.floor * r0 / 2.0).ln() + EULER_GAMMA;
            let share = (2.0 / PI) * ((2.0 * l / PI).atan() + FRAC_PI_2);
            for (v, &r) in out.iter_mut().zip(nodes) {
                *v += band.moment * (share / r);
            }
        }
        _ => {
            let kk = k as i32;
            let c = band.moment * ((2 * k - 2) as f64 * r0.powi(2 * kk - 2));
            for (v, &r) in out.iter_mut().zip(nodes) {
                *v += c * r.powi(-kk);
            }
        }
    }
}

/// Forward transform of one mode profile.
pub fn forward(profile: &[Complex64], k: usize, grid: &RadialGrid, spec: BandSpec) -> Result<SpectralBand> {
    let wo = WeberOrr::new(grid, k, spec)?;
    Ok(wo.forward_modes(&[k], &[profile])?.remove(0))
}

/// Inverse transform of one band onto `grid`.
pub fn inverse(band: &SpectralBand, grid: &RadialGrid, spec: BandSpec) -> Result<Vec<Complex64>> {
    if !band.decayed() {
        log::warn!(
            "λ band of mode {} has not decayed at λ_max = {}",
            band.k,
            band.lambda_max
        );
    }
    let wo = WeberOrr::new(grid, band.k, spec)?;
    Ok(wo.inverse_modes(core::slice::from_ref(band))?.remove(0))
}

/// Exact Stokes evolution `W^{−1}[e^{−λ²t} W[w0_k]]` of every mode.
pub fn stokes_propagate(w0: &SpectralField, t: f64, spec: BandSpec) -> Result<SpectralField> {
    WeberOrr::new(w0.grid(), w0.k_max(), spec)?.propagate(w0, t)
}

/// Convenience: forward transform of every mode of a field.
pub fn forward_field(w: &SpectralField, spec: BandSpec) -> Result<Vec<SpectralBand>> {
    let wo = WeberOrr::new(w.grid(), w.k_max(), spec)?;
    let modes: Vec<usize> = (0..=w.k_max()).collect();
    let profiles: Vec<&[Complex64]> = modes.iter().map(|&k| w.mode(k)).collect();
    wo.forward_modes(&modes, &profiles)
}

/// Relative L² distance `‖a − b‖ / ‖b‖` in the `r dr` measure.
pub fn rel_l2(a: &[Complex64], b: &[Complex64], grid: &RadialGrid) -> f64 {
    let w = grid.trapezoid_weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for (((x, y), wt), r) in a.iter().zip(b).zip(&w).zip(grid.nodes()) {
        num += (x - y).norm_sqr() * wt * r;
        den += y.norm_sqr() * wt * r;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
