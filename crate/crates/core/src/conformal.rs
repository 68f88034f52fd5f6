//! Exterior of a general body through a conformal map onto `|z| > r0`.
//!
//! The physical domain is the image of the disc exterior under
//! `Φ^{-1}(z) = z + Σ_{n≥1} b_n z^{−n}`, with derivative
//! `D(z) = (Φ^{-1})'(z) = Σ_{n≥0} c_n z^{−n}`, `c_0 = 1`, `c_1 = 0`,
//! `c_{n+1} = −n b_n`. A vorticity `w` pulled back to the disc exterior gives
//! rise to the sources
//!
//! ```text
//! q_k = [Re(conj(D) w)]_k,     r_k = [Im(conj(D) w)]_k,
//! ```
//!
//! which replace `w_k` in the Biot-Savart integrals, and the mass weight
//! `|D|²` multiplies `∂_t w` in the pulled-back vorticity equation. With the
//! identity map every operation here reduces to its disc counterpart.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::biot_savart::{mode_velocity, moment_target, projection_bump, with_mode, MomentVector};
use crate::evolution::ns_rhs_from_modes;
use crate::grid::{
    cumulative_from_start, derivative, radial_moment, synthesize, AngularTransform, FarFieldFlow, RadialGrid,
    SpectralField, SpectralVelocity, TailRule,
};
use crate::par::{map_modes, try_map_modes};
use crate::{Error, Result};

/// Smallest admissible `|D|` on the boundary circle.
pub const MIN_DERIVATIVE_MODULUS: f64 = 1e-6;

/// Default limit on the mode coupling width of the mass operator.
pub const DEFAULT_BANDWIDTH_CAP: usize = 32;

/// Relative tolerance on `|z| ≥ r0` when evaluating the series.
const RADIUS_SLACK: f64 = 1e-12;

/// Finite Laurent series of `Φ^{-1}` and of its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMapSeries {
    r0: f64,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl ConformalMapSeries {
    /// Map with coefficients `b_1..b_N` on the disc of radius `r0`, checked for admissibility.
    pub fn new(b: Vec<Complex64>, r0: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidGrid("r0 must be positive and finite"));
        }
        let mut b = b;
        while b.last().is_some_and(|z| z.is_zero()) {
            b.pop();
        }
        let mut c = vec![Complex64::new(1.0, 0.0)];
        if !b.is_empty() {
            c.push(Complex64::zero());
            for (i, bn) in b.iter().enumerate() {
                c.push(-bn * (i + 1) as f64);
            }
        }
        let map = Self { r0, b, c };
        map.check_admissible()?;
        Ok(map)
    }

    pub fn identity(r0: f64) -> Self {
        Self {
            r0,
            b: Vec::new(),
            c: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }
    pub fn b(&self) -> &[Complex64] {
        &self.b
    }
    pub fn c(&self) -> &[Complex64] {
        &self.c
    }
    pub fn is_identity(&self) -> bool {
        self.b.is_empty()
    }

    /// Highest power of `1/z` in `D`, which is also the mode coupling width of `|D|²`.
    pub fn bandwidth(&self) -> usize {
        self.c.len() - 1
    }

    /// `min |D|` over a sampled boundary circle; errors when the map is degenerate.
    pub fn check_admissible(&self) -> Result<f64> {
        let sum: f64 = self
            .b
            .iter()
            .enumerate()
            .map(|(i, bn)| bn.norm() * self.r0.powi(-(i as i32 + 1)))
            .sum();
        if !sum.is_finite() {
            return Err(Error::InadmissibleMap { min_modulus: 0.0 });
        }
        let n = (64 * (self.bandwidth() + 1)).max(256);
        let mut min = f64::INFINITY;
        for j in 0..n {
            let phi = 2.0 * PI * j as f64 / n as f64;
            let z = Complex64::from_polar(self.r0, phi);
            min = min.min(self.derivative_unchecked(z).norm());
        }
        if !(min > MIN_DERIVATIVE_MODULUS) {
            return Err(Error::InadmissibleMap { min_modulus: min });
        }
        Ok(min)
    }

    fn horner(coeffs: &[Complex64], u: Complex64) -> Complex64 {
        coeffs.iter().rev().fold(Complex64::zero(), |acc, c| acc * u + c)
    }

    pub(crate) fn derivative_unchecked(&self, z: Complex64) -> Complex64 {
        Self::horner(&self.c, z.inv())
    }

    fn check_point(&self, z: Complex64) -> Result<()> {
        let m = z.norm();
        if !(m >= self.r0 * (1.0 - RADIUS_SLACK)) {
            return Err(Error::OutsideDomain {
                modulus: m,
                r0: self.r0,
            });
        }
        // Ratio test on the last two non-zero terms.
        let terms: Vec<(usize, f64)> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(n, c)| (n, c.norm() * m.powi(-(n as i32))))
            .collect();
        if terms.len() >= 2 {
            let (n1, t1) = terms[terms.len() - 2];
            let (n2, t2) = terms[terms.len() - 1];
            let ratio = (t2 / t1).powf(1.0 / (n2 - n1) as f64);
            if !(ratio < 1.0) {
                return Err(Error::SlowSeries { ratio });
            }
        }
        Ok(())
    }

    /// `Φ^{-1}(z) = z + Σ b_n z^{−n}`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_point(z)?;
        let u = z.inv();
        Ok(z + Self::horner(&self.b, u) * u)
    }
}

/// `(Φ^{-1})'(z) = Σ c_n z^{−n}` by Horner's rule in `1/z`.
pub fn map_derivative(map: &ConformalMapSeries, z: Complex64) -> Result<Complex64> {
    map.check_point(z)?;
    Ok(map.derivative_unchecked(z))
}

/// Angular modes of the weight `|D|²` on a radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MassProfile {
    /// Highest coupled mode offset.
    pub bandwidth: usize,
    /// `modes[j][i]`: coefficient of `e^{ijφ}` at node `i`, `j = 0..=bandwidth`.
    pub modes: Vec<Vec<Complex64>>,
}

impl MassProfile {
    /// Coefficient `m_j(r_i)` for signed `j`.
    pub fn coeff(&self, j: i64, i: usize) -> Complex64 {
        let a = j.unsigned_abs() as usize;
        if a > self.bandwidth {
            return Complex64::zero();
        }
        let v = self.modes[a][i];
        if j < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Smallest sampled value of the weight.
    pub fn min_weight(&self, n_phi: usize) -> f64 {
        let t = AngularTransform::new(n_phi);
        let n_r = self.modes[0].len();
        let mut ring = vec![0.0; n_phi];
        let mut coeffs = vec![Complex64::zero(); self.bandwidth + 1];
        let mut min = f64::INFINITY;
        for i in 0..n_r {
            for (j, c) in coeffs.iter_mut().enumerate() {
                *c = self.modes[j][i];
            }
            t.synthesize_real(&coeffs, &mut ring);
            min = ring.iter().copied().fold(min, f64::min);
        }
        min
    }
}

/// Angular expansion of `|D|²` with the default coupling cap.
pub fn mass_matrix_profile(map: &ConformalMapSeries, grid: &RadialGrid) -> Result<MassProfile> {
    mass_matrix_profile_capped(map, grid, DEFAULT_BANDWIDTH_CAP)
}

/// `|D|² = Σ_j m_j(r) e^{ijφ}`, `m_j = Σ_n c_n conj(c_{n+j}) r^{−2n−j}`.
pub fn mass_matrix_profile_capped(map: &ConformalMapSeries, grid: &RadialGrid, cap: usize) -> Result<MassProfile> {
    let bw = map.bandwidth();
    if bw > cap {
        return Err(Error::BandwidthOverflow { bandwidth: bw, cap });
    }
    let c = map.c();
    let modes = (0..=bw)
        .map(|j| {
            grid.nodes()
                .iter()
                .map(|&r| {
                    (0..c.len() - j)
                        .map(|n| c[n] * c[n + j].conj() * r.powi(-((2 * n + j) as i32)))
                        .fold(Complex64::zero(), |a, b| a + b)
                })
                .map(|z| if j == 0 { Complex64::new(z.re, 0.0) } else { z })
                .collect()
        })
        .collect();
    Ok(MassProfile { bandwidth: bw, modes })
}

/// Signed modes `j = −K..=K+L` of `conj(D) w` (index `j + K`), `L` the map bandwidth.
pub(crate) fn weighted_modes(w: &SpectralField, map: &ConformalMapSeries) -> Vec<Vec<Complex64>> {
    let k = w.k_max() as i64;
    let l = map.bandwidth() as i64;
    let nodes = w.grid().nodes();
    let c = map.c();
    let signed: Vec<Vec<Complex64>> = (-k..=k).map(|m| w.signed_mode(m)).collect();
    map_modes((2 * k + l + 1) as usize, |idx| {
        let j = idx as i64 - k;
        let mut out = vec![Complex64::zero(); nodes.len()];
        for n in 0..=l {
            let src = j - n;
            if src.abs() > k || c[n as usize].is_zero() {
                continue;
            }
            let cn = c[n as usize].conj();
            let prof = &signed[(src + k) as usize];
            for (i, (o, &r)) in out.iter_mut().zip(nodes).enumerate() {
                *o += cn * r.powi(-(n as i32)) * prof[i];
            }
        }
        out
    })
}

/// Mode profiles `q_k` and `r_k`, `k = 0..=K`, of the real and imaginary parts
/// of `conj(D) w`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSource {
    pub q: SpectralField,
    pub r: SpectralField,
}

/// Sources of the mapped Biot-Savart problem.
///
/// The product `conj(D) w` is formed by exact convolution of the finite
/// Fourier series, which equals physical-space sampling on any angular grid
/// fine enough to resolve it.
pub fn transformed_sources(w: &SpectralField, map: &ConformalMapSeries) -> Result<TransformedSource> {
    let x = weighted_modes(w, map);
    let k_max = w.k_max();
    let off = k_max;
    let half_i = Complex64::new(0.0, 0.5);
    let mut q = Vec::with_capacity(k_max + 1);
    let mut r = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let pos = &x[off + k];
        let neg = &x[off - k];
        q.push(
            pos.iter()
                .zip(neg)
                .map(|(a, b)| (a + b.conj()) * 0.5)
                .collect::<Vec<_>>(),
        );
        r.push(
            pos.iter()
                .zip(neg)
                .map(|(a, b)| -half_i * (a - b.conj()))
                .collect::<Vec<_>>(),
        );
    }
    for z in q[0].iter_mut().chain(r[0].iter_mut()) {
        z.im = 0.0;
    }
    Ok(TransformedSource {
        q: SpectralField::from_modes(w.grid().clone(), q)?,
        r: SpectralField::from_modes(w.grid().clone(), r)?,
    })
}

/// Velocity from mapped sources: `q_k − i r_k` feeds the inner integral,
/// `q_k + i r_k` the outer one. The axisymmetric radial velocity carries the
/// source `r_0`: `v_{r,0}(r) = (1/r) ∫_{r0}^r s r_0(s) ds`.
pub fn generalized_reconstruct(src: &TransformedSource, flow: &FarFieldFlow) -> Result<SpectralVelocity> {
    let grid = src.q.grid();
    let i_unit = Complex64::i();
    let pairs = try_map_modes(src.q.k_max() + 1, |k| {
        let q = src.q.mode(k);
        let r = src.r.mode(k);
        if k == 0 {
            return mode_velocity(q, q, 0, grid, flow);
        }
        let inner: Vec<Complex64> = q.iter().zip(r).map(|(a, b)| a - i_unit * b).collect();
        let outer: Vec<Complex64> = q.iter().zip(r).map(|(a, b)| a + i_unit * b).collect();
        mode_velocity(&inner, &outer, k, grid, flow)
    })?;
    let (mut v_r, v_phi): (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) = pairs.into_iter().unzip();
    let r0_src = src.r.mode(0);
    if r0_src.iter().any(|z| !z.is_zero()) {
        let nodes = grid.nodes();
        let s_r: Vec<Complex64> = r0_src.iter().zip(nodes).map(|(z, s)| z * s).collect();
        let flux = cumulative_from_start(&s_r, nodes);
        for ((v, f), &r) in v_r[0].iter_mut().zip(&flux).zip(nodes) {
            *v += f / r;
        }
    }
    Ok(SpectralVelocity {
        grid: grid.clone(),
        v_r,
        v_phi,
    })
}

/// Generalized moments `m_k = ∫ s^{1−k} (q_k + i sign(k) r_k) ds`.
pub fn generalized_moments(w: &SpectralField, map: &ConformalMapSeries) -> Result<MomentVector> {
    let src = transformed_sources(w, map)?;
    let i_unit = Complex64::i();
    let values = try_map_modes(w.k_max() + 1, |k| {
        let prof: Vec<Complex64> = if k == 0 {
            src.q.mode(0).to_vec()
        } else {
            src.q
                .mode(k)
                .iter()
                .zip(src.r.mode(k))
                .map(|(a, b)| a + i_unit * b)
                .collect()
        };
        radial_moment(&prof, 1 - k as i32, w.grid(), TailRule::PowerLawExtrapolate)
            .map(|m| m.value)
            .map_err(|e| with_mode(e, k))
    })?;
    Ok(MomentVector { values })
}

/// The same moments as the area integral `(1/2π) ∫ conj(D) w z^{−k} dA`,
/// sampled pointwise on `n_phi` angles.
pub fn generalized_moments_area(w: &SpectralField, map: &ConformalMapSeries, n_phi: usize) -> Result<MomentVector> {
    let grid = w.grid();
    let samples = synthesize(w, n_phi)?;
    let t = AngularTransform::new(n_phi);
    let k_max = w.k_max();
    let mut x = vec![vec![Complex64::zero(); grid.n_r()]; k_max + 1];
    for (i, &r) in grid.nodes().iter().enumerate() {
        let ring: Vec<Complex64> = (0..n_phi)
            .map(|j| {
                let z = Complex64::from_polar(r, samples.angle(j));
                map.derivative_unchecked(z).conj() * samples.at(i, j)
            })
            .collect();
        for (k, xk) in x.iter_mut().enumerate() {
            let acc = ring
                .iter()
                .enumerate()
                .fold(Complex64::zero(), |a, (j, f)| a + f * t.phase(-(k as i64), j));
            xk[i] = acc / n_phi as f64;
        }
    }
    let values = (0..=k_max)
        .map(|k| {
            radial_moment(&x[k], 1 - k as i32, grid, TailRule::PowerLawExtrapolate)
                .map(|m| {
                    if k == 0 {
                        Complex64::new(m.value.re, 0.0)
                    } else {
                        m.value
                    }
                })
                .map_err(|e| with_mode(e, k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentVector { values })
}

/// `max_k |m_k − 2ik v_{∞,r,k}|` for the generalized moments.
pub fn generalized_manifold_residual(w: &SpectralField, map: &ConformalMapSeries, flow: &FarFieldFlow) -> Result<f64> {
    let m = generalized_moments(w, map)?;
    Ok(m.values
        .iter()
        .enumerate()
        .map(|(k, v)| (v - moment_target(flow, k as i64)).norm())
        .fold(0.0, f64::max))
}

/// Projection onto the generalized manifold along the disc bump directions.
///
/// Adding `δ B(s)` to mode `k` shifts the generalized moment `m_k` by `δ μ_k`
/// (since `c_0 = 1`) and the other moments by terms of size `|c_n| r0^{−n}`,
/// so the per-mode corrections are iterated until the residual stops shrinking.
pub fn project_to_generalized_manifold(
    w: &SpectralField,
    map: &ConformalMapSeries,
    flow: &FarFieldFlow,
) -> Result<SpectralField> {
    let grid = w.grid();
    let bump = projection_bump(grid);
    let bump_c: Vec<Complex64> = bump.iter().map(|&b| Complex64::new(b, 0.0)).collect();
    let mu = (0..=w.k_max())
        .map(|k| radial_moment(&bump_c, 1 - k as i32, grid, TailRule::Truncate).map(|m| m.value.re))
        .collect::<Result<Vec<_>>>()?;
    if mu.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidGrid("grid does not resolve the projection bump"));
    }
    let mut out = w.clone();
    let mut last = f64::INFINITY;
    for _ in 0..PROJECTION_SWEEPS {
        let m = generalized_moments(&out, map)?;
        let res = m
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - moment_target(flow, k as i64)).norm())
            .fold(0.0, f64::max);
        if res == 0.0 || res >= last {
            break;
        }
        last = res;
        for k in 0..=out.k_max() {
            let mut scale = (moment_target(flow, k as i64) - m.values[k]) / mu[k];
            if k == 0 {
                scale.im = 0.0;
            }
            for (v, &b) in out.mode_mut(k).iter_mut().zip(&bump) {
                *v += scale * b;
            }
        }
    }
    Ok(out)
}

const PROJECTION_SWEEPS: usize = 100;

/// Physical circulation `∫ w |D|² dA = 2π ∫ s [|D|² w]_0 ds`.
pub fn generalized_circulation(w: &SpectralField, map: &ConformalMapSeries) -> Result<f64> {
    let mass = mass_matrix_profile_capped(map, w.grid(), usize::MAX)?;
    let l = mass.bandwidth as i64;
    let k = w.k_max() as i64;
    let prof: Vec<Complex64> = (0..w.n_r())
        .map(|i| {
            (-l.min(k)..=l.min(k))
                .map(|j| mass.coeff(j, i) * w.coeff(-j, i))
                .fold(Complex64::zero(), |a, b| a + b)
        })
        .collect();
    let m = radial_moment(&prof, 1, w.grid(), TailRule::PowerLawExtrapolate).map_err(|e| with_mode(e, 0))?;
    Ok(2.0 * PI * m.value.re)
}

/// Boundary right side of the mapped Navier-Stokes closure,
/// `|k| r0^{|k|} ∫ s^{−|k|} [(u_r + i u_φ) conj(D) w]_k ds`, `u = v_∞ − v`.
pub fn ns_boundary_rhs_general(
    w: &SpectralField,
    v: &SpectralVelocity,
    flow: &FarFieldFlow,
    map: &ConformalMapSeries,
    k: usize,
) -> Result<Complex64> {
    let x = weighted_modes(w, map);
    ns_rhs_from_modes(&x, w.k_max() as i64, v, flow, k, w.grid())
}

/// All boundary right sides `k = 0..=K` sharing one source transform.
pub(crate) fn ns_boundary_rhs_general_all(
    w: &SpectralField,
    v: &SpectralVelocity,
    flow: &FarFieldFlow,
    map: &ConformalMapSeries,
) -> Result<Vec<Complex64>> {
    let x = weighted_modes(w, map);
    let off = w.k_max() as i64;
    try_map_modes(w.k_max() + 1, |k| ns_rhs_from_modes(&x, off, v, flow, k, w.grid()))
}

/// Recommended angular resolution for the mapped nonlinear term.
pub fn mapped_angular_nodes(k_max: usize, map: &ConformalMapSeries) -> usize {
    3 * k_max + 3 + map.bandwidth()
}

/// Mapped advection `Re[D (v_r − i v_φ)(∂_r w + (i/r) ∂_φ w)]`, i.e.
/// `Re D (v, ∇w) − Im D (v^⊥, ∇w)`, evaluated on `n_phi` angles.
pub fn mapped_advection(
    w: &SpectralField,
    v: &SpectralVelocity,
    map: &ConformalMapSeries,
    n_phi: usize,
) -> Result<SpectralField> {
    let k_max = w.k_max();
    if n_phi < 2 * k_max + 2 {
        return Err(Error::Aliasing {
            n_phi,
            required: 2 * k_max + 2,
        });
    }
    let nodes = w.grid().nodes();
    let dr: Vec<Vec<Complex64>> = (0..=k_max).map(|k| derivative(w.mode(k), nodes)).collect();
    let t = AngularTransform::new(n_phi);
    let vk = v.k_max().min(k_max);
    let rows = map_modes(w.n_r(), |i| {
        let r = nodes[i];
        let mut cv = [vec![Complex64::zero(); k_max + 1], vec![Complex64::zero(); k_max + 1]];
        let mut cw = [vec![Complex64::zero(); k_max + 1], vec![Complex64::zero(); k_max + 1]];
        for k in 0..=k_max {
            if k <= vk {
                cv[0][k] = v.v_r[k][i];
                cv[1][k] = v.v_phi[k][i];
            }
            cw[0][k] = dr[k][i];
            cw[1][k] = w.mode(k)[i] * Complex64::new(0.0, k as f64 / r);
        }
        let mut rings = [vec![0.0; n_phi], vec![0.0; n_phi], vec![0.0; n_phi], vec![0.0; n_phi]];
        t.synthesize_real(&cv[0], &mut rings[0]);
        t.synthesize_real(&cv[1], &mut rings[1]);
        t.synthesize_real(&cw[0], &mut rings[2]);
        t.synthesize_real(&cw[1], &mut rings[3]);
        let prod: Vec<f64> = (0..n_phi)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let d = map.derivative_unchecked(Complex64::from_polar(r, phi));
                let a = Complex64::new(rings[0][j], -rings[1][j]);
                let b = Complex64::new(rings[2][j], rings[3][j]);
                (d * a * b).re
            })
            .collect();
        let mut out = vec![Complex64::zero(); k_max + 1];
        t.analyze_real(&prod, &mut out);
        out
    });
    let mut modes = vec![vec![Complex64::zero(); w.n_r()]; k_max + 1];
    for (i, row) in rows.iter().enumerate() {
        for k in 0..=k_max {
            modes[k][i] = row[k];
        }
    }
    SpectralField::from_modes(w.grid().clone(), modes)
}

/// Polar modes of the mapped flux `ũ w`, where `ũ_r − i ũ_φ = D (v_r − i v_φ)`.
///
/// `ũ` is the ζ-plane perpendicular gradient of the pulled-back stream
/// function, hence solenoidal, and `∇·(ũ w)` equals [`mapped_advection`].
pub fn mapped_advective_flux(
    w: &SpectralField,
    v: &SpectralVelocity,
    map: &ConformalMapSeries,
    n_phi: usize,
) -> Result<(SpectralField, SpectralField)> {
    let k_max = w.k_max();
    if n_phi < 2 * k_max + 2 {
        return Err(Error::Aliasing {
            n_phi,
            required: 2 * k_max + 2,
        });
    }
    let nodes = w.grid().nodes();
    let t = AngularTransform::new(n_phi);
    let vk = v.k_max().min(k_max);
    let identity = map.is_identity();
    let rows = map_modes(w.n_r(), |i| {
        let r = nodes[i];
        let mut c = [
            vec![Complex64::zero(); k_max + 1],
            vec![Complex64::zero(); k_max + 1],
            vec![Complex64::zero(); k_max + 1],
        ];
        for k in 0..=k_max {
            if k <= vk {
                c[0][k] = v.v_r[k][i];
                c[1][k] = v.v_phi[k][i];
            }
            c[2][k] = w.mode(k)[i];
        }
        let mut rings = [vec![0.0; n_phi], vec![0.0; n_phi], vec![0.0; n_phi]];
        for (coef, ring) in c.iter().zip(rings.iter_mut()) {
            t.synthesize_real(coef, ring);
        }
        let (mut fr, mut fp) = (vec![0.0; n_phi], vec![0.0; n_phi]);
        for j in 0..n_phi {
            let (ur, up) = if identity {
                (rings[0][j], rings[1][j])
            } else {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let d = map.derivative_unchecked(Complex64::from_polar(r, phi));
                let u = d * Complex64::new(rings[0][j], -rings[1][j]);
                (u.re, -u.im)
            };
            fr[j] = ur * rings[2][j];
            fp[j] = up * rings[2][j];
        }
        let mut out = (vec![Complex64::zero(); k_max + 1], vec![Complex64::zero(); k_max + 1]);
        t.analyze_real(&fr, &mut out.0);
        t.analyze_real(&fp, &mut out.1);
        out
    });
    let mut fr = vec![vec![Complex64::zero(); w.n_r()]; k_max + 1];
    let mut fp = fr.clone();
    for (i, (a, b)) in rows.iter().enumerate() {
        for k in 0..=k_max {
            fr[k][i] = a[k];
            fp[k][i] = b[k];
        }
    }
    Ok((
        SpectralField::from_modes(w.grid().clone(), fr)?,
        SpectralField::from_modes(w.grid().clone(), fp)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biot_savart::{moments, reconstruct};
    use crate::evolution::ns_boundary_rhs;
    use crate::grid::Stretching;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> RadialGrid {
        RadialGrid::new(1.0, 20.0, 512, Stretching::Geometric(1.005)).unwrap()
    }

    fn joukowski() -> ConformalMapSeries {
        ConformalMapSeries::new(vec![c(0.1, 0.0)], 1.0).unwrap()
    }

    fn ring(g: &RadialGrid, k_max: usize) -> SpectralField {
        let mut w = SpectralField::zeros(g.clone(), k_max);
        for &(k, a) in &[
            (0usize, c(0.2, 0.0)),
            (1, c(0.1, 0.05)),
            (2, c(-0.05, 0.08)),
            (3, c(0.03, 0.0)),
        ] {
            if k > k_max {
                continue;
            }
            for (v, &s) in w.mode_mut(k).iter_mut().zip(g.nodes()) {
                *v += a * (-(s - 3.0) * (s - 3.0) / 0.5).exp();
            }
        }
        w
    }

    #[test]
    fn coefficients_of_derivative() {
        let m = ConformalMapSeries::new(vec![c(0.1, 0.0), c(0.0, 0.02), c(0.0, 0.0)], 1.0).unwrap();
        assert_eq!(m.b().len(), 2);
        assert_eq!(m.c(), &[c(1.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0), c(0.0, -0.04)]);
        assert_eq!(m.bandwidth(), 3);
        assert_eq!(ConformalMapSeries::identity(1.0).bandwidth(), 0);
    }

    #[test]
    fn derivative_examples() {
        let id = ConformalMapSeries::identity(1.0);
        for z in [c(1.0, 0.0), c(-3.0, 4.0), c(0.0, 1.5)] {
            assert_eq!(map_derivative(&id, z).unwrap(), c(1.0, 0.0));
        }
        let a2 = 0.25;
        let m = ConformalMapSeries::new(vec![c(a2, 0.0)], 1.0).unwrap();
        for z in [c(1.0, 0.0), c(-3.0, 4.0), c(0.3, 1.5)] {
            let exact = c(1.0, 0.0) - a2 / (z * z);
            assert!((map_derivative(&m, z).unwrap() - exact).norm() < 1e-15);
        }
        assert!(matches!(
            map_derivative(&m, c(0.5, 0.0)),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn derivative_matches_centered_difference() {
        let m = ConformalMapSeries::new(vec![c(0.1, 0.05), c(-0.02, 0.01), c(0.005, 0.0)], 1.0).unwrap();
        let z = c(1.3, 0.7);
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let fd = (m.eval(z + h).unwrap() - m.eval(z - h).unwrap()) / (2.0 * h);
            errs.push((fd - map_derivative(&m, z).unwrap()).norm());
        }
        assert!(errs[0] < 1e-3 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn cauchy_riemann() {
        let m = ConformalMapSeries::new(vec![c(0.1, 0.05), c(-0.02, 0.01)], 1.0).unwrap();
        let h = 1e-4;
        for z in [c(1.5, 0.2), c(-0.4, 1.2), c(2.0, -2.0)] {
            let fx = (m.eval(z + h).unwrap() - m.eval(z - h).unwrap()) / (2.0 * h);
            let fy = (m.eval(z + c(0.0, h)).unwrap() - m.eval(z - c(0.0, h)).unwrap()) / (2.0 * h);
            assert!((fx.re - fy.im).abs() < 1e-7);
            assert!((fy.re + fx.im).abs() < 1e-7);
        }
    }

    #[test]
    fn admissibility_gate() {
        // D(z) = 1 − 1/z² vanishes at z = ±1 (the slit map).
        assert!(matches!(
            ConformalMapSeries::new(vec![c(1.0, 0.0)], 1.0),
            Err(Error::InadmissibleMap { .. })
        ));
        assert!(joukowski().check_admissible().unwrap() > 0.8);
    }

    #[test]
    fn slow_series_flagged() {
        // Terms grow at |z| = r0 when |c_3| r0^{-3} exceeds |c_2| r0^{-2}.
        let m = ConformalMapSeries {
            r0: 0.5,
            b: vec![c(0.01, 0.0), c(0.2, 0.0)],
            c: vec![c(1.0, 0.0), c(0.0, 0.0), c(-0.01, 0.0), c(-0.4, 0.0)],
        };
        assert!(matches!(map_derivative(&m, c(0.5, 0.0)), Err(Error::SlowSeries { .. })));
    }

    #[test]
    fn mass_profile_of_joukowski() {
        let g = grid();
        let b1 = 0.1;
        let mp = mass_matrix_profile(&joukowski(), &g).unwrap();
        assert_eq!(mp.bandwidth, 2);
        for (i, &r) in g.nodes().iter().enumerate().step_by(37) {
            assert!((mp.modes[0][i].re - (1.0 + b1 * b1 / r.powi(4))).abs() < 1e-15);
            assert!(mp.modes[1][i].norm() < 1e-16);
            assert!((mp.modes[2][i] - c(-b1 / (r * r), 0.0)).norm() < 1e-16);
            // Pointwise check of the expansion.
            for phi in [0.0, 0.7, 2.0] {
                let z = Complex64::from_polar(r, phi);
                let exact = map_derivative(&joukowski(), z).unwrap().norm_sqr();
                let series = (-2..=2i64)
                    .map(|j| mp.coeff(j, i) * Complex64::from_polar(1.0, j as f64 * phi))
                    .fold(Complex64::zero(), |a, b| a + b);
                assert!((series.re - exact).abs() < 1e-14 && series.im.abs() < 1e-14);
            }
        }
        assert!(mp.min_weight(64) > 0.0);
        let id = mass_matrix_profile(&ConformalMapSeries::identity(1.0), &g).unwrap();
        assert!(id.modes[0].iter().all(|z| *z == c(1.0, 0.0)));
        assert!(matches!(
            mass_matrix_profile_capped(&joukowski(), &g, 1),
            Err(Error::BandwidthOverflow { bandwidth: 2, cap: 1 })
        ));
    }

    #[test]
    fn identity_sources_and_reconstruction() {
        let g = grid();
        let id = ConformalMapSeries::identity(1.0);
        let w = ring(&g, 4);
        let src = transformed_sources(&w, &id).unwrap();
        assert_eq!(src.q, w);
        assert!(src.r.modes().iter().all(|m| m.iter().all(|z| z.is_zero())));
        let flow = FarFieldFlow::new(0.3, -0.2);
        let a = generalized_reconstruct(&src, &flow).unwrap();
        let b = reconstruct(&w, &flow).unwrap();
        for k in 0..=4 {
            for i in 0..g.n_r() {
                assert!((a.v_r[k][i] - b.v_r[k][i]).norm() <= 1e-14);
                assert!((a.v_phi[k][i] - b.v_phi[k][i]).norm() <= 1e-14);
            }
        }
        let ma = generalized_moments(&w, &id).unwrap();
        let mb = moments(&w).unwrap();
        for (x, y) in ma.values.iter().zip(&mb.values) {
            assert!((x - y).norm() <= 1e-12);
        }
        let va = reconstruct(&w, &flow).unwrap();
        for k in 0..=4 {
            let x = ns_boundary_rhs_general(&w, &va, &flow, &id, k).unwrap();
            let y = ns_boundary_rhs(&w, &va, &flow, k).unwrap();
            assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn zero_field_and_pure_far_field() {
        let g = grid();
        let z = SpectralField::zeros(g.clone(), 3);
        let src = transformed_sources(&z, &joukowski()).unwrap();
        assert!(src
            .q
            .modes()
            .iter()
            .chain(src.r.modes())
            .all(|m| m.iter().all(|v| v.is_zero())));
        assert!(generalized_moments(&z, &joukowski())
            .unwrap()
            .values
            .iter()
            .all(|v| v.is_zero()));
        let flow = FarFieldFlow::new(1.0, 0.0);
        let v = generalized_reconstruct(&src, &flow).unwrap();
        for i in 0..g.n_r() {
            assert_eq!(v.v_r[1][i], flow.radial(1));
            assert_eq!(v.v_phi[1][i], flow.angular(1));
            assert!(v.v_r[0][i].is_zero() && v.v_r[2][i].is_zero());
        }
    }

    #[test]
    fn sources_match_sampled_product() {
        let g = grid();
        let m = joukowski();
        for k0 in 0..3usize {
            let mut w = SpectralField::zeros(g.clone(), 4);
            for (v, &s) in w.mode_mut(k0).iter_mut().zip(g.nodes()) {
                *v = c(0.7, if k0 == 0 { 0.0 } else { -0.4 }) * (-(s - 2.0) * (s - 2.0)).exp();
            }
            let src = transformed_sources(&w, &m).unwrap();
            let n_phi = 64;
            let samples = synthesize(&w, n_phi).unwrap();
            let t = AngularTransform::new(n_phi);
            for (i, &r) in g.nodes().iter().enumerate().step_by(11) {
                let (mut re_ring, mut im_ring) = (vec![0.0; n_phi], vec![0.0; n_phi]);
                for j in 0..n_phi {
                    let x = map_derivative(&m, Complex64::from_polar(r, samples.angle(j)))
                        .unwrap()
                        .conj()
                        * samples.at(i, j);
                    re_ring[j] = x.re;
                    im_ring[j] = x.im;
                }
                let (mut qo, mut ro) = (vec![Complex64::zero(); 5], vec![Complex64::zero(); 5]);
                t.analyze_real(&re_ring, &mut qo);
                t.analyze_real(&im_ring, &mut ro);
                for k in 0..=4 {
                    assert!((src.q.mode(k)[i] - qo[k]).norm() < 1e-10, "k0={k0} k={k}");
                    assert!((src.r.mode(k)[i] - ro[k]).norm() < 1e-10, "k0={k0} k={k}");
                }
            }
        }
    }

    #[test]
    fn radial_and_area_moments_agree() {
        let g = grid();
        let w = ring(&g, 6);
        for m in [
            joukowski(),
            ConformalMapSeries::new(vec![c(0.05, 0.02), c(0.0, -0.01)], 1.0).unwrap(),
        ] {
            let a = generalized_moments(&w, &m).unwrap();
            let b = generalized_moments_area(&w, &m, 64).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).norm() <= 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn mapped_field_on_manifold_has_no_slip() {
        let g = grid();
        let m = joukowski();
        let flow = FarFieldFlow::new(0.5, 0.2);
        let w = project_to_generalized_manifold(&ring(&g, 6), &m, &flow).unwrap();
        let res = generalized_manifold_residual(&w, &m, &flow).unwrap();
        assert!(res < 1e-10, "{res}");
        let v = generalized_reconstruct(&transformed_sources(&w, &m).unwrap(), &flow).unwrap();
        assert!(v.boundary_speed() < 1e-8, "{}", v.boundary_speed());
    }

    #[test]
    fn flux_form_matches_gradient_form() {
        let g = grid();
        let m = joukowski();
        let flow = FarFieldFlow::new(0.5, 0.2);
        let w = project_to_generalized_manifold(&ring(&g, 6), &m, &flow).unwrap();
        let v = generalized_reconstruct(&transformed_sources(&w, &m).unwrap(), &flow).unwrap();
        let n_phi = mapped_angular_nodes(6, &m);
        let grad = mapped_advection(&w, &v, &m, n_phi).unwrap();
        let (fr, fp) = mapped_advective_flux(&w, &v, &m, n_phi).unwrap();
        let nodes = g.nodes();
        let scale = grad.modes().iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..=6 {
            let div = crate::evolution::flux_divergence_k(fr.mode(k), fp.mode(k), k as i64, &g);
            // Compare away from the wall, where the one-sided ends are first order.
            for i in (1..g.n_r() - 1).filter(|&i| nodes[i] < 10.0) {
                let d = (div[i] - grad.mode(k)[i]).norm();
                assert!(d <= 2e-3 * scale, "k={k} r={} {d:e} vs {scale:e}", nodes[i]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn mass_weight_positive_for_admissible_maps(b1 in -0.4..0.4f64, b2i in -0.05..0.05f64) {
            let g = RadialGrid::new(1.0, 10.0, 64, Stretching::Geometric(1.05)).unwrap();
            if let Ok(m) = ConformalMapSeries::new(vec![c(b1, 0.0), c(0.0, b2i)], 1.0) {
                let mp = mass_matrix_profile(&m, &g).unwrap();
                prop_assert!(mp.min_weight(64) > 0.0);
            }
        }
    }
}
