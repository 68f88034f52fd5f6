//! Polar geometry: radial grids, spectral fields, angular transforms and
//! radial quadrature on `[r0, ∞)`.
//!
//! Fields are stored by their angular Fourier coefficients
//! `w_k(r) = (1/2π) ∫ w(r, φ) e^{−ikφ} dφ`. Only `k ≥ 0` is kept; negative
//! modes are the complex conjugates (`w_{−k} = conj(w_k)`), so Hermitian
//! symmetry holds by construction.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::{Error, Result};

/// Relative size of `|f(r_max)|` (against `max |f|`) above which a profile is
/// considered not to have decayed.
pub const FAR_FIELD_TOL: f64 = 1e-8;

/// Below this relative size the last sample is treated as zero and no tail
/// is extrapolated.
const TAIL_NEGLIGIBLE: f64 = 1e-15;

/// Fitted tails decaying slower than `s^{−1−MARGINAL_DECAY}` count as divergent.
const MARGINAL_DECAY: f64 = 1e-6;

/// Minimum number of radial nodes.
pub const MIN_RADIAL_NODES: usize = 16;

/// Node distribution along the radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stretching {
    Uniform,
    /// Spacing grows by `ratio` from one cell to the next.
    Geometric(f64),
}

impl Stretching {
    /// Numeric code used by the snapshot format: 0 uniform, 1 geometric.
    pub fn code(&self) -> u32 {
        match self {
            Stretching::Uniform => 0,
            Stretching::Geometric(_) => 1,
        }
    }

    /// Growth ratio, 1 for uniform grids.
    pub fn ratio(&self) -> f64 {
        match *self {
            Stretching::Uniform => 1.0,
            Stretching::Geometric(q) => q,
        }
    }

    pub fn from_code(code: u32, ratio: f64) -> Option<Self> {
        match code {
            0 => Some(Stretching::Uniform),
            1 => Some(Stretching::Geometric(ratio)),
            _ => None,
        }
    }
}

/// Radial nodes on `[r0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r0: f64,
    r_max: f64,
    stretching: Stretching,
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r0: f64, r_max: f64, n_r: usize, stretching: Stretching) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidGrid("r0 must be positive and finite"));
        }
        if !(r_max > r0) || !r_max.is_finite() {
            return Err(Error::InvalidGrid("r_max must exceed r0"));
        }
        if n_r < MIN_RADIAL_NODES {
            return Err(Error::InvalidGrid("n_r must be at least 16"));
        }
        let len = r_max - r0;
        let last = (n_r - 1) as f64;
        let mut nodes: Vec<f64> = match stretching {
            Stretching::Uniform => (0..n_r).map(|i| r0 + len * i as f64 / last).collect(),
            Stretching::Geometric(q) => {
                if !(q >= 1.0) || !q.is_finite() {
                    return Err(Error::InvalidGrid("geometric ratio must be at least 1"));
                }
                if q == 1.0 {
                    (0..n_r).map(|i| r0 + len * i as f64 / last).collect()
                } else {
                    let total = q.powf(last) - 1.0;
                    if !total.is_finite() {
                        return Err(Error::InvalidGrid("geometric ratio overflows"));
                    }
                    (0..n_r).map(|i| r0 + len * (q.powi(i as i32) - 1.0) / total).collect()
                }
            }
        };
        nodes[0] = r0;
        nodes[n_r - 1] = r_max;
        Self::check(&nodes)?;
        Ok(Self {
            r0,
            r_max,
            stretching,
            nodes,
        })
    }

    /// Grid from explicit nodes; `stretching` is kept only as a label.
    pub fn from_nodes(nodes: Vec<f64>, stretching: Stretching) -> Result<Self> {
        if nodes.len() < MIN_RADIAL_NODES {
            return Err(Error::InvalidGrid("n_r must be at least 16"));
        }
        Self::check(&nodes)?;
        if !(nodes[0] > 0.0) {
            return Err(Error::InvalidGrid("r0 must be positive and finite"));
        }
        Ok(Self {
            r0: nodes[0],
            r_max: nodes[nodes.len() - 1],
            stretching,
            nodes,
        })
    }

    fn check(nodes: &[f64]) -> Result<()> {
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite"));
        }
        if nodes.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing"));
        }
        Ok(())
    }

    /// Nested refinement: `2n − 1` nodes, ratio `√q`. Every old node is kept.
    pub fn refined(&self) -> Result<Self> {
        let n = 2 * self.n_r() - 1;
        match self.stretching {
            Stretching::Uniform => Self::new(self.r0, self.r_max, n, Stretching::Uniform),
            Stretching::Geometric(q) => Self::new(self.r0, self.r_max, n, Stretching::Geometric(q.sqrt())),
        }
    }

    #[inline]
    pub fn r0(&self) -> f64 {
        self.r0
    }
    #[inline]
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    #[inline]
    pub fn n_r(&self) -> usize {
        self.nodes.len()
    }
    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    #[inline]
    pub fn stretching(&self) -> Stretching {
        self.stretching
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
    }

    /// Composite trapezoid weights, `∫ f ≈ Σ weights[i] f(r_i)`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.n_r();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }
}

/// Which velocity component a far-field coefficient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Radial,
    Angular,
}

/// Uniform flow at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FarFieldFlow {
    pub vx: f64,
    pub vy: f64,
}

impl FarFieldFlow {
    pub const fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// `v_{∞,r,k}` (Radial) or `v_{∞,φ,k}` (Angular).
    pub fn coefficient(&self, k: i64, component: Component) -> Complex64 {
        far_field_coefficient(self, k, component)
    }

    /// `v_{∞,r,k}`.
    pub fn radial(&self, k: i64) -> Complex64 {
        far_field_coefficient(self, k, Component::Radial)
    }

    /// `v_{∞,φ,k}`.
    pub fn angular(&self, k: i64) -> Complex64 {
        far_field_coefficient(self, k, Component::Angular)
    }

    /// Complex velocity `v_x + i v_y`.
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.vx, self.vy)
    }
}

/// Fourier coefficients of a uniform flow in polar components.
///
/// `δ_{|k|,1}/2 · (vx − ik vy)` for the radial and `δ_{|k|,1}/2 · (vy + ik vx)`
/// for the angular component.
pub fn far_field_coefficient(flow: &FarFieldFlow, k: i64, component: Component) -> Complex64 {
    if k.abs() != 1 {
        return Complex64::zero();
    }
    let kf = k as f64;
    match component {
        Component::Radial => Complex64::new(0.5 * flow.vx, -0.5 * kf * flow.vy),
        Component::Angular => Complex64::new(0.5 * flow.vy, 0.5 * kf * flow.vx),
    }
}

/// Angular Fourier coefficients `w_k(r)` of a real field, `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: RadialGrid,
    modes: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: RadialGrid, k_max: usize) -> Self {
        let n = grid.n_r();
        Self {
            grid,
            modes: vec![vec![Complex64::zero(); n]; k_max + 1],
        }
    }

    /// Field from the profiles of modes `0..=K`.
    pub fn from_modes(grid: RadialGrid, modes: Vec<Vec<Complex64>>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::ShapeMismatch { expected: 1, found: 0 });
        }
        for m in &modes {
            if m.len() != grid.n_r() {
                return Err(Error::ShapeMismatch {
                    expected: grid.n_r(),
                    found: m.len(),
                });
            }
        }
        Ok(Self { grid, modes })
    }

    #[inline]
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    #[inline]
    pub fn k_max(&self) -> usize {
        self.modes.len() - 1
    }
    #[inline]
    pub fn n_r(&self) -> usize {
        self.grid.n_r()
    }
    /// Profile of mode `k ≥ 0`.
    #[inline]
    pub fn mode(&self, k: usize) -> &[Complex64] {
        &self.modes[k]
    }
    #[inline]
    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.modes[k]
    }
    pub fn modes(&self) -> &[Vec<Complex64>] {
        &self.modes
    }
    pub fn into_modes(self) -> Vec<Vec<Complex64>> {
        self.modes
    }

    /// `w_k(r_i)` for any signed `k`; zero outside `−K..K`.
    #[inline]
    pub fn coeff(&self, k: i64, i: usize) -> Complex64 {
        let a = k.unsigned_abs() as usize;
        if a >= self.modes.len() {
            Complex64::zero()
        } else if k < 0 {
            self.modes[a][i].conj()
        } else {
            self.modes[a][i]
        }
    }

    /// Profile of signed mode `k` (conjugated for `k < 0`, zero when out of range).
    pub fn signed_mode(&self, k: i64) -> Vec<Complex64> {
        (0..self.n_r()).map(|i| self.coeff(k, i)).collect()
    }

    /// Same field with `K` changed (truncated or zero-padded).
    pub fn with_k_max(&self, k_max: usize) -> Self {
        let mut modes = self.modes.clone();
        modes.resize(k_max + 1, vec![Complex64::zero(); self.n_r()]);
        Self {
            grid: self.grid.clone(),
            modes,
        }
    }

    /// `a·self + b·other` on the same grid and mode range.
    pub fn axpby(&self, a: f64, other: &SpectralField, b: f64) -> Result<Self> {
        if other.k_max() != self.k_max() || other.grid != self.grid {
            return Err(Error::ShapeMismatch {
                expected: self.k_max(),
                found: other.k_max(),
            });
        }
        let modes = self
            .modes
            .iter()
            .zip(&other.modes)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * a + v * b).collect())
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            modes,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.modes
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Polar velocity coefficients `v_{r,k}`, `v_{φ,k}` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVelocity {
    pub grid: RadialGrid,
    pub v_r: Vec<Vec<Complex64>>,
    pub v_phi: Vec<Vec<Complex64>>,
}

impl SpectralVelocity {
    pub fn k_max(&self) -> usize {
        self.v_r.len() - 1
    }

    #[inline]
    pub fn radial(&self, k: i64, i: usize) -> Complex64 {
        signed(&self.v_r, k, i)
    }

    #[inline]
    pub fn angular(&self, k: i64, i: usize) -> Complex64 {
        signed(&self.v_phi, k, i)
    }

    /// Largest `|v_{r,k}(r0)|`, `|v_{φ,k}(r0)|` over the stored modes.
    pub fn boundary_speed(&self) -> f64 {
        self.v_r
            .iter()
            .chain(&self.v_phi)
            .map(|m| m[0].norm())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn signed(modes: &[Vec<Complex64>], k: i64, i: usize) -> Complex64 {
    let a = k.unsigned_abs() as usize;
    if a >= modes.len() {
        Complex64::zero()
    } else if k < 0 {
        modes[a][i].conj()
    } else {
        modes[a][i]
    }
}

/// Real samples on the polar grid, `data[i * n_phi + j] = f(r_i, 2πj/n_phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSamples {
    pub n_r: usize,
    pub n_phi: usize,
    pub data: Vec<f64>,
}

impl PolarSamples {
    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_phi + j]
    }
}

/// Discrete angular transform on `n_phi` equispaced angles.
#[derive(Debug, Clone)]
pub struct AngularTransform {
    n_phi: usize,
    twiddle: Vec<Complex64>,
}

impl AngularTransform {
    pub fn new(n_phi: usize) -> Self {
        let twiddle = (0..n_phi)
            .map(|m| {
                let a = 2.0 * PI * m as f64 / n_phi as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        Self { n_phi, twiddle }
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// `e^{ikφ_j}`.
    #[inline]
    pub fn phase(&self, k: i64, j: usize) -> Complex64 {
        let n = self.n_phi as i64;
        let idx = (k * j as i64).rem_euclid(n) as usize;
        self.twiddle[idx]
    }

    /// Coefficients `0..=k_max` of one ring of real samples.
    pub fn analyze_real(&self, ring: &[f64], out: &mut [Complex64]) {
        let inv = 1.0 / self.n_phi as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::zero();
            for (j, &f) in ring.iter().enumerate() {
                acc += self.phase(-(k as i64), j) * f;
            }
            *o = acc * inv;
        }
        if let Some(o) = out.first_mut() {
            o.im = 0.0;
        }
    }

    /// Real ring from Hermitian coefficients `0..=K`.
    pub fn synthesize_real(&self, coeffs: &[Complex64], ring: &mut [f64]) {
        for (j, f) in ring.iter_mut().enumerate() {
            let mut acc = coeffs.first().map_or(0.0, |c| c.re);
            for (k, c) in coeffs.iter().enumerate().skip(1) {
                acc += 2.0 * (c * self.phase(k as i64, j)).re;
            }
            *f = acc;
        }
    }

    /// Coefficients `−K..=K` (index `k + K`) of a ring of complex samples.
    pub fn analyze_complex(&self, ring: &[Complex64], k_max: usize, out: &mut [Complex64]) {
        let inv = 1.0 / self.n_phi as f64;
        let kk = k_max as i64;
        for (idx, o) in out.iter_mut().enumerate().take(2 * k_max + 1) {
            let k = idx as i64 - kk;
            let mut acc = Complex64::zero();
            for (j, &f) in ring.iter().enumerate() {
                acc += self.phase(-k, j) * f;
            }
            *o = acc * inv;
        }
    }

    /// Complex ring from coefficients `−K..=K` (index `k + K`).
    pub fn synthesize_complex(&self, coeffs: &[Complex64], ring: &mut [Complex64]) {
        let kk = (coeffs.len() / 2) as i64;
        for (j, f) in ring.iter_mut().enumerate() {
            let mut acc = Complex64::zero();
            for (idx, c) in coeffs.iter().enumerate() {
                acc += c * self.phase(idx as i64 - kk, j);
            }
            *f = acc;
        }
    }
}

fn check_aliasing(n_phi: usize, k_max: usize) -> Result<()> {
    let required = 2 * k_max + 2;
    if n_phi < required {
        return Err(Error::Aliasing { n_phi, required });
    }
    Ok(())
}

/// Angular Fourier analysis of real polar samples.
pub fn analyze(samples: &PolarSamples, grid: &RadialGrid, k_max: usize) -> Result<SpectralField> {
    check_aliasing(samples.n_phi, k_max)?;
    if samples.n_r != grid.n_r() || samples.data.len() != samples.n_r * samples.n_phi {
        return Err(Error::ShapeMismatch {
            expected: grid.n_r() * samples.n_phi,
            found: samples.data.len(),
        });
    }
    let t = AngularTransform::new(samples.n_phi);
    let mut modes = vec![vec![Complex64::zero(); grid.n_r()]; k_max + 1];
    let mut buf = vec![Complex64::zero(); k_max + 1];
    for i in 0..grid.n_r() {
        t.analyze_real(&samples.data[i * samples.n_phi..(i + 1) * samples.n_phi], &mut buf);
        for (k, c) in buf.iter().enumerate() {
            modes[k][i] = *c;
        }
    }
    SpectralField::from_modes(grid.clone(), modes)
}

/// Real polar samples of a spectral field.
pub fn synthesize(field: &SpectralField, n_phi: usize) -> Result<PolarSamples> {
    check_aliasing(n_phi, field.k_max())?;
    let t = AngularTransform::new(n_phi);
    let n_r = field.n_r();
    let mut data = vec![0.0; n_r * n_phi];
    let mut coeffs = vec![Complex64::zero(); field.k_max() + 1];
    for i in 0..n_r {
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = field.mode(k)[i];
        }
        t.synthesize_real(&coeffs, &mut data[i * n_phi..(i + 1) * n_phi]);
    }
    Ok(PolarSamples { n_r, n_phi, data })
}

/// Treatment of `∫_{r_max}^∞` in radial moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailRule {
    Truncate,
    #[default]
    PowerLawExtrapolate,
}

/// Value of a radial moment and whether the profile had decayed at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: Complex64,
    pub tail: Complex64,
    pub undecayed: bool,
}

/// `true` when `|f(r_max)|` exceeds [`FAR_FIELD_TOL`] relative to `max |f|`.
pub fn undecayed(profile: &[Complex64]) -> bool {
    let peak = profile.iter().map(|z| z.norm()).fold(0.0, f64::max);
    profile.last().is_some_and(|z| z.norm() > FAR_FIELD_TOL * peak)
}

/// `∫_{r_max}^∞ s^p f(s) ds` assuming `f(s) = f(r_max) (s/r_max)^q`, with `q`
/// fitted from the last two samples.
pub fn power_law_tail(profile: &[Complex64], power: i32, grid: &RadialGrid) -> Result<Complex64> {
    let n = profile.len();
    let last = profile[n - 1];
    let peak = profile.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if last.norm() <= TAIL_NEGLIGIBLE * peak || last.is_zero() {
        return Ok(Complex64::zero());
    }
    let prev = profile[n - 2].norm();
    let nodes = grid.nodes();
    let q = (last.norm() / prev).ln() / (nodes[n - 1] / nodes[n - 2]).ln();
    let exponent = q + power as f64 + 1.0;
    if !(exponent < -MARGINAL_DECAY) {
        return Err(Error::DivergentTail {
            mode: None,
            power,
            exponent: q,
        });
    }
    Ok(last * (grid.r_max().powi(power + 1) / -exponent))
}

/// `∫_{r0}^∞ s^p f(s) ds` by the composite trapezoid rule plus an optional tail.
pub fn radial_moment(profile: &[Complex64], power: i32, grid: &RadialGrid, tail: TailRule) -> Result<MomentEstimate> {
    if profile.len() != grid.n_r() {
        return Err(Error::ShapeMismatch {
            expected: grid.n_r(),
            found: profile.len(),
        });
    }
    let nodes = grid.nodes();
    let mut acc = Complex64::zero();
    for i in (0..nodes.len() - 1).rev() {
        let h = nodes[i + 1] - nodes[i];
        acc += (profile[i] * nodes[i].powi(power) + profile[i + 1] * nodes[i + 1].powi(power)) * (0.5 * h);
    }
    let t = match tail {
        TailRule::Truncate => Complex64::zero(),
        TailRule::PowerLawExtrapolate => power_law_tail(profile, power, grid)?,
    };
    Ok(MomentEstimate {
        value: acc + t,
        tail: t,
        undecayed: undecayed(profile),
    })
}

/// `out[i] = ∫_{r0}^{r_i} g` (cumulative trapezoid, forward).
pub fn cumulative_from_start(values: &[Complex64], nodes: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::zero(); values.len()];
    for i in 1..values.len() {
        let h = nodes[i] - nodes[i - 1];
        out[i] = out[i - 1] + (values[i - 1] + values[i]) * (0.5 * h);
    }
    out
}

/// `out[i] = ∫_{r_i}^{r_max} g` (cumulative trapezoid, accumulated from the far end).
pub fn cumulative_to_end(values: &[Complex64], nodes: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut out = vec![Complex64::zero(); n];
    for i in (0..n.saturating_sub(1)).rev() {
        let h = nodes[i + 1] - nodes[i];
        out[i] = out[i + 1] + (values[i] + values[i + 1]) * (0.5 * h);
    }
    out
}

/// Second-order finite-difference derivative on a non-uniform grid
/// (three-point central inside, three-point one-sided at the ends).
pub fn derivative(values: &[Complex64], nodes: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut out = vec![Complex64::zero(); n];
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        let hm = nodes[i] - nodes[i - 1];
        let hp = nodes[i + 1] - nodes[i];
        out[i] = values[i - 1] * (-hp / (hm * (hm + hp)))
            + values[i] * ((hp - hm) / (hm * hp))
            + values[i + 1] * (hm / (hp * (hm + hp)));
    }
    out[0] = one_sided(
        values[0],
        values[1],
        values[2],
        nodes[1] - nodes[0],
        nodes[2] - nodes[0],
    );
    out[n - 1] = one_sided(
        values[n - 1],
        values[n - 2],
        values[n - 3],
        nodes[n - 2] - nodes[n - 1],
        nodes[n - 3] - nodes[n - 1],
    );
    out
}

/// `f'(x0)` from samples at `x0`, `x0 + a`, `x0 + b` (signed offsets).
#[inline]
pub(crate) fn one_sided(f0: Complex64, f1: Complex64, f2: Complex64, a: f64, b: f64) -> Complex64 {
    f0 * (-(a + b) / (a * b)) + f1 * (b / (a * (b - a))) - f2 * (a / (b * (b - a)))
}
