//! Time integration of the vorticity equation mode by mode.
//!
//! ```text
//! ∂_t w_k − Δ_k w_k + Re·[(v, ∇w)]_k = 0,     Δ_k = (1/r)∂_r(r ∂_r) − k²/r²
//! r0 ∂_r w_k + |k| w_k = g_k                   at r = r0
//! w_k = 0                                      at r = r_max
//! ```
//!
//! Diffusion is Crank-Nicolson, advection second-order Adams-Bashforth (the
//! first step is forward Euler). The Laplacian is written in conservative
//! form: node `i` owns the cell between the neighbouring midpoints, so the
//! row at `r0` is a half cell whose inner face carries the Robin flux
//! `r0 ∂_r w = g − |k| w`. With that choice the discrete moment `Σ W_i r_i w_0`
//! telescopes exactly for `k = 0`, and the other moments are conserved to
//! second order.
//!
//! Advection enters in divergence form `∇·(v w)` (both `v_∞` and the
//! reconstructed velocity are solenoidal) with the same cell fluxes, so the
//! advective flux through `r0` cancels the Oseen closure exactly.
//!
//! The right-hand side `g_k` is explicit: it is evaluated from the state at
//! the start of each step and extrapolated in time like the advection term,
//! so modes stay decoupled in the implicit solve.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::biot_savart::{reconstruct, with_mode};
use crate::conformal::{
    generalized_reconstruct, mapped_advective_flux, mapped_angular_nodes, mass_matrix_profile,
    ns_boundary_rhs_general_all, transformed_sources, ConformalMapSeries, MassProfile,
};
use crate::grid::{
    derivative, one_sided, radial_moment, AngularTransform, FarFieldFlow, RadialGrid, SpectralField, SpectralVelocity,
    TailRule,
};
use crate::linalg::{BlockTridiagonal, BlockTridiagonalLu, DenseMatrix, Tridiagonal, TridiagonalLu};
use crate::par::{map_modes, try_map_modes};
use crate::{Error, Result};

/// Which advection term enters the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dynamics {
    Stokes,
    Oseen,
    NavierStokes,
}

/// Time discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    /// Crank-Nicolson diffusion with explicit Adams-Bashforth advection.
    #[default]
    CrankNicolsonDiffusionExplicitAdvection,
}

/// Prescribed boundary data `u_k(t_n)` per step, modes `0..=K` (negative modes by conjugation).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlSchedule {
    pub samples: Vec<Vec<Complex64>>,
}

impl ControlSchedule {
    pub fn sample(&self, step: usize, k: usize) -> Result<Complex64> {
        let row = self.samples.get(step).ok_or(Error::MissingControl { step })?;
        Ok(row.get(k).copied().unwrap_or_else(Complex64::zero))
    }
}

/// Boundary closure at `r0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Boundary {
    /// `r0 ∂_r w_k + |k| w_k = 0`.
    #[default]
    RobinHomogeneous,
    /// Right side `r0 (v_{∞,r,1} w_{k−1}(r0) + v_{∞,r,−1} w_{k+1}(r0))`.
    OseenCoupled,
    /// Right side from the area integral of `(v_∞ − v) z^{−|k|−1} w`.
    NavierStokesIntegral,
    /// Right side `u_k(t)` taken from a schedule.
    Controlled(ControlSchedule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Multiplies the advection term (and the boundary terms it induces).
    pub reynolds_scale: f64,
    pub boundary: Boundary,
}

impl StepperConfig {
    pub fn new(dt: f64, boundary: Boundary) -> Self {
        Self {
            dt,
            scheme: Scheme::default(),
            reynolds_scale: 1.0,
            boundary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig("dt must be positive"));
        }
        if !(self.reynolds_scale > 0.0) || !self.reynolds_scale.is_finite() {
            return Err(Error::InvalidConfig("reynolds_scale must be positive"));
        }
        Ok(())
    }
}

/// Conservative-form coefficients `(lower, diag, upper)` of `Δ_k` at interior node `i`.
#[inline]
fn interior_row(nodes: &[f64], i: usize, k2: f64) -> (f64, f64, f64) {
    let r = nodes[i];
    let hm = nodes[i] - nodes[i - 1];
    let hp = nodes[i + 1] - nodes[i];
    let vol = r * 0.5 * (hm + hp);
    let lo = 0.5 * (nodes[i] + nodes[i - 1]) / hm / vol;
    let up = 0.5 * (nodes[i] + nodes[i + 1]) / hp / vol;
    (lo, -(lo + up) - k2 / (r * r), up)
}

/// Half-cell row at `r0` with the Robin flux eliminated. Returns
/// `(diag, upper, source)`: `Δ_k w ≈ diag·w_0 + upper·w_1 + source·g`.
#[inline]
fn boundary_row(nodes: &[f64], k: usize) -> (f64, f64, f64) {
    let r0 = nodes[0];
    let h = nodes[1] - nodes[0];
    let vol = r0 * 0.5 * h;
    let face = 0.5 * (nodes[0] + nodes[1]) / h;
    let kf = k as f64;
    ((-face + kf) / vol - kf * kf / (r0 * r0), face / vol, -1.0 / vol)
}

/// Second derivative at `x0` from four samples at signed offsets `0, a, b, c`.
fn second_derivative_4(f: [Complex64; 4], a: f64, b: f64, c: f64) -> Complex64 {
    // Lagrange weights of d²/dx² at 0 for nodes {0, a, b, c}.
    let w0 = 2.0 * (a + b + c) / (a * b * c);
    let w1 = -2.0 * (b + c) / (a * (a - b) * (a - c));
    let w2 = -2.0 * (a + c) / (b * (b - a) * (b - c));
    let w3 = -2.0 * (a + b) / (c * (c - a) * (c - b));
    f[0] * w0 + f[1] * w1 + f[2] * w2 + f[3] * w3
}

/// `Δ_k` by second-order finite differences: conservative three-point form
/// inside, one-sided four-point stencils at both ends.
pub fn laplacian_k(profile: &[Complex64], k: i64, grid: &RadialGrid) -> Result<Vec<Complex64>> {
    let n = grid.n_r();
    if profile.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: profile.len(),
        });
    }
    let nodes = grid.nodes();
    let k2 = (k * k) as f64;
    let mut out = vec![Complex64::zero(); n];
    for i in 1..n - 1 {
        let (lo, d, up) = interior_row(nodes, i, k2);
        out[i] = profile[i - 1] * lo + profile[i] * d + profile[i + 1] * up;
    }
    for &(i, s) in &[(0usize, 1isize), (n - 1, -1isize)] {
        let at = |m: isize| (i as isize + s * m) as usize;
        let x0 = nodes[i];
        let (a, b, c) = (nodes[at(1)] - x0, nodes[at(2)] - x0, nodes[at(3)] - x0);
        let f = [profile[i], profile[at(1)], profile[at(2)], profile[at(3)]];
        let d2 = second_derivative_4(f, a, b, c);
        let d1 = one_sided(f[0], f[1], f[2], a, b);
        out[i] = d2 + d1 / x0 - f[0] * (k2 / (x0 * x0));
    }
    Ok(out)
}

/// `r0 ∂_r w_k(r0) + |k| w_k(r0) − g` with a second-order one-sided derivative.
pub fn boundary_residual(profile: &[Complex64], k: usize, g: Complex64, grid: &RadialGrid) -> Complex64 {
    let x = grid.nodes();
    let d = one_sided(profile[0], profile[1], profile[2], x[1] - x[0], x[2] - x[0]);
    d * x[0] + profile[0] * k as f64 - g
}

/// Fourier mode `k` of `(v_∞, ∇w)`.
pub fn advection_oseen_k(w: &SpectralField, k: i64, flow: &FarFieldFlow) -> Vec<Complex64> {
    let n = w.n_r();
    let nodes = w.grid().nodes();
    let mut out = vec![Complex64::zero(); n];
    if flow.vx == 0.0 && flow.vy == 0.0 {
        return out;
    }
    let kmax = w.k_max() as i64;
    let vr1 = flow.radial(1);
    let vrm = flow.radial(-1);
    let vp1 = flow.angular(1);
    let vpm = flow.angular(-1);
    let i_unit = Complex64::i();
    if (k - 1).abs() <= kmax {
        let lower = w.signed_mode(k - 1);
        let d = derivative(&lower, nodes);
        let ang = vp1 * ((k - 1) as f64);
        for i in 0..n {
            out[i] += vr1 * d[i] + i_unit * ang * lower[i] / nodes[i];
        }
    }
    if (k + 1).abs() <= kmax {
        let upper = w.signed_mode(k + 1);
        let d = derivative(&upper, nodes);
        let ang = vpm * ((k + 1) as f64);
        for i in 0..n {
            out[i] += vrm * d[i] + i_unit * ang * upper[i] / nodes[i];
        }
    }
    out
}

/// Smallest angular resolution accepted by [`advection_full`].
pub fn min_angular_nodes(k_max: usize) -> usize {
    2 * k_max + 2
}

/// Recommended (dealiased) angular resolution for quadratic products.
pub fn dealiased_angular_nodes(k_max: usize) -> usize {
    (3 * k_max + 3).max(min_angular_nodes(k_max))
}

/// `(v, ∇w)` evaluated pseudo-spectrally on `n_phi` angles.
pub fn advection_full(w: &SpectralField, v: &SpectralVelocity, n_phi: usize) -> Result<SpectralField> {
    let k_max = w.k_max();
    if n_phi < min_angular_nodes(k_max) {
        return Err(Error::Aliasing {
            n_phi,
            required: min_angular_nodes(k_max),
        });
    }
    if n_phi < 3 * k_max {
        log::warn!(
            "angular resolution {n_phi} is below 3K = {}; products are aliased",
            3 * k_max
        );
    }
    let nodes = w.grid().nodes();
    let dr: Vec<Vec<Complex64>> = (0..=k_max).map(|k| derivative(w.mode(k), nodes)).collect();
    let t = AngularTransform::new(n_phi);
    let vk = v.k_max().min(k_max);
    let rows = map_modes(w.n_r(), |i| {
        let r = nodes[i];
        let mut c_vr = vec![Complex64::zero(); k_max + 1];
        let mut c_vp = vec![Complex64::zero(); k_max + 1];
        let mut c_wr = vec![Complex64::zero(); k_max + 1];
        let mut c_wp = vec![Complex64::zero(); k_max + 1];
        for k in 0..=k_max {
            if k <= vk {
                c_vr[k] = v.v_r[k][i];
                c_vp[k] = v.v_phi[k][i];
            }
            c_wr[k] = dr[k][i];
            c_wp[k] = w.mode(k)[i] * Complex64::new(0.0, k as f64 / r);
        }
        let mut a = vec![0.0; n_phi];
        let mut b = vec![0.0; n_phi];
        let mut c = vec![0.0; n_phi];
        let mut d = vec![0.0; n_phi];
        t.synthesize_real(&c_vr, &mut a);
        t.synthesize_real(&c_vp, &mut b);
        t.synthesize_real(&c_wr, &mut c);
        t.synthesize_real(&c_wp, &mut d);
        let prod: Vec<f64> = (0..n_phi).map(|j| a[j] * c[j] + b[j] * d[j]).collect();
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

/// Mode `k` of `∇·f` for a flux with polar modes `f_r`, `f_φ`:
/// `(1/r)∂_r(r f_r) + (ik/r) f_φ`, with the radial part in cell form so that
/// the volume-weighted sum telescopes to the flux through `r0`.
pub fn flux_divergence_k(f_r: &[Complex64], f_phi: &[Complex64], k: i64, grid: &RadialGrid) -> Vec<Complex64> {
    let x = grid.nodes();
    let n = x.len();
    let g: Vec<Complex64> = f_r.iter().zip(x).map(|(f, &r)| f * r).collect();
    let ik = Complex64::new(0.0, k as f64);
    let mut out = vec![Complex64::zero(); n];
    out[0] = (g[1] - g[0]) / (x[0] * (x[1] - x[0]));
    for i in 1..n - 1 {
        out[i] = (g[i + 1] - g[i - 1]) / (x[i] * (x[i + 1] - x[i - 1]));
    }
    out[n - 1] = (g[n - 1] - g[n - 2]) / (x[n - 1] * (x[n - 1] - x[n - 2]));
    for i in 0..n {
        out[i] += ik * f_phi[i] / x[i];
    }
    out
}

/// Polar modes `([v_{∞,r} w]_k, [v_{∞,φ} w]_k)` of the far-field flux.
pub fn oseen_flux_k(w: &SpectralField, k: i64, flow: &FarFieldFlow) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = w.n_r();
    let mut fr = vec![Complex64::zero(); n];
    let mut fp = vec![Complex64::zero(); n];
    let kmax = w.k_max() as i64;
    for (m, shift) in [(1i64, k - 1), (-1, k + 1)] {
        if shift.abs() > kmax {
            continue;
        }
        let (vr, vp) = (flow.radial(m), flow.angular(m));
        for i in 0..n {
            let c = w.coeff(shift, i);
            fr[i] += vr * c;
            fp[i] += vp * c;
        }
    }
    (fr, fp)
}

/// Polar modes of the flux `v w`, `k = 0..=K`, from products on `n_phi` angles.
pub fn advective_flux(w: &SpectralField, v: &SpectralVelocity, n_phi: usize) -> Result<(SpectralField, SpectralField)> {
    let k_max = w.k_max();
    if n_phi < min_angular_nodes(k_max) {
        return Err(Error::Aliasing {
            n_phi,
            required: min_angular_nodes(k_max),
        });
    }
    if n_phi < 3 * k_max {
        log::warn!(
            "angular resolution {n_phi} is below 3K = {}; products are aliased",
            3 * k_max
        );
    }
    let t = AngularTransform::new(n_phi);
    let vk = v.k_max().min(k_max);
    let rows = map_modes(w.n_r(), |i| {
        let mut c_vr = vec![Complex64::zero(); k_max + 1];
        let mut c_vp = vec![Complex64::zero(); k_max + 1];
        let mut c_w = vec![Complex64::zero(); k_max + 1];
        for k in 0..=k_max {
            if k <= vk {
                c_vr[k] = v.v_r[k][i];
                c_vp[k] = v.v_phi[k][i];
            }
            c_w[k] = w.mode(k)[i];
        }
        let mut a = vec![0.0; n_phi];
        let mut b = vec![0.0; n_phi];
        let mut c = vec![0.0; n_phi];
        t.synthesize_real(&c_vr, &mut a);
        t.synthesize_real(&c_vp, &mut b);
        t.synthesize_real(&c_w, &mut c);
        for j in 0..n_phi {
            a[j] *= c[j];
            b[j] *= c[j];
        }
        let mut fr = vec![Complex64::zero(); k_max + 1];
        let mut fp = vec![Complex64::zero(); k_max + 1];
        t.analyze_real(&a, &mut fr);
        t.analyze_real(&b, &mut fp);
        (fr, fp)
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

/// Oseen boundary right side `r0 (v_{∞,r,1} w_{k−1}(r0) + v_{∞,r,−1} w_{k+1}(r0))`.
pub fn oseen_boundary_rhs(w: &SpectralField, flow: &FarFieldFlow, k: i64) -> Complex64 {
    let r0 = w.grid().r0();
    (flow.radial(1) * w.coeff(k - 1, 0) + flow.radial(-1) * w.coeff(k + 1, 0)) * r0
}

/// `[(u_r + i u_φ) f]_k` with `u = v_∞ − v` at every node; `f[j + offset]`
/// holds signed mode `j`.
pub(crate) fn deficit_product(
    f: &[Vec<Complex64>],
    offset: i64,
    v: &SpectralVelocity,
    flow: &FarFieldFlow,
    k: i64,
) -> Vec<Complex64> {
    let kv = v.k_max() as i64;
    let n = v.grid.n_r();
    let i_unit = Complex64::i();
    let mut out = vec![Complex64::zero(); n];
    for m in -kv..=kv {
        let idx = k - m + offset;
        if idx < 0 || idx >= f.len() as i64 {
            continue;
        }
        let fj = &f[idx as usize];
        let ur_inf = flow.radial(m);
        let up_inf = flow.angular(m);
        for i in 0..n {
            let u = (ur_inf - v.radial(m, i)) + i_unit * (up_inf - v.angular(m, i));
            out[i] += u * fj[i];
        }
    }
    out
}

pub(crate) fn signed_modes(w: &SpectralField) -> Vec<Vec<Complex64>> {
    let k = w.k_max() as i64;
    (-k..=k).map(|m| w.signed_mode(m)).collect()
}

/// Integral right side `(|k| r0^{|k|}/2π) ∫ (v_∞^C − v^C) z^{−|k|−1} w dA` for `k ≥ 0`.
///
/// Evaluated as `|k| r0^{|k|} ∫ s^{−|k|} [(u_r + i u_φ) w]_k ds`, `u = v_∞ − v`.
pub fn ns_boundary_rhs(w: &SpectralField, v: &SpectralVelocity, flow: &FarFieldFlow, k: usize) -> Result<Complex64> {
    ns_rhs_from_modes(&signed_modes(w), w.k_max() as i64, v, flow, k, w.grid())
}

pub(crate) fn ns_rhs_from_modes(
    f: &[Vec<Complex64>],
    offset: i64,
    v: &SpectralVelocity,
    flow: &FarFieldFlow,
    k: usize,
    grid: &RadialGrid,
) -> Result<Complex64> {
    if k == 0 {
        return Ok(Complex64::zero());
    }
    let prod = deficit_product(f, offset, v, flow, k as i64);
    let m = radial_moment(&prod, -(k as i32), grid, TailRule::PowerLawExtrapolate).map_err(|e| with_mode(e, k))?;
    Ok(m.value * (k as f64 * grid.r0().powi(k as i32)))
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// `dt · max|v| / min spacing` (upper bound on the speed from the mode sums).
    pub cfl: f64,
    pub cfl_warning: bool,
}

/// Crank-Nicolson / Adams-Bashforth stepper on a disc-exterior grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: RadialGrid,
    k_max: usize,
    flow: FarFieldFlow,
    dynamics: Dynamics,
    cfg: StepperConfig,
    n_phi: usize,
    ops: Vec<Tridiagonal>,
    lus: Vec<TridiagonalLu>,
    sources: Vec<f64>,
    previous: Option<Vec<Vec<Complex64>>>,
    previous_boundary: Option<Vec<Complex64>>,
    steps: usize,
    last_report: StepReport,
}

impl Stepper {
    pub fn new(
        grid: &RadialGrid,
        k_max: usize,
        flow: FarFieldFlow,
        dynamics: Dynamics,
        cfg: StepperConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = grid.n_r();
        let half = 0.5 * cfg.dt;
        let mut ops = Vec::with_capacity(k_max + 1);
        let mut lus = Vec::with_capacity(k_max + 1);
        let mut sources = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let (a, s0) = robin_operator(grid, k);
            let mut lhs = Tridiagonal::zeros(n);
            for i in 0..n - 1 {
                lhs.lower[i] = -half * a.lower[i];
                lhs.diag[i] = 1.0 - half * a.diag[i];
                lhs.upper[i] = -half * a.upper[i];
            }
            lhs.diag[n - 1] = 1.0;
            lus.push(lhs.factor().map_err(|e| match e {
                Error::SingularSystem { row, .. } => Error::SingularSystem {
                    mode: Some(k as i64),
                    row,
                },
                other => other,
            })?);
            ops.push(a);
            sources.push(s0);
        }
        Ok(Self {
            grid: grid.clone(),
            k_max,
            flow,
            dynamics,
            n_phi: dealiased_angular_nodes(k_max),
            cfg,
            ops,
            lus,
            sources,
            previous: None,
            previous_boundary: None,
            steps: 0,
            last_report: StepReport::default(),
        })
    }

    /// Angular resolution of the pseudo-spectral product.
    pub fn with_angular_nodes(mut self, n_phi: usize) -> Result<Self> {
        if n_phi < min_angular_nodes(self.k_max) {
            return Err(Error::Aliasing {
                n_phi,
                required: min_angular_nodes(self.k_max),
            });
        }
        self.n_phi = n_phi;
        Ok(self)
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }
    pub fn steps_taken(&self) -> usize {
        self.steps
    }
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }
    pub fn last_report(&self) -> StepReport {
        self.last_report
    }
    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    /// The tridiagonal `Δ_k` used by the stepper (boundary flux term excluded).
    pub fn operator(&self, k: usize) -> &Tridiagonal {
        &self.ops[k]
    }

    /// Coefficient of `g_k` in the boundary row of `Δ_k`.
    pub fn boundary_source(&self, k: usize) -> f64 {
        self.sources[k]
    }

    fn check(&self, w: &SpectralField) -> Result<()> {
        if w.k_max() != self.k_max {
            return Err(Error::ShapeMismatch {
                expected: self.k_max,
                found: w.k_max(),
            });
        }
        if w.grid() != &self.grid {
            return Err(Error::ShapeMismatch {
                expected: self.grid.n_r(),
                found: w.n_r(),
            });
        }
        Ok(())
    }

    /// Velocity needed by the current step, if any.
    fn velocity(&self, w: &SpectralField) -> Result<Option<SpectralVelocity>> {
        let need =
            self.dynamics == Dynamics::NavierStokes || matches!(self.cfg.boundary, Boundary::NavierStokesIntegral);
        if need {
            Ok(Some(reconstruct(w, &self.flow)?))
        } else {
            Ok(None)
        }
    }

    /// Boundary right sides `g_k`, `k = 0..=K`, at the current state.
    pub fn boundary_values(&self, w: &SpectralField) -> Result<Vec<Complex64>> {
        let v = self.velocity(w)?;
        self.boundary_values_with(w, v.as_ref())
    }

    fn boundary_values_with(&self, w: &SpectralField, v: Option<&SpectralVelocity>) -> Result<Vec<Complex64>> {
        let re = self.cfg.reynolds_scale;
        match &self.cfg.boundary {
            Boundary::RobinHomogeneous => Ok(vec![Complex64::zero(); self.k_max + 1]),
            Boundary::OseenCoupled => Ok((0..=self.k_max)
                .map(|k| oseen_boundary_rhs(w, &self.flow, k as i64) * re)
                .collect()),
            Boundary::NavierStokesIntegral => {
                let v = v.ok_or(Error::InvalidConfig("velocity required"))?;
                let f = signed_modes(w);
                let offset = self.k_max as i64;
                try_map_modes(self.k_max + 1, |k| {
                    Ok(ns_rhs_from_modes(&f, offset, v, &self.flow, k, w.grid())? * re)
                })
            }
            Boundary::Controlled(schedule) => (0..=self.k_max).map(|k| schedule.sample(self.steps, k)).collect(),
        }
    }

    fn advection(&self, w: &SpectralField, v: Option<&SpectralVelocity>) -> Result<Option<Vec<Vec<Complex64>>>> {
        let re = self.cfg.reynolds_scale;
        let scale = |mut m: Vec<Vec<Complex64>>| {
            for p in &mut m {
                for z in p.iter_mut() {
                    *z *= re;
                }
            }
            m
        };
        match self.dynamics {
            Dynamics::Stokes => Ok(None),
            Dynamics::Oseen => Ok(Some(scale(map_modes(self.k_max + 1, |k| {
                let (fr, fp) = oseen_flux_k(w, k as i64, &self.flow);
                flux_divergence_k(&fr, &fp, k as i64, &self.grid)
            })))),
            Dynamics::NavierStokes => {
                let v = v.ok_or(Error::InvalidConfig("velocity required"))?;
                let (mut fr, fp) = advective_flux(w, v, self.n_phi)?;
                // The wall is impermeable; the reconstructed v_r(r0) only vanishes on M.
                for k in 0..=self.k_max {
                    fr.mode_mut(k)[0] = Complex64::zero();
                }
                Ok(Some(scale(map_modes(self.k_max + 1, |k| {
                    flux_divergence_k(fr.mode(k), fp.mode(k), k as i64, &self.grid)
                }))))
            }
        }
    }

    fn cfl(&self, v: Option<&SpectralVelocity>) -> f64 {
        let speed = match (self.dynamics, v) {
            (Dynamics::Stokes, _) => 0.0,
            (Dynamics::Oseen, _) => self.flow.speed(),
            (Dynamics::NavierStokes, Some(v)) => (0..self.grid.n_r())
                .map(|i| {
                    let mut a = v.v_r[0][i].norm() + v.v_phi[0][i].norm();
                    for k in 1..=v.k_max() {
                        a += 2.0 * (v.v_r[k][i].norm() + v.v_phi[k][i].norm());
                    }
                    a
                })
                .fold(0.0, f64::max),
            (Dynamics::NavierStokes, None) => 0.0,
        };
        self.cfg.dt * speed * self.cfg.reynolds_scale / self.grid.min_spacing()
    }

    /// Advances `w` by one step using the configured boundary closure.
    pub fn step(&mut self, w: &SpectralField) -> Result<SpectralField> {
        self.check(w)?;
        let v = self.velocity(w)?;
        let g = self.boundary_values_with(w, v.as_ref())?;
        self.advance(w, v.as_ref(), &g)
    }

    /// Advances `w` by one step with explicit boundary right sides `g_k`
    /// (feedback control); the configured closure is ignored.
    pub fn step_with_boundary(&mut self, w: &SpectralField, g: &[Complex64]) -> Result<SpectralField> {
        self.check(w)?;
        if g.len() != self.k_max + 1 {
            return Err(Error::ShapeMismatch {
                expected: self.k_max + 1,
                found: g.len(),
            });
        }
        let v = if self.dynamics == Dynamics::NavierStokes {
            Some(reconstruct(w, &self.flow)?)
        } else {
            None
        };
        self.advance(w, v.as_ref(), g)
    }

    fn advance(&mut self, w: &SpectralField, v: Option<&SpectralVelocity>, g: &[Complex64]) -> Result<SpectralField> {
        let cfl = self.cfl(v);
        let warn = cfl > 1.0;
        if warn {
            log::warn!("CFL number {cfl:.3} exceeds 1 at step {}", self.steps);
        }
        self.last_report = StepReport { cfl, cfl_warning: warn };
        let adv = self.advection(w, v)?;
        let dt = self.cfg.dt;
        let half = 0.5 * dt;
        let n = self.grid.n_r();
        let prev = self.previous.as_ref();
        let g_eff: Vec<Complex64> = match &self.previous_boundary {
            Some(p) => g.iter().zip(p).map(|(a, b)| a * 1.5 - b * 0.5).collect(),
            None => g.to_vec(),
        };
        let modes = try_map_modes(self.k_max + 1, |k| -> Result<Vec<Complex64>> {
            let mut rhs = vec![Complex64::zero(); n];
            self.ops[k].apply(w.mode(k), &mut rhs);
            for (r, x) in rhs.iter_mut().zip(w.mode(k)) {
                *r = x + *r * half;
            }
            rhs[0] += g_eff[k] * (self.sources[k] * dt);
            if let Some(a) = &adv {
                match prev {
                    Some(p) => {
                        for i in 0..n {
                            rhs[i] -= (a[k][i] * 1.5 - p[k][i] * 0.5) * dt;
                        }
                    }
                    None => {
                        for i in 0..n {
                            rhs[i] -= a[k][i] * dt;
                        }
                    }
                }
            }
            rhs[n - 1] = Complex64::zero();
            self.lus[k].solve(&mut rhs);
            if k == 0 {
                for z in &mut rhs {
                    z.im = 0.0;
                }
            }
            if rhs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { mode: Some(k as i64) });
            }
            Ok(rhs)
        })?;
        self.previous = adv;
        self.previous_boundary = Some(g.to_vec());
        self.steps += 1;
        SpectralField::from_modes(self.grid.clone(), modes)
    }
}

/// One stateless step (forward Euler for the advection part).
pub fn step(w: &SpectralField, cfg: &StepperConfig, flow: &FarFieldFlow, dynamics: Dynamics) -> Result<SpectralField> {
    Stepper::new(w.grid(), w.k_max(), *flow, dynamics, cfg.clone())?.step(w)
}

/// `Δ_k` with the Robin flux eliminated at `r0` (last row left empty for the
/// Dirichlet condition) and the coefficient of `g_k` in the first row.
fn robin_operator(grid: &RadialGrid, k: usize) -> (Tridiagonal, f64) {
    let n = grid.n_r();
    let nodes = grid.nodes();
    let k2 = (k * k) as f64;
    let mut a = Tridiagonal::zeros(n);
    let (d0, u0, s0) = boundary_row(nodes, k);
    a.diag[0] = d0;
    a.upper[0] = u0;
    for i in 1..n - 1 {
        let (lo, d, up) = interior_row(nodes, i, k2);
        a.lower[i] = lo;
        a.diag[i] = d;
        a.upper[i] = up;
    }
    (a, s0)
}

/// Steady state of `Δ_k w = 0` with Robin data `g` at `r0` and `w(r_max) = 0`,
/// using the stepper's discrete operator.
pub fn steady_robin_profile(grid: &RadialGrid, k: usize, g: Complex64) -> Result<Vec<Complex64>> {
    let n = grid.n_r();
    let (mut a, s0) = robin_operator(grid, k);
    a.diag[n - 1] = 1.0;
    let mut rhs = vec![Complex64::zero(); n];
    rhs[0] = -g * s0;
    a.factor()?.solve(&mut rhs);
    Ok(rhs)
}

/// Stepper for the pulled-back equation `|D|² ∂_t w = Δw − Re·B(v, w)` of a
/// conformally mapped domain.
///
/// The mass weight couples modes `k` and `k ± j`, `j ≤ L`, at each node, so
/// the implicit system is block tridiagonal in `r` with blocks over the
/// signed modes `−K..K`. Supported closures are the homogeneous Robin
/// condition, the mapped Navier-Stokes integral and a control schedule.
#[derive(Debug, Clone)]
pub struct MappedStepper {
    grid: RadialGrid,
    k_max: usize,
    flow: FarFieldFlow,
    dynamics: Dynamics,
    cfg: StepperConfig,
    map: ConformalMapSeries,
    mass: MassProfile,
    ops: Vec<Tridiagonal>,
    sources: Vec<f64>,
    lu: BlockTridiagonalLu,
    n_phi: usize,
    previous: Option<Vec<Vec<Complex64>>>,
    previous_boundary: Option<Vec<Complex64>>,
    steps: usize,
}

impl MappedStepper {
    pub fn new(
        grid: &RadialGrid,
        k_max: usize,
        flow: FarFieldFlow,
        dynamics: Dynamics,
        cfg: StepperConfig,
        map: ConformalMapSeries,
    ) -> Result<Self> {
        cfg.validate()?;
        if dynamics == Dynamics::Oseen || matches!(cfg.boundary, Boundary::OseenCoupled) {
            return Err(Error::InvalidConfig(
                "Oseen dynamics are not available in mapped domains",
            ));
        }
        if (map.r0() - grid.r0()).abs() > 1e-12 * grid.r0() {
            return Err(Error::InvalidConfig("map and grid disagree on r0"));
        }
        let mass = mass_matrix_profile(&map, grid)?;
        let n = grid.n_r();
        let m = 2 * k_max + 1;
        let kk = k_max as i64;
        let half = 0.5 * cfg.dt;
        let (ops, sources): (Vec<_>, Vec<_>) = (0..=k_max).map(|k| robin_operator(grid, k)).unzip();
        let mut sys = BlockTridiagonal {
            lower: vec![DenseMatrix::zeros(m); n],
            diag: vec![DenseMatrix::zeros(m); n],
            upper: vec![DenseMatrix::zeros(m); n],
        };
        for i in 0..n - 1 {
            for a in 0..m {
                let ka = a as i64 - kk;
                let op = &ops[ka.unsigned_abs() as usize];
                for b in 0..m {
                    *sys.diag[i].get_mut(a, b) = mass.coeff(ka - (b as i64 - kk), i);
                }
                *sys.diag[i].get_mut(a, a) -= half * op.diag[i];
                *sys.lower[i].get_mut(a, a) = Complex64::from(-half * op.lower[i]);
                *sys.upper[i].get_mut(a, a) = Complex64::from(-half * op.upper[i]);
            }
        }
        sys.diag[n - 1] = DenseMatrix::identity(m);
        let lu = sys.factor()?;
        Ok(Self {
            grid: grid.clone(),
            k_max,
            flow,
            dynamics,
            n_phi: mapped_angular_nodes(k_max, &map),
            cfg,
            map,
            mass,
            ops,
            sources,
            lu,
            previous: None,
            previous_boundary: None,
            steps: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }
    pub fn map(&self) -> &ConformalMapSeries {
        &self.map
    }
    pub fn mass(&self) -> &MassProfile {
        &self.mass
    }

    /// Velocity of the mapped Biot-Savart problem for `w`.
    pub fn velocity(&self, w: &SpectralField) -> Result<SpectralVelocity> {
        generalized_reconstruct(&transformed_sources(w, &self.map)?, &self.flow)
    }

    fn boundary_values(&self, w: &SpectralField, v: Option<&SpectralVelocity>) -> Result<Vec<Complex64>> {
        match &self.cfg.boundary {
            Boundary::RobinHomogeneous | Boundary::OseenCoupled => Ok(vec![Complex64::zero(); self.k_max + 1]),
            Boundary::NavierStokesIntegral => {
                let owned;
                let v = match v {
                    Some(v) => v,
                    None => {
                        owned = self.velocity(w)?;
                        &owned
                    }
                };
                let re = self.cfg.reynolds_scale;
                Ok(ns_boundary_rhs_general_all(w, v, &self.flow, &self.map)?
                    .into_iter()
                    .map(|g| g * re)
                    .collect())
            }
            Boundary::Controlled(s) => (0..=self.k_max).map(|k| s.sample(self.steps, k)).collect(),
        }
    }

    pub fn step(&mut self, w: &SpectralField) -> Result<SpectralField> {
        if w.k_max() != self.k_max || w.grid() != &self.grid {
            return Err(Error::ShapeMismatch {
                expected: self.k_max,
                found: w.k_max(),
            });
        }
        let v = if self.dynamics == Dynamics::NavierStokes {
            Some(self.velocity(w)?)
        } else {
            None
        };
        let g = self.boundary_values(w, v.as_ref())?;
        let adv = match &v {
            Some(v) => {
                let re = self.cfg.reynolds_scale;
                let (mut fr, fp) = mapped_advective_flux(w, v, &self.map, self.n_phi)?;
                for k in 0..=self.k_max {
                    fr.mode_mut(k)[0] = Complex64::zero();
                }
                Some(map_modes(self.k_max + 1, |k| {
                    let mut a = flux_divergence_k(fr.mode(k), fp.mode(k), k as i64, &self.grid);
                    for z in &mut a {
                        *z *= re;
                    }
                    a
                }))
            }
            None => None,
        };
        let g_eff: Vec<Complex64> = match &self.previous_boundary {
            Some(p) => g.iter().zip(p).map(|(a, b)| a * 1.5 - b * 0.5).collect(),
            None => g.clone(),
        };
        let adv_eff = adv.as_ref().map(|a| match &self.previous {
            Some(p) => a
                .iter()
                .zip(p)
                .map(|(x, y)| x.iter().zip(y).map(|(s, t)| s * 1.5 - t * 0.5).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            None => a.clone(),
        });

        let n = self.grid.n_r();
        let m = 2 * self.k_max + 1;
        let kk = self.k_max as i64;
        let dt = self.cfg.dt;
        let half = 0.5 * dt;
        let lap: Vec<Vec<Complex64>> = map_modes(self.k_max + 1, |k| {
            let mut y = vec![Complex64::zero(); n];
            self.ops[k].apply(w.mode(k), &mut y);
            y
        });
        let signed = |data: &[Vec<Complex64>], k: i64, i: usize| {
            let z = data[k.unsigned_abs() as usize][i];
            if k < 0 {
                z.conj()
            } else {
                z
            }
        };
        let mut rhs = vec![Complex64::zero(); n * m];
        for i in 0..n - 1 {
            for a in 0..m {
                let ka = a as i64 - kk;
                let mut acc = Complex64::zero();
                let lo = (ka - self.mass.bandwidth as i64).max(-kk);
                let hi = (ka + self.mass.bandwidth as i64).min(kk);
                for kb in lo..=hi {
                    acc += self.mass.coeff(ka - kb, i) * w.coeff(kb, i);
                }
                acc += signed(&lap, ka, i) * half;
                if i == 0 {
                    let gk = if ka < 0 {
                        g_eff[(-ka) as usize].conj()
                    } else {
                        g_eff[ka as usize]
                    };
                    acc += gk * (self.sources[ka.unsigned_abs() as usize] * dt);
                }
                if let Some(adv) = &adv_eff {
                    acc -= signed(adv, ka, i) * dt;
                }
                rhs[i * m + a] = acc;
            }
        }
        self.lu.solve(&mut rhs);
        let mut modes = vec![vec![Complex64::zero(); n]; self.k_max + 1];
        for i in 0..n {
            for (k, mode) in modes.iter_mut().enumerate() {
                mode[i] = rhs[i * m + (k as i64 + kk) as usize];
            }
        }
        for z in &mut modes[0] {
            z.im = 0.0;
        }
        if modes.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { mode: None });
        }
        self.previous = adv;
        self.previous_boundary = Some(g);
        self.steps += 1;
        SpectralField::from_modes(self.grid.clone(), modes)
    }
}
