//! Integer-order Bessel functions `J_n`, `Y_n` and the Robin eigenfunction
//! kernel `R_{k,l}(λ, s) = J_k(λs) Y_l(λr0) − Y_k(λs) J_l(λr0)`.
//!
//! Evaluation regimes:
//!
//! * `x ≤ 25`, or any order above `x`: Miller's downward recurrence for `J`,
//!   normalised with `J_0 + 2 Σ J_{2m} = 1`. `Y_0` and `Y_1` follow from the
//!   Neumann series in the same `J` values.
//! * `x > 25` with orders below `x`: Hankel asymptotic expansions for orders
//!   0 and 1, then upward recurrence for `J`.
//!
//! `Y_n` for `n ≥ 2` always comes from upward recurrence, which is stable for
//! the dominant solution.

use core::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use num_traits::Float;

use crate::{Error, Result};

/// Default cap on the Bessel order.
pub const DEFAULT_MAX_ORDER: usize = 64;

/// Smallest argument accepted for second-kind functions.
pub const MIN_SECOND_KIND_ARG: f64 = 1e-6;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ASYMPTOTIC_THRESHOLD: f64 = 25.0;
const RESCALE_LIMIT: f64 = 1e250;
const MILLER_CAPACITY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselKind {
    FirstKind,
    SecondKind,
}

/// Bessel evaluator with a configurable order cap.
#[derive(Debug, Clone, Copy)]
pub struct Bessel {
    pub max_order: usize,
}

impl Default for Bessel {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

impl Bessel {
    pub fn new(max_order: usize) -> Self {
        Self { max_order }
    }

    pub fn eval(&self, kind: BesselKind, order: usize, x: f64) -> Result<f64> {
        if order > self.max_order {
            return Err(Error::BesselOrder {
                order,
                max: self.max_order,
            });
        }
        let mut j = [0.0; DEFAULT_MAX_ORDER + 2];
        let mut y = [0.0; DEFAULT_MAX_ORDER + 2];
        let mut jv = alloc::vec::Vec::new();
        let mut yv = alloc::vec::Vec::new();
        let (j, y) = if order < j.len() {
            (&mut j[..=order], &mut y[..=order])
        } else {
            jv.resize(order + 1, 0.0);
            yv.resize(order + 1, 0.0);
            (&mut jv[..], &mut yv[..])
        };
        match kind {
            BesselKind::FirstKind => {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(Error::BesselDomain { order: order as i64, x });
                }
                bessel_j_sequence(x, j);
                Ok(j[order])
            }
            BesselKind::SecondKind => {
                bessel_jy_sequences(x, j, y)?;
                Ok(y[order])
            }
        }
    }
}

/// `J_n(x)` or `Y_n(x)` with the default order cap.
pub fn bessel(kind: BesselKind, order: usize, x: f64) -> Result<f64> {
    Bessel::default().eval(kind, order, x)
}

/// Fills `out[n] = J_n(x)` for `n = 0..out.len()`; `x ≥ 0`.
pub fn bessel_j_sequence(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    if x == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    let nmax = out.len() - 1;
    if x <= ASYMPTOTIC_THRESHOLD || nmax as f64 >= x {
        miller(x, out, None);
    } else {
        let (j0, _) = hankel_asymptotic(0, x);
        let (j1, _) = hankel_asymptotic(1, x);
        upward(x, j0, j1, out);
    }
}

/// Fills `J_n(x)` and `Y_n(x)` for `n = 0..j.len()`.
///
/// Both slices must have the same length. Fails for `x < 1e-6` (where `Y`
/// is clamped) and when a `Y` value overflows.
pub fn bessel_jy_sequences(x: f64, j: &mut [f64], y: &mut [f64]) -> Result<()> {
    debug_assert_eq!(j.len(), y.len());
    if j.is_empty() {
        return Ok(());
    }
    if !(x >= MIN_SECOND_KIND_ARG) || !x.is_finite() {
        return Err(Error::BesselDomain { order: 0, x });
    }
    let nmax = j.len() - 1;
    let (y0, y1);
    if x <= ASYMPTOTIC_THRESHOLD {
        let mut pair = [0.0; 2];
        miller(x, j, Some(&mut pair));
        y0 = pair[0];
        y1 = pair[1];
    } else {
        let (j0, yy0) = hankel_asymptotic(0, x);
        let (j1, yy1) = hankel_asymptotic(1, x);
        y0 = yy0;
        y1 = yy1;
        if nmax as f64 >= x {
            miller(x, j, None);
        } else {
            upward(x, j0, j1, j);
        }
    }
    upward(x, y0, y1, y);
    if let Some(n) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::BesselOverflow { order: n, x });
    }
    Ok(())
}

/// `f_{n+1} = (2n/x) f_n − f_{n−1}` seeded with `f_0`, `f_1`.
fn upward(x: f64, f0: f64, f1: f64, out: &mut [f64]) {
    out[0] = f0;
    if out.len() > 1 {
        out[1] = f1;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (2.0 * n as f64 / x) * out[n] - out[n - 1];
    }
}

/// Miller downward recurrence for `J_0..J_{out.len()-1}`.
///
/// When `y01` is given, it receives `Y_0(x)` and `Y_1(x)` computed from the
/// Neumann series over the same normalised sequence.
fn miller(x: f64, out: &mut [f64], y01: Option<&mut [f64; 2]>) {
    let nmax = out.len() - 1;
    let m = (nmax as f64).max(x);
    let mut start = (m + 30.0 + 4.0 * m.sqrt()) as usize;
    start += start % 2;
    let mut buf = [0.0f64; MILLER_CAPACITY];
    let mut heap = alloc::vec::Vec::new();
    let seq: &mut [f64] = if start + 2 <= MILLER_CAPACITY {
        &mut buf[..start + 2]
    } else {
        heap.resize(start + 2, 0.0);
        &mut heap[..]
    };
    seq[start + 1] = 0.0;
    seq[start] = 1e-300;
    for n in (1..=start).rev() {
        let next = (2.0 * n as f64 / x) * seq[n] - seq[n + 1];
        seq[n - 1] = next;
        if next.abs() > RESCALE_LIMIT {
            for v in seq[n - 1..].iter_mut() {
                *v /= RESCALE_LIMIT;
            }
        }
    }
    let mut norm = seq[0];
    for v in seq[2..=start].iter().step_by(2) {
        norm += 2.0 * v;
    }
    for v in seq.iter_mut() {
        *v /= norm;
    }
    out.copy_from_slice(&seq[..=nmax]);

    if let Some(y) = y01 {
        let log_term = (x / 2.0).ln() + EULER_GAMMA;
        let half = start / 2;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for k in 1..=half {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let kf = k as f64;
            s0 += sign * seq[2 * k] / kf;
            if 2 * k + 1 < seq.len() {
                s1 += sign * (seq[2 * k - 1] - seq[2 * k + 1]) / kf;
            }
        }
        y[0] = FRAC_2_PI * log_term * seq[0] - 2.0 * FRAC_2_PI * s0;
        y[1] = -FRAC_2_PI * seq[0] / x + FRAC_2_PI * log_term * seq[1] + FRAC_2_PI * s1;
    }
}

/// Hankel expansion of `(J_ν(x), Y_ν(x))` for `ν ∈ {0, 1}` and large `x`.
fn hankel_asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for m in 1..60 {
        let odd = (2 * m - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * m as f64 * x);
        let mag = term.abs();
        if mag > last {
            break;
        }
        last = mag;
        // P takes even m with sign (-1)^{m/2}, Q odd m with sign (-1)^{(m-1)/2}.
        match m % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if mag < 1e-18 {
            break;
        }
    }
    let phase = (2 * nu + 1) as f64 * FRAC_PI_4;
    let (sx, cx) = x.sin_cos();
    let (sp, cp) = phase.sin_cos();
    let cos_chi = cx * cp + sx * sp;
    let sin_chi = sx * cp - cx * sp;
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * cos_chi - q * sin_chi), amp * (p * sin_chi + q * cos_chi))
}

fn reflect(order: i64, value: f64) -> f64 {
    if order < 0 && order % 2 != 0 {
        -value
    } else {
        value
    }
}

/// `R_{k,l}(λ, s) = J_k(λs) Y_l(λr0) − Y_k(λs) J_l(λr0)`.
///
/// Negative `l` is accepted through `J_{−n} = (−1)^n J_n` (and the same for
/// `Y`), which is what the `k = 0` Robin kernel `R_{0,−1}` needs.
pub fn weber_orr_kernel(k: usize, l: i64, lambda: f64, s: f64, r0: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(r0 > 0.0) {
        return Err(Error::BesselDomain {
            order: k as i64,
            x: lambda * s,
        });
    }
    let la = l.unsigned_abs() as usize;
    let b = Bessel::default();
    let jk = b.eval(BesselKind::FirstKind, k, lambda * s)?;
    let yk = b.eval(BesselKind::SecondKind, k, lambda * s)?;
    let jl = reflect(l, b.eval(BesselKind::FirstKind, la, lambda * r0)?);
    let yl = reflect(l, b.eval(BesselKind::SecondKind, la, lambda * r0)?);
    Ok(jk * yl - yk * jl)
}

/// Bessel data of the Robin kernel `R_{k,k−1}(λ, ·)` at the body radius.
///
/// Holds `J_{k−1}(λr0)`, `Y_{k−1}(λr0)` (with the reflection for `k = 0`)
/// so that sweeping over `s` only costs one evaluation of `J_k, Y_k` per node.
#[derive(Debug, Clone, Copy)]
pub struct RobinKernel {
    pub k: usize,
    pub lambda: f64,
    pub j_lower: f64,
    pub y_lower: f64,
}

impl RobinKernel {
    pub fn new(k: usize, lambda: f64, r0: f64) -> Result<Self> {
        let x = lambda * r0;
        let n = k.max(1);
        let mut j = [0.0; DEFAULT_MAX_ORDER + 2];
        let mut y = [0.0; DEFAULT_MAX_ORDER + 2];
        if n >= j.len() {
            return Err(Error::BesselOrder {
                order: k,
                max: DEFAULT_MAX_ORDER,
            });
        }
        bessel_jy_sequences(x, &mut j[..=n], &mut y[..=n])?;
        let (j_lower, y_lower) = if k == 0 { (-j[1], -y[1]) } else { (j[k - 1], y[k - 1]) };
        Ok(Self {
            k,
            lambda,
            j_lower,
            y_lower,
        })
    }

    /// `J_{k−1}(λr0)² + Y_{k−1}(λr0)²`, the inverse-transform normalisation.
    pub fn normalization(&self) -> f64 {
        self.j_lower * self.j_lower + self.y_lower * self.y_lower
    }

    /// Kernel value from precomputed `J_k(λs)`, `Y_k(λs)`.
    #[inline]
    pub fn combine(&self, jk: f64, yk: f64) -> f64 {
        jk * self.y_lower - yk * self.j_lower
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let mut j = [0.0; DEFAULT_MAX_ORDER + 2];
        let mut y = [0.0; DEFAULT_MAX_ORDER + 2];
        bessel_jy_sequences(self.lambda * s, &mut j[..=self.k], &mut y[..=self.k])?;
        Ok(self.combine(j[self.k], y[self.k]))
    }

    /// `∂_s R(λ, s)` from `J_k' = J_{k−1} − (k/x) J_k` (and the same for `Y`).
    pub fn derivative(&self, s: f64) -> Result<f64> {
        let x = self.lambda * s;
        let n = self.k.max(1);
        let mut j = [0.0; DEFAULT_MAX_ORDER + 2];
        let mut y = [0.0; DEFAULT_MAX_ORDER + 2];
        bessel_jy_sequences(x, &mut j[..=n], &mut y[..=n])?;
        let (djk, dyk) = if self.k == 0 {
            (-j[1], -y[1])
        } else {
            let kf = self.k as f64;
            (j[self.k - 1] - kf / x * j[self.k], y[self.k - 1] - kf / x * y[self.k])
        };
        Ok(self.lambda * self.combine(djk, dyk))
    }
}
