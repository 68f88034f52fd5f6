//! Acceptance suite. Runs every criterion at the stated tolerances and
//! prints one PASS/FAIL line per criterion before asserting.
//!
//! Desk-scale defaults: r0 = 1, r_max = 20, 512 geometric nodes, K = 16,
//! dt = 5e-3, horizon t = 1.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vortex::commands::compare_snapshots;
use vortex::{parse_config, run, snapshot};
use vortex_core::biot_savart::{curl, divergence, moments, project_to_manifold, reconstruct, MomentVector};
use vortex_core::conformal::{
    generalized_moments, generalized_moments_area, generalized_reconstruct, project_to_generalized_manifold,
    transformed_sources, ConformalMapSeries,
};
use vortex_core::diagnostics::{self, l2_norm};
use vortex_core::evolution::{
    laplacian_k, ns_boundary_rhs, oseen_boundary_rhs, steady_robin_profile, Boundary, ControlSchedule, Dynamics,
    MappedStepper, Stepper, StepperConfig,
};
use vortex_core::grid::{
    synthesize, AngularTransform, FarFieldFlow, RadialGrid, SpectralField, SpectralVelocity, Stretching,
};
use vortex_core::specfun::{bessel_jy_sequences, weber_orr_kernel, RobinKernel};
use vortex_core::weber_orr::{forward, inverse, rel_l2, BandSpec};
use vortex_core::Complex64;

const DT: f64 = 5e-3;
const STEPS: usize = 200;
const K: usize = 16;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn default_grid() -> RadialGrid {
    RadialGrid::new(1.0, 20.0, 512, Stretching::Geometric(1.005)).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            detail: String::new(),
        }
    }

    /// Records `value ≤ bound` under `label`.
    fn check(&mut self, label: &str, value: f64, bound: f64) {
        let ok = value <= bound;
        self.pass &= ok;
        let mark = if ok { "" } else { " !" };
        let _ = write!(
            self.detail,
            "{}{label} {value:.2e} ≤ {bound:.0e}{mark}",
            if self.detail.is_empty() { "" } else { "; " }
        );
    }

    fn check_ge(&mut self, label: &str, value: f64, bound: f64) {
        let ok = value >= bound;
        self.pass &= ok;
        let mark = if ok { "" } else { " !" };
        let _ = write!(
            self.detail,
            "{}{label} {value:.3} ≥ {bound}{mark}",
            if self.detail.is_empty() { "" } else { "; " }
        );
    }
}

/// Sum of Gaussian rings `a_k exp(−(r − center)²/width)` in the listed modes.
fn rings(g: &RadialGrid, k_max: usize, amps: &[(usize, Complex64)], center: f64, width: f64) -> SpectralField {
    let mut w = SpectralField::zeros(g.clone(), k_max);
    for &(k, a) in amps {
        for (v, &s) in w.mode_mut(k).iter_mut().zip(g.nodes()) {
            *v += a * (-(s - center) * (s - center) / width).exp();
        }
    }
    w
}

fn standard_field(g: &RadialGrid, scale: f64) -> SpectralField {
    let amps = [
        (0usize, c(1.0, 0.0)),
        (1, c(0.5, 0.3)),
        (2, c(0.3, -0.2)),
        (3, c(0.2, 0.1)),
    ];
    let amps: Vec<_> = amps.iter().map(|&(k, a)| (k, a * scale)).collect();
    rings(g, K, &amps, 3.0, 0.5)
}

/// Small data on the no-slip manifold of `flow`: a broad plateau in mode 1
/// carries the prescribed `m_1`, and modes 0, 2, 3 hold ring pairs whose
/// moments cancel. Spreading `m_1` over the domain keeps `‖w‖∞` small,
/// which the compact projection bump alone would not.
fn small_manifold_field(g: &RadialGrid, flow: &FarFieldFlow) -> SpectralField {
    let plateau = |s: f64| (1.0 - (-(s - 1.0) * (s - 1.0) / 0.5).exp()) * 0.5 * (1.0 - ((s - 14.5) / 1.2).tanh());
    let mut p = SpectralField::zeros(g.clone(), K);
    for (v, &s) in p.mode_mut(1).iter_mut().zip(g.nodes()) {
        *v = c(plateau(s), 0.0);
    }
    let alpha = vortex_core::biot_savart::moment_target(flow, 1) / moments(&p).unwrap().values[1];
    let near = rings(g, K, &[(0, c(1.0, 0.0)), (2, c(1.0, 0.0)), (3, c(1.0, 0.0))], 3.0, 0.5);
    let far = rings(g, K, &[(0, c(1.0, 0.0)), (2, c(1.0, 0.0)), (3, c(1.0, 0.0))], 5.0, 0.5);
    let (mn, mf) = (moments(&near).unwrap(), moments(&far).unwrap());
    let mut w = SpectralField::zeros(g.clone(), K);
    for (k, a) in [(0usize, c(0.002, 0.0)), (2, c(0.0015, 0.001)), (3, c(-0.001, 0.001))] {
        let beta = mn.values[k] / mf.values[k];
        for i in 0..g.n_r() {
            w.mode_mut(k)[i] = a * (near.mode(k)[i] - beta * far.mode(k)[i]);
        }
    }
    for (v, x) in w.mode_mut(1).iter_mut().zip(p.mode(1)) {
        *v = alpha * x;
    }
    project_to_manifold(&w, flow).unwrap()
}

fn sup_norm(w: &SpectralField) -> f64 {
    let s = synthesize(w, 4 * w.k_max() + 4).unwrap();
    s.data.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_moment_change(a: &MomentVector, b: &MomentVector) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn max_field_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.modes()
        .iter()
        .flatten()
        .zip(b.modes().iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

// 1. Bessel identities.
fn bessel_identities() -> Outcome {
    let mut o = Outcome::new();
    let mut wr: f64 = 0.0;
    for x in [0.1, 1.0, 10.0, 100.0] {
        let mut j = [0.0; 34];
        let mut y = [0.0; 34];
        bessel_jy_sequences(x, &mut j, &mut y).unwrap();
        let exact = 2.0 / (PI * x);
        for n in 0..=32 {
            let w = j[n + 1] * y[n] - j[n] * y[n + 1];
            wr = wr.max((w - exact).abs() / exact);
        }
    }
    o.check("Wronskian rel err", wr, 1e-11);
    let mut kr: f64 = 0.0;
    for k in 0..=16usize {
        for lam in [0.5, 1.0, 5.0] {
            let v = weber_orr_kernel(k, k as i64 - 1, lam, 1.0, 1.0).unwrap();
            kr = kr.max((v - 2.0 / (PI * lam)).abs());
        }
    }
    o.check("R_{k,k-1}(λ,r0) err", kr, 1e-10);
    o
}

// 2. Kernel eigenfunction and Robin properties.
fn kernel_properties() -> Outcome {
    let mut o = Outcome::new();
    let g = default_grid();
    let h = g.max_spacing();
    let mut worst: f64 = 0.0;
    let mut robin: f64 = 0.0;
    for k in 0..=16usize {
        for lam in [0.5, 1.0, 5.0] {
            let ker = RobinKernel::new(k, lam, 1.0).unwrap();
            let p: Vec<Complex64> = g.nodes().iter().map(|&s| c(ker.eval(s).unwrap(), 0.0)).collect();
            let l = laplacian_k(&p, k as i64, &g).unwrap();
            let peak = p.iter().map(|z| z.norm()).fold(0.0, f64::max) * lam * lam;
            let err = l
                .iter()
                .zip(&p)
                .map(|(a, b)| (a + b * (lam * lam)).norm())
                .fold(0.0, f64::max);
            worst = worst.max(err / (h * h * peak));
            robin = robin.max((ker.derivative(1.0).unwrap() + k as f64 * ker.eval(1.0).unwrap()).abs());
        }
    }
    o.check("|Δ_k R + λ²R| / (h² λ² max|R|)", worst, 10.0);
    o.check("r0 R' + |k| R at r0", robin, 1e-9);
    o
}

// 3. Biot-Savart no-slip, divergence and curl on randomized projected fields.
fn biot_savart_no_slip() -> Outcome {
    let mut o = Outcome::new();
    let g = default_grid();
    let wt = g.trapezoid_weights();
    let mut rng = StdRng::seed_from_u64(20_240_917);
    let (mut slip, mut div_max, mut curl_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let k_max = 8;
    for _ in 0..20 {
        let flow = FarFieldFlow::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let amps: Vec<(usize, Complex64)> = (0..4)
            .map(|_| {
                let k = rng.gen_range(0..=k_max);
                let im = if k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                (k, c(rng.gen_range(-1.0..1.0), im))
            })
            .collect();
        let w = rings(&g, k_max, &amps, rng.gen_range(2.5..6.0), rng.gen_range(0.3..1.5));
        let w = project_to_manifold(&w, &flow).unwrap();
        let v = reconstruct(&w, &flow).unwrap();
        slip = slip.max(v.boundary_speed() / flow.speed().max(l2_norm(&w)));
        for m in divergence(&w, &flow).unwrap() {
            div_max = div_max.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let cu = curl(&v);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..=k_max {
            for i in 0..g.n_r() {
                let a = wt[i] * g.nodes()[i];
                num += (cu[k][i] - w.mode(k)[i]).norm_sqr() * a;
                den += w.mode(k)[i].norm_sqr() * a;
            }
        }
        curl_err = curl_err.max((num / den).sqrt());
    }
    o.check("boundary speed / max(|v∞|,‖w‖)", slip, 1e-6);
    o.check("max |div v|", div_max, 1e-10);
    o.check("curl v vs w rel L²", curl_err, 1e-3);
    o
}

// 4. Weber-Orr round trip and spectral vs finite-difference Stokes.
fn weber_orr() -> Outcome {
    let mut o = Outcome::new();
    let g = default_grid();
    let spec = BandSpec::for_radius(1.0);
    let mut worst: f64 = 0.0;
    // Rings clear of the wall: the profile at r0 is below e^{−8} of the peak.
    for (center, width) in [(3.0, 0.5), (4.0, 1.0), (5.0, 2.0), (6.0, 1.0)] {
        let p: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&s| c((-(s - center) * (s - center) / width).exp(), 0.0))
            .collect();
        for k in 0..=8usize {
            let back = inverse(&forward(&p, k, &g, spec).unwrap(), &g, spec).unwrap();
            worst = worst.max(rel_l2(&back, &p, &g));
        }
    }
    o.check("round trip k≤8", worst, 1e-4);

    let dir = tempfile::tempdir().unwrap();
    let base = r#"{"geometry": {}, "flow": {"vx": 0.5}, "dynamics": "Stokes",
        "stepper": {"dt": 0.005, "t_end": 1, "solver": "SOLVER"},
        "initial_condition": {"GaussianRing": {"center": 3.0, "width": 0.7, "mode": 2}},
        "outputs": {"diagnostics_path": "SOLVER.csv", "snapshot_dir": "SOLVER"}}"#;
    let mut finals = Vec::new();
    for solver in ["CrankNicolson", "WeberOrr"] {
        let cfg = parse_config(&base.replace("SOLVER", solver)).unwrap();
        finals.push(run(&cfg, dir.path()).unwrap().snapshots.pop().unwrap());
    }
    let d = compare_snapshots(&finals[1], &finals[0]).unwrap();
    o.check("spectral vs FD Stokes at t=1", d.total, 1e-3);
    o
}

/// Runs `STEPS` disc steps, tracking the m_1 drift, the largest other m_k (k ≤ 8)
/// and the largest |circulation|.
fn track(
    mut step: impl FnMut(&SpectralField) -> SpectralField,
    w0: &SpectralField,
    moments_of: impl Fn(&SpectralField) -> MomentVector,
    circ: impl Fn(&SpectralField) -> f64,
) -> (f64, f64, f64) {
    let m0 = moments_of(w0);
    let (mut d1, mut other, mut cmax): (f64, f64, f64) = (0.0, 0.0, circ(w0).abs());
    let mut w = w0.clone();
    for _ in 0..STEPS {
        w = step(&w);
        let m = moments_of(&w);
        d1 = d1.max((m.values[1] - m0.values[1]).norm() / m0.values[1].norm());
        for k in (0..=8).filter(|&k| k != 1) {
            other = other.max(m.values[k].norm());
        }
        cmax = cmax.max(circ(&w).abs());
    }
    (d1, other, cmax)
}

// 5. Moment invariance for Stokes, Oseen and Navier-Stokes.
fn moment_invariance() -> Outcome {
    let mut o = Outcome::new();
    let g = default_grid();
    let flow = FarFieldFlow::new(0.5, 0.0);
    let w0 = small_manifold_field(&g, &flow);
    o.check("‖w0‖∞", sup_norm(&w0), 0.1);
    o.check(
        "initial manifold residual",
        vortex_core::biot_savart::manifold_residual(&w0, &flow).unwrap(),
        1e-12,
    );
    for (name, dynamics, boundary) in [
        ("Stokes", Dynamics::Stokes, Boundary::RobinHomogeneous),
        ("Oseen", Dynamics::Oseen, Boundary::OseenCoupled),
        ("NS", Dynamics::NavierStokes, Boundary::NavierStokesIntegral),
    ] {
        let mut s = Stepper::new(&g, K, flow, dynamics, StepperConfig::new(DT, boundary)).unwrap();
        let (d1, other, circ) = track(
            |w| s.step(w).unwrap(),
            &w0,
            |w| moments(w).unwrap(),
            |w| vortex_core::biot_savart::circulation(w).unwrap(),
        );
        o.check(&format!("{name} m1 drift"), d1, 1e-3);
        o.check(&format!("{name} max|m_k|"), other, 1e-3);
        o.check(&format!("{name} |Γ|"), circ, 1e-6);
    }
    o
}

// 6. Boundary-condition cross-checks.
fn boundary_checks() -> Outcome {
    let mut o = Outcome::new();
    let g = default_grid();
    let flow = FarFieldFlow::new(0.4, -0.3);
    let k_max = 8;
    let w = rings(
        &g,
        k_max,
        &[
            (0, c(0.3, 0.0)),
            (1, c(0.2, 0.1)),
            (4, c(-0.1, 0.2)),
            (8, c(0.05, 0.05)),
        ],
        1.5,
        0.8,
    );

    // Physical oracle: r0 [(vx cosφ + vy sinφ) w(r0, φ)]_k.
    let n_phi = 64;
    let t = AngularTransform::new(n_phi);
    let coeffs: Vec<Complex64> = (0..=k_max).map(|k| w.mode(k)[0]).collect();
    let mut ring = vec![0.0; n_phi];
    t.synthesize_real(&coeffs, &mut ring);
    for (j, x) in ring.iter_mut().enumerate() {
        let phi = 2.0 * PI * j as f64 / n_phi as f64;
        *x *= g.r0() * (flow.vx * phi.cos() + flow.vy * phi.sin());
    }
    let mut oracle = vec![Complex64::new(0.0, 0.0); k_max + 1];
    t.analyze_real(&ring, &mut oracle);
    let oseen = (0..=k_max)
        .map(|k| (oseen_boundary_rhs(&w, &flow, k as i64) - oracle[k]).norm())
        .fold(0.0, f64::max);
    o.check("Oseen RHS vs physical", oseen, 1e-10);

    let v_inf = reconstruct(&SpectralField::zeros(g.clone(), k_max), &flow).unwrap();
    let ns = (0..=k_max)
        .map(|k| ns_boundary_rhs(&w, &v_inf, &flow, k).unwrap().norm())
        .fold(0.0, f64::max);
    o.check("NS RHS with v ≡ v∞", ns, 1e-10);

    // Control path fed with the NS integral reproduces the NS closure.
    let flow = FarFieldFlow::new(0.5, 0.0);
    let w0 = project_to_manifold(&standard_field(&g, 0.025), &flow).unwrap();
    let steps = 40;
    let mut a = Stepper::new(
        &g,
        K,
        flow,
        Dynamics::NavierStokes,
        StepperConfig::new(DT, Boundary::NavierStokesIntegral),
    )
    .unwrap();
    let mut samples = Vec::new();
    let mut wa = w0.clone();
    for _ in 0..steps {
        let v = reconstruct(&wa, &flow).unwrap();
        samples.push((0..=K).map(|k| ns_boundary_rhs(&wa, &v, &flow, k).unwrap()).collect());
        wa = a.step(&wa).unwrap();
    }
    let cfg = StepperConfig::new(DT, Boundary::Controlled(ControlSchedule { samples }));
    let mut b = Stepper::new(&g, K, flow, Dynamics::NavierStokes, cfg).unwrap();
    let mut wb = w0;
    for _ in 0..steps {
        wb = b.step(&wb).unwrap();
    }
    o.check("control vs NS-integral path", max_field_diff(&wa, &wb), 1e-12);
    o
}

// 7. Conformal reduction and mapped invariance.
fn conformal() -> Outcome {
    let mut o = Outcome::new();
    let g = default_grid();
    let flow = FarFieldFlow::new(0.5, 0.0);
    let id = ConformalMapSeries::identity(1.0);
    let raw = standard_field(&g, 0.025);

    let w = project_to_manifold(&raw, &flow).unwrap();
    let mut red: f64 = max_field_diff(&w, &project_to_generalized_manifold(&raw, &id, &flow).unwrap());
    red = red.max(max_moment_change(
        &moments(&w).unwrap(),
        &generalized_moments(&w, &id).unwrap(),
    ));
    let v = reconstruct(&w, &flow).unwrap();
    let vg: SpectralVelocity = generalized_reconstruct(&transformed_sources(&w, &id).unwrap(), &flow).unwrap();
    for k in 0..=K {
        for i in 0..g.n_r() {
            red = red
                .max((v.v_r[k][i] - vg.v_r[k][i]).norm())
                .max((v.v_phi[k][i] - vg.v_phi[k][i]).norm());
        }
    }
    for (dynamics, boundary) in [
        (Dynamics::Stokes, Boundary::RobinHomogeneous),
        (Dynamics::NavierStokes, Boundary::NavierStokesIntegral),
    ] {
        let cfg = StepperConfig::new(DT, boundary);
        let mut disc = Stepper::new(&g, K, flow, dynamics, cfg.clone()).unwrap();
        let mut mapped = MappedStepper::new(&g, K, flow, dynamics, cfg, id.clone()).unwrap();
        let (mut a, mut b) = (w.clone(), w.clone());
        for _ in 0..20 {
            a = disc.step(&a).unwrap();
            b = mapped.step(&b).unwrap();
        }
        red = red.max(max_field_diff(&a, &b));
    }
    o.check("identity map vs disc", red, 1e-12);

    let jk = ConformalMapSeries::new(vec![c(0.1, 0.0)], 1.0).unwrap();
    let wj = project_to_generalized_manifold(&raw, &jk, &flow).unwrap();
    let mut s = MappedStepper::new(
        &g,
        K,
        flow,
        Dynamics::Stokes,
        StepperConfig::new(DT, Boundary::RobinHomogeneous),
        jk.clone(),
    )
    .unwrap();
    let (d1, other, _) = track(
        |w| s.step(w).unwrap(),
        &wj,
        |w| generalized_moments(w, &jk).unwrap(),
        |_| 0.0,
    );
    o.check("b1=0.1 Stokes m1 drift", d1, 1e-3);
    o.check("b1=0.1 Stokes max|m_k|", other, 1e-3);

    let radial = generalized_moments(&wj, &jk).unwrap();
    let area = generalized_moments_area(&wj, &jk, 4 * K + 8).unwrap();
    o.check("radial vs area moments", max_moment_change(&radial, &area), 1e-8);
    o
}

fn order(errs: &[f64]) -> f64 {
    errs.windows(2)
        .map(|e| (e[0] / e[1]).log2())
        .fold(f64::INFINITY, f64::min)
}

/// Relative L² difference of `fine` sampled at the coarse nodes against `coarse`.
fn nested_diff(coarse: &SpectralField, fine: &SpectralField) -> f64 {
    let g = coarse.grid();
    let wt = g.trapezoid_weights();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=coarse.k_max() {
        for i in 0..g.n_r() {
            let a = wt[i] * g.nodes()[i];
            num += (coarse.mode(k)[i] - fine.mode(k)[2 * i]).norm_sqr() * a;
            den += coarse.mode(k)[i].norm_sqr() * a;
        }
    }
    (num / den).sqrt()
}

// 8. Observed convergence orders.
fn convergence() -> Outcome {
    let mut o = Outcome::new();

    // Δ_k on a smooth profile.
    let exact = |r: f64| (-r).exp() * (1.0 - 1.0 / r - 4.0 / (r * r));
    let mut g = RadialGrid::new(1.0, 8.0, 65, Stretching::Geometric(1.02)).unwrap();
    let mut errs = Vec::new();
    for _ in 0..4 {
        let p: Vec<Complex64> = g.nodes().iter().map(|&r| c((-r).exp(), 0.0)).collect();
        let l = laplacian_k(&p, 2, &g).unwrap();
        errs.push(
            l.iter()
                .zip(g.nodes())
                .map(|(z, &r)| (z.re - exact(r)).abs())
                .fold(0.0, f64::max),
        );
        g = g.refined().unwrap();
    }
    o.check_ge("Δ_k order", order(&errs), 1.9);

    // Stokes stepper against a decaying Robin eigenmode.
    let (k, r_max, t_end) = (2usize, 8.0, 0.5);
    let lam = robin_eigenvalue(k, 1.0, r_max, 1.0);
    let ker = RobinKernel::new(k, lam, 1.0).unwrap();
    let mut g = RadialGrid::new(1.0, r_max, 65, Stretching::Geometric(1.02)).unwrap();
    let mut dt = 0.02;
    let mut errs = Vec::new();
    for _ in 0..4 {
        let mut w = SpectralField::zeros(g.clone(), k);
        for (v, &s) in w.mode_mut(k).iter_mut().zip(g.nodes()) {
            *v = c(ker.eval(s).unwrap(), 0.0);
        }
        let mut st = Stepper::new(
            &g,
            k,
            FarFieldFlow::default(),
            Dynamics::Stokes,
            StepperConfig::new(dt, Boundary::RobinHomogeneous),
        )
        .unwrap();
        for _ in 0..(t_end / dt).round() as usize {
            w = st.step(&w).unwrap();
        }
        let decay = (-lam * lam * t_end).exp();
        let ex: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&s| c(decay * ker.eval(s).unwrap(), 0.0))
            .collect();
        errs.push(rel_l2(w.mode(k), &ex, &g));
        g = g.refined().unwrap();
        dt /= 2.0;
    }
    o.check_ge("Stokes stepper order", order(&errs), 1.9);

    // Oseen and Navier-Stokes steppers by self-convergence on nested grids.
    let flow = FarFieldFlow::new(0.5, 0.2);
    let k_max = 4;
    let init = |g: &RadialGrid| {
        rings(
            g,
            k_max,
            &[(0, c(0.05, 0.0)), (1, c(0.03, 0.02)), (2, c(0.02, -0.01))],
            3.0,
            0.8,
        )
    };
    for (name, dynamics, boundary) in [
        ("Oseen", Dynamics::Oseen, Boundary::OseenCoupled),
        ("NS", Dynamics::NavierStokes, Boundary::NavierStokesIntegral),
    ] {
        let mut g = RadialGrid::new(1.0, 12.0, 97, Stretching::Geometric(1.02)).unwrap();
        let mut dt = 0.02;
        let mut sols = Vec::new();
        for _ in 0..4 {
            let mut w = project_to_manifold(&init(&g), &flow).unwrap();
            let mut st = Stepper::new(&g, k_max, flow, dynamics, StepperConfig::new(dt, boundary.clone())).unwrap();
            for _ in 0..(0.4 / dt).round() as usize {
                w = st.step(&w).unwrap();
            }
            sols.push(w);
            g = g.refined().unwrap();
            dt /= 2.0;
        }
        let errs: Vec<f64> = sols.windows(2).map(|p| nested_diff(&p[0], &p[1])).collect();
        o.check_ge(&format!("{name} stepper order"), order(&errs), 1.9);
    }

    // Boundary closure: steady Robin solution against A r^{−k} + B r^k.
    let (k, r_max) = (2usize, 4.0f64);
    let gk = c(1.0, 0.5);
    let b = gk / (2.0 * k as f64);
    let a = -b * r_max.powi(2 * k as i32);
    let mut g = RadialGrid::new(1.0, r_max, 129, Stretching::Geometric(1.01)).unwrap();
    let mut errs = Vec::new();
    for _ in 0..4 {
        let p = steady_robin_profile(&g, k, gk).unwrap();
        let ex: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&r| a * r.powi(-(k as i32)) + b * r.powi(k as i32))
            .collect();
        errs.push(rel_l2(&p, &ex, &g));
        g = g.refined().unwrap();
    }
    o.check_ge("Robin closure order", order(&errs), 1.9);
    o
}

/// Smallest `λ ≥ near` with `R_{k,k−1}(λ, r_max) = 0`, by bisection.
fn robin_eigenvalue(k: usize, r0: f64, r_max: f64, near: f64) -> f64 {
    let f = |l: f64| RobinKernel::new(k, l, r0).unwrap().eval(r_max).unwrap();
    let mut a = near;
    let step = 0.05 * PI / (r_max - r0);
    while f(a) * f(a + step) > 0.0 {
        a += step;
    }
    let mut b = a + step;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

// 9. Determinism and snapshot round trip.
fn determinism() -> Outcome {
    let mut o = Outcome::new();
    let doc = r#"{"geometry": {}, "flow": {"vx": 0.5, "vy": 0.1}, "dynamics": "NavierStokes",
        "stepper": {"dt": 0.005, "t_end": 0.1},
        "initial_condition": {"GaussianRing": {"center": 3.0, "width": 0.7, "mode": 1, "amplitude": 0.05}},
        "outputs": {"snapshot_every": 5}}"#;
    let cfg = parse_config(doc).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let reports: Vec<_> = dirs.iter().map(|d| run(&cfg, d.path()).unwrap()).collect();
    let mut mismatched = 0usize;
    let pairs = std::iter::once((&reports[0].diagnostics_path, &reports[1].diagnostics_path))
        .chain(reports[0].snapshots.iter().zip(&reports[1].snapshots));
    for (a, b) in pairs {
        if fs::read(a).unwrap() != fs::read(b).unwrap() {
            mismatched += 1;
        }
    }
    o.check("differing output files", mismatched as f64, 0.0);

    let mut rng = StdRng::seed_from_u64(7);
    let g = default_grid();
    let mut w = SpectralField::zeros(g, K);
    for k in 0..=K {
        for v in w.mode_mut(k) {
            *v = c(
                rng.gen_range(-1.0..1.0),
                if k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) },
            );
        }
    }
    let path = dirs[0].path().join("roundtrip.vxt");
    snapshot::write(&path, &w).unwrap();
    let back = snapshot::read(&path).unwrap();
    let bytes_equal = snapshot::encode(&back) == fs::read(&path).unwrap();
    o.check(
        "snapshot round-trip mismatch",
        if back == w && bytes_equal { 0.0 } else { 1.0 },
        0.0,
    );
    let final_diag = diagnostics::compute(
        &snapshot::read(reports[0].snapshots.last().unwrap()).unwrap(),
        &cfg.flow(),
        None,
        0.1,
    )
    .unwrap();
    o.check(
        "rerun diagnostics vs CSV (l2 norm)",
        (final_diag.l2_norm - reports[0].final_diagnostics.l2_norm).abs(),
        0.0,
    );
    o
}

type Criterion = fn() -> Outcome;

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 9] = [
        ("Bessel identities", bessel_identities),
        ("Kernel eigen/Robin properties", kernel_properties),
        ("Biot-Savart no-slip", biot_savart_no_slip),
        ("Weber-Orr round trip and Stokes propagator", weber_orr),
        ("Moment invariance", moment_invariance),
        ("Boundary-condition cross-checks", boundary_checks),
        ("Conformal reduction and invariance", conformal),
        ("Convergence orders", convergence),
        ("Determinism and format", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] criterion {}: {name} ({:.1} s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            out.detail
        );
        if !out.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
