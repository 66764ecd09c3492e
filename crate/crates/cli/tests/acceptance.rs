//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p moist-pe-cli --test acceptance`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use moist_pe::operators::{
    constraint_residual, dense_stiffness, omega_from_v, project_barotropic, trilinear_b_scalar, v_norm, EllipticSolveSettings,
};
use moist_pe::verify::{
    eps_sweep, halving_list, manufactured_convergence, Study, SweepConfig, VerificationReport, DEGIORGI_KMAX,
    VI_TRIALS,
};
use moist_pe::{
    heaviside_eps, kappa_eps, l2_norm, verify_scenario, Grid, Model, SaturationKernel, ScalarField, Scenario,
    SimParams, Staggering, TemperatureForm, Tracer, VectorField2,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("condensation rate contract", rate_contract),
        ("regularizer contract", regularizer_contract),
        ("discrete structure", discrete_structure),
        ("diagnostic fields", diagnostic_fields),
        ("energy inequality", energy_inequality),
        ("maximum principles", maximum_principles),
        ("epsilon convergence", epsilon_convergence),
        ("moist energy cancellation", moist_energy_cancellation),
        ("level-set truncation", level_set_truncation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} ({:.1} s) {}",
            n + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn rate_contract() -> Outcome {
    let k = SaturationKernel::new(SimParams::default().constants, 0.01, false).unwrap();
    let xi0 = k.xi0;
    let roots = k.f_raw(0.0).abs().max(k.f_raw(xi0).abs());
    let (lo, hi) = k.scan_range;
    let n = 1_000_000;
    let mut bound = 0;
    let mut sign = 0;
    for i in 0..n {
        let xi = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let f = k.f_raw(xi);
        if f.abs() > k.c_f_sup {
            bound += 1;
        }
        if (f >= 0.0) != (0.0..=xi0).contains(&xi) {
            sign += 1;
        }
    }
    let ok = roots <= 1e-12 && (1540.0..=1560.0).contains(&xi0) && bound == 0 && sign == 0;
    (ok, format!("xi0 {xi0:.3} K, |F| at roots {roots:.1e}, bound violations {bound}, sign violations {sign}"))
}

fn regularizer_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tol = 1e-14;
    let mut bad = [0usize; 3];
    for eps in [1e-1, 1e-2, 1e-3] {
        for _ in 0..10_000 {
            // half the pairs straddle the ramp, half sample a wide range
            let span = if rng.gen_bool(0.5) { 3.0 * eps } else { 1.0 };
            let (a, b) = (rng.gen_range(-span..span), rng.gen_range(-span..span));
            let (ha, hb) = (heaviside_eps(a, eps), heaviside_eps(b, eps));
            if (ha - hb).abs() > (a - b).abs() / eps + tol || !(0.0..=1.0).contains(&ha) {
                bad[0] += 1;
            }
            if (kappa_eps(a, eps) - kappa_eps(b, eps)).abs() > (a - b).abs() + tol {
                bad[1] += 1;
            }
            let r = a.abs();
            if (kappa_eps(r, eps) - r).abs() > eps / 2.0 + tol {
                bad[2] += 1;
            }
        }
    }
    (bad == [0; 3], format!("violations: H Lipschitz {}, K Lipschitz {}, K closeness {}", bad[0], bad[1], bad[2]))
}

fn random_field(g: &Grid, stag: Staggering, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_fn(g, stag, |_, _, _| rng.gen_range(-1.0..1.0))
}

fn discrete_structure() -> Outcome {
    let p = SimParams { nx: 4, ny: 4, np: 4, ..SimParams::default() };
    let m = Model::new(&p).unwrap();
    let g = &m.grid;
    let mut defect: f64 = 0.0;
    for (op, stag) in [
        (&m.diff_v, Staggering::XFace),
        (&m.diff_v, Staggering::YFace),
        (&m.diff_t, Staggering::Cell),
        (&m.diff_q, Staggering::Cell),
    ] {
        let k = dense_stiffness(op, g, stag);
        defect = defect.max((&k - k.transpose()).abs().max() / k.abs().max());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut coercive_bad = 0;
    for (op, tracer) in [(&m.diff_t, Tracer::Temperature), (&m.diff_q, Tracer::Humidity)] {
        let kappa = p.coeffs.get(tracer).kappa();
        for _ in 0..200 {
            let f = random_field(g, Staggering::Cell, &mut rng);
            let vn = v_norm(&f, g, &p.constants, &p.tbar).unwrap();
            if op.form(g, &f, &f).unwrap() < kappa * vn * vn {
                coercive_bad += 1;
            }
        }
    }
    let kappa_v = p.coeffs.get(Tracer::Velocity).kappa();
    for _ in 0..200 {
        let v = VectorField2 { u: random_field(g, Staggering::XFace, &mut rng), v: random_field(g, Staggering::YFace, &mut rng) };
        let vn = v_norm(&v, g, &p.constants, &p.tbar).unwrap();
        if m.diff_v.form(g, &v, &v).unwrap() < kappa_v * vn * vn {
            coercive_bad += 1;
        }
    }

    // trilinear orthogonality on the unit box
    let g = Grid::new(4, 4, 4, 1.0, 1.0, 0.2, 1.0).unwrap();
    let settings = EllipticSolveSettings::new(1e-13, 10_000).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let raw = VectorField2 { u: random_field(&g, Staggering::XFace, &mut rng), v: random_field(&g, Staggering::YFace, &mut rng) };
        let v = project_barotropic(&raw, &g, &settings).unwrap();
        let om = omega_from_v(&v, &g).unwrap();
        let phi = random_field(&g, Staggering::Cell, &mut rng);
        let b = trilinear_b_scalar(&v, &om, &phi, &phi, &g).unwrap();
        let vn = l2_norm(&v.u, &g).unwrap().hypot(l2_norm(&v.v, &g).unwrap());
        let pn = l2_norm(&phi, &g).unwrap();
        worst = worst.max(b.abs() / (vn * pn * pn));
    }
    let ok = defect <= 1e-13 && coercive_bad == 0 && worst <= 1e-12;
    (ok, format!("symmetry defect {defect:.1e}, coercivity failures {coercive_bad}/600, max |b|/(|v||phi|^2) {worst:.1e}"))
}

fn diagnostic_fields() -> Outcome {
    let p = SimParams::default();
    let order = manufactured_convergence(Study::Hydrostatic, &p).unwrap().observed_order();
    let m = Model::new(&p).unwrap();
    let g = &m.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raw = VectorField2 { u: random_field(g, Staggering::XFace, &mut rng), v: random_field(g, Staggering::YFace, &mut rng) };
    let settings = EllipticSolveSettings::new(p.scheme.cg_tol, p.scheme.cg_max_iter).unwrap();
    let v1 = project_barotropic(&raw, g, &settings).unwrap();
    let v2 = project_barotropic(&v1, g, &settings).unwrap();
    // omega vanishes at p1 by construction; at p0 it is the barotropic constraint,
    // measured relative to the unprojected field
    let om = omega_from_v(&v1, g).unwrap();
    let mut bottom: f64 = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            bottom = bottom.max(om.get(i, j, g.np).abs());
        }
    }
    let top = constraint_residual(&v1, g).unwrap() / constraint_residual(&raw, g).unwrap();
    let drift = v1.u.data.iter().zip(&v2.u.data).chain(v1.v.data.iter().zip(&v2.v.data)).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let ok = (order - 2.0).abs() <= 0.2 && bottom <= 1e-12 && top <= 1e-12 && drift <= 1e-10;
    (ok, format!("hydrostatic order {order:.3}, |omega(p1)| {bottom:.1e}, relative |omega(p0)| {top:.1e}, projection drift {drift:.1e}"))
}

fn updraft_report(f_plus: bool) -> VerificationReport {
    let p = SimParams { use_f_plus: f_plus, ..SimParams::default() };
    assert_eq!(p.steps(), 200);
    verify_scenario(&Model::new(&p).unwrap(), Scenario::SaturatedUpdraft).unwrap()
}

fn energy_inequality() -> Outcome {
    let r = updraft_report(false);
    let e = r.energy.as_ref().expect("theta form");
    let ok = r.failure.is_none() && e.samples.len() == 200 && e.violations().is_empty() && e.all_finite();
    (ok, format!("{} steps, {} violations, min margin {:.3e}, finite {}", e.samples.len(), e.violations().len(), e.min_margin(), e.all_finite()))
}

fn maximum_principles() -> Outcome {
    let tol = 1e-10;
    let mut ok = true;
    let mut detail = Vec::new();
    for f_plus in [false, true] {
        let r = updraft_report(f_plus);
        let x = &r.extrema;
        let min_t = x.samples.iter().map(|s| s.min_t).fold(f64::INFINITY, f64::min);
        let min_q = x.samples.iter().map(|s| s.min_q).fold(f64::INFINITY, f64::min);
        ok &= r.failure.is_none() && min_t >= -tol && min_q >= -tol;
        detail.push(format!("F+ {}: min T {min_t:.3}, min q {min_q:.3e}", if f_plus { "on" } else { "off" }));
        if f_plus {
            let max_q = x.samples.iter().map(|s| s.max_q).fold(f64::NEG_INFINITY, f64::max);
            ok &= x.check_qbound && max_q <= x.q0_max + tol;
            detail.push(format!("max q {max_q:.6e} vs q0 max {:.6e}", x.q0_max));
        }
    }
    (ok, detail.join("; "))
}

fn sweep() -> &'static moist_pe::verify::EpsSweepReport {
    use std::sync::OnceLock;
    static REPORT: OnceLock<moist_pe::verify::EpsSweepReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let mut p = SimParams::default();
        p.scheme.form = TemperatureForm::Temperature;
        let cfg = SweepConfig {
            model: Model::new(&p).unwrap(),
            scenario: Scenario::SaturatedUpdraft,
            eps_list: halving_list(p.epsilon, 5),
            threads: 5,
            seed: 0,
            vi_trials: VI_TRIALS,
        };
        eps_sweep(&cfg).unwrap()
    })
}

fn epsilon_convergence() -> Outcome {
    let r = sweep();
    let vi = r.final_vi_residual();
    let ok = r.members.iter().all(|m| m.error.is_none()) && r.strictly_decreasing() && vi <= 1e-8;
    let d: Vec<String> = r.distances.iter().map(|d| format!("{d:.3e}")).collect();
    (ok, format!("eps {:.1e}..{:.2e}, distances [{}], final VI residual {vi:.2e}", r.eps[0], r.eps[r.eps.len() - 1], d.join(", ")))
}

fn moist_energy_cancellation() -> Outcome {
    let r = sweep();
    match r.moist_spread() {
        Some(s) => (s <= 1e-10, format!("relative residual spread {s:.2e} over {} members", r.members.len())),
        None => (false, "no moist-energy residuals recorded".into()),
    }
}

fn level_set_truncation() -> Outcome {
    let r = updraft_report(false);
    let d = r.degiorgi.as_ref().expect("trajectory recorded");
    let max_t = r.extrema.samples.iter().map(|s| s.min_t.max(0.0)).fold(0.0, f64::max);
    let reached = d.certified_at.filter(|&k| k <= DEGIORGI_KMAX);
    let ok = d.nonincreasing() && reached.is_some() && d.m_cap >= 4.0 * max_t;
    (ok, format!("M {:.3e}, Q_0 {:.3e}, non-increasing {}, Q_k <= 1e-12 Q_0 at k = {:?}", d.m_cap, d.q[0], d.nonincreasing(), reached))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = Command::new(env!("CARGO_BIN_EXE_moist-pe"))
            .args(["run", "--scenario", "saturated-updraft", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(st.status.success());
        fs::read(out.join("diagnostics.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    (a == b && !a.is_empty(), format!("{} bytes, identical {}", a.len(), a == b))
}
