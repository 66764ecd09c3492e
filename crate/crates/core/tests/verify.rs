use moist_pe::field::{ScalarField, State};
use moist_pe::grid::Staggering;
use moist_pe::scenario::{initial_state, Scenario};
use moist_pe::stepper::{assemble_tendencies, run, Model, Observer, Stepper};
use moist_pe::verify::*;
use moist_pe::{SimParams, TemperatureForm};

fn small(form: TemperatureForm) -> SimParams {
    let mut p = SimParams { nx: 12, ny: 12, np: 8, dt: 120.0, t1: 20.0 * 120.0, use_f_plus: true, ..SimParams::default() };
    p.scheme.form = form;
    p
}

#[test]
fn energy_sample_of_zero_state_is_zero() {
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    let s = State::zeros(&m.grid);
    let c = EnergyConstants::compute(&m).unwrap();
    let t = assemble_tendencies(&s, &m).unwrap();
    let e = energy_sample(&s, &t, &m, &c, 0).unwrap();
    assert_eq!((e.lhs, e.rhs), (0.0, 0.0));
    assert!(e.holds());
}

#[test]
fn diffusion_only_run_has_nonpositive_left_side() {
    let mut p = small(TemperatureForm::Theta);
    p.constants.coriolis = 0.0;
    let m = Model::new(&p).unwrap();
    let mut s = State::zeros(&m.grid);
    // horizontally uniform theta: no pressure gradient, no motion
    s.temp = ScalarField::from_fn(&m.grid, Staggering::Cell, |_, _, pp| 300.0 * (pp / p.constants.p0).powf(p.constants.kappa_exponent()));
    s.q = ScalarField::from_fn(&m.grid, Staggering::Cell, |x, _, _| 0.005 + 0.004 * (x / p.lx));
    let mut mon = EnergyMonitor::new(&m).unwrap();
    run(&s, &m, &mut [&mut mon]).unwrap();
    assert_eq!(mon.samples.len(), 20);
    for e in &mon.samples {
        assert!(e.lhs <= 0.0, "lhs {}", e.lhs);
        assert!(e.holds());
    }
}

#[test]
fn energy_monitor_rejects_t_form() {
    let m = Model::new(&small(TemperatureForm::Temperature)).unwrap();
    assert!(EnergyMonitor::new(&m).is_err());
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    assert!(MoistEnergyMonitor::new(&m).is_err());
}

#[test]
fn under_saturation_persists_and_q_is_bounded() {
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    let r = verify_scenario(&m, Scenario::UnderSaturated).unwrap();
    assert!(r.passed(), "{}", r.summary());
    assert!(r.extrema.never_condensed());
    assert!(r.extrema.samples.iter().all(|s| s.max_q <= r.extrema.q0_max + TOL_POSITIVITY));
}

#[test]
fn rest_state_keeps_q_constant_without_bottom_exchange() {
    let mut p = small(TemperatureForm::Temperature);
    p.coeffs.humidity.alpha = 0.0;
    let m = Model::new(&p).unwrap();
    let s0 = initial_state(Scenario::Rest, &m).unwrap();
    let fin = run(&s0, &m, &mut []).unwrap();
    let q0 = s0.q.data[0];
    assert!(fin.q.data.iter().all(|q| (q - q0).abs() <= 1e-14 * q0));
    assert_eq!(fin.v.max_abs(), 0.0);
}

#[test]
fn zero_humidity_stays_nonnegative() {
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    let mut s = initial_state(Scenario::SaturatedUpdraft, &m).unwrap();
    s.q = ScalarField::zeros(&m.grid, Staggering::Cell);
    let mut mon = MaxPrincipleMonitor::new(true);
    run(&s, &m, &mut [&mut mon]).unwrap();
    assert!(mon.samples.iter().all(|x| x.min_q >= -1e-12));
}

#[test]
fn negative_initial_temperature_is_reported() {
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    let r = verify_scenario(&m, Scenario::NegativeTemperature).unwrap();
    assert!(!r.passed());
    let v = r.violations();
    assert!(v.iter().any(|v| v.monitor == "positivity" && v.step == 0));
}

#[test]
fn supersaturated_column_max_q_does_not_grow() {
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    let r = verify_scenario(&m, Scenario::SaturatedUpdraft).unwrap();
    assert!(r.passed(), "{}", r.summary());
    assert!(r.extrema.max_q_nonincreasing());
    assert!(!r.extrema.never_condensed());
}

#[test]
fn moist_energy_residual_is_roundoff() {
    let m = Model::new(&small(TemperatureForm::Temperature)).unwrap();
    let s0 = initial_state(Scenario::SaturatedUpdraft, &m).unwrap();
    let (s1, _) = Stepper::new(m.clone()).step(&s0, m.params.dt).unwrap();
    let r = moist_energy_residual(&s0, &s1, &m).unwrap();
    assert!(r < 1e-11, "residual {r}");
    let z = State::zeros(&m.grid);
    let z1 = Stepper::new(m.clone()).step(&z, 60.0).unwrap().0;
    assert_eq!(moist_energy_residual(&z, &z1, &m).unwrap(), 0.0);
}

#[test]
fn moist_energy_detects_a_broken_step() {
    let m = Model::new(&small(TemperatureForm::Temperature)).unwrap();
    let s0 = initial_state(Scenario::SaturatedUpdraft, &m).unwrap();
    let (mut s1, info) = Stepper::new(m.clone()).step(&s0, m.params.dt).unwrap();
    // drop the latent heating that accompanied condensation
    let lc = m.params.constants.latent / m.params.constants.c_p;
    for (t, d) in s1.temp.data.iter_mut().zip(&info.tendencies.d_eps.data) {
        *t -= m.params.dt * lc * d;
    }
    let r = moist_energy_residual(&s0, &s1, &m).unwrap();
    assert!(r > 1e-9, "residual {r}");
}

#[test]
fn under_saturated_sweep_has_zero_distances() {
    let p = small(TemperatureForm::Temperature);
    let cfg = SweepConfig {
        model: Model::new(&p).unwrap(),
        scenario: Scenario::UnderSaturated,
        eps_list: halving_list(0.1, 3),
        threads: 3,
        seed: 1,
        vi_trials: 16,
    };
    let r = eps_sweep(&cfg).unwrap();
    assert_eq!(r.distances, vec![0.0, 0.0]);
    assert_eq!(r.verdict, CauchyVerdict::Cauchy);
    assert_eq!(r.final_vi_residual(), 0.0);
}

#[test]
fn single_member_sweep_is_not_applicable() {
    let p = small(TemperatureForm::Theta);
    let cfg = SweepConfig {
        model: Model::new(&p).unwrap(),
        scenario: Scenario::Rest,
        eps_list: vec![0.05],
        threads: 4,
        seed: 0,
        vi_trials: 4,
    };
    let r = eps_sweep(&cfg).unwrap();
    assert_eq!(r.verdict, CauchyVerdict::NotApplicable);
    assert_eq!(r.verdict.to_string(), "Cauchy: n/a");
    assert!(eps_sweep(&SweepConfig { eps_list: vec![0.1, 0.2], ..cfg }).is_err());
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let p = small(TemperatureForm::Theta);
    let mk = |threads| SweepConfig {
        model: Model::new(&p).unwrap(),
        scenario: Scenario::SaturatedUpdraft,
        eps_list: halving_list(0.04, 3),
        threads,
        seed: 3,
        vi_trials: 8,
    };
    let a = eps_sweep(&mk(1)).unwrap();
    let b = eps_sweep(&mk(3)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn mms_orders() {
    let p = SimParams::default();
    for (study, lo) in [(Study::Diffusion, 1.8), (Study::Hydrostatic, 1.8), (Study::Advection, 1.8), (Study::Full, 1.0)] {
        let t = manufactured_convergence(study, &p).unwrap();
        let o = t.observed_order();
        assert!(o >= lo && (study == Study::Full || o <= 2.2), "{study}: {o}\n{}", t.to_csv());
    }
}

#[test]
fn degiorgi_on_a_run_is_monotone_and_respects_indicator_bound() {
    let m = Model::new(&small(TemperatureForm::Theta)).unwrap();
    let s = initial_state(Scenario::SaturatedUpdraft, &m).unwrap();
    let mut rec = TrajectoryRecorder::new(5, true, false);
    run(&s, &m, &mut [&mut rec as &mut dyn Observer]).unwrap();
    let max_t = rec.temps.iter().map(|t| t.max()).fold(0.0, f64::max);
    // cap just above the data so several levels carry mass
    let cap = 1.01 * max_t;
    let tr = degiorgi_diagnostic(&rec.times, &rec.temps, &m, cap, 20).unwrap();
    assert!(tr.nonincreasing());
    assert!(tr.q[0] > 0.0);
    assert_eq!(indicator_bound_violations(&rec.temps, cap, 20), 0);
    if let Some(c0) = tr.fitted_c0 {
        assert!(c0.is_finite() && c0 > 0.0);
    }
}
