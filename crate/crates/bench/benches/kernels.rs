use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use moist_pe::operators::{project_barotropic, EllipticSolveSettings};
use moist_pe::verify::{energy_sample, EnergyConstants};
use moist_pe::{assemble_tendencies, Stepper};
use moist_pe_bench::updraft;

const GRIDS: [(usize, usize, usize); 2] = [(16, 16, 8), (32, 32, 16)];

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    g.sample_size(20);
    for (nx, ny, np) in GRIDS {
        let (m, s) = updraft(nx, ny, np);
        let dt = m.params.dt;
        g.bench_with_input(BenchmarkId::from_parameter(format!("{nx}x{ny}x{np}")), &s, |b, s| {
            b.iter(|| {
                let mut st = Stepper::new(m.clone());
                black_box(st.step(s, dt).unwrap())
            })
        });
    }
    g.finish();
}

fn diffusion(c: &mut Criterion) {
    let mut g = c.benchmark_group("apply_diffusion");
    for (nx, ny, np) in GRIDS {
        let (m, s) = updraft(nx, ny, np);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{nx}x{ny}x{np}")), &s, |b, s| {
            b.iter(|| black_box(m.diff_q.apply_scalar(&m.grid, &s.q).unwrap()))
        });
    }
    g.finish();
}

fn projection(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection");
    let settings = EllipticSolveSettings::new(1e-12, 20_000).unwrap();
    for (nx, ny, np) in GRIDS {
        let (m, s) = updraft(nx, ny, np);
        let mut v = s.v.clone();
        v.u.data.iter_mut().enumerate().for_each(|(i, x)| *x += ((i * 7919) % 13) as f64 * 0.01);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{nx}x{ny}x{np}")), &v, |b, v| {
            b.iter(|| black_box(project_barotropic(v, &m.grid, &settings).unwrap()))
        });
    }
    g.finish();
}

fn tendencies_and_energy(c: &mut Criterion) {
    let (m, s) = updraft(32, 32, 16);
    let consts = EnergyConstants::compute(&m).unwrap();
    c.bench_function("tendencies_32x32x16", |b| b.iter(|| black_box(assemble_tendencies(&s, &m).unwrap())));
    let t = assemble_tendencies(&s, &m).unwrap();
    c.bench_function("energy_sample_32x32x16", |b| b.iter(|| black_box(energy_sample(&s, &t, &m, &consts, 0).unwrap())));
}

criterion_group!(benches, step, diffusion, projection, tendencies_and_energy);
criterion_main!(benches);
