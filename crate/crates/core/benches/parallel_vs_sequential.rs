use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use margulis::domain::{DirichletDomain, DomainOptions};
use margulis::field::{lip_sample, FermiFrame, LipOptions, Region, StandardField};
use margulis::group::{translation_generator, Cocycle, Representation};
use margulis::invariants::k_alpha_scan;
use margulis::lorentz::{group_exp, HPoint};
use margulis::minimax::constraint_pairs;
use margulis::par::Exec;

fn torus() -> Representation {
    Representation::new(vec![
        group_exp(translation_generator(0.0) * 2.5),
        group_exp(translation_generator(std::f64::consts::FRAC_PI_2) * 2.5),
    ])
    .unwrap()
}

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn alpha_scan(c: &mut Criterion) {
    let rep = torus();
    let u = Cocycle::length_derivative(&rep, &[-2.5, -1.0]).unwrap();
    let mut g = c.benchmark_group("k_alpha_scan_depth_8");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| k_alpha_scan(&rep, &u, 8, exec).unwrap()));
    }
    g.finish();
}

fn lip(c: &mut Criterion) {
    let sf = StandardField { frame: FermiFrame::from_endpoints(0.3, 2.9).unwrap(), k: -0.2, r: -1.0 };
    let region = Region { center: sf.frame.base, radius: 3.0 };
    let opts = LipOptions { n_pairs: 20_000, ..LipOptions::default() };
    let mut g = c.benchmark_group("lip_sample_20k");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| lip_sample(&sf, &region, &opts, exec).unwrap()));
    }
    g.finish();
}

fn pairs(c: &mut Criterion) {
    let rep = torus();
    let dom =
        DirichletDomain::new(&rep, HPoint::origin(), DomainOptions { h: 0.1, radius: Some(2.5), ..DomainOptions::default() })
            .unwrap();
    let mut g = c.benchmark_group("constraint_pairs_h_0.1");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| constraint_pairs(&dom, 3.0, exec)));
    }
    g.finish();
}

criterion_group!(benches, alpha_scan, lip, pairs);
criterion_main!(benches);
