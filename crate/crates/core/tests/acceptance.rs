//! Acceptance criteria 1-10. Runs as a plain binary so every criterion prints
//! its PASS/FAIL line under `cargo test`; exits non-zero if any fails.

use margulis::field::{
    d_prime, geodesic_flow, lip_sample, sample_pairs, FermiFrame, FlowBack, LipOptions, Region, StandardField,
    VectorField,
};
use margulis::group::{eval_cocycle, translation_generator, Cocycle, Representation, Word};
use margulis::invariants::{margulis_alpha, margulis_alpha_fd, Verdict};
use margulis::io::commands::{write_outputs, Report};
use margulis::io::config::Config;
use margulis::io::svg::render;
use margulis::io::{cmd_certify, cmd_fiber, cmd_lamination, cmd_transition};
use margulis::lorentz::{
    cross, dist, exp_map, group_exp, group_log, kappa, kappa_inv, killing_eval, log_map, mink, transport, HPoint,
    Isom, MinkVec, Tangent,
};
use margulis::par::Exec;
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str, sets: &[(&str, &str)]) -> Config {
    let mut cfg = margulis::io::parse_config(&configs_dir().join(format!("{name}.json"))).unwrap();
    for (k, v) in sets {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn torus() -> Representation {
    Representation::new(vec![
        group_exp(translation_generator(0.0) * 2.5),
        group_exp(translation_generator(std::f64::consts::FRAC_PI_2) * 2.5),
    ])
    .unwrap()
}

fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> MinkVec {
    MinkVec::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
}

fn rand_point(rng: &mut ChaCha8Rng, r: f64) -> HPoint {
    HPoint::from_polar(r * rng.gen::<f64>(), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn rand_isom(rng: &mut ChaCha8Rng) -> Isom {
    group_exp(rand_vec(rng, 1.5))
}

fn rand_word(rng: &mut ChaCha8Rng, max_len: usize) -> Word {
    loop {
        let n = rng.gen_range(1..=max_len);
        let letters: Vec<i32> = (0..n).map(|_| [1, -1, 2, -2][rng.gen_range(0..4)]).collect();
        let w = Word::from_letters(&letters).unwrap().cyclic_core();
        if !w.is_empty() {
            return w;
        }
    }
}

fn algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = torus();
    let u = Cocycle::new(vec![rand_vec(&mut rng, 1.0), rand_vec(&mut rng, 1.0)]);
    let mut worst = [0.0f64; 5];
    let cases = 250;
    for _ in 0..cases {
        // Cocycle identity, relative to the size of the terms.
        let (w1, w2) = (rand_word(&mut rng, 3), rand_word(&mut rng, 3));
        let lhs = eval_cocycle(&rep, &u, &w1.mul(&w2));
        let rhs = eval_cocycle(&rep, &u, &w1) + rep.eval(&w1).ad(eval_cocycle(&rep, &u, &w2));
        worst[0] = worst[0].max((lhs - rhs).eucl_norm() / (1.0 + lhs.eucl_norm()));
        // Ad is a Lie algebra automorphism for the cross product.
        let g = rand_isom(&mut rng);
        let (a, b) = (rand_vec(&mut rng, 1.0), rand_vec(&mut rng, 1.0));
        worst[1] = worst[1].max((g.ad(cross(a, b)) - cross(g.ad(a), g.ad(b))).eucl_norm());
        // kappa intertwines conjugation with Ad.
        let m = g.matrix();
        let minv = m.try_inverse().unwrap();
        let conj: Matrix2<f64> = m * kappa_inv(a) * minv;
        worst[2] = worst[2].max((kappa(&conj) - g.ad(a)).eucl_norm());
        // Group exp/log on the principal branch.
        let v = rand_vec(&mut rng, 1.0);
        if let Ok(l) = group_log(&group_exp(v)) {
            worst[3] = worst[3].max((l - v).eucl_norm());
        }
        // Riemannian exp/log.
        let p = rand_point(&mut rng, 2.0);
        let q = rand_point(&mut rng, 2.0);
        worst[4] = worst[4].max(dist(exp_map(p, log_map(p, q)), q));
    }
    let m = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        m < 1e-9,
        format!(
            "{cases} cases; cocycle {:.1e}, Ad/cross {:.1e}, kappa {:.1e}, group exp/log {:.1e}, exp/log {:.1e} (tol 1e-9)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn margulis_invariant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rep = torus();
    let u = Cocycle::new(vec![rand_vec(&mut rng, 1.0), rand_vec(&mut rng, 1.0)]);
    let cob = Cocycle::coboundary(&rep, rand_vec(&mut rng, 1.0));
    let (mut fd, mut zero, mut hom) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let w = rand_word(&mut rng, 6);
        let a = margulis_alpha(&rep, &u, &w).unwrap();
        fd = fd.max((a - margulis_alpha_fd(&rep, &u, &w, 1e-5).unwrap()).abs());
        zero = zero.max(margulis_alpha(&rep, &cob, &w).unwrap().abs());
        let n = rng.gen_range(2..=4);
        hom = hom.max((margulis_alpha(&rep, &u, &w.pow(n)).unwrap() - n as f64 * a).abs());
    }
    outcome(
        fd < 1e-6 && zero < 1e-10 && hom < 1e-8,
        format!("100 words; |alpha - fd| {fd:.1e} (1e-6), coboundary {zero:.1e} (1e-10), alpha(w^n) - n alpha {hom:.1e} (1e-8)"),
    )
}

fn d_prime_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut fd_err, mut killing) = (0.0f64, 0.0f64);
    let h = 1e-5;
    for _ in 0..1000 {
        let p = rand_point(&mut rng, 2.0);
        let q = rand_point(&mut rng, 2.0);
        if dist(p, q) < 1e-2 {
            continue;
        }
        let x = Tangent::project(p, rand_vec(&mut rng, 1.0));
        let y = Tangent::project(q, rand_vec(&mut rng, 1.0));
        let f = |s: f64| dist(exp_map(p, x.vec * s), exp_map(q, y.vec * s));
        fd_err = fd_err.max((d_prime(&x, &y).unwrap() - (f(h) - f(-h)) / (2.0 * h)).abs());
        let w = rand_vec(&mut rng, 1.0);
        killing = killing.max(d_prime(&killing_eval(w, p), &killing_eval(w, q)).unwrap().abs());
    }
    outcome(
        fd_err < 1e-6 && killing < 1e-10,
        format!("1000 pairs; |d' - fd| {fd_err:.1e} (1e-6), Killing d' {killing:.1e} (1e-10)"),
    )
}

fn standard_fields() -> Outcome {
    let frame = FermiFrame::from_endpoints(0.3, 2.9).unwrap();
    let exec = Exec::default();
    let mut lip_ok = true;
    let mut lip_worst = f64::NEG_INFINITY;
    for &(k, r) in &[(-0.2, -1.0), (0.5, -0.3), (1.0, -2.0)] {
        let sf = StandardField { frame, k, r };
        let region = Region { center: frame.base, radius: 3.0 };
        let opts = LipOptions { n_pairs: 10_000, h_min: 0.01, h_max: 3.0, ..LipOptions::default() };
        let est = lip_sample(&sf, &region, &opts, exec).unwrap();
        lip_ok &= est.value <= k + 1e-6;
        lip_worst = lip_worst.max(est.value - k);
    }
    // Covariant derivative in Fermi coordinates against finite differences.
    let sf = StandardField { frame, k: 0.7, r: -1.0 };
    let mut grad = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (xi, eta) = (rng.gen_range(-1.5..1.5), rng.gen_range(-2.0..2.0));
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let p = frame.fermi_inv(xi, eta);
        let (fx, fe) = frame.partials(xi, eta);
        let y = fe * a + fx * b;
        let g = |s: f64| {
            let q = exp_map(p, y * s);
            mink(sf.eval(q).unwrap().vec, transport(p, q, y))
        };
        let h = 1e-5;
        let fd = (g(h) - g(-h)) / (2.0 * h);
        let (k, r) = (sf.k, sf.r);
        let expect = r * a * a + k * b * b * eta.cosh().powi(2) + r * b * b * eta * eta.sinh() * eta.cosh();
        grad = grad.max((fd - expect).abs());
    }
    // Off the axis the field is strictly better than k.
    let sf = StandardField { frame, k: -0.2, r: -1.0 };
    let off = Region { center: frame.fermi_inv(0.0, 2.0), radius: 1.0 };
    let opts = LipOptions { n_pairs: 2000, h_min: 0.05, h_max: 0.5, ..LipOptions::default() };
    let est = lip_sample(&sf, &off, &opts, exec).unwrap();
    let eta_min = frame.fermi(est.argmax.0).1.abs().min(frame.fermi(est.argmax.1).1.abs());
    let strict = eta_min >= 0.5 && est.value < sf.k;
    outcome(
        lip_ok && grad < 1e-6 && strict,
        format!(
            "max lip - k {lip_worst:.1e} (<= 1e-6), gradient formula {grad:.1e} (1e-6), off-axis lip {:.4} < k = {} at |eta| >= {eta_min:.2}",
            est.value, sf.k
        ),
    )
}

fn flow_back() -> Outcome {
    let frame = FermiFrame::from_endpoints(0.3, 2.9).unwrap();
    let sf = StandardField { frame, k: 0.8, r: -0.5 };
    let rr = 0.8;
    let region = Region { center: frame.base, radius: 2.0 };
    let pairs = sample_pairs(&region, 1000, 0.05, 1.5, 7);
    let mut ineq = f64::NEG_INFINITY;
    let mut single = 0.0f64;
    for &t in &[-0.3, -0.6, -0.95 / rr] {
        for &(p, q) in &pairs {
            let (x, y) = (sf.eval(p).unwrap(), sf.eval(q).unwrap());
            let xi = d_prime(&x, &y).unwrap() / dist(p, q);
            let (xt, yt) = (geodesic_flow(&x, t), geodesic_flow(&y, t));
            let lhs = d_prime(&xt, &yt).unwrap() / dist(xt.base, yt.base);
            ineq = ineq.max(lhs - xi / (1.0 + t * xi));
        }
        // Single-valued: the flowed graph is recovered from its base points.
        let fb = FlowBack::new(sf, t, rr).unwrap();
        for &(p, _) in pairs.iter().take(100) {
            let xt = geodesic_flow(&sf.eval(p).unwrap(), t);
            let v = fb.eval(xt.base).unwrap();
            single = single.max((v.vec - xt.vec).eucl_norm());
        }
    }
    outcome(
        ineq <= 1e-6 && single < 1e-8,
        format!("t in {{-0.3, -0.6, -0.95/R}}; max d'/d - xi/(1+t xi) {ineq:.1e} (<= 1e-6), graph recovery {single:.1e}"),
    )
}

fn properness() -> Outcome {
    let exec = Exec::default();
    let shrink = cmd_certify(&config("shrink", &[]), exec).unwrap();
    let f = shrink.field.as_ref().unwrap();
    let (ka, ks) = (shrink.verdict.scan.value.k_alpha, f.k_star.value);
    let shrink_ok = shrink.verdict.scan.value.depth == 8 && ka < 0.0 && ks < 0.0 && (ks - ka).abs() <= 0.1;
    let cob = cmd_certify(&config("coboundary", &[]), exec).unwrap();
    let (ca, cs) = (cob.verdict.scan.value.k_alpha, cob.field.as_ref().unwrap().k_star.value);
    let cob_ok = ca.abs() < 1e-3 && cs.abs() < 1e-3 && cob.status() == Verdict::Nonproper;
    let opp = cmd_certify(&config("opposite-sign", &[]), exec).unwrap();
    let w = opp.verdict.verdict.value.witness.as_ref();
    let ratio = w.map_or(f64::INFINITY, |w| w.displacement_ratio());
    let n = w.map_or(0, |w| w.rows.len());
    let opp_ok = opp.status() == Verdict::Nonproper && n >= 40 && ratio < 10.0;
    outcome(
        shrink_ok && cob_ok && opp_ok,
        format!(
            "shrink h=0.1: k_alpha_8 {ka:.6}, k_star {ks:.6}, gap {:.1e} (0.1); coboundary: k_alpha {ca:.1e}, k_star {cs:.1e} (1e-3), {:?}; opposite-sign: {:?}, witness max/min {ratio:.2} over n <= {n} (< 10)",
            (ks - ka).abs(),
            cob.status(),
            opp.status()
        ),
    )
}

fn fibrations(fiber: &Report) -> Outcome {
    let fb = fiber.fibration.as_ref().unwrap();
    let v = &fb.varpi.value;
    let s = &fb.sigma_inverse.value;
    let pi = &fb.pi.as_ref().unwrap().value;
    let pass = pi.probes.probes >= 100
        && v.probes >= 100
        && pi.probes.max_equivariance < 1e-8
        && v.max_equivariance < 1e-7
        && s.points >= 50
        && s.max_error < 1e-6
        && pi.probes.max_membership < 1e-7
        && v.max_membership < 1e-7;
    outcome(
        pass,
        format!(
            "Pi equivariance {:.1e} (1e-8), varpi equivariance {:.1e} (1e-7) on {} probes; varpi(sigma') {:.1e} on {} points (1e-6); membership Pi {:.1e}, varpi {:.1e} (1e-7)",
            pi.probes.max_equivariance,
            v.max_equivariance,
            v.probes,
            s.max_error,
            s.points,
            pi.probes.max_membership,
            v.max_membership
        ),
    )
}

fn sections(tr: &Report) -> Outcome {
    let t = tr.transition.as_ref().unwrap();
    let rows = &t.sections.value;
    let max_lip = rows.iter().map(|r| r.lip).fold(f64::NEG_INFINITY, f64::max);
    let fit = &t.quadratic_fit.value;
    outcome(
        rows.len() == 10 && max_lip < 1.0 && fit.residual < 1e-3,
        format!(
            "t = 0.02..0.2: max Lip(f_t) {max_lip:.4} (< 1); fit 1 + k_star t + {:.3} t^2, residual {:.1e} (1e-3)",
            fit.c, fit.residual
        ),
    )
}

fn transition(tr: &Report) -> Outcome {
    let t = tr.transition.as_ref().unwrap();
    let ratios: Vec<f64> = t.holonomy.value.iter().flat_map(|r| r.ratios.iter().copied()).collect();
    let hol_ok = ratios.iter().all(|r| (1.5..=2.5).contains(r));
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, 0.0f64), |a, r| (a.0.min(*r), a.1.max(*r)));
    let lim = &t.limit.value;
    let boundary = lim.boundary.iter().map(|b| b.limit_residual).fold(0.0, f64::max);
    let m = &t.metric.value;
    let monotone = m.deviation.len() >= 4 && m.deviation.windows(2).all(|w| w[1] < w[0]);
    outcome(
        hol_ok && lim.order >= 0.9 && boundary < 1e-6 && monotone,
        format!(
            "holonomy ratios [{rmin:.2}, {rmax:.2}] ([1.5, 2.5]); dev order {:.2} (0.9); theta = pi row {boundary:.1e} (1e-6); metric deviation {:?}",
            lim.order,
            m.deviation.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn determinism(fiber: &Report) -> Outcome {
    let exec = Exec::default();
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&base);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let dir = base.join(run);
        let cfg = config("shrink", &[("h", "0.25")]);
        let (lam, drawing) = cmd_lamination(&cfg, exec).unwrap();
        write_outputs(&dir, &lam, Some(&drawing)).unwrap();
        write_outputs(&dir, &cmd_fiber(&cfg, exec).unwrap(), None).unwrap();
        write_outputs(&dir, &cmd_certify(&config("opposite-sign", &[]), exec).unwrap(), None).unwrap();
        let read = |n: &str| std::fs::read(dir.join(n)).unwrap();
        files.push([read("lamination.json"), read("lamination.svg"), read("fiber.json"), read("certify.json")]);
    }
    let same = files[0] == files[1];
    let seq = cmd_fiber(&config("shrink", &[("h", "0.25")]), Exec::Sequential).unwrap();
    let exec_same = seq.to_json() == fiber.to_json();
    let svg_same = {
        let cfg = config("shrink", &[("h", "0.25")]);
        let (_, d) = cmd_lamination(&cfg, exec).unwrap();
        render(&d) == String::from_utf8(files[0][1].clone()).unwrap()
    };
    outcome(
        same && exec_same && svg_same,
        format!(
            "two runs: reports and SVG byte-identical {same}; sequential = parallel fiber report {exec_same}; re-render {svg_same}"
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |n: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {n:>2} {name}: {} ({}) [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o, secs));
    };
    run(1, "algebra", &algebra);
    run(2, "margulis invariant", &margulis_invariant);
    run(3, "d' oracle", &d_prime_oracle);
    run(4, "standard fields", &standard_fields);
    run(5, "flow-back", &flow_back);
    run(6, "properness pipeline", &properness);
    let shrink = config("shrink", &[("h", "0.25")]);
    let fiber = cmd_fiber(&shrink, Exec::default()).unwrap();
    run(7, "fibrations", &|| fibrations(&fiber));
    let tr = cmd_transition(&shrink, Exec::default()).unwrap();
    run(8, "sections", &|| sections(&tr));
    run(9, "transition", &|| transition(&tr));
    run(10, "determinism", &|| determinism(&fiber));
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
