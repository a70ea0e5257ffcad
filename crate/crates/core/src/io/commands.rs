//! The four commands and their reports. Each returns a `Report` whose blocks
//! carry the name of the producing operation and the tolerance it ran with.

use super::config::Config;
use super::svg::{Drawing, Element};
use crate::domain::{DirichletDomain, DomainOptions};
use crate::error::{Error, Result};
use crate::fibration::{
    pi_fixed_point, quadratic_fit, sigma_prime, solve_section, varpi_search, EquivariantMap, FiberAds, FiberFlat,
    PlaneMap, SectionOptions,
};
use crate::field::VectorField;
use crate::group::{eval_cocycle, ping_pong_check, reduced_words_up_to, Cocycle, PingPongCertificate, Representation, Word};
use crate::invariants::{
    k_alpha_scan, margulis_alpha, proper_verdict, ProperVerdict, SignProfile, SignStatus, Verdict, ALPHA_ZERO_TOL,
};
use crate::lorentz::{cross, dist, exp_map, frame_at, killing_eval, mink, translation_length, HPoint, Isom};
use crate::minimax::{optimize_field, FieldOptions, FunnelField, MeshField, SolveInfo, TightPair};
use crate::par::Exec;
use crate::transition::{holonomy_convergence, limit_check, metric_compare, HolonomyRow, LimitTable, MetricTable, Stage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const REPORT_SCHEMA: &str = "margulis-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub op: String,
    pub tol: Option<f64>,
    pub value: T,
}

fn tag<T>(op: &str, tol: Option<f64>, value: T) -> Tagged<T> {
    Tagged { op: op.to_string(), tol, value }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_name: String,
    /// sha256 of the effective config (overrides applied).
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingPongBlock {
    pub center: HPoint,
    pub min_separation: f64,
    pub boundary_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanBlock {
    pub depth: usize,
    pub classes: usize,
    pub k_alpha: f64,
    pub argmax: String,
    pub status: SignStatus,
    pub signs: SignProfile,
    pub depth_profile: Vec<(usize, f64)>,
    /// alpha / lambda of each generator.
    pub generator_ratios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictBlock {
    pub ping_pong: Tagged<PingPongBlock>,
    pub scan: Tagged<ScanBlock>,
    pub verdict: Tagged<ProperVerdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBlock {
    pub center: HPoint,
    pub radius: f64,
    pub h: f64,
    pub core_radius: f64,
    pub vertices: usize,
    pub free_vertices: usize,
    pub triangles: usize,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconcile {
    pub k_alpha: f64,
    pub k_star: f64,
    pub gap: f64,
    /// k_alpha <= k_star + tol and |gap| <= tol.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldBlock {
    /// The field was solved for -u (verdict proper after flip).
    pub flipped: bool,
    pub domain: Tagged<DomainBlock>,
    pub k_star: Tagged<f64>,
    pub constraints: usize,
    pub solve: SolveInfo,
    pub tight_pairs: Tagged<Vec<TightPair>>,
    pub reconcile: Tagged<Reconcile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub point: HPoint,
    /// Fiber parameter: theta for Pi, s for varpi.
    pub param: f64,
    pub word: String,
    /// Distance of the recovered point from the probe base point.
    pub recovery: f64,
    pub equivariance: f64,
    pub membership: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub probes: usize,
    pub max_recovery: f64,
    pub max_equivariance: f64,
    pub max_membership: f64,
    pub rows: Vec<ProbeRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaInverse {
    pub points: usize,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiBlock {
    pub t: f64,
    pub lip: f64,
    pub wall_residual: f64,
    pub probes: ProbeStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibrationBlock {
    pub varpi: Tagged<ProbeStats>,
    pub sigma_inverse: Tagged<SigmaInverse>,
    pub pi: Option<Tagged<PiBlock>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionRow {
    pub t: f64,
    pub lip: f64,
    pub rim_lip: f64,
    pub wall_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// Lip(f_t) ~ 1 + k_star t + c t^2.
    pub c: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionBlock {
    pub sections: Tagged<Vec<SectionRow>>,
    pub quadratic_fit: Tagged<QuadraticFit>,
    pub holonomy: Tagged<Vec<HolonomyRow>>,
    pub limit: Tagged<LimitTable>,
    pub metric: Tagged<MetricTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminationBlock {
    pub chords: usize,
    pub dominant_angle_deg: f64,
    pub dominant_fraction: f64,
    pub clusters: Vec<(f64, usize)>,
    pub svg: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub provenance: Provenance,
    pub verdict: VerdictBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibration: Option<FibrationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lamination: Option<Tagged<LaminationBlock>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn status(&self) -> Verdict {
        self.verdict.verdict.value.status
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

struct Run {
    rep: Representation,
    u: Cocycle,
    cert: PingPongCertificate,
    verdict: VerdictBlock,
}

fn start(cfg: &Config, exec: Exec) -> Result<Run> {
    cfg.validate()?;
    let k = &cfg.knobs;
    let rep = cfg.representation()?;
    let u = cfg.cocycle(&rep).map_err(Error::context("cocycle"))?;
    let cert = ping_pong_check(&rep, k.ping_pong_samples).map_err(Error::context("ping_pong_check"))?;
    let scan = k_alpha_scan(&rep, &u, k.word_depth, exec).map_err(Error::context("k_alpha_scan"))?;
    let generator_ratios = (0..rep.rank())
        .map(|i| {
            let g = &rep.gens()[i];
            Ok(margulis_alpha(&rep, &u, &Word::gen(i))? / translation_length(g))
        })
        .collect::<Result<Vec<f64>>>()?;
    let pv = proper_verdict(&rep, &u, &scan, k.delta, k.witness_n).map_err(Error::context("proper_verdict"))?;
    let verdict = VerdictBlock {
        ping_pong: tag(
            "ping_pong_check",
            None,
            PingPongBlock {
                center: cert.center,
                min_separation: cert.min_separation,
                boundary_samples: cert.boundary_samples,
            },
        ),
        scan: tag(
            "k_alpha_scan",
            Some(ALPHA_ZERO_TOL),
            ScanBlock {
                depth: scan.depth,
                classes: scan.entries.len(),
                k_alpha: scan.k_alpha,
                argmax: scan.argmax.clone(),
                status: scan.status,
                signs: scan.signs.clone(),
                depth_profile: scan.depth_profile.clone(),
                generator_ratios,
            },
        ),
        verdict: tag("proper_verdict", Some(k.delta), pv),
    };
    Ok(Run { rep, u, cert, verdict })
}

fn report(cfg: &Config, command: &str, run: &Run) -> Report {
    Report {
        schema: REPORT_SCHEMA.into(),
        command: command.into(),
        provenance: Provenance {
            config_name: cfg.name.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").into(),
        },
        verdict: run.verdict.clone(),
        field: None,
        fibration: None,
        transition: None,
        lamination: None,
        notes: Vec::new(),
    }
}

fn solve_field(cfg: &Config, run: &Run, exec: Exec) -> Result<(MeshField, FieldBlock)> {
    let k = &cfg.knobs;
    let flipped = run.verdict.verdict.value.status == Verdict::EvidenceProperAfterFlip;
    let u = if flipped { run.u.scale(-1.0) } else { run.u.clone() };
    let dom = DirichletDomain::new(
        &run.rep,
        run.cert.center,
        DomainOptions { word_depth: k.domain_depth, radius: k.radius, h: k.h },
    )
    .map_err(Error::context("dirichlet_domain"))?;
    let opts = FieldOptions {
        pair_factor: k.pair_factor,
        tight_tol: k.tight_tol,
        solver_tol: k.solver_tol,
        max_iter: k.solver_max_iter,
        reg: k.reg,
    };
    let mf = optimize_field(dom, &u, &opts, exec).map_err(Error::context("optimize_field"))?;
    let d = &mf.domain;
    let k_alpha = if flipped { -run.verdict.verdict.value.min_ratio } else { run.verdict.scan.value.k_alpha };
    let gap = mf.k_star - k_alpha;
    let consistent = k_alpha <= mf.k_star + k.reconcile_tol && gap.abs() <= k.reconcile_tol;
    let block = FieldBlock {
        flipped,
        domain: tag(
            "dirichlet_domain",
            None,
            DomainBlock {
                center: d.center,
                radius: d.radius,
                h: d.h,
                core_radius: d.core_radius,
                vertices: d.vertices.len(),
                free_vertices: d.free_count(),
                triangles: d.triangles.len(),
                area: d.area(),
            },
        ),
        k_star: tag("optimize_field", Some(k.solver_tol), mf.k_star),
        constraints: mf.constraints,
        solve: mf.solve.clone(),
        tight_pairs: tag("optimize_field", Some(k.tight_tol), mf.tight_pairs.clone()),
        reconcile: tag("reconcile", Some(k.reconcile_tol), Reconcile { k_alpha, k_star: mf.k_star, gap, consistent }),
    };
    Ok((mf, block))
}

pub fn cmd_certify(cfg: &Config, exec: Exec) -> Result<Report> {
    let run = start(cfg, exec)?;
    let mut r = report(cfg, "certify", &run);
    let (_, field) = solve_field(cfg, &run, exec)?;
    if !field.reconcile.value.consistent {
        r.notes.push(format!(
            "k_star and k_alpha differ by {:.3e}, beyond reconcile_tol {}",
            field.reconcile.value.gap, cfg.knobs.reconcile_tol
        ));
    }
    r.field = Some(field);
    Ok(r)
}

fn random_word(rng: &mut ChaCha8Rng, rank: usize) -> Word {
    let n = rng.gen_range(1..=2);
    let letters: Vec<i32> = (0..n)
        .map(|_| {
            let g = rng.gen_range(1..=rank as i32);
            if rng.gen::<bool>() {
                g
            } else {
                -g
            }
        })
        .collect();
    Word::from_letters(&letters).expect("letters are in range")
}

fn core_point(rng: &mut ChaCha8Rng, mf: &MeshField) -> HPoint {
    let r = 0.9 * mf.domain.core_radius * rng.gen::<f64>().sqrt();
    let p = HPoint::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
    Isom::transvection_to(mf.domain.center).act(p)
}

fn stats(rows: Vec<ProbeRow>) -> ProbeStats {
    let m = |f: fn(&ProbeRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    ProbeStats {
        probes: rows.len(),
        max_recovery: m(|r| r.recovery),
        max_equivariance: m(|r| r.equivariance),
        max_membership: m(|r| r.membership),
        rows,
    }
}

fn fibration(cfg: &Config, mf: &MeshField, exec: Exec) -> Result<FibrationBlock> {
    let k = &cfg.knobs;
    let x = FunnelField(mf);
    let c = mf.domain.center;
    let rep = &mf.domain.rep;
    // The center first, then its translates by words of length <= 2.
    let starts: Vec<HPoint> =
        std::iter::once(c).chain(reduced_words_up_to(rep.rank(), 2).iter().map(|w| rep.eval(w).act(c))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let probes: Vec<(HPoint, f64, Word)> =
        (0..k.probes).map(|_| (core_point(&mut rng, mf), rng.gen_range(-1.0..1.0), random_word(&mut rng, rep.rank()))).collect();

    let varpi_rows: Vec<Result<ProbeRow>> = exec.map(&probes, |(p0, s, w)| {
        let y = FiberFlat { p: *p0, x: mf.eval(*p0)?.vec }.at(*s);
        let j = rep.eval(w);
        let p = varpi_search(y, &x, mf.k_star, &starts, k.varpi_tol)?.point;
        let p2 = varpi_search(j.ad(y) + eval_cocycle(rep, &mf.cocycle, w), &x, mf.k_star, &starts, k.varpi_tol)?.point;
        let fib = FiberFlat { p, x: mf.eval(p)?.vec };
        let killing = (killing_eval(y, p).vec - fib.x).eucl_norm();
        Ok(ProbeRow {
            point: *p0,
            param: *s,
            word: w.to_string(),
            recovery: dist(p, *p0),
            equivariance: dist(p2, j.act(p)),
            membership: fib.residual(y).max(killing),
        })
    });
    let varpi = stats(varpi_rows.into_iter().collect::<Result<_>>().map_err(Error::context("varpi_zero"))?);

    let core: Vec<HPoint> =
        mf.domain.vertices.iter().copied().filter(|v| dist(c, *v) < mf.domain.core_radius).collect();
    let step = (core.len() / k.sigma_points.max(1)).max(1);
    let sample: Vec<HPoint> = core.iter().copied().step_by(step).take(k.sigma_points).collect();
    let errs: Vec<Result<f64>> = exec.map(&sample, |&p| {
        let z = sigma_prime(&x, p, k.h_fd)?;
        Ok(dist(p, varpi_search(z, &x, mf.k_star, &starts, k.varpi_tol)?.point))
    });
    let errs: Vec<f64> = errs.into_iter().collect::<Result<_>>().map_err(Error::context("sigma_prime"))?;
    let sigma_inverse = SigmaInverse { points: errs.len(), max_error: errs.iter().copied().fold(0.0, f64::max) };

    let pi = if mf.k_star < 0.0 {
        let f = solve_section(mf, k.pi_t, &SectionOptions::default(), exec).map_err(Error::context("solve_section"))?;
        let rows: Vec<Result<ProbeRow>> = exec.map(&probes, |(p0, th, w)| {
            let g = FiberAds::new(*p0, f.apply(*p0)?).at(*th);
            let j = rep.eval(w);
            let r = f.rho.eval(w);
            let p = pi_fixed_point(&g, &f, f.lip, c, k.pi_tol, 5000)?.point;
            let g2 = r.compose(&g).compose(&j.inverse());
            let p2 = pi_fixed_point(&g2, &f, f.lip, c, k.pi_tol, 5000)?.point;
            Ok(ProbeRow {
                point: *p0,
                param: *th,
                word: w.to_string(),
                recovery: dist(p, *p0),
                equivariance: dist(p2, j.act(p)),
                membership: FiberAds::new(p, f.apply(p)?).residual(&g),
            })
        });
        let rows = rows.into_iter().collect::<Result<_>>().map_err(Error::context("pi_fixed_point"))?;
        Some(tag(
            "pi_fixed_point",
            Some(k.pi_tol),
            PiBlock { t: k.pi_t, lip: f.lip, wall_residual: f.wall_residual(), probes: stats(rows) },
        ))
    } else {
        None
    };
    Ok(FibrationBlock {
        varpi: tag("varpi_zero", Some(k.varpi_tol), varpi),
        sigma_inverse: tag("sigma_prime", Some(k.h_fd), sigma_inverse),
        pi,
    })
}

pub fn cmd_fiber(cfg: &Config, exec: Exec) -> Result<Report> {
    let run = start(cfg, exec)?;
    let mut r = report(cfg, "fiber", &run);
    let (mf, field) = solve_field(cfg, &run, exec)?;
    r.field = Some(field);
    if mf.k_star < 0.0 {
        r.fibration = Some(fibration(cfg, &mf, exec)?);
    } else {
        r.notes.push(format!("fibration skipped: k_star = {:.6e} is not negative", mf.k_star));
    }
    Ok(r)
}

/// Triangle centroids inside 0.8 of the core radius, spread over the mesh.
/// Finite-difference stencils around a centroid stay within one smooth piece
/// of the piecewise mesh maps.
pub fn grid_points(d: &DirichletDomain, n: usize) -> Vec<HPoint> {
    let cand: Vec<HPoint> = d
        .triangles
        .iter()
        .filter_map(|t| HPoint::normalize(d.vertices[t[0]].vec() + d.vertices[t[1]].vec() + d.vertices[t[2]].vec()).ok())
        .filter(|p| dist(d.center, *p) < 0.8 * d.core_radius)
        .collect();
    let stride = 37.min(cand.len() / n.max(1)).max(1);
    cand.into_iter().step_by(stride).take(n).collect()
}

fn transition(cfg: &Config, mf: &MeshField, exec: Exec) -> Result<TransitionBlock> {
    let k = &cfg.knobs;
    let x = FunnelField(mf);
    let sopts = SectionOptions::default();
    let solve = |t: f64| solve_section(mf, t, &sopts, exec).map_err(Error::context("solve_section"));
    let mut sections = Vec::new();
    let mut lips = Vec::new();
    for &t in &k.lip_grid {
        let f = solve(t)?;
        lips.push(f.lip);
        sections.push(SectionRow { t, lip: f.lip, rim_lip: f.rim_lip, wall_residual: f.wall_residual() });
    }
    let (c, residual) = quadratic_fit(&k.lip_grid, &lips, mf.k_star);
    let maps: Vec<EquivariantMap> = k.t_grid.iter().map(|&t| solve(t)).collect::<Result<_>>()?;
    let stages: Vec<Stage> = k.t_grid.iter().zip(&maps).map(|(&t, m)| Stage { t, map: m }).collect();
    let points = grid_points(&mf.domain, k.grid_points);
    let holonomy =
        holonomy_convergence(&mf.domain.rep, &mf.cocycle, &k.t_grid).map_err(Error::context("holonomy_convergence"))?;
    let limit = limit_check(&x, &stages, &points, &k.thetas, k.h_fd, exec).map_err(Error::context("limit_check"))?;
    let mp = &points[..k.metric_points.min(points.len())];
    let metric = metric_compare(&x, &stages, mp, &k.metric_thetas, k.h_fd, k.metric_step, exec)
        .map_err(Error::context("metric_compare"))?;
    Ok(TransitionBlock {
        sections: tag("solve_section", None, sections),
        quadratic_fit: tag("quadratic_fit", None, QuadraticFit { c, residual }),
        holonomy: tag("holonomy_convergence", None, holonomy),
        limit: tag("limit_check", Some(k.h_fd), limit),
        metric: tag("metric_compare", Some(k.metric_step), metric),
    })
}

pub fn cmd_transition(cfg: &Config, exec: Exec) -> Result<Report> {
    let run = start(cfg, exec)?;
    let mut r = report(cfg, "transition", &run);
    let (mf, field) = solve_field(cfg, &run, exec)?;
    r.field = Some(field);
    if mf.k_star < 0.0 {
        r.transition = Some(transition(cfg, &mf, exec)?);
    } else {
        r.notes.push(format!("transition skipped: k_star = {:.6e} is not negative", mf.k_star));
    }
    Ok(r)
}

/// Segment of the boundary geodesic of a face within distance `r` of `c`.
fn face_segment(n: crate::lorentz::MinkVec, c: HPoint, r: f64) -> Option<(HPoint, HPoint)> {
    let s = mink(c.vec(), n);
    let d0 = s.asinh();
    if d0.abs() >= r {
        return None;
    }
    let foot = HPoint::normalize(c.vec() - n * s).ok()?;
    let e = cross(n, foot.vec());
    let e = e * (1.0 / e.norm());
    let half = (r.cosh() / d0.cosh()).acosh();
    Some((exp_map(foot, e * half), exp_map(foot, e * -half)))
}

pub fn lamination_drawing(mf: &MeshField, title: &str) -> Drawing {
    let d = &mf.domain;
    let mut elements = Vec::new();
    let (e1, e2) = frame_at(d.center);
    let rim: Vec<(f64, f64)> = (0..360)
        .map(|i| {
            let a = (i as f64).to_radians();
            exp_map(d.center, (e1 * a.cos() + e2 * a.sin()) * d.radius).to_disk()
        })
        .collect();
    elements.push(Element::Polyline { points: rim, closed: true, class: "rim" });
    for f in &d.faces {
        if let Some((a, b)) = face_segment(f.plane.normal, d.center, d.radius) {
            elements.push(Element::geodesic(a, b, "face"));
        }
    }
    for t in &mf.tight_pairs {
        elements.push(Element::geodesic(t.p, t.q, "tight"));
    }
    elements.push(Element::Dot { at: d.center.to_disk(), class: "dot" });
    Drawing { title: title.to_string(), elements }
}

pub fn cmd_lamination(cfg: &Config, exec: Exec) -> Result<(Report, Drawing)> {
    let run = start(cfg, exec)?;
    let mut r = report(cfg, "lamination", &run);
    let (mf, field) = solve_field(cfg, &run, exec)?;
    let lam = mf.lamination();
    let title = if cfg.name.is_empty() { "lamination".to_string() } else { format!("{} lamination", cfg.name) };
    let drawing = lamination_drawing(&mf, &title);
    r.lamination = Some(tag(
        "lamination",
        Some(cfg.knobs.tight_tol),
        LaminationBlock {
            chords: mf.tight_pairs.len(),
            dominant_angle_deg: lam.dominant_angle_deg,
            dominant_fraction: lam.dominant_fraction,
            clusters: lam.clusters,
            svg: "lamination.svg".into(),
        },
    ));
    r.field = Some(field);
    Ok((r, drawing))
}

/// Writes `<command>.json` (and `lamination.svg`) into `dir`, one file at a time.
pub fn write_outputs(dir: &Path, report: &Report, drawing: Option<&Drawing>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    std::fs::write(dir.join(format!("{}.json", report.command)), report.to_json())?;
    if let Some(d) = drawing {
        super::svg::render_svg(d, &dir.join("lamination.svg"))?;
    }
    Ok(())
}
