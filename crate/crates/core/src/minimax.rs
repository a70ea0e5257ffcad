//! The discrete minimax problem for equivariant fields on a Dirichlet domain.
//!
//! Unknowns are two frame coordinates per free vertex plus k. Image vertices
//! and translates across the walls are affine in the data of their sources via
//! the equivariance rule, so every constraint d'(x_p, x_q) <= k d(p, q) is a
//! sparse linear row. A small quadratic penalty on the coordinates keeps the
//! directions that no pair constrains (vectors on the truncation circle
//! pointing inward) bounded; its effect on k is of order `reg`.

use crate::domain::{DirichletDomain, VertexKind};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::group::Cocycle;
use crate::lorentz::{cross, dist, exp_map, frame_at, log_map, mink, unit_toward, HPoint, Isom, MinkVec, Tangent};
use crate::par::Exec;
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldOptions {
    /// Pairs closer than `pair_factor * h` are constrained.
    pub pair_factor: f64,
    /// A pair is tight when its scaled slack is below this.
    pub tight_tol: f64,
    pub solver_tol: f64,
    pub max_iter: u32,
    /// Weight of the coordinate penalty, divided by the number of unknowns.
    pub reg: f64,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions { pair_factor: 3.0, tight_tol: 1e-4, solver_tol: 1e-8, max_iter: 200, reg: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightPair {
    pub p: HPoint,
    pub q: HPoint,
    pub ratio: f64,
    /// Letter of the translate that q belongs to, 0 inside the domain.
    pub letter: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub status: String,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct MeshField {
    pub domain: DirichletDomain,
    pub cocycle: Cocycle,
    pub vectors: Vec<Tangent>,
    pub k_star: f64,
    pub tight_pairs: Vec<TightPair>,
    pub constraints: usize,
    pub solve: SolveInfo,
}

/// X(point) = m[0] x[2 var] + m[1] x[2 var + 1] + c.
#[derive(Clone, Copy, Debug)]
struct Affine {
    var: usize,
    m: [MinkVec; 2],
    c: MinkVec,
}

impl Affine {
    fn translate(&self, g: &Isom, ug: MinkVec, image: HPoint) -> Affine {
        Affine { var: self.var, m: [g.ad(self.m[0]), g.ad(self.m[1])], c: g.ad(self.c) + cross(ug, image.vec()) }
    }

    fn eval(&self, x: &[f64]) -> MinkVec {
        self.m[0] * x[2 * self.var] + self.m[1] * x[2 * self.var + 1] + self.c
    }
}

struct Row {
    p: (HPoint, Affine),
    q: (HPoint, Affine),
    d: f64,
    letter: i32,
}

struct Problem {
    nvar: usize,
    rows: Vec<Row>,
    affines: Vec<Affine>,
}

fn build(domain: &DirichletDomain, u: &Cocycle, opts: &FieldOptions, exec: Exec) -> Result<Problem> {
    let rep = &domain.rep;
    let n = domain.vertices.len();
    let mut free_idx = vec![usize::MAX; n];
    let mut nfree = 0;
    for v in 0..n {
        if domain.is_free(v) {
            free_idx[v] = nfree;
            nfree += 1;
        }
    }
    let affines: Vec<Affine> = (0..n)
        .map(|v| match domain.kinds[v] {
            VertexKind::Image { source, gen } => {
                let (e1, e2) = frame_at(domain.vertices[source]);
                let base = Affine { var: free_idx[source], m: [e1, e2], c: MinkVec::zero() };
                base.translate(&rep.gens()[gen], u.values()[gen], domain.vertices[v])
            }
            _ => {
                let (e1, e2) = frame_at(domain.vertices[v]);
                Affine { var: free_idx[v], m: [e1, e2], c: MinkVec::zero() }
            }
        })
        .collect();

    let rows: Vec<Row> = constraint_pairs(domain, opts.pair_factor, exec)
        .into_iter()
        .map(|pr| {
            let (p, q) = pr.points(domain);
            let aq = if pr.letter == 0 {
                affines[pr.b]
            } else {
                affines[pr.b].translate(&rep.letter(pr.letter), u.letter(rep, pr.letter), q)
            };
            Row { p: (p, affines[pr.a]), q: (q, aq), d: dist(p, q), letter: pr.letter }
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidInput("no constraint pairs".into()));
    }
    Ok(Problem { nvar: 2 * nfree, rows, affines })
}

/// A constrained pair: vertex `a` and the translate by j(letter) of vertex `b`
/// (`letter` = 0 for a pair inside the domain).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairRef {
    pub a: usize,
    pub b: usize,
    pub letter: i32,
}

impl PairRef {
    pub fn points(&self, domain: &DirichletDomain) -> (HPoint, HPoint) {
        let q = domain.vertices[self.b];
        let q = if self.letter == 0 { q } else { domain.rep.letter(self.letter).act(q) };
        (domain.vertices[self.a], q)
    }
}

/// All vertex pairs closer than `factor * h`, the mesh edges, and the pairs
/// across each wall. Pairs of images of the same generator are left out since
/// they repeat the pair of their sources.
pub fn constraint_pairs(domain: &DirichletDomain, factor: f64, exec: Exec) -> Vec<PairRef> {
    let n = domain.vertices.len();
    let reach = factor * domain.h;
    let ch = reach.cosh();
    let same_image = |a: usize, b: usize| match (domain.kinds[a], domain.kinds[b]) {
        (VertexKind::Image { gen: g1, .. }, VertexKind::Image { gen: g2, .. }) => g1 == g2,
        _ => false,
    };
    let verts = &domain.vertices;
    let inner: Vec<Vec<(usize, usize)>> = exec.map_range(n, |i| {
        (i + 1..n)
            .filter(|&j| -mink(verts[i].vec(), verts[j].vec()) <= ch && !same_image(i, j))
            .map(|j| (i, j))
            .collect()
    });
    let mut pairs: Vec<(usize, usize)> = inner.into_iter().flatten().collect();
    for t in &domain.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let (a, b) = (a.min(b), a.max(b));
            if -mink(verts[a].vec(), verts[b].vec()) > ch && !same_image(a, b) {
                pairs.push((a, b));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut out: Vec<PairRef> = pairs.into_iter().map(|(a, b)| PairRef { a, b, letter: 0 }).collect();

    // v near the face of letter s paired with j(s) w for w near the face of
    // s^-1. Wall vertices are skipped on the w side since their translates are
    // vertices of the domain.
    for f in &domain.faces {
        let s = f.letter;
        let g = domain.rep.letter(s);
        let back = domain.faces.iter().find(|b| b.letter == -s).expect("faces come in pairs");
        let near: Vec<usize> = (0..n).filter(|&v| f.plane.signed_dist(verts[v]) >= -reach).collect();
        let far: Vec<usize> = (0..n)
            .filter(|&w| matches!(domain.kinds[w], VertexKind::Interior | VertexKind::Axis { .. } | VertexKind::Boundary))
            .filter(|&w| back.plane.signed_dist(verts[w]) >= -reach)
            .collect();
        let images: Vec<HPoint> = far.iter().map(|&w| g.act(verts[w])).collect();
        let found: Vec<Vec<PairRef>> = exec.map(&near, |&v| {
            far.iter()
                .zip(&images)
                .filter(|(_, y)| -mink(verts[v].vec(), y.vec()) <= ch)
                .map(|(&w, _)| PairRef { a: v, b: w, letter: s })
                .collect()
        });
        out.extend(found.into_iter().flatten());
    }
    out
}

/// Coefficients and right-hand side of one row, scaled by 1/d:
/// coeffs . x - k <= rhs.
fn row_terms(r: &Row) -> Result<(Vec<(usize, f64)>, f64)> {
    let up = crate::lorentz::unit_toward(r.p.0, r.q.0)?;
    let uq = -crate::lorentz::unit_toward(r.q.0, r.p.0)?;
    let inv = 1.0 / r.d;
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut add = |i: usize, v: f64| {
        if let Some(e) = out.iter_mut().find(|e| e.0 == i) {
            e.1 += v;
        } else {
            out.push((i, v));
        }
    };
    for j in 0..2 {
        add(2 * r.q.1.var + j, mink(r.q.1.m[j], uq) * inv);
        add(2 * r.p.1.var + j, -mink(r.p.1.m[j], up) * inv);
    }
    let rhs = (mink(r.p.1.c, up) - mink(r.q.1.c, uq)) * inv;
    Ok((out, rhs))
}

struct Solved {
    x: Vec<f64>,
    s: Vec<f64>,
    info: SolveInfo,
}

fn solve(
    p: &CscMatrix<f64>,
    q: &[f64],
    a: &CscMatrix<f64>,
    b: &[f64],
    opts: &FieldOptions,
) -> Result<Solved> {
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter)
        .tol_gap_abs(opts.solver_tol)
        .tol_gap_rel(opts.solver_tol)
        .tol_feas(opts.solver_tol)
        .build()
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    let cones = [SupportedConeT::NonnegativeConeT(b.len())];
    let mut solver = DefaultSolver::new(p, q, a, b, &cones, settings);
    solver.solve();
    let sol = &solver.solution;
    let info = SolveInfo {
        status: format!("{:?}", sol.status),
        iterations: sol.iterations,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        gap: (sol.obj_val - sol.obj_val_dual).abs(),
    };
    match sol.status {
        SolverStatus::Solved => {}
        SolverStatus::AlmostSolved if sol.r_prim < 1e-6 && sol.r_dual < 1e-6 => {}
        _ => return Err(Error::Solver(format!("minimax solve stalled: {info:?}"))),
    }
    Ok(Solved { x: sol.x.clone(), s: sol.s.clone(), info })
}

/// Solves the minimax problem for (j, u) on the meshed domain.
pub fn optimize_field(domain: DirichletDomain, u: &Cocycle, opts: &FieldOptions, exec: Exec) -> Result<MeshField> {
    if u.values().len() != domain.rep.rank() {
        return Err(Error::InvalidInput("cocycle rank does not match the representation".into()));
    }
    let prob = build(&domain, u, opts, exec)?;
    let nv = prob.nvar;
    let kcol = nv;
    let ncol = nv + 1;
    let terms: Vec<Result<(Vec<(usize, f64)>, f64)>> = exec.map(&prob.rows, row_terms);

    // Box on the coordinates; only a safety net for directions the pairs leave free.
    let scale = 1.0 + u.values().iter().map(|v| v.eucl_norm()).fold(0.0, f64::max);
    let far = domain.vertices.iter().map(|v| v.vec().z).fold(1.0, f64::max);
    let bound = 1e3 * scale * far;

    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    for (r, t) in terms.into_iter().enumerate() {
        let (coeffs, rhs) = t?;
        for (c, v) in coeffs {
            ii.push(r);
            jj.push(c);
            vv.push(v);
        }
        ii.push(r);
        jj.push(kcol);
        vv.push(-1.0);
        b.push(rhs);
    }
    let npair = b.len();
    for c in 0..nv {
        for sgn in [1.0, -1.0] {
            ii.push(b.len());
            jj.push(c);
            vv.push(sgn);
            b.push(bound);
        }
    }
    let kbound = 1e3 * scale;
    for sgn in [1.0, -1.0] {
        ii.push(b.len());
        jj.push(kcol);
        vv.push(sgn);
        b.push(kbound);
    }
    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, ncol, ii, jj, vv);
    let mut q = vec![0.0; ncol];
    q[kcol] = 1.0;
    let eps = opts.reg / nv.max(1) as f64;
    let pmat = CscMatrix::new_from_triplets(ncol, ncol, (0..nv).collect(), (0..nv).collect(), vec![eps; nv]);
    let sol = solve(&pmat, &q, &a, &b, opts)?;
    let k_star = sol.x[kcol];

    let x = &sol.x;
    let vectors: Vec<Tangent> = domain
        .vertices
        .iter()
        .zip(&prob.affines)
        .map(|(v, af)| Tangent::project(*v, af.eval(x)))
        .collect();
    let mut tight = Vec::new();
    for (r, row) in prob.rows.iter().enumerate().take(npair) {
        if sol.s[r] < opts.tight_tol {
            let xp = Tangent::project(row.p.0, row.p.1.eval(x));
            let xq = Tangent::project(row.q.0, row.q.1.eval(x));
            tight.push(TightPair {
                p: row.p.0,
                q: row.q.0,
                ratio: crate::field::d_prime_ratio(&xp, &xq)?,
                letter: row.letter,
            });
        }
    }
    Ok(MeshField {
        domain,
        cocycle: u.clone(),
        vectors,
        k_star,
        tight_pairs: tight,
        constraints: npair,
        solve: sol.info,
    })
}

impl MeshField {
    /// Largest violation of d'/d <= k_star over the constrained pairs, for the
    /// stored vectors.
    pub fn max_pair_ratio(&self, opts: &FieldOptions, exec: Exec) -> Result<f64> {
        let prob = build(&self.domain, &self.cocycle, opts, exec)?;
        let ratios: Vec<Result<f64>> = exec.map(&prob.rows, |r| {
            let xp = self.eval(r.p.0)?;
            let xq = self.eval(r.q.0)?;
            crate::field::d_prime_ratio(&xp, &xq)
        });
        ratios.into_iter().try_fold(f64::NEG_INFINITY, |m, r| Ok(m.max(r?)))
    }

    /// Directions of the tight pairs, as angles mod 180 degrees of the chords
    /// in the Klein chart at the domain center, clustered into 5 degree bins.
    pub fn lamination(&self) -> Lamination {
        let to_local = Isom::transvection_to(self.domain.center).inverse();
        let mut bins = vec![0usize; 36];
        let mut dirs = Vec::with_capacity(self.tight_pairs.len());
        for t in &self.tight_pairs {
            let (x1, y1) = to_local.act(t.p).to_klein();
            let (x2, y2) = to_local.act(t.q).to_klein();
            let ang = (y2 - y1).atan2(x2 - x1).to_degrees().rem_euclid(180.0);
            bins[((ang / 5.0) as usize).min(35)] += 1;
            let mid = crate::lorentz::exp_map(t.p, log_map(t.p, t.q) * 0.5);
            let dir = log_map(mid, t.q);
            let nrm = dir.norm_sq().max(1e-300).sqrt();
            dirs.push(LeafDirection { point: mid, direction: dir * (1.0 / nrm), angle_deg: ang });
        }
        let total = self.tight_pairs.len().max(1);
        let (best, _) = bins.iter().enumerate().max_by_key(|b| *b.1).unwrap();
        // A cluster is the peak bin with its neighbours, mod 180.
        let cluster = bins[(best + 35) % 36] + bins[best] + bins[(best + 1) % 36];
        let mut clusters: Vec<(f64, usize)> =
            bins.iter().enumerate().filter(|b| *b.1 > 0).map(|(i, &c)| (5.0 * i as f64 + 2.5, c)).collect();
        clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
        Lamination {
            directions: dirs,
            clusters,
            dominant_angle_deg: 5.0 * best as f64 + 2.5,
            dominant_fraction: cluster as f64 / total as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafDirection {
    pub point: HPoint,
    pub direction: MinkVec,
    pub angle_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lamination {
    pub directions: Vec<LeafDirection>,
    /// (bin center in degrees, count), most populated first.
    pub clusters: Vec<(f64, usize)>,
    pub dominant_angle_deg: f64,
    /// Share of tight pairs within 5 degrees of the dominant bin.
    pub dominant_fraction: f64,
}

impl MeshField {
    fn interpolate(&self, q: HPoint) -> Result<Tangent> {
        let (t, beta) = self.domain.locate(q)?;
        let tri = self.domain.triangles[t];
        let mut v = MinkVec::zero();
        for k in 0..3 {
            v += self.vectors[tri[k]].vec * beta[k];
        }
        Ok(Tangent::project(q, v))
    }

    fn push(&self, w: &crate::group::Word, xq: Tangent) -> Tangent {
        if w.is_empty() {
            return xq;
        }
        let g = self.domain.rep.eval(w);
        let uw = crate::group::eval_cocycle(&self.domain.rep, &self.cocycle, w);
        let gp = g.act(xq.base);
        Tangent { base: gp, vec: g.ad(xq.vec) + cross(uw, gp.vec()) }
    }
}

impl VectorField for MeshField {
    /// Unfolds p into the domain, interpolates with homogeneous barycentric
    /// weights, and pushes forward with the cocycle correction. The weights are
    /// preserved by the linear action, so the result is exactly equivariant
    /// across the walls.
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        let (q, w) = self.domain.unfold(p)?;
        Ok(self.push(&w, self.interpolate(q)?))
    }
}

/// The mesh field continued into the funnels. Past a rim point b on the ray
/// from the center it is the transvection Killing field through b carrying
/// X(b), plus `k_star` times the distance past b along the outward radial
/// direction. That term pulls points back toward the tiled disk. Equivariant
/// like the mesh field itself.
#[derive(Clone, Copy, Debug)]
pub struct FunnelField<'a>(pub &'a MeshField);

impl VectorField for FunnelField<'_> {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        let mf = self.0;
        let dom = &mf.domain;
        let (q, w) = dom.reduce(p)?;
        let rim = dom.radius - 0.1 * dom.h;
        let s = dist(dom.center, q) - rim;
        if s <= 0.0 {
            return Ok(mf.push(&w, mf.interpolate(q)?));
        }
        let u = unit_toward(dom.center, q)?;
        let b = exp_map(dom.center, u * rim);
        let xb = mf.interpolate(b)?;
        let z = cross(b.vec(), xb.vec);
        let radial = -unit_toward(q, dom.center)?;
        let xq = Tangent::project(q, cross(z, q.vec()) + radial * (mf.k_star * s));
        Ok(mf.push(&w, xq))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub h: f64,
    pub k_star: f64,
    pub vertices: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub levels: Vec<RefinementLevel>,
    /// Successive differences do not grow.
    pub cauchy: bool,
}

/// k_star over the meshes h, h/2, ..., for the same center and radius.
pub fn refinement_profile(
    rep: &crate::group::Representation,
    u: &Cocycle,
    center: HPoint,
    base: crate::domain::DomainOptions,
    levels: usize,
    opts: &FieldOptions,
    exec: Exec,
) -> Result<Refinement> {
    let mut out = Vec::new();
    let mut h = base.h;
    for _ in 0..levels {
        let dom = DirichletDomain::new(rep, center, crate::domain::DomainOptions { h, ..base })?;
        let nv = dom.vertices.len();
        let mf = optimize_field(dom, u, opts, exec)?;
        out.push(RefinementLevel { h, k_star: mf.k_star, vertices: nv });
        h *= 0.5;
    }
    let diffs: Vec<f64> = out.windows(2).map(|w| (w[1].k_star - w[0].k_star).abs()).collect();
    let cauchy = diffs.windows(2).all(|d| d[1] <= d[0] + 1e-9);
    Ok(Refinement { levels: out, cauchy })
}
