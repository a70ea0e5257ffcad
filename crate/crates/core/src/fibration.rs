//! Equivariant maps and fields, the fixed-point maps Pi and varpi, fibers, and
//! osculating isometries.

use crate::domain::{DirichletDomain, VertexKind};
use crate::error::{Error, Result};
use crate::field::{find_zero, VectorField, ZeroResult};
use crate::group::{deform, Representation};
use crate::lorentz::{
    cross, dist, exp_map, frame_at, killing_eval, log_map, mink, rot_elem, transport, unit_toward, HPoint, Isom,
    MinkVec, Tangent,
};
use crate::minimax::{constraint_pairs, MeshField, PairRef};
use crate::par::Exec;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

pub trait PlaneMap: Sync {
    fn apply(&self, p: HPoint) -> Result<HPoint>;
}

impl<T: PlaneMap + ?Sized> PlaneMap for &T {
    fn apply(&self, p: HPoint) -> Result<HPoint> {
        (**self).apply(p)
    }
}

impl PlaneMap for Isom {
    fn apply(&self, p: HPoint) -> Result<HPoint> {
        Ok(self.act(p))
    }
}

pub struct ConstMap(pub HPoint);

impl PlaneMap for ConstMap {
    fn apply(&self, _p: HPoint) -> Result<HPoint> {
        Ok(self.0)
    }
}

pub struct FnMap<F>(pub F);

impl<F: Fn(HPoint) -> HPoint + Sync> PlaneMap for FnMap<F> {
    fn apply(&self, p: HPoint) -> Result<HPoint> {
        Ok((self.0)(p))
    }
}

/// A (j, rho)-equivariant map given by its values at the mesh vertices.
#[derive(Clone, Debug)]
pub struct EquivariantMap {
    pub domain: DirichletDomain,
    pub rho: Representation,
    pub images: Vec<HPoint>,
    /// Largest stretch d(f p, f q) / d(p, q) over constrained pairs inside the
    /// convex core (plus margin).
    pub lip: f64,
    /// The same over all pairs, funnel rim included.
    pub rim_lip: f64,
    pub t: f64,
}

impl EquivariantMap {
    fn image_of(&self, pr: &PairRef) -> HPoint {
        let y = self.images[pr.b];
        if pr.letter == 0 {
            y
        } else {
            self.rho.letter(pr.letter).act(y)
        }
    }

    fn stretches(&self, pairs: &[PairRef], exec: Exec) -> Vec<f64> {
        exec.map(pairs, |pr| {
            let (p, q) = pr.points(&self.domain);
            dist(self.images[pr.a], self.image_of(pr)) / dist(p, q)
        })
    }

    /// Largest of |f(j(s) v) - rho(s) f(v)| over image vertices.
    pub fn wall_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (v, k) in self.domain.kinds.iter().enumerate() {
            if let VertexKind::Image { source, gen } = *k {
                let e = self.rho.gens()[gen].act(self.images[source]);
                r = r.max(dist(e, self.images[v]));
            }
        }
        r
    }
}

impl EquivariantMap {
    fn interpolate(&self, q: HPoint) -> Result<HPoint> {
        let (t, beta) = self.domain.locate(q)?;
        let tri = self.domain.triangles[t];
        let mut v = MinkVec::zero();
        for k in 0..3 {
            v += self.images[tri[k]].vec() * beta[k];
        }
        HPoint::normalize(v)
    }

    /// Beyond the tiled disk the map continues radially from a rim point b:
    /// q = exp_b(s u) goes to exp_{f(b)}(lip s T u), with T the transport from
    /// b to f(b).
    fn funnel(&self, q: HPoint) -> Result<HPoint> {
        let c = self.domain.center;
        let rim = self.domain.radius - 0.1 * self.domain.h;
        let u = unit_toward(c, q)?;
        let b = exp_map(c, u * rim);
        let fb = self.interpolate(b)?;
        let dir = -unit_toward(b, c)?;
        let s = dist(c, q) - rim;
        Ok(exp_map(fb, transport(b, fb, dir) * (self.lip.min(1.0) * s)))
    }
}

impl PlaneMap for EquivariantMap {
    fn apply(&self, p: HPoint) -> Result<HPoint> {
        let (q, w) = self.domain.reduce(p)?;
        let rim = self.domain.radius - 0.1 * self.domain.h;
        let fq = if dist(self.domain.center, q) <= rim { self.interpolate(q)? } else { self.funnel(q)? };
        Ok(if w.is_empty() { fq } else { self.rho.eval(&w).act(fq) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionOptions {
    pub pair_factor: f64,
    pub iterations: usize,
    /// Vertices move at most `trust * t^2` from exp(t X).
    pub trust: f64,
    /// Pairs count toward `lip` when both points lie within core radius + margin.
    pub core_margin: f64,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions { pair_factor: 3.0, iterations: 40, trust: 0.5, core_margin: 0.0 }
    }
}

/// Composite sources: f(v) = T f(source) for the vertex v of a pair side.
fn side(domain: &DirichletDomain, rho: &Representation, v: usize, letter: i32) -> (usize, Isom) {
    let (src, gen) = domain.source(v);
    let mut t = match gen {
        Some(g) => rho.gens()[g],
        None => Isom::identity(),
    };
    if letter != 0 {
        t = rho.letter(letter).compose(&t);
    }
    (src, t)
}

/// The (j, rho_t)-equivariant map f_t with f_t(v) = exp_v(t X(v)) at free
/// vertices and f_t(j(s) v) = rho_t(s) f_t(v) on the walls, followed by a
/// descent on the largest core pair stretch inside a trust region of size
/// O(t^2), which keeps d/dt f_t = X at t = 0. Outside the convex core the
/// mesh stands in for the funnel families and the stretch there is only
/// reported, as `rim_lip`.
pub fn solve_section(mf: &MeshField, t: f64, opts: &SectionOptions, exec: Exec) -> Result<EquivariantMap> {
    let dom = &mf.domain;
    let rho = deform(&dom.rep, &mf.cocycle, t);
    let n = dom.vertices.len();
    let init: Vec<HPoint> = (0..n).map(|v| exp_map(dom.vertices[v], mf.vectors[v].vec * t)).collect();
    let mut map = EquivariantMap { domain: dom.clone(), rho, images: init.clone(), lip: 1.0, rim_lip: 1.0, t };
    let sync = |images: &mut Vec<HPoint>, rho: &Representation| {
        for v in 0..n {
            if let VertexKind::Image { source, gen } = dom.kinds[v] {
                images[v] = rho.gens()[gen].act(images[source]);
            }
        }
    };
    sync(&mut map.images, &map.rho);
    let reach = dom.core_radius + opts.core_margin;
    let all = constraint_pairs(dom, opts.pair_factor, exec);
    let pairs: Vec<PairRef> = all
        .iter()
        .filter(|pr| {
            let (p, q) = pr.points(dom);
            dist(dom.center, p) <= reach && dist(dom.center, q) <= reach
        })
        .copied()
        .collect();
    let mut ratios = map.stretches(&pairs, exec);
    let mut best = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let radius = opts.trust * t * t;
    let mut step = 0.25 * radius;
    if t != 0.0 {
        let sides: Vec<((usize, Isom), (usize, Isom))> =
            pairs.iter().map(|pr| (side(dom, &map.rho, pr.a, 0), side(dom, &map.rho, pr.b, pr.letter))).collect();
        for _ in 0..opts.iterations {
            if step < 1e-4 * radius {
                break;
            }
            // Pull the endpoints of the most stretched pairs toward each other.
            let band = best - 0.2 * step;
            let mut pull = vec![MinkVec::zero(); n];
            for (k, pr) in pairs.iter().enumerate() {
                if ratios[k] < band {
                    continue;
                }
                let ((sa, ta), (sb, tb)) = &sides[k];
                let fa = map.images[pr.a];
                let fb = map.image_of(pr);
                let w = log_map(fa, fb);
                let (ia, ib) = (ta.inverse(), tb.inverse());
                pull[*sa] += ia.ad(w);
                pull[*sb] += ib.ad(log_map(fb, fa));
            }
            let mut cand = map.images.clone();
            for v in 0..n {
                let pv = Tangent::project(cand[v], pull[v]).vec;
                let norm = pv.norm_sq().max(0.0).sqrt();
                if norm == 0.0 || !dom.is_free(v) {
                    continue;
                }
                let moved = exp_map(cand[v], pv * (step / norm));
                let back = log_map(init[v], moved);
                let off = back.norm_sq().max(0.0).sqrt();
                cand[v] = if off > radius { exp_map(init[v], back * (radius / off)) } else { moved };
            }
            sync(&mut cand, &map.rho);
            let trial = EquivariantMap { images: cand, ..map.clone() };
            let r2 = trial.stretches(&pairs, exec);
            let b2 = r2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if b2 < best {
                map = trial;
                ratios = r2;
                best = b2;
            } else {
                step *= 0.5;
            }
        }
    }
    map.lip = best;
    map.rim_lip = map.stretches(&all, exec).into_iter().fold(best, f64::max);
    Ok(map)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: HPoint,
    pub iterations: usize,
    pub last_step: f64,
}

/// The unique fixed point of g^-1 f, for f with Lip(f) = `lip` < 1.
pub fn pi_fixed_point(g: &Isom, f: &dyn PlaneMap, lip: f64, start: HPoint, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if !(lip < 1.0) {
        return Err(Error::NotContracting { k: lip });
    }
    let gi = g.inverse();
    let mut p = start;
    for it in 0..max_iter {
        let next = gi.act(f.apply(p)?);
        let step = dist(p, next);
        p = next;
        if step < tol * (1.0 - lip) {
            return Ok(FixedPoint { point: p, iterations: it + 1, last_step: step });
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: dist(p, gi.act(f.apply(p)?)) })
}

/// The unique zero of X - Y, for X with lip(X) <= k < 0.
pub fn varpi_zero(y: MinkVec, x: &dyn VectorField, k: f64, start: HPoint, tol: f64) -> Result<ZeroResult> {
    let f = |q: HPoint| -> Result<Tangent> {
        let xv = x.eval(q)?;
        Ok(Tangent { base: q, vec: xv.vec - cross(y, q.vec()) })
    };
    find_zero(&f, start, k, tol, 20_000)
}

/// `varpi_zero` from each start in turn until one converges. The funnel
/// extension of X is not contracting, so a single start can escape down a
/// funnel; the zero itself is unique, so the first converged start gives it.
pub fn varpi_search(y: MinkVec, x: &dyn VectorField, k: f64, starts: &[HPoint], tol: f64) -> Result<ZeroResult> {
    let mut last = Error::InvalidInput("no start points".into());
    for &s in starts {
        match varpi_zero(y, x, k, s, tol) {
            Ok(z) => return Ok(z),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// The timelike geodesic of isometries g with g p = q: theta -> g0 Rot(p, theta).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberAds {
    pub p: HPoint,
    pub q: HPoint,
    pub g0: Isom,
}

impl FiberAds {
    pub fn new(p: HPoint, q: HPoint) -> Self {
        let g0 = Isom::transvection_to(q).compose(&Isom::transvection_to(p).inverse());
        FiberAds { p, q, g0 }
    }

    pub fn at(&self, theta: f64) -> Isom {
        self.g0.compose(&rot_elem(self.p, theta))
    }

    /// Distance of g from the fiber: d(g p, q).
    pub fn residual(&self, g: &Isom) -> f64 {
        dist(g.act(self.p), self.q)
    }
}

/// The line of Killing fields Y with value x at p: cross(p, x) + s p.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberFlat {
    pub p: HPoint,
    pub x: MinkVec,
}

impl FiberFlat {
    pub fn at(&self, s: f64) -> MinkVec {
        cross(self.p.vec(), self.x) + self.p.vec() * s
    }

    /// Euclidean distance from Y to the line.
    pub fn residual(&self, y: MinkVec) -> f64 {
        let d = y - self.at(0.0);
        let p = self.p.vec();
        let s = -mink(d, p);
        (d - p * s).eucl_norm()
    }
}

/// Differential of f at p in the frames at p and f(p), by central differences
/// with a Richardson step.
fn differential(f: &dyn PlaneMap, p: HPoint, h: f64) -> Result<(HPoint, Matrix2<f64>)> {
    let fp = f.apply(p)?;
    let (e1, e2) = frame_at(p);
    let (d1, d2) = frame_at(fp);
    let col = |e: MinkVec, h: f64| -> Result<Vector2<f64>> {
        let a = log_map(fp, f.apply(exp_map(p, e * h))?);
        let b = log_map(fp, f.apply(exp_map(p, e * -h))?);
        let v = (a - b) * (0.5 / h);
        Ok(Vector2::new(mink(v, d1), mink(v, d2)))
    };
    let mut m = Matrix2::zeros();
    for (j, e) in [e1, e2].into_iter().enumerate() {
        let c = (col(e, 0.5 * h)? * 4.0 - col(e, h)?) / 3.0;
        m.set_column(j, &c);
    }
    Ok((fp, m))
}

/// The isometry agreeing with f at p whose differential is the rotation factor
/// of the polar decomposition of df_p.
pub fn osculating_isometry(f: &dyn PlaneMap, p: HPoint, h_fd: f64) -> Result<Isom> {
    let (fp, m) = differential(f, p, h_fd)?;
    let svd = m.svd(true, true);
    let smin = svd.singular_values.min();
    if smin < 1e-6 || m.determinant() <= 0.0 {
        return Err(Error::DegenerateDifferential { sigma: smin });
    }
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    let phi = r[(1, 0)].atan2(r[(0, 0)]);
    let tp = Isom::transvection_to(p);
    let tq = Isom::transvection_to(fp);
    Ok(tq.compose(&rot_elem(HPoint::origin(), phi)).compose(&tp.inverse()))
}

/// Covariant derivative of a field at p in the frame at p: column j is
/// nabla_{e_j} X.
pub fn covariant_derivative(x: &dyn VectorField, p: HPoint, h: f64) -> Result<Matrix2<f64>> {
    let (e1, e2) = frame_at(p);
    let col = |e: MinkVec, h: f64| -> Result<Vector2<f64>> {
        let qa = exp_map(p, e * h);
        let qb = exp_map(p, e * -h);
        let v = (transport(qa, p, x.eval(qa)?.vec) - transport(qb, p, x.eval(qb)?.vec)) * (0.5 / h);
        Ok(Vector2::new(mink(v, e1), mink(v, e2)))
    };
    let mut m = Matrix2::zeros();
    for (j, e) in [e1, e2].into_iter().enumerate() {
        let c = (col(e, 0.5 * h)? * 4.0 - col(e, h)?) / 3.0;
        m.set_column(j, &c);
    }
    Ok(m)
}

/// The Killing field osculating X at p: value X(p) and rotational part equal to
/// the antisymmetric part of nabla X at p.
pub fn sigma_prime(x: &dyn VectorField, p: HPoint, h_fd: f64) -> Result<MinkVec> {
    let xp = x.eval(p)?.vec;
    let m = covariant_derivative(x, p, h_fd)?;
    let omega = 0.5 * (m[(1, 0)] - m[(0, 1)]);
    Ok(cross(p.vec(), xp) + p.vec() * omega)
}

/// Least-squares fit of lip(t) - (1 + k t) = C t^2; returns (C, rms residual).
pub fn quadratic_fit(ts: &[f64], lips: &[f64], k: f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &l) in ts.iter().zip(lips) {
        num += (l - 1.0 - k * t) * t * t;
        den += t.powi(4);
    }
    let c = num / den;
    let rss: f64 = ts.iter().zip(lips).map(|(&t, &l)| (l - 1.0 - k * t - c * t * t).powi(2)).sum();
    (c, (rss / ts.len() as f64).sqrt())
}

/// Killing-field check: Y on the flat fiber over p carries X(p).
pub fn flat_fiber_of(y: MinkVec, p: HPoint, x: &dyn VectorField) -> Result<(FiberFlat, f64)> {
    let xp = x.eval(p)?.vec;
    let fib = FiberFlat { p, x: xp };
    let r = (killing_eval(y, p).vec - xp).eucl_norm();
    Ok((fib, r))
}
