//! Vector fields on the hyperbolic plane: d', Fermi coordinates, standard
//! fields, sampled lipschitz constants, zeros of contracting fields, flow-back.

use crate::error::{Error, Result};
use crate::lorentz::{
    cross, dist, eigen_frame, exp_map, frame_at, log_map, mink, transport, translation_along, unit_toward, HPoint,
    Isom, MinkVec, Tangent,
};
use crate::par::Exec;
use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub trait VectorField: Sync {
    fn eval(&self, p: HPoint) -> Result<Tangent>;
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        (**self).eval(p)
    }
}

/// The Killing field of a Lie-algebra element.
#[derive(Clone, Copy, Debug)]
pub struct KillingField(pub MinkVec);

impl VectorField for KillingField {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        Ok(crate::lorentz::killing_eval(self.0, p))
    }
}

/// A field given by a closure returning the ambient vector at p.
pub struct FnField<F>(pub F);

impl<F: Fn(HPoint) -> MinkVec + Sync> VectorField for FnField<F> {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        Ok(Tangent::project(p, (self.0)(p)))
    }
}

pub struct Scaled<F>(pub f64, pub F);

impl<F: VectorField> VectorField for Scaled<F> {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        let t = self.1.eval(p)?;
        Ok(Tangent { base: t.base, vec: t.vec * self.0 })
    }
}

pub struct Sum<F, G>(pub F, pub G);

impl<F: VectorField, G: VectorField> VectorField for Sum<F, G> {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        let (a, b) = (self.0.eval(p)?, self.1.eval(p)?);
        Ok(Tangent { base: p, vec: a.vec + b.vec })
    }
}

/// Rate of change of d(p, q) when p and q move with xp and xq: the difference
/// of the projections onto the line from p to q.
pub fn d_prime(xp: &Tangent, xq: &Tangent) -> Result<f64> {
    let (p, q) = (xp.base, xq.base);
    let up = unit_toward(p, q)?;
    let uq = -unit_toward(q, p)?;
    Ok(mink(xq.vec, uq) - mink(xp.vec, up))
}

pub fn d_prime_ratio(xp: &Tangent, xq: &Tangent) -> Result<f64> {
    Ok(d_prime(xp, xq)? / dist(xp.base, xq.base))
}

pub fn field_ratio(f: &dyn VectorField, p: HPoint, q: HPoint) -> Result<f64> {
    d_prime_ratio(&f.eval(p)?, &f.eval(q)?)
}

/// Image of a tangent vector under the geodesic flow for time t.
pub fn geodesic_flow(x: &Tangent, t: f64) -> Tangent {
    let q = exp_map(x.base, x.vec * t);
    Tangent { base: q, vec: transport(x.base, q, x.vec) }
}

/// Fermi coordinates about an oriented geodesic with a base point on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiFrame {
    pub base: HPoint,
    /// Unit tangent of the axis at `base`.
    pub dir: MinkVec,
    /// Unit normal, base ^ dir; positive eta lies on this side.
    pub normal: MinkVec,
}

impl FermiFrame {
    pub fn new(base: HPoint, dir: MinkVec) -> Result<Self> {
        let t = Tangent::new(base, dir)?;
        let n = t.norm();
        if n < 1e-12 {
            return Err(Error::InvalidInput("zero axis direction".into()));
        }
        let dir = dir * (1.0 / n);
        Ok(FermiFrame { base, dir, normal: cross(base.vec(), dir) })
    }

    /// Axis of a hyperbolic element, oriented by its translation, based at the
    /// foot of the perpendicular from the origin.
    pub fn from_isom(g: &Isom) -> Result<Self> {
        let f = eigen_frame(g)?;
        FermiFrame::new(f.axis_point, f.axis_tangent())
    }

    /// Axis from the ideal point at angle `from` to the one at angle `to`.
    pub fn from_endpoints(from: f64, to: f64) -> Result<Self> {
        FermiFrame::from_isom(&translation_along(from, to, 1.0)?)
    }

    pub fn axis_point(&self, xi: f64) -> HPoint {
        HPoint::lift(self.base.vec() * xi.cosh() + self.dir * xi.sinh())
    }

    pub fn fermi(&self, p: HPoint) -> (f64, f64) {
        let q = p.vec();
        let eta = mink(q, self.normal).asinh();
        let xi = (mink(q, self.dir) / eta.cosh()).asinh();
        (xi, eta)
    }

    pub fn fermi_inv(&self, xi: f64, eta: f64) -> HPoint {
        let a = self.base.vec() * xi.cosh() + self.dir * xi.sinh();
        HPoint::lift(a * eta.cosh() + self.normal * eta.sinh())
    }

    /// Coordinate vectors (dF/dxi, dF/deta) at F(xi, eta).
    pub fn partials(&self, xi: f64, eta: f64) -> (MinkVec, MinkVec) {
        let (b, e) = (self.base.vec(), self.dir);
        let a = b * xi.cosh() + e * xi.sinh();
        let da = b * xi.sinh() + e * xi.cosh();
        (da * eta.cosh(), a * eta.sinh() + self.normal * eta.cosh())
    }
}

/// The field k xi dF/dxi + r eta dF/deta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardField {
    pub frame: FermiFrame,
    pub k: f64,
    pub r: f64,
}

impl VectorField for StandardField {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        let (xi, eta) = self.frame.fermi(p);
        let (fx, fe) = self.frame.partials(xi, eta);
        Ok(Tangent::project(p, fx * (self.k * xi) + fe * (self.r * eta)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: HPoint,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipOptions {
    pub n_pairs: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub seed: u64,
    pub refine_steps: usize,
}

impl Default for LipOptions {
    fn default() -> Self {
        LipOptions { n_pairs: 10_000, h_min: 0.05, h_max: 1.0, seed: 0, refine_steps: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipEstimate {
    pub value: f64,
    pub pairs: usize,
    /// Pairs skipped because a point left the field's domain.
    pub skipped: usize,
    pub argmax: (HPoint, HPoint),
}

fn random_unit(rng: &mut ChaCha8Rng, p: HPoint) -> MinkVec {
    let (e1, e2) = frame_at(p);
    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    e1 * th.cos() + e2 * th.sin()
}

/// Sample pairs: base points spread over the region by area, separations
/// stratified over [h_min, h_max].
pub fn sample_pairs(region: &Region, n: usize, h_min: f64, h_max: f64, seed: u64) -> Vec<(HPoint, HPoint)> {
    const STRATA: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let area_max = region.radius.cosh() - 1.0;
    for i in 0..n {
        let rad = (1.0 + rng.gen::<f64>() * area_max).acosh();
        let p = exp_map(region.center, random_unit(&mut rng, region.center) * rad);
        let s = (i % STRATA) as f64 + rng.gen::<f64>();
        let d = h_min + (h_max - h_min) * s / STRATA as f64;
        let q = exp_map(p, random_unit(&mut rng, p) * d);
        out.push((p, q));
    }
    out
}

fn ratio_or_skip(f: &dyn VectorField, p: HPoint, q: HPoint) -> Result<Option<f64>> {
    match field_ratio(f, p, q) {
        Ok(r) => Ok(Some(r)),
        Err(Error::OutsideTiling) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Largest sampled d'/d, followed by a random local search around the maximiser.
pub fn lip_sample(f: &dyn VectorField, region: &Region, opts: &LipOptions, exec: Exec) -> Result<LipEstimate> {
    let pairs = sample_pairs(region, opts.n_pairs, opts.h_min, opts.h_max, opts.seed);
    let vals = exec.map(&pairs, |&(p, q)| ratio_or_skip(f, p, q));
    let mut best = (f64::NEG_INFINITY, region.center, region.center);
    let mut skipped = 0;
    for (v, &(p, q)) in vals.into_iter().zip(&pairs) {
        match v? {
            Some(r) if r > best.0 => best = (r, p, q),
            Some(_) => {}
            None => skipped += 1,
        }
    }
    if !best.0.is_finite() {
        return Err(Error::InvalidInput("no sampled pair inside the field's domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut step = 0.25 * dist(best.1, best.2);
    let mut fails = 0;
    for _ in 0..opts.refine_steps {
        let p = exp_map(best.1, random_unit(&mut rng, best.1) * (step * rng.gen::<f64>()));
        let q = exp_map(best.2, random_unit(&mut rng, best.2) * (step * rng.gen::<f64>()));
        let d = dist(p, q);
        if d < opts.h_min || d > opts.h_max || dist(p, region.center) > region.radius {
            continue;
        }
        match ratio_or_skip(f, p, q)? {
            Some(r) if r > best.0 => {
                best = (r, p, q);
                fails = 0;
            }
            _ => {
                fails += 1;
                if fails >= 10 {
                    step *= 0.7;
                    fails = 0;
                }
            }
        }
    }
    Ok(LipEstimate { value: best.0, pairs: pairs.len(), skipped, argmax: (best.1, best.2) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroResult {
    pub point: HPoint,
    pub iterations: usize,
    pub residual: f64,
}

/// Coordinates in the frame at p of the field at q, transported back to p.
fn frame_coords(p: HPoint, e: (MinkVec, MinkVec), q: HPoint, v: MinkVec) -> Vector2<f64> {
    let w = transport(q, p, v);
    Vector2::new(mink(w, e.0), mink(w, e.1))
}

/// Zero of a field with lipschitz constant at most k < 0: explicit Euler along
/// the field with step length min(0.5, 0.9 |F| / |k|), halved until |F|
/// decreases, and Newton steps once the residual is small.
pub fn find_zero(f: &dyn Fn(HPoint) -> Result<Tangent>, start: HPoint, k: f64, tol: f64, max_iter: usize) -> Result<ZeroResult> {
    if !(k < 0.0) {
        return Err(Error::NotContracting { k });
    }
    let mut p = start;
    let mut fp = f(p)?;
    let mut n = fp.norm();
    for it in 0..max_iter {
        if n < tol {
            return Ok(ZeroResult { point: p, iterations: it, residual: n });
        }
        if n < 1e-2 {
            let e = frame_at(p);
            let h = 1e-6;
            let f0 = Vector2::new(mink(fp.vec, e.0), mink(fp.vec, e.1));
            let mut jac = Matrix2::zeros();
            for (i, d) in [e.0, e.1].into_iter().enumerate() {
                let qp = exp_map(p, d * h);
                let qm = exp_map(p, d * -h);
                let col = (frame_coords(p, e, qp, f(qp)?.vec) - frame_coords(p, e, qm, f(qm)?.vec)) / (2.0 * h);
                jac.set_column(i, &col);
            }
            if let Some(inv) = jac.try_inverse() {
                let mut delta = -(inv * f0);
                let cap = 2.0 * n / -k;
                if delta.norm() > cap {
                    delta *= cap / delta.norm();
                }
                let cand = exp_map(p, e.0 * delta[0] + e.1 * delta[1]);
                let fc = f(cand)?;
                if fc.norm() < 0.9 * n {
                    p = cand;
                    fp = fc;
                    n = fp.norm();
                    continue;
                }
            }
        }
        let mut len = (0.9 * n / -k).min(0.5);
        let mut accepted = false;
        for _ in 0..12 {
            let cand = exp_map(p, fp.vec * (len / n));
            let fc = f(cand)?;
            if fc.norm() < n || len < 1e-14 {
                p = cand;
                fp = fc;
                n = fp.norm();
                accepted = true;
                break;
            }
            len *= 0.5;
        }
        if !accepted {
            p = exp_map(p, fp.vec * (len / n));
            fp = f(p)?;
            n = fp.norm();
        }
    }
    if n < tol {
        return Ok(ZeroResult { point: p, iterations: max_iter, residual: n });
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: n })
}

/// Image of a field under the geodesic flow for a negative time t. Evaluation
/// at p finds the source q with exp_q(t Z(q)) = p, the zero of the
/// contracting field Z - (1/t) log_q(p).
pub struct FlowBack<F> {
    field: F,
    t: f64,
    lip: f64,
    pub tol: f64,
}

impl<F: VectorField> FlowBack<F> {
    /// `lip` is an upper bound for the lipschitz constant of the field.
    pub fn new(field: F, t: f64, lip: f64) -> Result<Self> {
        if !(t < 0.0) || (lip > 0.0 && t <= -1.0 / lip) {
            return Err(Error::InvalidParameter { t, r: lip });
        }
        Ok(FlowBack { field, t, lip, tol: 1e-12 })
    }

    pub fn source(&self, p: HPoint) -> Result<ZeroResult> {
        let t = self.t;
        let g = |q: HPoint| -> Result<Tangent> {
            let z = self.field.eval(q)?;
            Ok(Tangent { base: q, vec: z.vec - log_map(q, p) * (1.0 / t) })
        };
        find_zero(&g, p, self.lip.max(0.0) + 1.0 / t, self.tol, 5_000)
    }
}

impl<F: VectorField> VectorField for FlowBack<F> {
    fn eval(&self, p: HPoint) -> Result<Tangent> {
        let q = self.source(p)?.point;
        Ok(Tangent { base: p, vec: log_map(p, q) * (-1.0 / self.t) })
    }
}
