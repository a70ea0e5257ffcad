//! Projective models of AdS^3 and R^{2,1} in RP^3, the rescaling r_t, and the
//! developing maps of the collapsing AdS structures and their flat limit.

use crate::error::{Error, Result};
use crate::fibration::{osculating_isometry, sigma_prime, EquivariantMap, PlaneMap};
use crate::field::VectorField;
use crate::group::{deform, eval_cocycle, Cocycle, Representation, Word};
use crate::lorentz::{exp_map, frame_at, group_exp, group_log, kappa, mink, rot_elem, HPoint, Isom, MinkVec};
use crate::par::Exec;
use nalgebra::{Matrix2, Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point of RP^3 as a unit vector whose first nonzero entry is positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint(pub [f64; 4]);

impl ProjPoint {
    pub fn new(y: [f64; 4]) -> Result<Self> {
        let n = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("zero homogeneous vector".into()));
        }
        let sign = y.iter().find(|a| a.abs() > 1e-15 * n).map_or(1.0, |a| a.signum());
        Ok(ProjPoint(y.map(|a| sign * a / n)))
    }

    fn from_vector(v: &Vector4<f64>) -> Result<Self> {
        ProjPoint::new([v[0], v[1], v[2], v[3]])
    }

    pub fn vector(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }

    /// Chordal distance: Euclidean distance of unit representatives, minimised
    /// over sign.
    pub fn chordal(&self, o: &ProjPoint) -> f64 {
        let (a, b) = (self.vector(), o.vector());
        (a - b).norm().min((a + b).norm())
    }

    /// y1^2 + y2^2 - y3^2 - y4^2, negative on I(AdS^3).
    pub fn ads_quadric(&self) -> f64 {
        let y = self.0;
        y[0] * y[0] + y[1] * y[1] - y[2] * y[2] - y[3] * y[3]
    }

    /// Affine chart (y1, y2, y3) / y4 of the flat model.
    pub fn affine(&self) -> Option<[f64; 3]> {
        let y = self.0;
        (y[3].abs() > 1e-300).then(|| [y[0] / y[3], y[1] / y[3], y[2] / y[3]])
    }
}

/// A projective transformation: a 4x4 matrix of unit Frobenius norm whose
/// largest-magnitude entry is positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjMat(pub Matrix4<f64>);

impl ProjMat {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let n = m.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("zero projective matrix".into()));
        }
        let m = m / n;
        if m.determinant().abs() <= 1e-12 {
            return Err(Error::InvalidInput("singular projective matrix".into()));
        }
        let big = m.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        Ok(ProjMat(m * big.signum()))
    }

    fn unchecked(m: Matrix4<f64>) -> Self {
        let m = m / m.norm();
        let big = m.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        ProjMat(m * big.signum())
    }

    pub fn identity() -> Self {
        ProjMat::unchecked(Matrix4::identity())
    }

    pub fn compose(&self, o: &ProjMat) -> ProjMat {
        ProjMat::unchecked(self.0 * o.0)
    }

    pub fn inverse(&self) -> ProjMat {
        ProjMat::unchecked(self.0.try_inverse().expect("projective matrices are invertible"))
    }

    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        ProjPoint::from_vector(&(self.0 * p.vector())).expect("invertible matrix")
    }

    /// Frobenius distance of normalised representatives, minimised over sign.
    pub fn distance(&self, o: &ProjMat) -> f64 {
        (self.0 - o.0).norm().min((self.0 + o.0).norm())
    }
}

/// Coordinates of a 2x2 matrix in the basis [[1,0],[0,-1]], [[0,1],[1,0]],
/// [[0,-1],[1,0]], identity.
fn coords(m: &Matrix2<f64>) -> Vector4<f64> {
    Vector4::new(
        0.5 * (m[(0, 0)] - m[(1, 1)]),
        0.5 * (m[(0, 1)] + m[(1, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
        0.5 * (m[(0, 0)] + m[(1, 1)]),
    )
}

fn from_coords(y: &Vector4<f64>) -> Matrix2<f64> {
    Matrix2::new(y[0] + y[3], y[1] - y[2], y[1] + y[2], -y[0] + y[3])
}

/// The AdS^3 model: g = (y1 + y4, y2 - y3; y2 + y3, -y1 + y4) goes to [y].
pub fn embed_ads(g: &Isom) -> ProjPoint {
    ProjPoint::from_vector(&coords(g.matrix())).expect("determinant one")
}

/// The flat model: v goes to [v : 2], the coordinates of the traceless matrix
/// kappa^-1(v) in the affine chart y4 = 1.
pub fn embed_flat(v: MinkVec) -> ProjPoint {
    ProjPoint::new([v.x, v.y, v.z, 2.0]).expect("y4 != 0")
}

/// The extension to directions at infinity: [v : 2 w].
pub fn embed_flat_homogeneous(v: MinkVec, w: f64) -> Result<ProjPoint> {
    ProjPoint::new([v.x, v.y, v.z, 2.0 * w])
}

/// (h, k) acting on G by g -> k g h^-1, as a projective transformation.
pub fn push_ads(h: &Isom, k: &Isom) -> ProjMat {
    let hi = h.inverse();
    let mut m = Matrix4::zeros();
    for c in 0..4 {
        let e = Vector4::ith(c, 1.0);
        let img = k.matrix() * from_coords(&e) * hi.matrix();
        m.set_column(c, &coords(&img));
    }
    ProjMat::unchecked(m)
}

/// (g, v) acting on R^{2,1} by w -> Ad(g) w + v.
pub fn push_flat(g: &Isom, v: MinkVec) -> ProjMat {
    let mut m = Matrix4::zeros();
    let basis = [MinkVec::e1(), MinkVec::e2(), MinkVec::e3()];
    for (c, e) in basis.into_iter().enumerate() {
        let a = g.ad(e);
        m[(0, c)] = a.x;
        m[(1, c)] = a.y;
        m[(2, c)] = a.z;
    }
    // The chart carries v at [v : 2], so the translation column is v / 2.
    m[(0, 3)] = 0.5 * v.x;
    m[(1, 3)] = 0.5 * v.y;
    m[(2, 3)] = 0.5 * v.z;
    m[(3, 3)] = 1.0;
    ProjMat::unchecked(m)
}

/// r_t = diag(1/t, 1/t, 1/t, 1).
pub fn rescale(t: f64) -> Result<ProjMat> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter { t, r: 0.0 });
    }
    Ok(ProjMat::unchecked(Matrix4::from_diagonal(&Vector4::new(1.0 / t, 1.0 / t, 1.0 / t, 1.0))))
}

/// psi(theta) = 2 tan(theta / 2); infinite at theta = pi.
pub fn psi(theta: f64) -> f64 {
    let (s, c) = (0.5 * theta).sin_cos();
    if c.abs() < 1e-15 {
        f64::INFINITY
    } else {
        2.0 * s / c
    }
}

/// psi as a point (2 sin(theta/2) : cos(theta/2)) of RP^1.
pub fn psi_homogeneous(theta: f64) -> (f64, f64) {
    let (s, c) = (0.5 * theta).sin_cos();
    (2.0 * s, c)
}

/// xi_t = psi^-1(t psi(theta)) on the circle; fixes 0 and pi.
pub fn xi(theta: f64, t: f64) -> f64 {
    let (s, c) = (0.5 * theta).sin_cos();
    2.0 * (t * s).atan2(c)
}

/// The flat developing map, [cos(theta/2) sigma'(p) + 2 sin(theta/2) p : cos(theta/2)].
/// At theta = pi this is the boundary point [p : 0].
pub fn dev_hat(x: &dyn VectorField, p: HPoint, theta: f64, h_fd: f64) -> Result<ProjPoint> {
    let z = sigma_prime(x, p, h_fd)?;
    dev_hat_from(z, p, theta)
}

pub fn dev_hat_from(sigma: MinkVec, p: HPoint, theta: f64) -> Result<ProjPoint> {
    let (s, c) = psi_homogeneous(theta);
    embed_flat_homogeneous(sigma * c + p.vec() * s, c)
}

/// The AdS developing map sigma_t(p) Rot(p, xi_t(theta)).
pub fn dev_hat_t(f: &dyn PlaneMap, p: HPoint, theta: f64, t: f64, h_fd: f64) -> Result<Isom> {
    let s = osculating_isometry(f, p, h_fd)?;
    Ok(s.compose(&rot_elem(p, xi(theta, t))))
}

/// A section over one t, ready for evaluation.
pub struct Stage<'a> {
    pub t: f64,
    pub map: &'a EquivariantMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub point: HPoint,
    pub theta: f64,
    /// Chordal distance of r_t I(Dev_t) from i(dev) for each t.
    pub errors: Vec<f64>,
    /// Least-squares slope of log error against log t.
    pub order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub point: HPoint,
    /// Distance of the homogeneous flat developing map at theta = pi from [p : 0].
    pub limit_residual: f64,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTable {
    pub ts: Vec<f64>,
    pub rows: Vec<LimitRow>,
    pub boundary: Vec<BoundaryRow>,
    /// Largest error over the grid per t.
    pub sup_errors: Vec<f64>,
    /// Fitted order of `sup_errors`: the uniform convergence rate.
    pub order: f64,
    /// Smallest per-row order. Rows with tiny errors (theta = 0) are noisy.
    pub min_order: f64,
    pub max_error_smallest_t: f64,
    /// max |log(sigma_t(p)) / t - sigma'(p)| at the smallest t.
    pub sigma_consistency: f64,
}

fn fitted_order(ts: &[f64], es: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts.iter().zip(es).filter(|(_, e)| **e > 0.0).map(|(t, e)| (t.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Compares r_t I(Dev_hat_t) with i(dev_hat) on a grid, plus the theta = pi row.
pub fn limit_check(
    x: &dyn VectorField,
    stages: &[Stage],
    points: &[HPoint],
    thetas: &[f64],
    h_fd: f64,
    exec: Exec,
) -> Result<LimitTable> {
    let ts: Vec<f64> = stages.iter().map(|s| s.t).collect();
    let rs: Vec<ProjMat> = ts.iter().map(|&t| rescale(t)).collect::<Result<_>>()?;
    let sig: Vec<MinkVec> = exec.map(points, |p| sigma_prime(x, *p, h_fd)).into_iter().collect::<Result<_>>()?;
    // Osculating isometries per (stage, point).
    let cells: Vec<(usize, usize)> = (0..stages.len()).flat_map(|s| (0..points.len()).map(move |i| (s, i))).collect();
    let osc: Vec<Isom> = exec
        .map(&cells, |&(s, i)| osculating_isometry(stages[s].map, points[i], h_fd))
        .into_iter()
        .collect::<Result<_>>()?;
    let osc_at = |s: usize, i: usize| &osc[s * points.len() + i];
    let mut rows = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        for &th in thetas {
            let target = dev_hat_from(sig[i], p, th)?;
            let errors: Vec<f64> = (0..stages.len())
                .map(|s| {
                    let g = osc_at(s, i).compose(&rot_elem(p, xi(th, ts[s])));
                    rs[s].apply(&embed_ads(&g)).chordal(&target)
                })
                .collect();
            rows.push(LimitRow { point: p, theta: th, order: fitted_order(&ts, &errors), errors });
        }
    }
    let mut boundary = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let limit = ProjPoint::new([p.vec().x, p.vec().y, p.vec().z, 0.0])?;
        let limit_residual = dev_hat_from(sig[i], p, PI)?.chordal(&limit);
        let errors = (0..stages.len())
            .map(|s| {
                let g = osc_at(s, i).compose(&rot_elem(p, xi(PI, ts[s])));
                rs[s].apply(&embed_ads(&g)).chordal(&limit)
            })
            .collect();
        boundary.push(BoundaryRow { point: p, limit_residual, errors });
    }
    let smallest = (0..ts.len()).min_by(|&a, &b| ts[a].total_cmp(&ts[b])).unwrap_or(0);
    let mut sigma_consistency: f64 = 0.0;
    for (i, z) in sig.iter().enumerate() {
        let l = group_log(osc_at(smallest, i))?;
        sigma_consistency = sigma_consistency.max((l * (1.0 / ts[smallest]) - *z).eucl_norm());
    }
    let sup_errors: Vec<f64> =
        (0..ts.len()).map(|s| rows.iter().map(|r| r.errors[s]).fold(0.0, f64::max)).collect();
    Ok(LimitTable {
        order: fitted_order(&ts, &sup_errors),
        sup_errors,
        min_order: rows.iter().map(|r| r.order).fold(f64::INFINITY, f64::min),
        max_error_smallest_t: rows.iter().map(|r| r.errors[smallest]).fold(0.0, f64::max),
        ts,
        rows,
        boundary,
        sigma_consistency,
    })
}

/// Gram matrix of Jacobian columns under the Minkowski form. Columns for G are
/// left-translated to the identity first, which gives the bi-invariant metric.
/// Chart coordinates are (a, b, theta) with p(a, b) = exp_p(a e1 + b e2).
fn gram(jac: &[MinkVec; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| mink(jac[r], jac[c]))
}

fn chart(p: HPoint, a: f64, b: f64) -> HPoint {
    let (e1, e2) = frame_at(p);
    exp_map(p, e1 * a + e2 * b)
}

fn ads_jacobian(f: &dyn PlaneMap, p: HPoint, theta: f64, t: f64, h_fd: f64, step: f64) -> Result<[MinkVec; 3]> {
    let base = |a: f64, b: f64, th: f64| dev_hat_t(f, chart(p, a, b), th, t, h_fd);
    let g0 = base(0.0, 0.0, theta)?;
    let gi = g0.inverse();
    // Lift of g0^-1 g near the identity.
    let near = |g: &Isom| -> Matrix2<f64> {
        let m = *gi.compose(g).matrix();
        if m.trace() < 0.0 { -m } else { m }
    };
    let diff = |u: [f64; 3]| -> Result<MinkVec> {
        let plus = base(u[0] * step, u[1] * step, theta + u[2] * step)?;
        let minus = base(-u[0] * step, -u[1] * step, theta - u[2] * step)?;
        Ok(kappa(&((near(&plus) - near(&minus)) * (0.5 / step))))
    };
    Ok([diff([1.0, 0.0, 0.0])?, diff([0.0, 1.0, 0.0])?, diff([0.0, 0.0, 1.0])?])
}

fn flat_jacobian(x: &dyn VectorField, p: HPoint, theta: f64, h_fd: f64, step: f64) -> Result<[MinkVec; 3]> {
    let base = |a: f64, b: f64, th: f64| -> Result<MinkVec> {
        let q = chart(p, a, b);
        Ok(sigma_prime(x, q, h_fd)? + q.vec() * psi(th))
    };
    let diff = |u: [f64; 3]| -> Result<MinkVec> {
        let plus = base(u[0] * step, u[1] * step, theta + u[2] * step)?;
        let minus = base(-u[0] * step, -u[1] * step, theta - u[2] * step)?;
        Ok((plus - minus) * (0.5 / step))
    };
    Ok([diff([1.0, 0.0, 0.0])?, diff([0.0, 1.0, 0.0])?, diff([0.0, 0.0, 1.0])?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub ts: Vec<f64>,
    /// Max entry of |t^-2 Gram_t - Gram_flat| over the grid, per t.
    pub deviation: Vec<f64>,
    /// Largest entry of |Gram_flat| over the grid.
    pub flat_scale: f64,
    /// deviation / flat_scale.
    pub relative: Vec<f64>,
    pub monotone: bool,
    /// Every flat Gram matrix has signature (+, +, -).
    pub lorentzian: bool,
}

pub fn metric_compare(
    x: &dyn VectorField,
    stages: &[Stage],
    points: &[HPoint],
    thetas: &[f64],
    h_fd: f64,
    step: f64,
    exec: Exec,
) -> Result<MetricTable> {
    let grid: Vec<(HPoint, f64)> = points.iter().flat_map(|p| thetas.iter().map(move |th| (*p, *th))).collect();
    let flat: Vec<Matrix3<f64>> = exec
        .map(&grid, |&(p, th)| flat_jacobian(x, p, th, h_fd, step).map(|j| gram(&j)))
        .into_iter()
        .collect::<Result<_>>()?;
    let lorentzian = flat.iter().all(|g| {
        let e = g.symmetric_eigenvalues();
        let neg = e.iter().filter(|v| **v < 0.0).count();
        let pos = e.iter().filter(|v| **v > 0.0).count();
        neg == 1 && pos == 2
    });
    let mut deviation = Vec::new();
    for st in stages {
        let devs: Vec<f64> = exec
            .map_range(grid.len(), |k| -> Result<f64> {
                let (p, th) = grid[k];
                let g = gram(&ads_jacobian(st.map, p, th, st.t, h_fd, step)?) / (st.t * st.t);
                Ok((g - flat[k]).abs().max())
            })
            .into_iter()
            .collect::<Result<_>>()?;
        deviation.push(devs.into_iter().fold(0.0, f64::max));
    }
    let monotone = deviation.windows(2).all(|w| w[1] < w[0]);
    let flat_scale = flat.iter().map(|g| g.abs().max()).fold(0.0, f64::max);
    let relative = deviation.iter().map(|d| d / flat_scale).collect();
    Ok(MetricTable { ts: stages.iter().map(|s| s.t).collect(), deviation, flat_scale, relative, monotone, lorentzian })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolonomyRow {
    pub generator: usize,
    pub errors: Vec<f64>,
    /// errors[k] / errors[k + 1].
    pub ratios: Vec<f64>,
}

/// Distance of r_t I_*(j(s), rho_t(s)) r_t^-1 from i_*(j(s), u(s)) per generator.
pub fn holonomy_convergence(rep: &Representation, u: &Cocycle, ts: &[f64]) -> Result<Vec<HolonomyRow>> {
    let mut rows = Vec::new();
    for (s, g) in rep.gens().iter().enumerate() {
        let limit = push_flat(g, u.values()[s]);
        let mut errors = Vec::new();
        for &t in ts {
            let rho = deform(rep, u, t);
            let r = rescale(t)?;
            let m = r.compose(&push_ads(g, &rho.gens()[s])).compose(&r.inverse());
            errors.push(m.distance(&limit));
        }
        let ratios = errors.windows(2).map(|w| w[0] / w[1]).collect();
        rows.push(HolonomyRow { generator: s, errors, ratios });
    }
    Ok(rows)
}

/// Largest distance of push_flat(j(w), u(w)) dev_hat(p, theta) from
/// dev_hat(j(w) p, theta).
pub fn dev_equivariance(
    x: &dyn VectorField,
    rep: &Representation,
    u: &Cocycle,
    probes: &[(HPoint, f64, Word)],
    h_fd: f64,
) -> Result<f64> {
    let mut r: f64 = 0.0;
    for (p, th, w) in probes {
        let g = rep.eval(w);
        let a = push_flat(&g, eval_cocycle(rep, u, w)).apply(&dev_hat(x, *p, *th, h_fd)?);
        let b = dev_hat(x, g.act(*p), *th, h_fd)?;
        r = r.max(a.chordal(&b));
    }
    Ok(r)
}

/// r_t I(g_t) for g_t = exp(t v), against i(v).
pub fn inflate_error(v: MinkVec, t: f64) -> Result<f64> {
    Ok(rescale(t)?.apply(&embed_ads(&group_exp(v * t))).chordal(&embed_flat(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::translation_along;
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = MinkVec> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| MinkVec::new(x, y, z))
    }

    #[test]
    fn base_points() {
        let o = ProjPoint::new([0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(embed_ads(&Isom::identity()).chordal(&o) < 1e-15);
        assert!(embed_flat(MinkVec::zero()).chordal(&o) < 1e-15);
        assert!(push_ads(&Isom::identity(), &Isom::identity()).distance(&ProjMat::identity()) < 1e-15);
        assert!(rescale(1.0).unwrap().distance(&ProjMat::identity()) < 1e-15);
        assert!(rescale(0.0).is_err());
        assert_eq!(psi(0.0), 0.0);
        assert!((psi(PI / 2.0) - 2.0).abs() < 1e-15);
        assert!(psi(PI).is_infinite());
        for t in [0.01, 0.3, 1.0, 4.0] {
            assert!((xi(PI, t) - PI).abs() < 1e-12);
            assert_eq!(xi(0.0, t), 0.0);
        }
    }

    #[test]
    fn translation_pushes_affinely() {
        let v = MinkVec::new(0.3, -1.0, 0.4);
        let w = MinkVec::new(2.0, 0.5, -0.7);
        let m = push_flat(&Isom::identity(), v);
        assert!(m.apply(&embed_flat(w)).chordal(&embed_flat(w + v)) < 1e-14);
    }

    #[test]
    fn inflate_limits() {
        let v = MinkVec::new(0.4, -0.3, 0.9);
        let mut prev = f64::INFINITY;
        for k in 0..6 {
            let t = 0.2 / 2f64.powi(k);
            let e = inflate_error(v, t).unwrap();
            assert!(e < prev && e <= 1.0 * t);
            prev = e;
        }
        // (h_t, k_t) = (exp(t a) h, exp(t b) h): the limit is (h, d/dt k_t h_t^-1) = (h, b - a).
        let h = translation_along(0.3, 2.0, 0.8).unwrap();
        let (a, b) = (MinkVec::new(0.2, 0.1, -0.3), MinkVec::new(-0.5, 0.4, 0.2));
        let limit = push_flat(&h, b - a);
        let mut prev = f64::INFINITY;
        for k in 0..6 {
            let t = 0.2 / 2f64.powi(k);
            let r = rescale(t).unwrap();
            let m = r.compose(&push_ads(&group_exp(a * t).compose(&h), &group_exp(b * t).compose(&h))).compose(&r.inverse());
            let e = m.distance(&limit);
            assert!(e < prev && e < 2.0 * t, "{e}");
            prev = e;
        }
    }

    #[test]
    fn boundary_row_is_exact() {
        let p = HPoint::from_polar(0.8, 1.3);
        let z = MinkVec::new(0.3, 0.2, -0.5);
        let limit = ProjPoint::new([p.vec().x, p.vec().y, p.vec().z, 0.0]).unwrap();
        assert!(dev_hat_from(z, p, PI).unwrap().chordal(&limit) < 1e-15);
        assert!(embed_ads(&rot_elem(p, PI)).chordal(&limit) < 1e-12);
        let a = dev_hat_from(z, p, PI - 1e-9).unwrap();
        let b = dev_hat_from(z, p, -PI + 1e-9).unwrap();
        assert!(a.chordal(&b) < 1e-8);
    }

    proptest! {
        #[test]
        fn ads_embedding(v in vec3(), w in vec3(), x in vec3()) {
            let g = group_exp(v * 2.0);
            let y = embed_ads(&g);
            prop_assert!((y.vector().norm() - 1.0).abs() < 1e-12);
            prop_assert!(y.ads_quadric() < 0.0);
            let (h, k) = (group_exp(w), group_exp(x));
            let lhs = embed_ads(&k.compose(&g).compose(&h.inverse()));
            prop_assert!(lhs.chordal(&push_ads(&h, &k).apply(&y)) < 1e-10);
            let (h2, k2) = (group_exp(x * 0.7), group_exp(v * -0.4));
            let prod = push_ads(&h, &k).compose(&push_ads(&h2, &k2));
            let direct = push_ads(&h.compose(&h2), &k.compose(&k2));
            prop_assert!(prod.distance(&direct) < 1e-10);
        }

        #[test]
        fn flat_embedding(v in vec3(), w in vec3(), x in vec3()) {
            let g = group_exp(v * 2.0);
            let m = push_flat(&g, w);
            prop_assert!(m.apply(&embed_flat(x)).chordal(&embed_flat(g.ad(x) + w)) < 1e-10);
            let g2 = group_exp(x);
            let prod = m.compose(&push_flat(&g2, v));
            let direct = push_flat(&g.compose(&g2), w + g.ad(v));
            prop_assert!(prod.distance(&direct) < 1e-10);
        }

        #[test]
        fn rescale_composes(s in 0.05..3.0f64, t in 0.05..3.0f64) {
            let a = rescale(s).unwrap().compose(&rescale(t).unwrap());
            prop_assert!(a.distance(&rescale(s * t).unwrap()) < 1e-12);
        }

        #[test]
        fn rescaled_models_nest(v in vec3(), t in 0.1..1.0f64, f in 0.1..0.9f64) {
            // A point of r_t I(AdS) pulled back by r_t' stays in I(AdS) when t' < t.
            let y = rescale(t).unwrap().apply(&embed_ads(&group_exp(v * 3.0)));
            let back = rescale(t * f).unwrap().inverse().apply(&y);
            prop_assert!(back.ads_quadric() < 0.0);
        }
    }
}
