//! Minkowski space R^{2,1}, the hyperboloid model of H^2 and PSL(2,R).
//!
//! The quadratic form is x^2 + y^2 - z^2. A traceless 2x2 matrix X corresponds
//! to the vector kappa(X) with X = 1/2 (z1, z2 - z3; z2 + z3, -z1); under this
//! identification the matrix bracket is the Minkowski cross product and
//! Ad(g) acts by isometries of the form.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Tolerance for the unit-hyperboloid membership test.
pub const HYPERBOLOID_TOL: f64 = 1e-9;
/// Width of the band around |trace| = 2 classified as parabolic.
pub const PARABOLIC_BAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MinkVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MinkVec {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        MinkVec { x, y, z }
    }
    pub const fn zero() -> Self {
        MinkVec::new(0.0, 0.0, 0.0)
    }
    pub const fn e1() -> Self {
        MinkVec::new(1.0, 0.0, 0.0)
    }
    pub const fn e2() -> Self {
        MinkVec::new(0.0, 1.0, 0.0)
    }
    pub const fn e3() -> Self {
        MinkVec::new(0.0, 0.0, 1.0)
    }
    pub fn from_array(a: [f64; 3]) -> Self {
        MinkVec::new(a[0], a[1], a[2])
    }
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        MinkVec::new(v[0], v[1], v[2])
    }
    pub fn dot(self, o: MinkVec) -> f64 {
        mink(self, o)
    }
    pub fn cross(self, o: MinkVec) -> MinkVec {
        cross(self, o)
    }
    pub fn norm_sq(self) -> f64 {
        mink(self, self)
    }
    /// sqrt(|Q(v)|).
    pub fn norm(self) -> f64 {
        self.norm_sq().abs().sqrt()
    }
    pub fn eucl_norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for MinkVec {
    type Output = MinkVec;
    fn add(self, o: MinkVec) -> MinkVec {
        MinkVec::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}
impl AddAssign for MinkVec {
    fn add_assign(&mut self, o: MinkVec) {
        *self = *self + o;
    }
}
impl Sub for MinkVec {
    type Output = MinkVec;
    fn sub(self, o: MinkVec) -> MinkVec {
        MinkVec::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}
impl Neg for MinkVec {
    type Output = MinkVec;
    fn neg(self) -> MinkVec {
        MinkVec::new(-self.x, -self.y, -self.z)
    }
}
impl Mul<f64> for MinkVec {
    type Output = MinkVec;
    fn mul(self, s: f64) -> MinkVec {
        MinkVec::new(self.x * s, self.y * s, self.z * s)
    }
}
impl Mul<MinkVec> for f64 {
    type Output = MinkVec;
    fn mul(self, v: MinkVec) -> MinkVec {
        v * self
    }
}

pub fn mink(a: MinkVec, b: MinkVec) -> f64 {
    a.x * b.x + a.y * b.y - a.z * b.z
}

/// Minkowski cross product; satisfies mink(p, cross(q, r)) = det(p, q, r).
pub fn cross(a: MinkVec, b: MinkVec) -> MinkVec {
    MinkVec::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        -a.x * b.y + a.y * b.x,
    )
}

pub fn det3(a: MinkVec, b: MinkVec, c: MinkVec) -> f64 {
    Matrix3::from_columns(&[a.to_vector(), b.to_vector(), c.to_vector()]).determinant()
}

/// sinh(x)/x, accurate near zero.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// sin(x)/x, accurate near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// A point of the upper sheet of Q = -1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MinkVec", into = "MinkVec")]
pub struct HPoint(MinkVec);

impl TryFrom<MinkVec> for HPoint {
    type Error = Error;
    fn try_from(v: MinkVec) -> Result<Self> {
        HPoint::new(v)
    }
}
impl From<HPoint> for MinkVec {
    fn from(p: HPoint) -> MinkVec {
        p.0
    }
}

impl HPoint {
    pub fn new(v: MinkVec) -> Result<Self> {
        let q = v.norm_sq();
        if !v.is_finite() || v.z <= 0.0 || (q + 1.0).abs() > HYPERBOLOID_TOL * v.z.max(1.0).powi(2) {
            return Err(Error::InvalidInput(format!("not on the hyperboloid: {v:?} (Q = {q})")));
        }
        Ok(HPoint(v))
    }

    /// Rescales a future timelike vector onto the hyperboloid.
    pub fn normalize(v: MinkVec) -> Result<Self> {
        let q = v.norm_sq();
        if !v.is_finite() || q >= 0.0 || v.z <= 0.0 {
            return Err(Error::InvalidInput(format!("not future timelike: {v:?}")));
        }
        Ok(HPoint(v * (1.0 / (-q).sqrt())))
    }

    /// Puts a vector that is on the hyperboloid up to rounding back onto it by
    /// recomputing z; stays accurate when the coordinates are large.
    pub(crate) fn lift(v: MinkVec) -> Self {
        HPoint(MinkVec::new(v.x, v.y, (1.0 + v.x * v.x + v.y * v.y).sqrt()))
    }

    pub(crate) fn renorm(v: MinkVec) -> Self {
        let q = -v.norm_sq();
        HPoint(v * (1.0 / q.sqrt()))
    }

    pub fn origin() -> Self {
        HPoint(MinkVec::e3())
    }

    /// Geodesic polar coordinates about the origin.
    pub fn from_polar(r: f64, theta: f64) -> Self {
        HPoint(MinkVec::new(r.sinh() * theta.cos(), r.sinh() * theta.sin(), r.cosh()))
    }

    pub fn from_disk(u: f64, v: f64) -> Result<Self> {
        let s = u * u + v * v;
        if s >= 1.0 {
            return Err(Error::InvalidInput("disk point outside the unit disk".into()));
        }
        let d = 1.0 - s;
        Ok(HPoint(MinkVec::new(2.0 * u / d, 2.0 * v / d, (1.0 + s) / d)))
    }

    pub fn to_disk(self) -> (f64, f64) {
        let v = self.0;
        (v.x / (1.0 + v.z), v.y / (1.0 + v.z))
    }

    pub fn from_klein(u: f64, v: f64) -> Result<Self> {
        let s = u * u + v * v;
        if s >= 1.0 {
            return Err(Error::InvalidInput("klein point outside the unit disk".into()));
        }
        let z = 1.0 / (1.0 - s).sqrt();
        Ok(HPoint(MinkVec::new(u * z, v * z, z)))
    }

    pub fn to_klein(self) -> (f64, f64) {
        (self.0.x / self.0.z, self.0.y / self.0.z)
    }

    pub fn vec(self) -> MinkVec {
        self.0
    }
}

/// A tangent vector: `vec` is Minkowski-orthogonal to `base`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub base: HPoint,
    pub vec: MinkVec,
}

impl Tangent {
    pub fn new(base: HPoint, vec: MinkVec) -> Result<Self> {
        let r = mink(vec, base.vec());
        if r.abs() > 1e-8 * (1.0 + vec.eucl_norm()) * base.vec().z {
            return Err(Error::InvalidInput(format!("vector not tangent (<v|p> = {r:e})")));
        }
        Ok(Tangent { base, vec })
    }

    /// Orthogonal projection of an ambient vector onto T_p.
    pub fn project(base: HPoint, v: MinkVec) -> Self {
        let p = base.vec();
        Tangent { base, vec: v + p * mink(v, p) }
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm_sq().max(0.0).sqrt()
    }
}

/// Hyperbolic distance, computed from the chord to stay accurate at short range.
pub fn dist(p: HPoint, q: HPoint) -> f64 {
    let ch = -mink(p.vec(), q.vec());
    if ch > 2.0 {
        return ch.acosh();
    }
    let c = (p.vec() - q.vec()).norm_sq().max(0.0).sqrt();
    2.0 * (0.5 * c).asinh()
}

pub fn exp_map(p: HPoint, v: MinkVec) -> HPoint {
    let n = v.norm_sq().max(0.0).sqrt();
    HPoint::lift(p.vec() * n.cosh() + v * sinhc(n))
}

pub fn log_map(p: HPoint, q: HPoint) -> MinkVec {
    let w = q.vec() + p.vec() * mink(p.vec(), q.vec());
    let d = dist(p, q);
    // |w| = sinh d; the direct norm of w cancels badly for distant points.
    let wn = if d > 1e-3 { d.sinh() } else { w.norm_sq().max(0.0).sqrt() };
    if wn == 0.0 {
        return MinkVec::zero();
    }
    w * (d / wn)
}

/// Parallel transport of v in T_p along the geodesic from p to q.
pub fn transport(p: HPoint, q: HPoint, v: MinkVec) -> MinkVec {
    let (p, q) = (p.vec(), q.vec());
    v + (p + q) * (mink(v, q) / (1.0 - mink(p, q)))
}

/// Unit tangent at `p` of the geodesic toward `q`.
pub fn unit_toward(p: HPoint, q: HPoint) -> Result<MinkVec> {
    let v = log_map(p, q);
    let n = v.norm_sq().max(0.0).sqrt();
    if n < 1e-14 {
        return Err(Error::CoincidentBase);
    }
    Ok(v * (1.0 / n))
}

/// Lightlike representative of the ideal point at polar angle `theta`.
pub fn ideal_point(theta: f64) -> MinkVec {
    MinkVec::new(theta.cos(), theta.sin(), 1.0)
}

pub fn ideal_angle(v: MinkVec) -> f64 {
    v.y.atan2(v.x)
}

/// kappa^{-1}: MinkVec -> traceless 2x2.
pub fn kappa_inv(v: MinkVec) -> Matrix2<f64> {
    Matrix2::new(v.x, v.y - v.z, v.y + v.z, -v.x) * 0.5
}

/// kappa: traceless part of a 2x2 matrix -> MinkVec.
pub fn kappa(m: &Matrix2<f64>) -> MinkVec {
    let a = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    MinkVec::new(2.0 * a, m[(0, 1)] + m[(1, 0)], m[(1, 0)] - m[(0, 1)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Class {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// An orientation-preserving isometry of H^2, stored as a determinant-one
/// 2x2 matrix with canonical sign together with its Lorentz matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isom {
    m: Matrix2<f64>,
    lor: Matrix3<f64>,
}

impl Serialize for Isom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Isom {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 2]; 2]>::deserialize(d)?;
        Isom::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

fn canonical_sign(m: Matrix2<f64>) -> Matrix2<f64> {
    let scale = m.abs().max();
    let first = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
        .into_iter()
        .find(|x| x.abs() > 1e-12 * scale)
        .unwrap_or(1.0);
    if first < 0.0 {
        -m
    } else {
        m
    }
}

fn lorentz_of(m: &Matrix2<f64>, minv: &Matrix2<f64>) -> Matrix3<f64> {
    let cols = [MinkVec::e1(), MinkVec::e2(), MinkVec::e3()]
        .map(|e| kappa(&(m * kappa_inv(e) * minv)).to_vector());
    Matrix3::from_columns(&cols)
}

impl Isom {
    pub fn new(m: Matrix2<f64>) -> Result<Self> {
        let det = m.determinant();
        if !det.is_finite() || (det - 1.0).abs() > 1e-9 * m.abs().max().max(1.0).powi(2) {
            return Err(Error::InvalidInput(format!("determinant {det} is not 1")));
        }
        Ok(Isom::from_matrix_unchecked(m * (1.0 / det.sqrt())))
    }

    pub fn from_rows(r: [[f64; 2]; 2]) -> Result<Self> {
        Isom::new(Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1]))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix2<f64>) -> Self {
        let m = canonical_sign(m);
        let minv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]);
        Isom { m, lor: lorentz_of(&m, &minv) }
    }

    pub fn identity() -> Self {
        Isom::from_matrix_unchecked(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.m[(0, 0)], self.m[(0, 1)]], [self.m[(1, 0)], self.m[(1, 1)]]]
    }

    pub fn lorentz(&self) -> &Matrix3<f64> {
        &self.lor
    }

    pub fn compose(&self, o: &Isom) -> Isom {
        // No determinant renormalisation: for large entries det() itself
        // suffers cancellation and would inject error.
        Isom::from_matrix_unchecked(self.m * o.m)
    }

    pub fn inverse(&self) -> Isom {
        let m = &self.m;
        Isom::from_matrix_unchecked(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]))
    }

    pub fn ad(&self, v: MinkVec) -> MinkVec {
        MinkVec::from_vector(&(self.lor * v.to_vector()))
    }

    pub fn act(&self, p: HPoint) -> HPoint {
        HPoint::lift(self.ad(p.vec()))
    }

    pub fn push(&self, t: &Tangent) -> Tangent {
        let base = self.act(t.base);
        Tangent::project(base, self.ad(t.vec))
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn classify(&self) -> Class {
        let t = self.trace().abs();
        if t > 2.0 + PARABOLIC_BAND {
            Class::Hyperbolic
        } else if t < 2.0 - PARABOLIC_BAND {
            Class::Elliptic
        } else {
            Class::Parabolic
        }
    }

    /// Distance between two isometries as projective matrices.
    pub fn distance(&self, o: &Isom) -> f64 {
        (self.m - o.m).norm().min((self.m + o.m).norm())
    }

    /// The transvection along the geodesic from the origin to `q`.
    pub fn transvection_to(q: HPoint) -> Isom {
        let o = HPoint::origin();
        let v = log_map(o, q);
        group_exp(cross(o.vec(), v))
    }
}

/// exp: sl(2,R) ~ R^{2,1} -> PSL(2,R).
pub fn group_exp(v: MinkVec) -> Isom {
    let x = kappa_inv(v);
    let s = 0.25 * v.norm_sq();
    let m = if s >= 0.0 {
        let r = s.sqrt();
        Matrix2::identity() * r.cosh() + x * sinhc(r)
    } else {
        let r = (-s).sqrt();
        Matrix2::identity() * r.cos() + x * sinc(r)
    };
    Isom::from_matrix_unchecked(m)
}

/// Principal logarithm, with the sign of the lift chosen so the trace is non-negative.
pub fn group_log(g: &Isom) -> Result<MinkVec> {
    let mut a = *g.matrix();
    if a.trace() < 0.0 {
        a = -a;
    }
    let c = 0.5 * a.trace();
    if c.abs() < 1e-9 {
        return Err(Error::LogBranch { trace: 2.0 * c });
    }
    let n = a - Matrix2::identity() * c;
    let factor = if (c - 1.0).abs() < 1e-10 {
        1.0 - (c - 1.0) / 3.0
    } else if c > 1.0 {
        let th = c.acosh();
        th / th.sinh()
    } else {
        let th = c.acos();
        th / th.sin()
    };
    Ok(kappa(&(n * factor)))
}

pub fn translation_length(g: &Isom) -> f64 {
    let t = g.trace().abs();
    if t > 2.0 + PARABOLIC_BAND {
        2.0 * (0.5 * t).acosh()
    } else {
        0.0
    }
}

/// Eigenframe of a hyperbolic element: Ad(g) has eigenvalues mu, 1/mu, 1 on
/// c_plus, c_minus, c_zero, with c_plus and c_minus in the future light cone
/// and c_zero = c_minus ^ c_plus normalised to unit length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenFrame {
    pub c_plus: MinkVec,
    pub c_minus: MinkVec,
    pub c_zero: MinkVec,
    pub lambda: f64,
    pub mu: f64,
    /// Foot of the perpendicular from the origin to the axis.
    pub axis_point: HPoint,
}

impl EigenFrame {
    /// Unit tangent of the axis at `axis_point`, in the translation direction.
    pub fn axis_tangent(&self) -> MinkVec {
        cross(self.c_zero, self.axis_point.vec())
    }
}

pub fn eigen_frame(g: &Isom) -> Result<EigenFrame> {
    if g.classify() != Class::Hyperbolic {
        return Err(Error::NotHyperbolic { trace: g.trace().abs() });
    }
    let mut a = *g.matrix();
    if a.trace() < 0.0 {
        a = -a;
    }
    let v = kappa(&(a - Matrix2::identity() * (0.5 * a.trace())));
    let c0 = v * (1.0 / v.norm_sq().sqrt());
    let lambda = translation_length(g);
    let o = MinkVec::e3();
    let axis_point = HPoint::renorm(o - c0 * mink(o, c0));
    let e = cross(c0, axis_point.vec());
    let p = axis_point.vec();
    Ok(EigenFrame {
        c_plus: p + e,
        c_minus: p - e,
        c_zero: c0,
        lambda,
        mu: lambda.exp(),
        axis_point,
    })
}

/// Rotation by `theta` (counterclockwise) about `p`.
pub fn rot_elem(p: HPoint, theta: f64) -> Isom {
    group_exp(p.vec() * theta)
}

/// Infinitesimal rotation about `p` with angular speed `omega`.
pub fn rot_killing(p: HPoint, omega: f64) -> MinkVec {
    p.vec() * omega
}

/// Value at `q` of the Killing field of the Lie-algebra element `x`.
pub fn killing_eval(x: MinkVec, q: HPoint) -> Tangent {
    Tangent { base: q, vec: cross(x, q.vec()) }
}

/// Orthonormal frame at `q` transported from the standard frame at the origin.
pub fn frame_at(q: HPoint) -> (MinkVec, MinkVec) {
    let t = Isom::transvection_to(q);
    (t.ad(MinkVec::e1()), t.ad(MinkVec::e2()))
}

/// The hyperbolic element translating by `length` along the geodesic from the
/// ideal point at angle `from` toward the ideal point at angle `to`.
pub fn translation_along(from: f64, to: f64, length: f64) -> Result<Isom> {
    let (a, b) = (ideal_point(from), ideal_point(to));
    let c = cross(a, b);
    let n = c.norm_sq();
    if n <= 1e-24 {
        return Err(Error::InvalidInput("axis endpoints coincide".into()));
    }
    Ok(group_exp(c * (length / n.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn close(a: MinkVec, b: MinkVec, tol: f64) -> bool {
        (a - b).eucl_norm() <= tol * (1.0 + a.eucl_norm().max(b.eucl_norm()))
    }

    #[test]
    fn kappa_basis() {
        let h = Matrix2::new(0.5, 0.0, 0.0, -0.5);
        let s = Matrix2::new(0.0, 0.5, 0.5, 0.0);
        let r = Matrix2::new(0.0, -0.5, 0.5, 0.0);
        assert_eq!(kappa(&h), MinkVec::e1());
        assert_eq!(kappa(&s), MinkVec::e2());
        assert_eq!(kappa(&r), MinkVec::e3());
        // Trace form: <v|w> = 2 tr(vw).
        let v = MinkVec::new(0.3, -1.1, 0.7);
        let w = MinkVec::new(2.0, 0.4, -0.9);
        assert_relative_eq!(mink(v, w), 2.0 * (kappa_inv(v) * kappa_inv(w)).trace(), epsilon = 1e-14);
    }

    #[test]
    fn bracket_is_cross_product() {
        let v = MinkVec::new(0.3, -1.1, 0.7);
        let w = MinkVec::new(2.0, 0.4, -0.9);
        let (a, b) = (kappa_inv(v), kappa_inv(w));
        assert!(close(kappa(&(a * b - b * a)), cross(v, w), 1e-14));
    }

    #[test]
    fn cross_is_determinant() {
        let p = MinkVec::new(1.0, 2.0, 3.0);
        let q = MinkVec::new(-0.5, 0.2, 0.1);
        let r = MinkVec::new(0.7, 0.7, -2.0);
        assert_relative_eq!(mink(p, cross(q, r)), det3(p, q, r), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_element_frame() {
        let a: f64 = 1.7;
        let g = Isom::from_rows([[a, 0.0], [0.0, 1.0 / a]]).unwrap();
        let f = eigen_frame(&g).unwrap();
        assert_relative_eq!(f.lambda, 2.0 * a.ln(), epsilon = 1e-12);
        assert_relative_eq!(f.mu, a * a, epsilon = 1e-12);
        assert!(close(f.c_zero, MinkVec::e1(), 1e-12));
        // c_plus ~ (0,-1,1), c_minus ~ (0,1,1)
        assert!(close(f.c_plus, MinkVec::new(0.0, -1.0, 1.0), 1e-12));
        assert!(close(f.c_minus, MinkVec::new(0.0, 1.0, 1.0), 1e-12));
        assert!(close(g.ad(f.c_plus), f.c_plus * f.mu, 1e-12));
        assert!(close(g.ad(f.c_minus), f.c_minus * (1.0 / f.mu), 1e-12));
        assert!(close(g.ad(f.c_zero), f.c_zero, 1e-12));
    }

    #[test]
    fn translation_length_of_trace() {
        let e = std::f64::consts::E;
        let g = Isom::from_rows([[e, 0.0], [0.0, 1.0 / e]]).unwrap();
        assert_relative_eq!(translation_length(&g), 2.0, epsilon = 1e-12);
        assert_eq!(translation_length(&rot_elem(HPoint::origin(), 1.0)), 0.0);
        let par = Isom::from_rows([[1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(par.classify(), Class::Parabolic);
        assert!(matches!(eigen_frame(&par), Err(Error::NotHyperbolic { .. })));
    }

    #[test]
    fn rotation_about_origin_is_counterclockwise() {
        let q = HPoint::from_polar(0.8, 0.0);
        let k = killing_eval(rot_killing(HPoint::origin(), 1.0), q);
        assert!(k.vec.y > 0.0 && k.vec.x.abs() < 1e-14);
        let r = rot_elem(HPoint::origin(), std::f64::consts::FRAC_PI_2).act(q);
        assert!(close(r.vec(), HPoint::from_polar(0.8, std::f64::consts::FRAC_PI_2).vec(), 1e-12));
        let full = rot_elem(HPoint::origin(), 2.0 * std::f64::consts::PI);
        assert!(full.distance(&Isom::identity()) < 1e-12);
    }

    #[test]
    fn log_branch_at_half_turn() {
        let g = rot_elem(HPoint::from_polar(0.4, 1.0), std::f64::consts::PI);
        assert!(matches!(group_log(&g), Err(Error::LogBranch { .. })));
    }

    #[test]
    fn ideal_translation_fixes_its_endpoints() {
        let g = translation_along(0.3, 2.0, 1.5).unwrap();
        let f = eigen_frame(&g).unwrap();
        assert_relative_eq!(f.lambda, 1.5, epsilon = 1e-12);
        assert_relative_eq!(ideal_angle(f.c_plus), 2.0, epsilon = 1e-10);
        assert_relative_eq!(ideal_angle(f.c_minus), 0.3, epsilon = 1e-10);
    }

    #[test]
    fn rejects_invalid_points_and_isometries() {
        assert!(HPoint::new(MinkVec::new(1.0, 0.0, 1.0)).is_err());
        assert!(HPoint::new(MinkVec::new(0.0, 0.0, -1.0)).is_err());
        assert!(Isom::from_rows([[2.0, 0.0], [0.0, 2.0]]).is_err());
        assert!(Tangent::new(HPoint::origin(), MinkVec::e3()).is_err());
    }

    fn arb_point() -> impl Strategy<Value = HPoint> {
        (0.0..3.0f64, -3.2..3.2f64).prop_map(|(r, t)| HPoint::from_polar(r, t))
    }

    fn arb_vec() -> impl Strategy<Value = MinkVec> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| MinkVec::new(x, y, z))
    }

    fn arb_isom() -> impl Strategy<Value = Isom> {
        arb_vec().prop_map(group_exp)
    }

    proptest! {
        #[test]
        fn ad_preserves_form(g in arb_isom(), v in arb_vec(), w in arb_vec()) {
            let s = 1.0 + g.lorentz().norm().powi(2);
            prop_assert!((mink(g.ad(v), g.ad(w)) - mink(v, w)).abs() < 1e-11 * s * (1.0 + v.eucl_norm() * w.eucl_norm()));
            prop_assert!((g.lorentz().determinant() - 1.0).abs() < 1e-9 * s);
        }

        #[test]
        fn ad_is_homomorphism(g in arb_isom(), h in arb_isom(), v in arb_vec()) {
            let lhs = g.compose(&h).ad(v);
            let rhs = g.ad(h.ad(v));
            prop_assert!(close(lhs, rhs, 1e-10));
        }

        #[test]
        fn cross_is_equivariant(g in arb_isom(), v in arb_vec(), w in arb_vec()) {
            prop_assert!(close(g.ad(cross(v, w)), cross(g.ad(v), g.ad(w)), 1e-9));
        }

        #[test]
        fn exp_log_roundtrip(p in arb_point(), q in arb_point()) {
            let v = log_map(p, q);
            prop_assert!(mink(v, p.vec()).abs() < 1e-9 * p.vec().z * (1.0 + v.eucl_norm()));
            let back = exp_map(p, v);
            prop_assert!(dist(back, q) < 1e-9);
            prop_assert!((v.norm() - dist(p, q)).abs() < 1e-9);
        }

        #[test]
        fn transport_is_isometric(p in arb_point(), q in arb_point(), v in arb_vec()) {
            let v = Tangent::project(p, v).vec;
            let w = transport(p, q, v);
            prop_assert!(mink(w, q.vec()).abs() < 1e-8 * (1.0 + w.eucl_norm()) * q.vec().z);
            prop_assert!((w.norm_sq() - v.norm_sq()).abs() < 1e-8 * (1.0 + v.eucl_norm().powi(2)) * q.vec().z.powi(2));
        }

        #[test]
        fn isometries_preserve_distance(g in arb_isom(), p in arb_point(), q in arb_point()) {
            let d = dist(p, q);
            prop_assert!((dist(g.act(p), g.act(q)) - d).abs() < 1e-8 * (1.0 + d));
        }

        #[test]
        fn group_exp_log_roundtrip(v in arb_vec()) {
            let g = group_exp(v);
            match group_log(&g) {
                Ok(w) => {
                    let back = group_exp(w);
                    prop_assert!(back.distance(&g) < 1e-9 * (1.0 + g.matrix().norm()));
                }
                Err(Error::LogBranch { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn hyperbolic_frames_are_eigenvectors(v in arb_vec()) {
            let g = group_exp(v);
            prop_assume!(g.classify() == Class::Hyperbolic && translation_length(&g) > 1e-3);
            let f = eigen_frame(&g).unwrap();
            prop_assert!(close(g.ad(f.c_plus), f.c_plus * f.mu, 1e-8));
            prop_assert!(close(g.ad(f.c_minus), f.c_minus * (1.0 / f.mu), 1e-8));
            prop_assert!(close(g.ad(f.c_zero), f.c_zero, 1e-8));
            prop_assert!(f.c_plus.z > 0.0 && f.c_minus.z > 0.0);
            prop_assert!(f.c_plus.norm_sq().abs() < 1e-10 && f.c_minus.norm_sq().abs() < 1e-10);
            let c = cross(f.c_minus, f.c_plus);
            prop_assert!(close(c * (1.0 / c.norm()), f.c_zero, 1e-9));
            prop_assert!((f.lambda - translation_length(&g)).abs() < 1e-12);
        }

        #[test]
        fn rotation_period(p in arb_point(), th in -3.0..3.0f64) {
            let r = rot_elem(p, th);
            prop_assert!(r.act(p).vec().eucl_norm() > 0.0 && dist(r.act(p), p) < 1e-8 * p.vec().z);
            let full = rot_elem(p, th + 2.0 * std::f64::consts::PI).compose(&r.inverse());
            prop_assert!(full.distance(&Isom::identity()) < 1e-8 * p.vec().z.powi(2));
        }

        #[test]
        fn killing_fields_are_equivariant(g in arb_isom(), x in arb_vec(), q in arb_point()) {
            let lhs = killing_eval(g.ad(x), g.act(q)).vec;
            let rhs = g.ad(killing_eval(x, q).vec);
            prop_assert!(close(lhs, rhs, 1e-8));
        }

        #[test]
        fn transvection_moves_origin(q in arb_point()) {
            let t = Isom::transvection_to(q);
            prop_assert!(dist(t.act(HPoint::origin()), q) < 1e-9);
            let (e1, e2) = frame_at(q);
            prop_assert!(mink(e1, q.vec()).abs() < 1e-9 * q.vec().z && mink(e2, q.vec()).abs() < 1e-9 * q.vec().z);
            prop_assert!(mink(e1, e2).abs() < 1e-9 * q.vec().z.powi(2));
            // Positively oriented: q ^ e1 = e2.
            prop_assert!(close(cross(q.vec(), e1), e2, 1e-9));
        }
    }
}
