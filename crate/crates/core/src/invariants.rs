//! Margulis invariants, the k_alpha scan and non-properness witnesses.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::group::{cyclic_classes, deform, eval_cocycle, Cocycle, Representation, Word};
use crate::lorentz::{cross, eigen_frame, mink, translation_length, EigenFrame, HPoint, MinkVec};
use crate::par::Exec;
use serde::{Deserialize, Serialize};

/// Tolerance below which a Margulis invariant counts as zero.
pub const ALPHA_ZERO_TOL: f64 = 1e-9;

/// alpha_u(w) = <u(w) | c_zero(w)>, evaluated as the cyclic sum
/// sum_k <u(s_k) | c_zero(s_k ... s_n s_1 ... s_{k-1})>, which is the same
/// quantity but never forms the exponentially large vector u(w).
pub fn margulis_alpha(rep: &Representation, u: &Cocycle, w: &Word) -> Result<f64> {
    rep.check_word(w)?;
    let w = &w.cyclic_core();
    if w.is_empty() {
        return Err(Error::NotHyperbolic { trace: 2.0 });
    }
    let mut acc = 0.0;
    for (k, &l) in w.letters().iter().enumerate() {
        let f = eigen_frame(&rep.eval(&w.rotate(k)))?;
        acc += mink(u.letter(rep, l), f.c_zero);
    }
    Ok(acc)
}

/// alpha_u(w) straight from the definition.
pub fn margulis_alpha_direct(rep: &Representation, u: &Cocycle, w: &Word) -> Result<f64> {
    rep.check_word(w)?;
    let f = eigen_frame(&rep.eval(w))?;
    Ok(mink(eval_cocycle(rep, u, w), f.c_zero))
}

/// Central difference of the translation length of rho_t(w) at t = 0.
pub fn margulis_alpha_fd(rep: &Representation, u: &Cocycle, w: &Word, step: f64) -> Result<f64> {
    rep.check_word(w)?;
    let g = rep.eval(w);
    if translation_length(&g) == 0.0 {
        return Err(Error::NotHyperbolic { trace: g.trace().abs() });
    }
    let lp = translation_length(&deform(rep, u, step).eval(w));
    let lm = translation_length(&deform(rep, u, -step).eval(w));
    Ok((lp - lm) / (2.0 * step))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignStatus {
    AllPositive,
    AllNegative,
    Mixed,
    HasZero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub word: String,
    pub alpha: f64,
    pub lambda: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignProfile {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaScan {
    pub depth: usize,
    pub k_alpha: f64,
    pub argmax: String,
    pub status: SignStatus,
    pub signs: SignProfile,
    /// (n, k_alpha_n) for n = 1..=depth.
    pub depth_profile: Vec<(usize, f64)>,
    pub entries: Vec<AlphaEntry>,
    /// A pair (positive word, negative word) or a zero word when present.
    pub positive_example: Option<String>,
    pub negative_example: Option<String>,
    pub zero_example: Option<String>,
}

/// sup alpha/lambda over conjugacy classes of cyclically reduced length <= depth.
pub fn k_alpha_scan(rep: &Representation, u: &Cocycle, depth: usize, exec: Exec) -> Result<AlphaScan> {
    if depth == 0 {
        return Err(Error::InvalidInput("scan depth must be positive".into()));
    }
    let classes = cyclic_classes(rep.rank(), depth);
    let rows: Vec<Result<(Word, f64, f64)>> = exec.map(&classes, |w| {
        let lambda = translation_length(&rep.eval(w));
        let alpha = margulis_alpha(rep, u, w)?;
        Ok((w.clone(), alpha, lambda))
    });
    let mut entries = Vec::with_capacity(rows.len());
    let mut signs = SignProfile { positive: 0, negative: 0, zero: 0 };
    let (mut pos, mut neg, mut zero) = (None, None, None);
    let mut profile: Vec<(usize, f64)> = Vec::new();
    let mut best = (f64::NEG_INFINITY, String::new());
    for r in rows {
        let (w, alpha, lambda) = r?;
        let name = w.to_string();
        if alpha.abs() <= ALPHA_ZERO_TOL * lambda.max(1.0) {
            signs.zero += 1;
            zero.get_or_insert(name.clone());
        } else if alpha > 0.0 {
            signs.positive += 1;
            pos.get_or_insert(name.clone());
        } else {
            signs.negative += 1;
            neg.get_or_insert(name.clone());
        }
        let ratio = alpha / lambda;
        if ratio > best.0 {
            best = (ratio, name.clone());
        }
        match profile.last_mut() {
            Some(last) if last.0 == w.len() => last.1 = best.0,
            _ => {
                for n in profile.len() + 1..w.len() {
                    profile.push((n, profile.last().map_or(f64::NEG_INFINITY, |l| l.1)));
                }
                profile.push((w.len(), best.0));
            }
        }
        entries.push(AlphaEntry { word: name, alpha, lambda, ratio });
    }
    let status = if signs.zero > 0 {
        SignStatus::HasZero
    } else if signs.positive > 0 && signs.negative > 0 {
        SignStatus::Mixed
    } else if signs.positive > 0 {
        SignStatus::AllPositive
    } else {
        SignStatus::AllNegative
    };
    Ok(AlphaScan {
        depth,
        k_alpha: best.0,
        argmax: best.1,
        status,
        signs,
        depth_profile: profile,
        entries,
        positive_example: pos,
        negative_example: neg,
        zero_example: zero,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// All ratios >= delta: proper after replacing u by -u.
    EvidenceProperAfterFlip,
    /// All ratios <= -delta.
    EvidenceProper,
    Nonproper,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProperVerdict {
    pub depth: usize,
    pub k_alpha: f64,
    /// inf alpha/lambda over the scan.
    pub min_ratio: f64,
    pub delta: f64,
    pub signs: SignStatus,
    pub status: Verdict,
    pub witness: Option<NonProperWitness>,
    pub fixed_point: Option<FixedPointWitness>,
}

/// Classifies a scan. Mixed signs or a zero give `Nonproper`, with a witness
/// orbit or affine fixed point attached when one can be built.
pub fn proper_verdict(rep: &Representation, u: &Cocycle, scan: &AlphaScan, delta: f64, n_max: u32) -> Result<ProperVerdict> {
    let min_ratio = scan.entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let (mut witness, mut fixed_point) = (None, None);
    let status = match scan.status {
        SignStatus::Mixed => {
            let a = Word::parse(scan.positive_example.as_deref().unwrap_or_default())?;
            let b = Word::parse(scan.negative_example.as_deref().unwrap_or_default())?;
            witness = nonproper_witness(rep, u, &a, &b, n_max).ok();
            Verdict::Nonproper
        }
        SignStatus::HasZero => {
            let w = Word::parse(scan.zero_example.as_deref().unwrap_or_default())?;
            fixed_point = fixed_point_witness(rep, u, &w).ok();
            Verdict::Nonproper
        }
        _ if scan.k_alpha <= -delta => Verdict::EvidenceProper,
        _ if min_ratio >= delta => Verdict::EvidenceProperAfterFlip,
        _ => Verdict::Inconclusive,
    };
    Ok(ProperVerdict {
        depth: scan.depth,
        k_alpha: scan.k_alpha,
        min_ratio,
        delta,
        signs: scan.status,
        status,
        witness,
        fixed_point,
    })
}

/// Decomposition of R^{2,1} along an eigenframe: v = p c_plus + m c_minus + z c_zero.
fn frame_coords(f: &EigenFrame, v: MinkVec) -> (f64, f64, f64) {
    (-0.5 * mink(v, f.c_minus), -0.5 * mink(v, f.c_plus), mink(v, f.c_zero))
}

/// The affine axis of (Ad(j(w)), u(w)): the unique invariant line, on which the
/// action is translation by alpha along c_zero. Returns (point, frame, alpha).
fn affine_axis(rep: &Representation, u: &Cocycle, w: &Word) -> Result<(MinkVec, EigenFrame, f64)> {
    let f = eigen_frame(&rep.eval(w))?;
    let (up, um, alpha) = frame_coords(&f, eval_cocycle(rep, u, w));
    let xp = up / (1.0 - f.mu);
    let xm = um / (1.0 - 1.0 / f.mu);
    Ok((f.c_plus * xp + f.c_minus * xm, f, alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub n: u32,
    pub m: u32,
    /// Point near the seed that the element b^m a^n moves to `point`.
    pub source: MinkVec,
    pub point: MinkVec,
    pub displacement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonProperWitness {
    /// Word with positive invariant (possibly inverted to fit the frame).
    pub alpha_word: String,
    /// Word with negative invariant.
    pub beta_word: String,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub seed: MinkVec,
    pub rows: Vec<WitnessRow>,
    pub bound: f64,
    pub bounded: bool,
    /// Largest distance of the intersection line points from the stable plane.
    pub plane_residual: f64,
}

impl NonProperWitness {
    pub fn displacement_ratio(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.displacement).fold(0.0, f64::max);
        let min = self.rows.iter().map(|r| r.displacement).fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Closest points of two lines in the Euclidean metric of R^3.
fn common_perpendicular(p: MinkVec, d: MinkVec, q: MinkVec, e: MinkVec) -> (f64, f64) {
    let dot = |a: MinkVec, b: MinkVec| a.x * b.x + a.y * b.y + a.z * b.z;
    let r = p - q;
    let (a, b, c) = (dot(d, d), dot(d, e), dot(e, e));
    let (dd, ee) = (dot(d, r), dot(e, r));
    let den = a * c - b * b;
    if den.abs() < 1e-14 * a * c {
        return (0.0, ee / c);
    }
    ((b * ee - c * dd) / den, (a * ee - b * dd) / den)
}

/// Explicit element sequence beta^m alpha^n moving a compact set back to a
/// bounded region, for alpha_u(a) > 0 > alpha_u(b). Iterates are evaluated in
/// the eigen-coordinates of the two affine axes because the matrix powers
/// overflow double precision long before n = 40.
pub fn nonproper_witness(rep: &Representation, u: &Cocycle, a: &Word, b: &Word, n_max: u32) -> Result<NonProperWitness> {
    let aa = margulis_alpha(rep, u, a)?;
    let ab = margulis_alpha(rep, u, b)?;
    if !(aa > ALPHA_ZERO_TOL && ab < -ALPHA_ZERO_TOL) {
        return Err(Error::Precondition(format!("need alpha(a) > 0 > alpha(b), got {aa:e} and {ab:e}")));
    }
    let mut last_err = Error::FrameDegenerate("no orientation of the pair gives a transverse frame".into());
    for (wa, wb) in [(a.clone(), b.clone()), (a.inverse(), b.clone()), (a.clone(), b.inverse()), (a.inverse(), b.inverse())] {
        match witness_for(rep, u, &wa, &wb, n_max) {
            Ok(w) => return Ok(w),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn witness_for(rep: &Representation, u: &Cocycle, a: &Word, b: &Word, n_max: u32) -> Result<NonProperWitness> {
    let (pa, fa, alpha_a) = affine_axis(rep, u, a)?;
    let (pb, fb, alpha_b) = affine_axis(rep, u, b)?;
    let d = cross(fa.c_plus, fb.c_minus);
    let dn = d.norm_sq();
    let m0 = mink(fa.c_plus, fb.c_minus);
    if dn <= 1e-20 || m0.abs() < 1e-12 {
        return Err(Error::FrameDegenerate("unstable direction of a is parallel to stable direction of b".into()));
    }
    let mut d = d * (1.0 / dn.sqrt());
    if mink(fa.c_zero, d) < 0.0 {
        d = -d;
    }
    let ax = mink(fa.c_zero, d);
    let bx = mink(fb.c_zero, d);
    if ax < 1e-9 || bx < 1e-9 {
        return Err(Error::FrameDegenerate("axis directions are not co-oriented along the intersection line".into()));
    }
    // Base point of the intersection of the unstable plane of a and the stable plane of b.
    let o = fa.c_plus * (mink(pb, fb.c_minus) / m0) + fb.c_minus * (mink(pa, fa.c_plus) / m0);

    // Seed on A one unit past the foot of the common perpendicular of the two
    // axes. The foot itself can coincide with the limit point on B, and then
    // the displacements decay to zero instead of staying comparable.
    let (sa, _) = common_perpendicular(pa, fa.c_zero, pb, fb.c_zero);
    let s0 = sa + 1.0;
    let seed = pa + fa.c_zero * s0;

    let s_o = mink(o - pa, fa.c_zero);
    let r_o = -0.5 * mink(o - pa, fa.c_minus);
    let c_a = 0.5 * ax * mink(d, fa.c_minus);

    let mut rows = Vec::new();
    let mut plane_residual: f64 = 0.0;
    for n in 1..=n_max {
        let nf = n as f64;
        let tau = ax * (s0 + nf * alpha_a - s_o);
        let r_n = (-nf * fa.lambda).exp() * (r_o - tau * c_a / ax);
        let v_n = pa + fa.c_zero * s0 + fa.c_plus * r_n;
        let p_n = o + d * tau;
        plane_residual = plane_residual.max(mink(p_n - pb, fb.c_minus).abs() / (1.0 + (p_n - pb).eucl_norm()));
        let m = ((nf * ax * alpha_a) / (bx * alpha_b.abs())).floor().max(0.0) as u32;
        let s = mink(p_n - pb, fb.c_zero);
        let r = -0.5 * mink(p_n - pb, fb.c_plus);
        let q = pb + fb.c_zero * (s + m as f64 * alpha_b) + fb.c_minus * ((-(m as f64) * fb.lambda).exp() * r);
        rows.push(WitnessRow { n, m, source: v_n, point: q, displacement: (q - v_n).eucl_norm() });
    }
    let initial = seed.eucl_norm().max(rows.first().map_or(0.0, |r| r.displacement));
    let bound = 10.0 * initial;
    let bounded = rows.iter().all(|r| r.displacement <= bound);
    Ok(NonProperWitness {
        alpha_word: a.to_string(),
        beta_word: b.to_string(),
        alpha_a,
        alpha_b,
        seed,
        rows,
        bound,
        bounded,
        plane_residual,
    })
}

/// Evaluates the iterate of the witness for small n directly with the affine
/// action, for cross-checking the eigen-coordinate evaluation.
pub fn witness_point_direct(rep: &Representation, u: &Cocycle, a: &Word, b: &Word, n: u32, m: u32, v: MinkVec) -> MinkVec {
    let w = b.pow(m).mul(&a.pow(n));
    crate::group::affine_act(rep, u, &w, v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointWitness {
    pub word: String,
    pub point: MinkVec,
    pub residual: f64,
}

/// Solves (Id - Ad(j(w))) X = u(w) in the complement of c_zero; for alpha = 0
/// the result is a fixed point of the affine action.
pub fn fixed_point_witness(rep: &Representation, u: &Cocycle, w: &Word) -> Result<FixedPointWitness> {
    let (x, _, _) = affine_axis(rep, u, w)?;
    let g = rep.eval(w);
    let r = g.ad(x) + eval_cocycle(rep, u, w) - x;
    Ok(FixedPointWitness { word: w.to_string(), point: x, residual: r.eucl_norm() })
}

/// Point on the axis of j(w) at arclength s from the foot point, and the unit tangent there.
fn axis_at(f: &EigenFrame, s: f64) -> (HPoint, MinkVec) {
    let (b, e) = (f.axis_point.vec(), f.axis_tangent());
    let p = HPoint::lift(b * s.cosh() + e * s.sinh());
    (p, cross(f.c_zero, p.vec()))
}

/// Integral over one period of the axis of j(w) of the derivative of the axial
/// component nu(s) = <X(p(s)), T(s)>; by equivariance it equals alpha_u(w).
/// nu' is a central difference with step `fd_step` and the integral is
/// adaptive Gauss-Legendre.
pub fn nu_integral_alpha(field: &dyn VectorField, rep: &Representation, w: &Word, tol: f64) -> Result<f64> {
    rep.check_word(w)?;
    let f = eigen_frame(&rep.eval(w))?;
    let fd_step = 1e-5;
    let nu = |s: f64| -> Result<f64> {
        let (p, t) = axis_at(&f, s);
        Ok(mink(field.eval(p)?.vec, t))
    };
    let dnu = |s: f64| -> Result<f64> { Ok((nu(s + fd_step)? - nu(s - fd_step)?) / (2.0 * fd_step)) };
    adaptive_gauss(&dnu, 0.0, f.lambda, tol, 0)
}

const GL_X: [f64; 5] = [0.0, 0.5384693101056831, -0.5384693101056831, 0.906179845938664, -0.906179845938664];
const GL_W: [f64; 5] = [0.5688888888888889, 0.47862867049936647, 0.47862867049936647, 0.23692688505618908, 0.23692688505618908];

fn gauss5(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for k in 0..5 {
        s += GL_W[k] * f(m + r * GL_X[k])?;
    }
    Ok(s * r)
}

fn adaptive_gauss(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let whole = gauss5(f, a, b)?;
    let m = 0.5 * (a + b);
    let halves = gauss5(f, a, m)? + gauss5(f, m, b)?;
    if (whole - halves).abs() <= tol || depth >= 24 {
        return Ok(halves);
    }
    Ok(adaptive_gauss(f, a, m, 0.5 * tol, depth + 1)? + adaptive_gauss(f, m, b, 0.5 * tol, depth + 1)?)
}
