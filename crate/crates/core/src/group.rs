//! Free groups, representations into PSL(2,R), cocycles and ping-pong.

use crate::error::{Error, Result};
use crate::lorentz::{
    cross, eigen_frame, group_exp, ideal_point, mink, Class, HPoint, Isom, MinkVec,
};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A word in a free group. Letter `k > 0` is generator `k - 1`, letter `-k`
/// its inverse. Words built through the public constructors are freely reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Word(Vec<i32>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn gen(i: usize) -> Self {
        Word(vec![i as i32 + 1])
    }

    pub fn gen_inv(i: usize) -> Self {
        Word(vec![-(i as i32 + 1)])
    }

    /// Freely reduces the given letters.
    pub fn from_letters(letters: &[i32]) -> Result<Self> {
        let mut out: Vec<i32> = Vec::with_capacity(letters.len());
        for &l in letters {
            if l == 0 {
                return Err(Error::InvalidInput("letter 0 is not a generator".into()));
            }
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(Word(out))
    }

    /// Parses `a`, `b`, ... with upper case for inverses, e.g. `"abAB"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for c in s.chars().filter(|c| !c.is_whitespace()) {
            let l = if c.is_ascii_lowercase() {
                (c as i32 - 'a' as i32) + 1
            } else if c.is_ascii_uppercase() {
                -((c as i32 - 'A' as i32) + 1)
            } else {
                return Err(Error::InvalidInput(format!("bad letter {c:?} in word {s:?}")));
            };
            letters.push(l);
        }
        Word::from_letters(&letters)
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rank_needed(&self) -> usize {
        self.0.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| -l).collect())
    }

    pub fn mul(&self, o: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&o.0);
        Word::from_letters(&v).expect("letters are nonzero")
    }

    pub fn pow(&self, n: u32) -> Word {
        let mut v = Vec::with_capacity(self.0.len() * n as usize);
        for _ in 0..n {
            v.extend_from_slice(&self.0);
        }
        Word::from_letters(&v).expect("letters are nonzero")
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.0.first(), self.0.last()) {
            (Some(a), Some(b)) => self.0.len() == 1 || *a != -*b,
            _ => true,
        }
    }

    /// The cyclically reduced word obtained by cancelling matching first and last letters.
    pub fn cyclic_core(&self) -> Word {
        let (mut i, mut j) = (0, self.0.len());
        while j - i >= 2 && self.0[i] == -self.0[j - 1] {
            i += 1;
            j -= 1;
        }
        Word(self.0[i..j].to_vec())
    }

    /// Cyclic rotation starting at letter `k`.
    pub fn rotate(&self, k: usize) -> Word {
        let n = self.0.len();
        Word((0..n).map(|i| self.0[(i + k) % n]).collect())
    }

    /// Lexicographically least cyclic rotation; the canonical conjugacy representative
    /// of a cyclically reduced word.
    pub fn canonical_rotation(&self) -> Word {
        (0..self.0.len().max(1)).map(|k| self.rotate(k)).min().unwrap_or_default()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for &l in &self.0 {
            let i = (l.unsigned_abs() - 1) as u8;
            let c = if l > 0 { b'a' + i } else { b'A' + i };
            write!(f, "{}", c as char)?;
        }
        Ok(())
    }
}

fn letters_of_rank(rank: usize) -> Vec<i32> {
    (1..=rank as i32).flat_map(|k| [k, -k]).collect()
}

/// All reduced words of length exactly `n`; there are 2r(2r-1)^(n-1) of them.
pub fn reduced_words(rank: usize, n: usize) -> Vec<Word> {
    if n == 0 {
        return vec![Word::identity()];
    }
    let alphabet = letters_of_rank(rank);
    let mut level: Vec<Vec<i32>> = alphabet.iter().map(|&l| vec![l]).collect();
    for _ in 1..n {
        let mut next = Vec::with_capacity(level.len() * (2 * rank - 1).max(1));
        for w in &level {
            let last = *w.last().unwrap();
            for &l in &alphabet {
                if l != -last {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        level = next;
    }
    level.into_iter().map(Word).collect()
}

/// Reduced words of length 1..=n.
pub fn reduced_words_up_to(rank: usize, n: usize) -> Vec<Word> {
    (1..=n).flat_map(|k| reduced_words(rank, k)).collect()
}

/// Canonical representatives of the conjugacy classes of nontrivial elements
/// whose cyclically reduced length is at most `n`, sorted by length then letters.
pub fn cyclic_classes(rank: usize, n: usize) -> Vec<Word> {
    let mut out = Vec::new();
    for k in 1..=n {
        let mut reps: Vec<Word> = reduced_words(rank, k)
            .into_iter()
            .filter(|w| w.is_cyclically_reduced())
            .filter(|w| w.canonical_rotation() == *w)
            .collect();
        reps.sort();
        out.extend(reps);
    }
    out
}

/// Images of the free generators; evaluation multiplies left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    gens: Vec<Isom>,
}

impl Representation {
    pub fn new(gens: Vec<Isom>) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::InvalidInput("a representation needs at least one generator".into()));
        }
        Ok(Representation { gens })
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn gens(&self) -> &[Isom] {
        &self.gens
    }

    pub fn letter(&self, l: i32) -> Isom {
        let g = self.gens[(l.unsigned_abs() - 1) as usize];
        if l > 0 {
            g
        } else {
            g.inverse()
        }
    }

    pub fn eval(&self, w: &Word) -> Isom {
        let mut m = *Isom::identity().matrix();
        for &l in w.letters() {
            m *= self.letter(l).matrix();
        }
        Isom::from_matrix_unchecked(m)
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        if w.rank_needed() > self.rank() {
            return Err(Error::InvalidInput(format!("word {w} uses a generator beyond rank {}", self.rank())));
        }
        Ok(())
    }
}

/// A cocycle for the adjoint action, stored by its values on the generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cocycle {
    values: Vec<MinkVec>,
}

impl Cocycle {
    pub fn new(values: Vec<MinkVec>) -> Self {
        Cocycle { values }
    }

    pub fn values(&self) -> &[MinkVec] {
        &self.values
    }

    /// u(g) = X0 - Ad(g) X0.
    pub fn coboundary(rep: &Representation, x0: MinkVec) -> Self {
        Cocycle { values: rep.gens().iter().map(|g| x0 - g.ad(x0)).collect() }
    }

    /// Cocycle with u(g_i) = l_i c_zero(g_i): the Margulis invariant of g_i is l_i.
    pub fn length_derivative(rep: &Representation, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != rep.rank() {
            return Err(Error::InvalidInput("one length derivative per generator is required".into()));
        }
        let mut values = Vec::with_capacity(lengths.len());
        for (g, &l) in rep.gens().iter().zip(lengths) {
            values.push(eigen_frame(g)?.c_zero * l);
        }
        Ok(Cocycle { values })
    }

    pub fn letter(&self, rep: &Representation, l: i32) -> MinkVec {
        let i = (l.unsigned_abs() - 1) as usize;
        if l > 0 {
            self.values[i]
        } else {
            -rep.gens()[i].inverse().ad(self.values[i])
        }
    }

    pub fn add(&self, o: &Cocycle) -> Cocycle {
        Cocycle { values: self.values.iter().zip(&o.values).map(|(a, b)| *a + *b).collect() }
    }

    pub fn scale(&self, s: f64) -> Cocycle {
        Cocycle { values: self.values.iter().map(|a| *a * s).collect() }
    }
}

/// u(w) via u(ab) = u(a) + Ad(j(a)) u(b).
pub fn eval_cocycle(rep: &Representation, u: &Cocycle, w: &Word) -> MinkVec {
    let mut prefix = Isom::identity();
    let mut acc = MinkVec::zero();
    for &l in w.letters() {
        acc += prefix.ad(u.letter(rep, l));
        prefix = prefix.compose(&rep.letter(l));
    }
    acc
}

/// The affine action (Ad(j(w)), u(w)) applied to a point of R^{2,1}.
pub fn affine_act(rep: &Representation, u: &Cocycle, w: &Word, x: MinkVec) -> MinkVec {
    rep.eval(w).ad(x) + eval_cocycle(rep, u, w)
}

/// The deformation rho_t: g_i -> exp(t u(g_i)) j(g_i).
pub fn deform(rep: &Representation, u: &Cocycle, t: f64) -> Representation {
    let gens = rep
        .gens()
        .iter()
        .zip(u.values())
        .map(|(g, v)| group_exp(*v * t).compose(g))
        .collect();
    Representation { gens }
}

/// A half-plane {q : <q|normal> > 0} with unit spacelike normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub normal: MinkVec,
}

impl HalfPlane {
    /// Points strictly closer to `a` than to `b`.
    pub fn bisector(a: HPoint, b: HPoint) -> Self {
        // Q(a - b) = -2 - 2<a|b> exactly; avoids cancellation for distant points.
        let n = a.vec() - b.vec();
        let q = -2.0 - 2.0 * mink(a.vec(), b.vec());
        HalfPlane { normal: n * (1.0 / q.sqrt()) }
    }

    pub fn signed_dist(&self, q: HPoint) -> f64 {
        mink(q.vec(), self.normal).asinh()
    }

    pub fn contains(&self, q: HPoint) -> bool {
        mink(q.vec(), self.normal) > 0.0
    }

    /// Distance between the boundary geodesics of two half-planes with
    /// disjoint closures, or None when the closures meet.
    pub fn separation(&self, o: &HalfPlane) -> Option<f64> {
        let c = -mink(self.normal, o.normal);
        (c > 1.0).then(|| c.acosh())
    }
}

/// Ping-pong data: for generator i the half-planes `plus[i]` and `minus[i]`
/// satisfy g_i(complement of minus[i]) = closure of plus[i], and all 2r
/// closures are pairwise disjoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingPongCertificate {
    pub center: HPoint,
    pub plus: Vec<HalfPlane>,
    pub minus: Vec<HalfPlane>,
    pub min_separation: f64,
    pub boundary_samples: usize,
}

fn ping_pong_at(rep: &Representation, c: HPoint) -> Option<(Vec<HalfPlane>, Vec<HalfPlane>, f64)> {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for g in rep.gens() {
        if g.classify() != Class::Hyperbolic {
            return None;
        }
        plus.push(HalfPlane::bisector(g.act(c), c));
        minus.push(HalfPlane::bisector(g.inverse().act(c), c));
    }
    let all: Vec<&HalfPlane> = plus.iter().chain(minus.iter()).collect();
    let mut min_sep = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            min_sep = min_sep.min(all[i].separation(all[j])?);
        }
    }
    Some((plus, minus, min_sep))
}

fn candidate_centers(rep: &Representation) -> Vec<HPoint> {
    let mut c = vec![HPoint::origin()];
    for g in rep.gens() {
        if let Ok(f) = eigen_frame(g) {
            c.push(f.axis_point);
        }
    }
    for k in 1..=6 {
        let r = 0.25 * k as f64;
        for j in 0..12 {
            c.push(HPoint::from_polar(r, std::f64::consts::PI * j as f64 / 6.0));
        }
    }
    c
}

/// Searches a fixed list of centers for disjoint bisector half-planes and checks
/// the ping-pong inclusions on `samples` ideal points per generator.
pub fn ping_pong_check(rep: &Representation, samples: usize) -> Result<PingPongCertificate> {
    let mut best: Option<(HPoint, Vec<HalfPlane>, Vec<HalfPlane>, f64)> = None;
    for c in candidate_centers(rep) {
        if let Some((p, m, s)) = ping_pong_at(rep, c) {
            if best.as_ref().map_or(true, |b| s > b.3 + 1e-12) {
                best = Some((c, p, m, s));
            }
        }
    }
    let (center, plus, minus, min_separation) =
        best.ok_or_else(|| Error::PingPongFailed("no candidate center gives disjoint half-planes".into()))?;
    let mut checked = 0;
    for (i, g) in rep.gens().iter().enumerate() {
        for k in 0..samples {
            let z = ideal_point(2.0 * std::f64::consts::PI * (k as f64 + 0.5) / samples as f64);
            if mink(z, minus[i].normal) > 0.0 {
                continue;
            }
            let gz = g.ad(z);
            if mink(gz, plus[i].normal) < -1e-9 * gz.eucl_norm() {
                return Err(Error::PingPongFailed(format!("inclusion fails for generator {i}")));
            }
            checked += 1;
        }
    }
    Ok(PingPongCertificate { center, plus, minus, min_separation, boundary_samples: checked })
}

/// Translation along the geodesic perpendicular to the x-axis at signed
/// distance `offset` from the origin, by `length`.
pub fn ultraparallel_translation(offset: f64, length: f64) -> Isom {
    // Geodesic {<q|n> = 0} with n = (cosh s, 0, sinh s); its translations are generated by n.
    let n = MinkVec::new(offset.cosh(), 0.0, offset.sinh());
    group_exp(n * length)
}

/// Unit Killing vector generating translation along the geodesic through the
/// origin in direction angle `theta`.
pub fn translation_generator(theta: f64) -> MinkVec {
    cross(MinkVec::e3(), MinkVec::new(theta.cos(), theta.sin(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{translation_length, HPoint};
    use proptest::prelude::*;

    fn torus_rep(l: f64) -> Representation {
        Representation::new(vec![
            group_exp(translation_generator(0.0) * l),
            group_exp(translation_generator(std::f64::consts::FRAC_PI_2) * l),
        ])
        .unwrap()
    }

    #[test]
    fn word_counts() {
        assert_eq!(reduced_words(2, 2).len(), 12);
        for n in 1..=6 {
            assert_eq!(reduced_words(2, n).len(), 4 * 3usize.pow(n as u32 - 1));
            assert_eq!(reduced_words(3, n).len(), 6 * 5usize.pow(n as u32 - 1));
        }
    }

    #[test]
    fn cyclic_class_counts() {
        // Necklace counts of cyclically reduced words in F2 up to rotation:
        // length 1: 4, length 2: a^2, b^2, A^2, B^2, ab, aB, Ab, AB -> 8.
        let c = cyclic_classes(2, 2);
        assert_eq!(c.iter().filter(|w| w.len() == 1).count(), 4);
        assert_eq!(c.iter().filter(|w| w.len() == 2).count(), 8);
        for w in &c {
            assert!(w.is_cyclically_reduced());
        }
    }

    #[test]
    fn parse_and_display() {
        let w = Word::parse("abAB").unwrap();
        assert_eq!(w.letters(), &[1, 2, -1, -2]);
        assert_eq!(w.to_string(), "abAB");
        assert_eq!(Word::parse("aA").unwrap(), Word::identity());
        assert!(Word::parse("a1").is_err());
    }

    #[test]
    fn translation_generator_has_unit_speed() {
        let g = group_exp(translation_generator(0.4) * 1.3);
        assert!((translation_length(&g) - 1.3).abs() < 1e-12);
        let f = eigen_frame(&g).unwrap();
        assert!(crate::lorentz::dist(f.axis_point, HPoint::origin()) < 1e-9);
        let h = ultraparallel_translation(1.5, 2.0);
        assert!((translation_length(&h) - 2.0).abs() < 1e-12);
        assert!((crate::lorentz::dist(eigen_frame(&h).unwrap().axis_point, HPoint::origin()) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn ping_pong_on_ultraparallel_pair() {
        let rep = Representation::new(vec![
            ultraparallel_translation(-1.5, 6.0),
            ultraparallel_translation(1.5, 6.0),
        ])
        .unwrap();
        let cert = ping_pong_check(&rep, 256).unwrap();
        assert!(cert.min_separation > 0.0);
        assert!(cert.boundary_samples > 0);
    }

    #[test]
    fn ping_pong_fails_on_short_crossing_axes() {
        // Below the cusped threshold 2 asinh(1) the crossing-axes group is not Schottky.
        assert!(ping_pong_check(&torus_rep(1.5), 64).is_err());
        assert!(ping_pong_check(&torus_rep(2.5), 64).is_ok());
    }

    #[test]
    fn coboundary_cocycle_matches_formula() {
        let rep = torus_rep(2.5);
        let x0 = MinkVec::new(0.3, -0.2, 0.5);
        let u = Cocycle::coboundary(&rep, x0);
        for w in reduced_words_up_to(2, 4) {
            let direct = x0 - rep.eval(&w).ad(x0);
            let v = eval_cocycle(&rep, &u, &w);
            assert!((v - direct).eucl_norm() < 1e-9 * (1.0 + direct.eucl_norm()));
        }
    }

    #[test]
    fn deformation_derivative_is_cocycle() {
        let rep = torus_rep(2.5);
        let u = Cocycle::new(vec![MinkVec::new(0.2, 0.1, -0.3), MinkVec::new(-0.4, 0.5, 0.1)]);
        let t = 1e-5;
        for w in reduced_words_up_to(2, 3) {
            let j = rep.eval(&w);
            let p = deform(&rep, &u, t).eval(&w).compose(&j.inverse());
            let m = deform(&rep, &u, -t).eval(&w).compose(&j.inverse());
            let d = (crate::lorentz::group_log(&p).unwrap() - crate::lorentz::group_log(&m).unwrap()) * (0.5 / t);
            let v = eval_cocycle(&rep, &u, &w);
            assert!((d - v).eucl_norm() < 1e-5 * (1.0 + v.eucl_norm()), "{w}: {d:?} vs {v:?}");
        }
    }

    fn arb_word(rank: usize, max: usize) -> impl Strategy<Value = Word> {
        proptest::collection::vec((1..=rank as i32, proptest::bool::ANY), 0..=max).prop_map(|v| {
            let letters: Vec<i32> = v.into_iter().map(|(k, s)| if s { k } else { -k }).collect();
            Word::from_letters(&letters).unwrap()
        })
    }

    proptest! {
        #[test]
        fn cocycle_rule(a in arb_word(2, 5), b in arb_word(2, 5)) {
            let rep = torus_rep(2.5);
            let u = Cocycle::new(vec![MinkVec::new(0.2, 0.1, -0.3), MinkVec::new(-0.4, 0.5, 0.1)]);
            let lhs = eval_cocycle(&rep, &u, &a.mul(&b));
            let rhs = eval_cocycle(&rep, &u, &a) + rep.eval(&a).ad(eval_cocycle(&rep, &u, &b));
            let scale = (1.0 + rep.eval(&a).lorentz().norm()) * (1.0 + rep.eval(&b).lorentz().norm());
            prop_assert!((lhs - rhs).eucl_norm() < 1e-12 * scale);
            let inv = eval_cocycle(&rep, &u, &a.inverse());
            let expect = -rep.eval(&a).inverse().ad(eval_cocycle(&rep, &u, &a));
            let na = 1.0 + rep.eval(&a).lorentz().norm();
            prop_assert!((inv - expect).eucl_norm() < 1e-12 * na * na);
        }

        #[test]
        fn eval_is_homomorphism(a in arb_word(2, 5), b in arb_word(2, 5)) {
            let rep = torus_rep(2.5);
            let lhs = rep.eval(&a.mul(&b));
            let rhs = rep.eval(&a).compose(&rep.eval(&b));
            // Free cancellation between a and b costs accuracy relative to |j(a)||j(b)|.
            let scale = rep.eval(&a).matrix().norm() * rep.eval(&b).matrix().norm();
            prop_assert!(lhs.distance(&rhs) < 1e-13 * scale);
        }

        #[test]
        fn canonical_rotation_is_class_invariant(w in arb_word(2, 7), k in 0usize..7) {
            prop_assume!(!w.is_empty() && w.is_cyclically_reduced());
            prop_assert_eq!(w.rotate(k % w.len()).canonical_rotation(), w.canonical_rotation());
        }
    }
}
