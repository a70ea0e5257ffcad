//! Dirichlet fundamental domains of Schottky groups and their triangulation.
//!
//! The domain at a ping-pong center c is the region outside the 2r bisector
//! half-planes of the generators, truncated to the disk of radius R about c.
//! In Klein coordinates centred at c this region is convex, so a Delaunay
//! triangulation of the sample points consists of geodesic triangles.

use crate::error::{Error, Result};
use crate::group::{cyclic_classes, reduced_words_up_to, HalfPlane, Representation, Word};
use crate::lorentz::{cross, dist, eigen_frame, mink, HPoint, Isom, MinkVec};
use crate::par::Exec;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    Interior,
    /// On the truncation circle.
    Boundary,
    /// On the wall of face `minus[gen]`; carries free data.
    Wall { gen: usize },
    /// On a generator axis strictly inside the domain.
    Axis { gen: usize },
    /// g_gen applied to the wall vertex `source`; lies on the wall of `plus[gen]`.
    Image { source: usize, gen: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Letter whose translate of the domain lies across this face.
    pub letter: i32,
    pub plane: HalfPlane,
}

/// Chain of collinear vertices along the axis of `gen`, from the wall of
/// `minus[gen]` to its image on the wall of `plus[gen]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisChain {
    pub gen: usize,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DirichletDomain {
    pub rep: Representation,
    pub center: HPoint,
    pub radius: f64,
    pub h: f64,
    pub faces: Vec<Face>,
    pub vertices: Vec<HPoint>,
    pub kinds: Vec<VertexKind>,
    pub triangles: Vec<[usize; 3]>,
    pub axis_chains: Vec<AxisChain>,
    pub core_radius: f64,
    to_local: Isom,
    tri_inv: Vec<Matrix3<f64>>,
    grid: Grid,
}

#[derive(Clone, Debug)]
struct Grid {
    n: usize,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn cell(&self, u: f64) -> usize {
        (((u + 1.0) * 0.5 * self.n as f64).floor().max(0.0) as usize).min(self.n - 1)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DomainOptions {
    pub word_depth: usize,
    /// Truncation radius; `None` uses the core estimate plus one.
    pub radius: Option<f64>,
    pub h: f64,
}

impl Default for DomainOptions {
    fn default() -> Self {
        DomainOptions { word_depth: 4, radius: None, h: 0.1 }
    }
}

/// Faces of the Dirichlet domain at `c`, ordered plus[0], minus[0], plus[1], ...
pub fn generator_faces(rep: &Representation, c: HPoint) -> Vec<Face> {
    let mut faces = Vec::new();
    for (i, g) in rep.gens().iter().enumerate() {
        let k = i as i32 + 1;
        faces.push(Face { letter: k, plane: HalfPlane::bisector(g.act(c), c) });
        faces.push(Face { letter: -k, plane: HalfPlane::bisector(g.inverse().act(c), c) });
    }
    faces
}

fn half_plane_inside(a: &HalfPlane, b: &HalfPlane, c: HPoint) -> bool {
    // a is contained in b iff the boundaries do not cross and the foot of a's
    // boundary (seen from c) lies in b.
    if mink(a.normal, b.normal) < 1.0 {
        return false;
    }
    let foot = HPoint::renorm(c.vec() - a.normal * mink(c.vec(), a.normal));
    mink(foot.vec(), b.normal) > 0.0
}

/// Interval of the axis parameter where the axis lies in the closed domain.
fn axis_interval(faces: &[Face], b: MinkVec, e: MinkVec) -> Option<(f64, f64)> {
    // <a(xi)|n> / cosh(xi) = <b|n> + tanh(xi) <e|n> is affine in tau = tanh(xi).
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for f in faces {
        let bb = mink(b, f.plane.normal);
        let ee = mink(e, f.plane.normal);
        if ee.abs() < 1e-300 {
            if bb > 0.0 {
                return None;
            }
            continue;
        }
        let tau = -bb / ee;
        if ee > 0.0 {
            hi = hi.min(tau);
        } else {
            lo = lo.max(tau);
        }
    }
    (lo < hi && lo > -1.0 && hi < 1.0).then(|| (lo.atanh(), hi.atanh()))
}

fn axis_point(b: MinkVec, e: MinkVec, xi: f64) -> HPoint {
    HPoint::renorm(b * xi.cosh() + e * xi.sinh())
}

/// Largest distance from `c` to the part inside the domain of the axis of a
/// cyclically reduced word of length at most `depth`.
pub fn core_radius_estimate(rep: &Representation, c: HPoint, faces: &[Face], depth: usize) -> f64 {
    let mut r: f64 = 0.0;
    for w in cyclic_classes(rep.rank(), depth) {
        let Ok(f) = eigen_frame(&rep.eval(&w)) else { continue };
        let (b, e) = (f.axis_point.vec(), f.axis_tangent());
        if let Some((x0, x1)) = axis_interval(faces, b, e) {
            r = r.max(dist(c, axis_point(b, e, x0))).max(dist(c, axis_point(b, e, x1)));
        }
    }
    r
}

fn inside(faces: &[Face], q: HPoint, margin: f64) -> bool {
    faces.iter().all(|f| f.plane.signed_dist(q) < -margin)
}

impl DirichletDomain {
    pub fn new(rep: &Representation, center: HPoint, opts: DomainOptions) -> Result<Self> {
        let h = opts.h;
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidInput(format!("mesh size {h} outside (0, 1)")));
        }
        let faces = generator_faces(rep, center);
        for i in 0..faces.len() {
            for j in i + 1..faces.len() {
                if faces[i].plane.separation(&faces[j].plane).is_none() {
                    return Err(Error::PingPongFailed(format!(
                        "faces {} and {} meet at this center",
                        faces[i].letter, faces[j].letter
                    )));
                }
            }
        }
        // Longer words must not contribute faces.
        for w in reduced_words_up_to(rep.rank(), opts.word_depth) {
            if w.len() < 2 {
                continue;
            }
            let hp = HalfPlane::bisector(rep.eval(&w).act(center), center);
            let first = w.letters()[0];
            let f = faces.iter().find(|f| f.letter == first).unwrap();
            if !half_plane_inside(&hp, &f.plane, center) {
                return Err(Error::InvalidInput(format!("word {w} contributes a face; domain is not generator-bounded")));
            }
        }
        let core_radius = core_radius_estimate(rep, center, &faces, 4);
        let radius = opts.radius.unwrap_or(core_radius + 1.0);
        if radius < 4.0 * h {
            return Err(Error::InvalidInput(format!("radius {radius} too small for mesh size {h}")));
        }
        let to_local = Isom::transvection_to(center).inverse();
        let from_local = to_local.inverse();

        let mut vertices: Vec<HPoint> = Vec::new();
        let mut kinds: Vec<VertexKind> = Vec::new();
        let mut chains = Vec::new();

        // Walls of minus[i] carry free vertices; plus[i] carries their images.
        let mut pending_axes = Vec::new();
        for (i, g) in rep.gens().iter().enumerate() {
            let n = faces[2 * i + 1].plane.normal;
            let cn = mink(center.vec(), n);
            let d_f = (-cn).asinh();
            if d_f >= radius - 0.5 * h {
                continue;
            }
            let foot = HPoint::renorm(center.vec() - n * cn);
            let t = cross(n, foot.vec());
            let s_max = (radius.cosh() / d_f.cosh()).acosh();
            let m = ((2.0 * s_max) / h).ceil().max(2.0) as usize;
            let mut params: Vec<f64> = (0..=m).map(|k| -s_max + 2.0 * s_max * k as f64 / m as f64).collect();

            let fr = eigen_frame(g)?;
            let (b, e) = (fr.axis_point.vec(), fr.axis_tangent());
            let ee = mink(e, n);
            let mut axis_s = None;
            if ee.abs() > 1e-14 {
                let tau = -mink(b, n) / ee;
                if tau.abs() < 1.0 {
                    let xi = tau.atanh();
                    let wm = axis_point(b, e, xi);
                    let s = mink(wm.vec(), t).asinh();
                    if s.abs() < s_max - 0.5 * h {
                        let k = params
                            .iter()
                            .enumerate()
                            .skip(1)
                            .take(m - 1)
                            .min_by(|x, y| (x.1 - s).abs().total_cmp(&(y.1 - s).abs()))
                            .map(|x| x.0)
                            .unwrap();
                        params[k] = s;
                        axis_s = Some((k, xi));
                    }
                }
            }
            let base = vertices.len();
            for &s in &params {
                vertices.push(HPoint::renorm(foot.vec() * s.cosh() + t * s.sinh()));
                kinds.push(VertexKind::Wall { gen: i });
            }
            for k in 0..params.len() {
                vertices.push(g.act(vertices[base + k]));
                kinds.push(VertexKind::Image { source: base + k, gen: i });
            }
            if let Some((k, xi)) = axis_s {
                pending_axes.push((i, base + k, base + params.len() + k, b, e, xi, fr.lambda));
            }
        }
        let wall_count = vertices.len();

        // Axis chains.
        let mut protected: Vec<HPoint> = Vec::new();
        for (i, wm, wp, b, e, xi, lambda) in pending_axes {
            let n = (lambda / h).ceil() as usize;
            let pts: Vec<HPoint> = (1..n).map(|k| axis_point(b, e, xi + lambda * k as f64 / n as f64)).collect();
            if !pts.iter().all(|q| inside(&faces, *q, 0.25 * h) && dist(center, *q) < radius - 0.5 * h) {
                continue;
            }
            let mut chain = vec![wm];
            for q in pts {
                // Skip points next to a crossing with an earlier axis.
                if protected.iter().any(|p| dist(*p, q) < 0.3 * h) {
                    continue;
                }
                protected.push(q);
                chain.push(vertices.len());
                vertices.push(q);
                kinds.push(VertexKind::Axis { gen: i });
            }
            chain.push(wp);
            chains.push(AxisChain { gen: i, vertices: chain });
        }

        // Truncation circle.
        let nc = ((2.0 * std::f64::consts::PI * radius.sinh()) / h).ceil() as usize;
        for j in 0..nc {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / nc as f64;
            let q = from_local.act(HPoint::from_polar(radius, phi));
            if inside(&faces, q, 0.5 * h) {
                vertices.push(q);
                kinds.push(VertexKind::Boundary);
            }
        }

        // Interior rings.
        let step = h * 0.75f64.sqrt();
        let mut rings = vec![(0.0, 1usize)];
        let mut k = 1;
        while k as f64 * step <= radius - 0.5 * h {
            let rho = k as f64 * step;
            let cnt = ((2.0 * std::f64::consts::PI * rho.sinh()) / h).round().max(6.0) as usize;
            rings.push((rho, cnt));
            k += 1;
        }
        let wall_pts: Vec<HPoint> = vertices[..wall_count].to_vec();
        let ring_pts: Vec<Vec<HPoint>> = Exec::default().map(&rings, |&(rho, cnt)| {
            let off = if ((rho / step).round() as usize) % 2 == 1 { 0.5 } else { 0.0 };
            (0..cnt)
                .map(|j| {
                    let phi = 2.0 * std::f64::consts::PI * (j as f64 + off) / cnt as f64;
                    from_local.act(HPoint::from_polar(rho, phi))
                })
                .filter(|q| inside(&faces, *q, 0.5 * h))
                .filter(|q| protected.iter().all(|p| dist(*p, *q) >= 0.5 * h))
                .filter(|q| wall_pts.iter().all(|p| dist(*p, *q) >= 0.5 * h))
                .collect()
        });
        for q in ring_pts.into_iter().flatten() {
            vertices.push(q);
            kinds.push(VertexKind::Interior);
        }

        let mut dom = DirichletDomain {
            rep: rep.clone(),
            center,
            radius,
            h,
            faces,
            vertices,
            kinds,
            triangles: Vec::new(),
            axis_chains: chains,
            core_radius,
            to_local,
            tri_inv: Vec::new(),
            grid: Grid { n: 1, cells: vec![] },
        };
        dom.triangulate()?;
        Ok(dom)
    }

    fn klein(&self, p: HPoint) -> (f64, f64) {
        self.to_local.act(p).to_klein()
    }

    fn triangulate(&mut self) -> Result<()> {
        let pts: Vec<delaunator::Point> = self
            .vertices
            .iter()
            .map(|p| {
                let (x, y) = self.klein(*p);
                delaunator::Point { x, y }
            })
            .collect();
        let tri = delaunator::triangulate(&pts);
        let mut triangles = Vec::new();
        let mut inv = Vec::new();
        for t in tri.triangles.chunks(3) {
            let [a, b, c] = [t[0], t[1], t[2]];
            let m = Matrix3::from_columns(&[
                self.vertices[a].vec().to_vector(),
                self.vertices[b].vec().to_vector(),
                self.vertices[c].vec().to_vector(),
            ]);
            let (pa, pb, pc) = (&pts[a], &pts[b], &pts[c]);
            let area2 = (pb.x - pa.x) * (pc.y - pa.y) - (pb.y - pa.y) * (pc.x - pa.x);
            if area2.abs() < 1e-14 {
                continue;
            }
            let Some(mi) = m.try_inverse() else { continue };
            triangles.push([a, b, c]);
            inv.push(mi);
        }
        if triangles.is_empty() {
            return Err(Error::InvalidInput("triangulation is empty".into()));
        }
        let n = ((triangles.len() as f64).sqrt() as usize).clamp(4, 256);
        let mut grid = Grid { n, cells: vec![Vec::new(); n * n] };
        for (ti, t) in triangles.iter().enumerate() {
            let xs = t.map(|v| pts[v].x);
            let ys = t.map(|v| pts[v].y);
            let (x0, x1) = (grid.cell(xs.iter().cloned().fold(f64::MAX, f64::min)), grid.cell(xs.iter().cloned().fold(f64::MIN, f64::max)));
            let (y0, y1) = (grid.cell(ys.iter().cloned().fold(f64::MAX, f64::min)), grid.cell(ys.iter().cloned().fold(f64::MIN, f64::max)));
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    grid.cells[cy * n + cx].push(ti as u32);
                }
            }
        }
        self.triangles = triangles;
        self.tri_inv = inv;
        self.grid = grid;
        Ok(())
    }

    pub fn is_free(&self, v: usize) -> bool {
        !matches!(self.kinds[v], VertexKind::Image { .. })
    }

    /// For image vertices the wall vertex they are the image of, with the generator.
    pub fn source(&self, v: usize) -> (usize, Option<usize>) {
        match self.kinds[v] {
            VertexKind::Image { source, gen } => (source, Some(gen)),
            _ => (v, None),
        }
    }

    /// Returns (q, w) with p = j(w) q and q in the closed domain.
    pub fn unfold(&self, p: HPoint) -> Result<(HPoint, Word)> {
        let (q, w) = self.reduce(p)?;
        if dist(self.center, q) > self.radius + 1e-9 {
            return Err(Error::OutsideTiling);
        }
        Ok((q, w))
    }

    /// As `unfold`, without the truncation radius: q lies in the untruncated
    /// generator-bounded domain, possibly deep in a funnel.
    pub fn reduce(&self, p: HPoint) -> Result<(HPoint, Word)> {
        let mut q = p;
        let mut letters: Vec<i32> = Vec::new();
        for _ in 0..256 {
            let best = self
                .faces
                .iter()
                .map(|f| (f, mink(q.vec(), f.plane.normal)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if best.1 <= 1e-12 {
                return Ok((q, Word::from_letters(&letters)?));
            }
            // q lies across the face of letter s: q = s(q'), so p = w s q'.
            let s = best.0.letter;
            q = self.rep.letter(-s).act(q);
            letters.push(s);
        }
        Err(Error::OutsideTiling)
    }

    /// Triangle containing a point of the domain and its homogeneous barycentric
    /// coordinates: q = sum beta_i v_i exactly.
    pub fn locate(&self, q: HPoint) -> Result<(usize, [f64; 3])> {
        let (x, y) = self.klein(q);
        let (cx, cy) = (self.grid.cell(x), self.grid.cell(y));
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        let qv = q.vec().to_vector();
        let visit = |ti: usize, best: &mut Option<(usize, [f64; 3], f64)>| {
            let b = self.tri_inv[ti] * qv;
            let m = b[0].min(b[1]).min(b[2]);
            if best.as_ref().map_or(true, |bb| m > bb.2) {
                *best = Some((ti, [b[0], b[1], b[2]], m));
            }
        };
        for &ti in &self.grid.cells[cy * self.grid.n + cx] {
            visit(ti as usize, &mut best);
        }
        if best.as_ref().map_or(true, |b| b.2 < -1e-12) {
            for r in 1..=2usize {
                for gy in cy.saturating_sub(r)..=(cy + r).min(self.grid.n - 1) {
                    for gx in cx.saturating_sub(r)..=(cx + r).min(self.grid.n - 1) {
                        for &ti in &self.grid.cells[gy * self.grid.n + gx] {
                            visit(ti as usize, &mut best);
                        }
                    }
                }
            }
        }
        match best {
            Some((ti, b, m)) if m > -0.05 => Ok((ti, b)),
            _ => Err(Error::OutsideTiling),
        }
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i].vec());
        tri_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Area of the part of the triangulated domain covered by the orbit of the
    /// ball B(x, r), by subdividing each triangle `subdiv`^2 times. For a ball
    /// that embeds in the quotient and whose orbit meets the truncated domain
    /// only inside it, this equals 2 pi (cosh r - 1) independently of the center.
    pub fn orbit_ball_area(&self, x: HPoint, r: f64, subdiv: usize, orbit_depth: usize) -> f64 {
        let mut orbit = vec![x];
        for w in reduced_words_up_to(self.rep.rank(), orbit_depth) {
            let y = self.rep.eval(&w).act(x);
            if dist(y, self.center) < self.radius + r {
                orbit.push(y);
            }
        }
        let cr = r.cosh();
        let parts = Exec::default().map_range(self.triangles.len(), |t| {
            let [a, b, c] = self.triangles[t].map(|i| self.vertices[i].vec());
            let mut acc = 0.0;
            let n = subdiv as f64;
            let pt = |i: f64, j: f64| a * ((n - i - j) / n) + b * (i / n) + c * (j / n);
            for i in 0..subdiv {
                for j in 0..subdiv - i {
                    let (fi, fj) = (i as f64, j as f64);
                    let mut tris = vec![[pt(fi, fj), pt(fi + 1.0, fj), pt(fi, fj + 1.0)]];
                    if i + j + 1 < subdiv {
                        tris.push([pt(fi + 1.0, fj), pt(fi + 1.0, fj + 1.0), pt(fi, fj + 1.0)]);
                    }
                    for [p, q, s] in tris {
                        let cen = HPoint::renorm(p + q + s);
                        if orbit.iter().any(|o| -mink(o.vec(), cen.vec()) < cr) {
                            acc += tri_area(HPoint::renorm(p).vec(), HPoint::renorm(q).vec(), HPoint::renorm(s).vec());
                        }
                    }
                }
            }
            acc
        });
        parts.iter().sum()
    }

    pub fn free_count(&self) -> usize {
        (0..self.vertices.len()).filter(|&v| self.is_free(v)).count()
    }
}

/// Area of the geodesic triangle with vertices on the hyperboloid.
pub fn tri_area(a: MinkVec, b: MinkVec, c: MinkVec) -> f64 {
    let num = crate::lorentz::det3(a, b, c).abs();
    let den = 1.0 - mink(a, b) - mink(b, c) - mink(c, a);
    2.0 * num.atan2(den)
}
