//! Geometric model: flat components (segments, planar discs and polygons)
//! glued along junctions in R^3, carrying a density per component.
//!
//! A structure is the support of the measure sum over components of
//! theta_i * Hausdorff^{dim_i} restricted to the component. Junctions are
//! computed analytically from the flat frames, never from meshes.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector2, Vector3};
use serde::Deserialize;
use std::collections::BTreeSet;

/// Tolerance for exact analytic predicates on flat data (membership,
/// intersection, coincidence).
pub const GEOM_TOL: f64 = 1e-10;
/// Tolerance for orthonormality of frames.
pub const FRAME_TOL: f64 = 1e-12;

/// Density theta on a component, in frame coordinates.
#[derive(Debug, Clone)]
pub enum Theta {
    Constant(f64),
    /// Sum of coeff * u^p0 * v^p1 (for dim 1 only p0 is used, as s^p0).
    Poly(Vec<(Vec<u32>, f64)>),
}

impl Theta {
    pub fn eval(&self, frame: &[f64]) -> f64 {
        match self {
            Theta::Constant(c) => *c,
            Theta::Poly(terms) => terms
                .iter()
                .map(|(pows, c)| {
                    c * pows
                        .iter()
                        .zip(frame)
                        .map(|(p, x)| x.powi(*p as i32))
                        .product::<f64>()
                })
                .sum(),
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Theta::Constant(c) if *c == 1.0)
    }
}

/// Planar or linear parameter-domain of a component, in frame coordinates.
#[derive(Debug, Clone)]
pub enum Shape {
    /// Parameter interval [a, b] along the single tangent vector.
    Interval { a: f64, b: f64 },
    /// Disc of radius r centered at `center` in (u, v) frame coordinates.
    Disc { center: Vector2<f64>, radius: f64 },
    /// Simple, positively oriented polygon in (u, v) frame coordinates.
    Polygon { vertices: Vec<Vector2<f64>> },
}

impl Shape {
    pub fn dim(&self) -> u8 {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Membership in frame coordinates, with tolerance `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        match self {
            Shape::Interval { a, b } => p[0] >= a - tol && p[0] <= b + tol,
            Shape::Disc { center, radius } => {
                let d = (Vector2::new(p[0], p[1]) - center).norm();
                d <= radius + tol
            }
            Shape::Polygon { vertices } => {
                polygon_contains(vertices, Vector2::new(p[0], p[1]), tol)
            }
        }
    }

    /// Distance from a frame point to the shape boundary (the frame-shape
    /// boundary of the component, not junction sets).
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        match self {
            Shape::Interval { a, b } => (p[0] - a).abs().min((b - p[0]).abs()),
            Shape::Disc { center, radius } => {
                let d = (Vector2::new(p[0], p[1]) - center).norm();
                (radius - d).abs()
            }
            Shape::Polygon { vertices } => {
                let q = Vector2::new(p[0], p[1]);
                let n = vertices.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    best = best.min(segment_point_distance(vertices[i], vertices[(i + 1) % n], q));
                }
                best
            }
        }
    }

    /// On-boundary predicate with tolerance.
    pub fn on_boundary(&self, p: &[f64], tol: f64) -> bool {
        self.boundary_distance(p) <= tol
    }
}

fn segment_point_distance(a: Vector2<f64>, b: Vector2<f64>, p: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn polygon_contains(vertices: &[Vector2<f64>], p: Vector2<f64>, tol: f64) -> bool {
    let n = vertices.len();
    for i in 0..n {
        if segment_point_distance(vertices[i], vertices[(i + 1) % n], p) <= tol {
            return true;
        }
    }
    // Even-odd ray crossing.
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (vertices[i], vertices[j]);
        if (vi.y > p.y) != (vj.y > p.y) {
            let x_cross = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// One flat component manifold with its frame and density.
#[derive(Debug, Clone)]
pub struct Component {
    pub id: u32,
    pub dim: u8,
    pub origin: Vector3<f64>,
    /// Orthonormal tangent frame; 1 vector for dim 1, 2 for dim 2.
    pub tangents: Vec<Vector3<f64>>,
    pub shape: Shape,
    pub theta: Theta,
}

impl Component {
    pub fn new(
        id: u32,
        origin: Vector3<f64>,
        tangents: Vec<Vector3<f64>>,
        shape: Shape,
        theta: Theta,
    ) -> Result<Self> {
        let dim = shape.dim();
        if tangents.len() != dim as usize {
            return Err(Error::Geometry(format!(
                "component {id}: shape of dim {dim} needs {dim} tangent vector(s), got {}",
                tangents.len()
            )));
        }
        for (i, t) in tangents.iter().enumerate() {
            if (t.norm() - 1.0).abs() > FRAME_TOL {
                return Err(Error::Geometry(format!(
                    "component {id}: tangent {i} is not unit length"
                )));
            }
        }
        if tangents.len() == 2 && tangents[0].dot(&tangents[1]).abs() > FRAME_TOL {
            return Err(Error::Geometry(format!(
                "component {id}: tangent vectors are not orthogonal"
            )));
        }
        match &shape {
            Shape::Interval { a, b } => {
                if b <= a {
                    return Err(Error::Geometry(format!(
                        "component {id}: empty interval [{a}, {b}]"
                    )));
                }
            }
            Shape::Disc { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::Geometry(format!(
                        "component {id}: disc radius must be positive"
                    )));
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Geometry(format!(
                        "component {id}: polygon needs at least 3 vertices"
                    )));
                }
                if polygon_signed_area(vertices) <= 0.0 {
                    return Err(Error::Geometry(format!(
                        "component {id}: polygon must be positively oriented"
                    )));
                }
                if !polygon_is_simple(vertices) {
                    return Err(Error::Geometry(format!(
                        "component {id}: polygon is not simple"
                    )));
                }
            }
        }
        Ok(Component {
            id,
            dim,
            origin,
            tangents,
            shape,
            theta,
        })
    }

    /// Embed frame coordinates into R^3.
    pub fn embed(&self, frame: &[f64]) -> Vector3<f64> {
        let mut p = self.origin;
        for (t, x) in self.tangents.iter().zip(frame) {
            p += t * *x;
        }
        p
    }

    /// Frame coordinates of an ambient point (orthogonal projection onto the
    /// component plane/line).
    pub fn frame_coords(&self, p: &Vector3<f64>) -> Vec<f64> {
        let d = p - self.origin;
        self.tangents.iter().map(|t| t.dot(&d)).collect()
    }

    /// Normal distance of an ambient point to the component's carrier
    /// plane/line.
    pub fn carrier_distance(&self, p: &Vector3<f64>) -> f64 {
        let d = p - self.origin;
        let mut tang = Vector3::zeros();
        for t in &self.tangents {
            tang += t * t.dot(&d);
        }
        (d - tang).norm()
    }

    /// Whether an ambient point lies on the component (carrier + shape).
    pub fn contains_point(&self, p: &Vector3<f64>, tol: f64) -> bool {
        if self.carrier_distance(p) > tol {
            return false;
        }
        let f = self.frame_coords(p);
        self.shape.contains(&f, tol)
    }

    /// Orthonormal normal vectors completing the tangent frame to a basis of
    /// R^3 (2 for a segment, 1 for a planar patch).
    pub fn normals(&self) -> Vec<Vector3<f64>> {
        match self.dim {
            2 => vec![self.tangents[0].cross(&self.tangents[1])],
            _ => {
                let t = self.tangents[0];
                // Pick the coordinate axis least aligned with t.
                let trial = if t.x.abs() <= t.y.abs() && t.x.abs() <= t.z.abs() {
                    Vector3::x()
                } else if t.y.abs() <= t.z.abs() {
                    Vector3::y()
                } else {
                    Vector3::z()
                };
                let n1 = (trial - t * t.dot(&trial)).normalize();
                let n2 = t.cross(&n1);
                vec![n1, n2]
            }
        }
    }

    /// Measure of the component shape (length or area), without density.
    pub fn shape_measure(&self) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Polygon { vertices } => polygon_signed_area(vertices),
        }
    }
}

fn polygon_signed_area(vertices: &[Vector2<f64>]) -> f64 {
    let n = vertices.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

fn polygon_is_simple(vertices: &[Vector2<f64>]) -> bool {
    let n = vertices.len();
    let seg = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for i in 0..n {
        for j in i + 1..n {
            // Skip adjacent edges (share a vertex).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_intersect_2d(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect_2d(
    a: Vector2<f64>,
    b: Vector2<f64>,
    c: Vector2<f64>,
    d: Vector2<f64>,
) -> bool {
    let cross = |o: Vector2<f64>, p: Vector2<f64>, q: Vector2<f64>| {
        (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x)
    };
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0))
}

/// Kind and geometry of a pairwise intersection.
#[derive(Debug, Clone)]
pub enum JunctionGeometry {
    Point(Vector3<f64>),
    /// Curve junction: straight segment between the two endpoints.
    Curve(Vector3<f64>, Vector3<f64>),
}

/// A nonempty pairwise intersection Sigma_ij between two components.
#[derive(Debug, Clone)]
pub struct Junction {
    /// Component ids (i, j) with i < j in structure order.
    pub pair: (u32, u32),
    pub geometry: JunctionGeometry,
    pub equal_dim: bool,
}

impl Junction {
    pub fn is_point(&self) -> bool {
        matches!(self.geometry, JunctionGeometry::Point(_))
    }
}

/// Internal classification of a pairwise intersection.
enum PairwiseHit {
    None,
    Point(Vector3<f64>),
    Curve(Vector3<f64>, Vector3<f64>),
    Degenerate(String),
}

/// The glued structure: components plus auto-detected junctions.
#[derive(Debug, Clone)]
pub struct Structure {
    pub name: String,
    pub components: Vec<Component>,
    pub junctions: Vec<Junction>,
}

impl Structure {
    /// Assemble a structure from components; junctions are detected
    /// analytically. Degenerate intersections are kept out of the junction
    /// list and resurface in [`Structure::validate`].
    pub fn new(name: impl Into<String>, components: Vec<Component>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for c in &components {
            if !ids.insert(c.id) {
                return Err(Error::Parse(format!("duplicate component id {}", c.id)));
            }
        }
        let junctions = detect_junctions(&components);
        Ok(Structure {
            name: name.into(),
            components,
            junctions,
        })
    }

    pub fn component_index(&self, id: u32) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn component(&self, id: u32) -> Result<&Component> {
        self.components
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::InvalidArg(format!("no component with id {id}")))
    }

    /// Junctions adjacent to the component with the given index.
    pub fn junctions_of(&self, comp_idx: usize) -> Vec<usize> {
        let id = self.components[comp_idx].id;
        self.junctions
            .iter()
            .enumerate()
            .filter(|(_, j)| j.pair.0 == id || j.pair.1 == id)
            .map(|(k, _)| k)
            .collect()
    }

    /// Orthonormal tangent and normal bases of a component at a point given
    /// in frame coordinates. Errors if the point is outside the shape.
    pub fn tangent_basis(
        &self,
        component_id: u32,
        frame_point: &[f64],
    ) -> Result<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)> {
        let c = self.component(component_id)?;
        if frame_point.len() != c.dim as usize {
            return Err(Error::InvalidArg(format!(
                "expected {} frame coordinate(s) for component {component_id}",
                c.dim
            )));
        }
        if !c.shape.contains(frame_point, GEOM_TOL) {
            return Err(Error::Geometry(format!(
                "point {frame_point:?} lies outside component {component_id}"
            )));
        }
        Ok((c.tangents.clone(), c.normals()))
    }

    /// Validation report for the structural conditions: pairwise
    /// transversality, boundary contact, and triple intersections.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let comps = &self.components;

        for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                match classify_pair(&comps[i], &comps[j]) {
                    PairwiseHit::Degenerate(reason) => violations.push(Violation::Transversality {
                        pair: (comps[i].id, comps[j].id),
                        reason,
                    }),
                    PairwiseHit::Point(p) => {
                        // A point junction sitting on either component's shape
                        // boundary is boundary-boundary contact when it lies on
                        // both; junctions at one boundary only are allowed.
                        let on_i = comps[i].shape.on_boundary(&comps[i].frame_coords(&p), GEOM_TOL);
                        let on_j = comps[j].shape.on_boundary(&comps[j].frame_coords(&p), GEOM_TOL);
                        if on_i && on_j {
                            violations.push(Violation::BoundaryContact {
                                pair: (comps[i].id, comps[j].id),
                                point: p,
                            });
                        }
                    }
                    PairwiseHit::Curve(a, b) => {
                        // Interior of the junction curve must stay clear of
                        // both shape boundaries; shared endpoints are the
                        // generic crossing of two patches and are allowed.
                        for t in [0.25, 0.5, 0.75] {
                            let p = a + (b - a) * t;
                            for c in [&comps[i], &comps[j]] {
                                if c.shape.on_boundary(&c.frame_coords(&p), GEOM_TOL) {
                                    violations.push(Violation::BoundaryContact {
                                        pair: (comps[i].id, comps[j].id),
                                        point: p,
                                    });
                                }
                            }
                        }
                    }
                    PairwiseHit::None => {}
                }
            }
        }

        // Triple intersections: a junction touching a third component.
        for j in &self.junctions {
            for c in comps {
                if c.id == j.pair.0 || c.id == j.pair.1 {
                    continue;
                }
                let hit = match &j.geometry {
                    JunctionGeometry::Point(p) => c.contains_point(p, GEOM_TOL).then_some(*p),
                    JunctionGeometry::Curve(a, b) => segment_hits_component(a, b, c),
                };
                if let Some(p) = hit {
                    violations.push(Violation::TripleIntersection {
                        ids: (j.pair.0, j.pair.1, c.id),
                        point: p,
                    });
                }
            }
        }

        // Density positivity spot-check on a deterministic frame grid.
        for c in comps {
            if let Some(theta_min) = theta_grid_min(c) {
                if theta_min <= 0.0 {
                    violations.push(Violation::DensityNotPositive {
                        id: c.id,
                        min_sample: theta_min,
                    });
                }
            }
        }

        ValidationReport { violations }
    }
}

fn theta_grid_min(c: &Component) -> Option<f64> {
    match &c.theta {
        Theta::Constant(v) => Some(*v),
        Theta::Poly(_) => {
            let mut min = f64::INFINITY;
            match &c.shape {
                Shape::Interval { a, b } => {
                    for k in 0..=32 {
                        let s = a + (b - a) * k as f64 / 32.0;
                        min = min.min(c.theta.eval(&[s]));
                    }
                }
                Shape::Disc { center, radius } => {
                    for ku in 0..=24 {
                        for kv in 0..=24 {
                            let u = center.x - radius + 2.0 * radius * ku as f64 / 24.0;
                            let v = center.y - radius + 2.0 * radius * kv as f64 / 24.0;
                            if c.shape.contains(&[u, v], 0.0) {
                                min = min.min(c.theta.eval(&[u, v]));
                            }
                        }
                    }
                }
                Shape::Polygon { vertices } => {
                    let (lo, hi) = bbox(vertices);
                    for ku in 0..=24 {
                        for kv in 0..=24 {
                            let u = lo.x + (hi.x - lo.x) * ku as f64 / 24.0;
                            let v = lo.y + (hi.y - lo.y) * kv as f64 / 24.0;
                            if c.shape.contains(&[u, v], 0.0) {
                                min = min.min(c.theta.eval(&[u, v]));
                            }
                        }
                    }
                }
            }
            Some(min)
        }
    }
}

fn bbox(vertices: &[Vector2<f64>]) -> (Vector2<f64>, Vector2<f64>) {
    let mut lo = Vector2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        lo.x = lo.x.min(v.x);
        lo.y = lo.y.min(v.y);
        hi.x = hi.x.max(v.x);
        hi.y = hi.y.max(v.y);
    }
    (lo, hi)
}

/// Structural violations reported by [`Structure::validate`].
#[derive(Debug, Clone)]
pub enum Violation {
    Transversality { pair: (u32, u32), reason: String },
    BoundaryContact { pair: (u32, u32), point: Vector3<f64> },
    TripleIntersection { ids: (u32, u32, u32), point: Vector3<f64> },
    DensityNotPositive { id: u32, min_sample: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Transversality { pair, reason } => {
                write!(f, "components {} and {}: {reason}", pair.0, pair.1)
            }
            Violation::BoundaryContact { pair, point } => write!(
                f,
                "components {} and {}: boundary contact at ({}, {}, {})",
                pair.0, pair.1, point.x, point.y, point.z
            ),
            Violation::TripleIntersection { ids, point } => write!(
                f,
                "components {}, {}, {} share point ({}, {}, {})",
                ids.0, ids.1, ids.2, point.x, point.y, point.z
            ),
            Violation::DensityNotPositive { id, min_sample } => {
                write!(f, "component {id}: density sample {min_sample} is not positive")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            write!(f, "OK")
        } else {
            for v in &self.violations {
                writeln!(f, "- {v}")?;
            }
            Ok(())
        }
    }
}

/// Detect all nonempty pairwise intersections. Degenerate configurations
/// (non-transversal contact) are skipped here; `validate` reports them.
pub fn detect_junctions(components: &[Component]) -> Vec<Junction> {
    let mut out = Vec::new();
    for i in 0..components.len() {
        for j in i + 1..components.len() {
            let (ci, cj) = (&components[i], &components[j]);
            match classify_pair(ci, cj) {
                PairwiseHit::Point(p) => out.push(Junction {
                    pair: (ci.id, cj.id),
                    geometry: JunctionGeometry::Point(p),
                    equal_dim: ci.dim == cj.dim,
                }),
                PairwiseHit::Curve(a, b) => out.push(Junction {
                    pair: (ci.id, cj.id),
                    geometry: JunctionGeometry::Curve(a, b),
                    equal_dim: ci.dim == cj.dim,
                }),
                _ => {}
            }
        }
    }
    out
}

fn classify_pair(ci: &Component, cj: &Component) -> PairwiseHit {
    match (ci.dim, cj.dim) {
        (1, 1) => classify_seg_seg(ci, cj),
        (1, 2) => classify_seg_patch(ci, cj),
        (2, 1) => classify_seg_patch(cj, ci),
        (2, 2) => classify_patch_patch(ci, cj),
        _ => unreachable!(),
    }
}

fn interval_of(c: &Component) -> (f64, f64) {
    match c.shape {
        Shape::Interval { a, b } => (a, b),
        _ => unreachable!(),
    }
}

fn classify_seg_seg(ci: &Component, cj: &Component) -> PairwiseHit {
    let (d1, d2) = (ci.tangents[0], cj.tangents[0]);
    let w = cj.origin - ci.origin;
    let cr = d1.cross(&d2);
    if cr.norm() < GEOM_TOL {
        // Parallel lines: collinear overlap is a degenerate contact.
        if ci.carrier_distance(&cj.origin) < GEOM_TOL {
            let (a1, b1) = interval_of(ci);
            let (a2, b2) = interval_of(cj);
            let off = d1.dot(&w);
            let (lo, hi) = (a1.max(a2 + off), b1.min(b2 + off));
            if hi - lo > -GEOM_TOL {
                return PairwiseHit::Degenerate("collinear overlapping segments".into());
            }
        }
        return PairwiseHit::None;
    }
    // Closest points of the two lines.
    let (a, b, c) = (d1.dot(&d1), d1.dot(&d2), d2.dot(&d2));
    let (d, e) = (d1.dot(&w), d2.dot(&w));
    let den = a * c - b * b;
    let s = (c * d - b * e) / den;
    let t = (b * d - a * e) / den;
    let p1 = ci.origin + d1 * s;
    let p2 = cj.origin + d2 * t;
    if (p1 - p2).norm() > GEOM_TOL {
        return PairwiseHit::None;
    }
    let (a1, b1) = interval_of(ci);
    let (a2, b2) = interval_of(cj);
    if s >= a1 - GEOM_TOL && s <= b1 + GEOM_TOL && t >= a2 - GEOM_TOL && t <= b2 + GEOM_TOL {
        PairwiseHit::Point((p1 + p2) * 0.5)
    } else {
        PairwiseHit::None
    }
}

fn classify_seg_patch(seg: &Component, patch: &Component) -> PairwiseHit {
    let n = patch.normals()[0];
    let d = seg.tangents[0];
    let denom = d.dot(&n);
    let offset = (seg.origin - patch.origin).dot(&n);
    if denom.abs() < GEOM_TOL {
        if offset.abs() < GEOM_TOL {
            // Segment lies in the patch plane: tangent spaces span only 2 dims.
            let (a, b) = interval_of(seg);
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let p = seg.embed(&[a + (b - a) * t]);
                if patch.contains_point(&p, GEOM_TOL) {
                    return PairwiseHit::Degenerate(
                        "segment lies in the patch plane (not transversal)".into(),
                    );
                }
            }
        }
        return PairwiseHit::None;
    }
    let s = -offset / denom;
    let (a, b) = interval_of(seg);
    if s < a - GEOM_TOL || s > b + GEOM_TOL {
        return PairwiseHit::None;
    }
    let p = seg.embed(&[s]);
    if patch.contains_point(&p, GEOM_TOL) {
        PairwiseHit::Point(p)
    } else {
        PairwiseHit::None
    }
}

fn classify_patch_patch(ci: &Component, cj: &Component) -> PairwiseHit {
    let (n1, n2) = (ci.normals()[0], cj.normals()[0]);
    let d = n1.cross(&n2);
    if d.norm() < GEOM_TOL {
        // Parallel planes: coplanar overlap is degenerate.
        if ci.carrier_distance(&cj.origin) < GEOM_TOL {
            if let Some((_, _)) = clip_overlap_probe(ci, cj) {
                return PairwiseHit::Degenerate(
                    "coplanar overlapping patches (identical tangent planes)".into(),
                );
            }
        }
        return PairwiseHit::None;
    }
    let d = d.normalize();
    // A point q on the intersection line: solve the two plane equations.
    let c1 = n1.dot(&ci.origin);
    let c2 = n2.dot(&cj.origin);
    let m = Matrix3::from_rows(&[n1.transpose(), n2.transpose(), d.transpose()]);
    let rhs = Vector3::new(c1, c2, 0.0);
    let q = match m.lu().solve(&rhs) {
        Some(q) => q,
        None => return PairwiseHit::None,
    };
    // Clip the line q + t d to both shapes.
    let clip_i = clip_line_to_patch(ci, &q, &d);
    let clip_j = clip_line_to_patch(cj, &q, &d);
    match (clip_i, clip_j) {
        (Some((lo1, hi1)), Some((lo2, hi2))) => {
            let lo = lo1.max(lo2);
            let hi = hi1.min(hi2);
            if hi - lo < -GEOM_TOL {
                PairwiseHit::None
            } else if hi - lo < GEOM_TOL {
                PairwiseHit::Point(q + d * (0.5 * (lo + hi)))
            } else {
                PairwiseHit::Curve(q + d * lo, q + d * hi)
            }
        }
        _ => PairwiseHit::None,
    }
}

/// Probe for overlap of two coplanar patches by sampling one shape's grid.
fn clip_overlap_probe(ci: &Component, cj: &Component) -> Option<(f64, f64)> {
    let samples: Vec<Vector3<f64>> = match &ci.shape {
        Shape::Disc { center, radius } => (0..=8)
            .flat_map(|a| {
                (0..=8).map(move |b| {
                    (
                        center.x - radius + 2.0 * radius * a as f64 / 8.0,
                        center.y - radius + 2.0 * radius * b as f64 / 8.0,
                    )
                })
            })
            .filter(|(u, v)| ci.shape.contains(&[*u, *v], 0.0))
            .map(|(u, v)| ci.embed(&[u, v]))
            .collect(),
        Shape::Polygon { vertices } => vertices.iter().map(|v| ci.embed(&[v.x, v.y])).collect(),
        _ => vec![],
    };
    samples
        .iter()
        .any(|p| cj.contains_point(p, GEOM_TOL))
        .then_some((0.0, 0.0))
}

/// Intersection of the line q + t d (d unit, in the patch plane) with the
/// patch shape, as a parameter interval. Assumes convex shapes for a single
/// interval; non-convex polygons report the first interval only.
fn clip_line_to_patch(c: &Component, q: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
    let f0 = c.frame_coords(q);
    let fd: Vec<f64> = c.tangents.iter().map(|t| t.dot(d)).collect();
    let p0 = Vector2::new(f0[0], f0[1]);
    let pd = Vector2::new(fd[0], fd[1]);
    match &c.shape {
        Shape::Disc { center, radius } => {
            // |p0 + t pd - center|^2 = r^2
            let rel = p0 - center;
            let a = pd.norm_squared();
            let b = 2.0 * rel.dot(&pd);
            let cc = rel.norm_squared() - radius * radius;
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
        }
        Shape::Polygon { vertices } => {
            // Collect crossing parameters with polygon edges.
            let n = vertices.len();
            let mut ts: Vec<f64> = Vec::new();
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let e = b - a;
                let den = pd.x * e.y - pd.y * e.x;
                if den.abs() < 1e-14 {
                    continue;
                }
                let w = a - p0;
                let t = (w.x * e.y - w.y * e.x) / den;
                let u = (w.x * pd.y - w.y * pd.x) / -den;
                if (-GEOM_TOL..=1.0 + GEOM_TOL).contains(&u) {
                    ts.push(t);
                }
            }
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup_by(|a, b| (*a - *b).abs() < GEOM_TOL);
            if ts.len() < 2 {
                return None;
            }
            // Verify the midpoint of the first interval is inside.
            let mid = p0 + pd * (0.5 * (ts[0] + ts[1]));
            if c.shape.contains(&[mid.x, mid.y], GEOM_TOL) {
                Some((ts[0], ts[1]))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Whether the straight segment [a, b] meets the component; returns a witness.
fn segment_hits_component(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Component,
) -> Option<Vector3<f64>> {
    let dir = b - a;
    let len = dir.norm();
    if len < GEOM_TOL {
        return c.contains_point(a, GEOM_TOL).then_some(*a);
    }
    let d = dir / len;
    match c.dim {
        2 => {
            let n = c.normals()[0];
            let denom = d.dot(&n);
            let offset = (a - c.origin).dot(&n);
            if denom.abs() < GEOM_TOL {
                if offset.abs() < GEOM_TOL {
                    // In-plane segment: sample.
                    for k in 0..=8 {
                        let p = a + dir * (k as f64 / 8.0);
                        if c.contains_point(&p, GEOM_TOL) {
                            return Some(p);
                        }
                    }
                }
                return None;
            }
            let t = -offset / denom;
            if t < -GEOM_TOL || t > len + GEOM_TOL {
                return None;
            }
            let p = a + d * t;
            c.contains_point(&p, GEOM_TOL).then_some(p)
        }
        _ => {
            // Segment-segment proximity via closest points.
            let d2 = c.tangents[0];
            let w = c.origin - *a;
            let cr = d.cross(&d2);
            if cr.norm() < GEOM_TOL {
                if c.carrier_distance(a) < GEOM_TOL {
                    for k in 0..=8 {
                        let p = a + dir * (k as f64 / 8.0);
                        if c.contains_point(&p, GEOM_TOL) {
                            return Some(p);
                        }
                    }
                }
                return None;
            }
            let (aa, bb, cc) = (1.0, d.dot(&d2), 1.0);
            let (dd, ee) = (d.dot(&-w), d2.dot(&-w));
            let den = aa * cc - bb * bb;
            let s = (cc * dd - bb * ee) / den;
            let t = (bb * dd - aa * ee) / den;
            let p1 = a + d * s;
            let p2 = c.origin + d2 * t;
            if (p1 - p2).norm() > GEOM_TOL || s < -GEOM_TOL || s > len + GEOM_TOL {
                return None;
            }
            let (lo, hi) = interval_of(c);
            (t >= lo - GEOM_TOL && t <= hi + GEOM_TOL).then_some(p1)
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in model structures
// ---------------------------------------------------------------------------

/// Named built-in model geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinName {
    /// Two segments crossing at the origin, along the y and z axes.
    CrossSegments,
    /// Two unit discs meeting along a common diameter (the y axis).
    CrossDiscs,
    /// Unit disc in the xy plane plus the orthogonal segment through its
    /// center (mixed dimensions).
    DiscPlusSegment,
}

impl std::str::FromStr for BuiltinName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_segments" => Ok(BuiltinName::CrossSegments),
            "cross_discs" => Ok(BuiltinName::CrossDiscs),
            "disc_plus_segment" => Ok(BuiltinName::DiscPlusSegment),
            _ => Err(Error::InvalidArg(format!("unknown builtin structure '{s}'"))),
        }
    }
}

/// Construct a built-in structure, scaled by `scale` (default 1).
pub fn builtin(name: BuiltinName, scale: f64) -> Result<Structure> {
    if scale <= 0.0 {
        return Err(Error::InvalidArg("builtin scale must be positive".into()));
    }
    let s = scale;
    let seg = |id, tangent: Vector3<f64>| {
        Component::new(
            id,
            Vector3::zeros(),
            vec![tangent],
            Shape::Interval { a: -s, b: s },
            Theta::Constant(1.0),
        )
    };
    let disc = |id, t1: Vector3<f64>, t2: Vector3<f64>| {
        Component::new(
            id,
            Vector3::zeros(),
            vec![t1, t2],
            Shape::Disc {
                center: Vector2::zeros(),
                radius: s,
            },
            Theta::Constant(1.0),
        )
    };
    match name {
        BuiltinName::CrossSegments => Structure::new(
            "cross_segments",
            vec![seg(1, Vector3::y())?, seg(2, Vector3::z())?],
        ),
        BuiltinName::CrossDiscs => Structure::new(
            "cross_discs",
            vec![
                disc(1, Vector3::x(), Vector3::y())?,
                disc(2, Vector3::y(), Vector3::z())?,
            ],
        ),
        BuiltinName::DiscPlusSegment => Structure::new(
            "disc_plus_segment",
            vec![seg(1, Vector3::z())?, disc(2, Vector3::x(), Vector3::y())?],
        ),
    }
}

// ---------------------------------------------------------------------------
// Config ingestion
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRoot {
    name: String,
    components: Vec<ConfigComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigComponent {
    id: u32,
    dim: u8,
    origin: [f64; 3],
    tangents: Vec<[f64; 3]>,
    shape: ConfigShape,
    #[serde(default)]
    theta: Option<ConfigTheta>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum ConfigShape {
    #[serde(rename = "interval")]
    Interval { a: f64, b: f64 },
    #[serde(rename = "disc")]
    Disc { center: [f64; 2], radius: f64 },
    #[serde(rename = "polygon")]
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigTheta {
    Constant(f64),
    Poly { terms: Vec<ConfigPolyTerm> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigPolyTerm {
    powers: Vec<u32>,
    coeff: f64,
}

/// Parse a structure config (JSON text), auto-detect junctions, and validate.
///
/// Top-level keys: `name`, `components`; each component carries `id`, `dim`,
/// `origin`, `tangents`, `shape` and an optional `theta`.
pub fn load_structure(config_text: &str) -> Result<Structure> {
    let root: ConfigRoot =
        serde_json::from_str(config_text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut components = Vec::new();
    for cc in root.components {
        let shape = match cc.shape {
            ConfigShape::Interval { a, b } => Shape::Interval { a, b },
            ConfigShape::Disc { center, radius } => Shape::Disc {
                center: Vector2::new(center[0], center[1]),
                radius,
            },
            ConfigShape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| Vector2::new(v[0], v[1])).collect(),
            },
        };
        if shape.dim() != cc.dim {
            return Err(Error::Parse(format!(
                "component {}: declared dim {} does not match shape kind",
                cc.id, cc.dim
            )));
        }
        let theta = match cc.theta {
            None => Theta::Constant(1.0),
            Some(ConfigTheta::Constant(v)) => {
                if v <= 0.0 {
                    return Err(Error::Parse(format!(
                        "component {}: theta must be positive",
                        cc.id
                    )));
                }
                Theta::Constant(v)
            }
            Some(ConfigTheta::Poly { terms }) => Theta::Poly(
                terms
                    .into_iter()
                    .map(|t| {
                        if t.powers.len() != cc.dim as usize {
                            Err(Error::Parse(format!(
                                "component {}: theta term needs {} power(s)",
                                cc.id, cc.dim
                            )))
                        } else {
                            Ok((t.powers, t.coeff))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        components.push(Component::new(
            cc.id,
            Vector3::from(cc.origin),
            cc.tangents.iter().map(|t| Vector3::from(*t)).collect(),
            shape,
            theta,
        )?);
    }
    let s = Structure::new(root.name, components)?;
    let report = s.validate();
    if !report.is_ok() {
        return Err(Error::Validation(report.to_string()));
    }
    Ok(s)
}
