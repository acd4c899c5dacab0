//! Junction-conforming meshes: uniform subdivision for intervals, a polar
//! sector template for discs (junction diameters forced as edge paths), and
//! ear-clip + uniform refinement for polygons.
//!
//! Conformity contract: for a curve junction the vertex sequence along the
//! junction is constructed once and realized identically (as R^3 point sets)
//! in both adjacent meshes; for a point junction both meshes carry a vertex
//! at the junction point.

use crate::error::{Error, Result};
use crate::structure::{Component, JunctionGeometry, Shape, Structure, GEOM_TOL};
use nalgebra::{Vector2, Vector3};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

/// Mesh of a single component, in frame coordinates.
#[derive(Debug, Clone)]
pub struct ComponentMesh {
    pub dim: u8,
    /// Frame coordinates; for dim 1 only the first entry is used.
    pub vertices: Vec<[f64; 2]>,
    /// Line elements (dim 1).
    pub segments: Vec<[usize; 2]>,
    /// Triangles with positive orientation (dim 2).
    pub triangles: Vec<[usize; 3]>,
    /// Marker: vertex lies on the component's shape boundary.
    pub on_boundary: Vec<bool>,
}

impl ComponentMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        if self.dim == 1 {
            self.segments.len()
        } else {
            self.triangles.len()
        }
    }
}

/// Vertices realizing one junction inside the two adjacent meshes.
#[derive(Debug, Clone)]
pub struct JunctionTrace {
    /// Index into `Structure::junctions`.
    pub junction: usize,
    /// Strictly increasing arclength parameters along the junction
    /// (a single 0.0 for point junctions).
    pub params: Vec<f64>,
    /// (component index, vertex ids ordered like `params`) for both sides.
    pub sides: [(usize, Vec<usize>); 2],
}

/// Meshes for all components plus junction vertex bookkeeping.
#[derive(Debug, Clone)]
pub struct MeshSet {
    pub h: f64,
    pub meshes: Vec<ComponentMesh>,
    pub junction_traces: Vec<JunctionTrace>,
}

impl MeshSet {
    /// The junction trace for a given junction index.
    pub fn trace_of(&self, junction: usize) -> Option<&JunctionTrace> {
        self.junction_traces.iter().find(|t| t.junction == junction)
    }
}

/// Per-component junction constraints collected before meshing.
#[derive(Debug, Clone)]
enum MeshConstraint {
    /// Junction index, frame parameter of the junction point.
    Point(usize, Vec<f64>),
    /// Junction index, frame coords of both curve endpoints.
    Chord(usize, Vector2<f64>, Vector2<f64>),
}

/// Build junction-conforming meshes with target size `h`.
pub fn mesh(structure: &Structure, h: f64) -> Result<MeshSet> {
    if h <= 0.0 {
        return Err(Error::Mesh("mesh size h must be positive".into()));
    }
    // Collect constraints per component.
    let n = structure.components.len();
    let mut constraints: Vec<Vec<MeshConstraint>> = vec![Vec::new(); n];
    for (jidx, j) in structure.junctions.iter().enumerate() {
        for id in [j.pair.0, j.pair.1] {
            let ci = structure.component_index(id).unwrap();
            let c = &structure.components[ci];
            match &j.geometry {
                JunctionGeometry::Point(p) => {
                    constraints[ci].push(MeshConstraint::Point(jidx, c.frame_coords(p)));
                }
                JunctionGeometry::Curve(a, b) => {
                    let fa = c.frame_coords(a);
                    let fb = c.frame_coords(b);
                    constraints[ci].push(MeshConstraint::Chord(
                        jidx,
                        Vector2::new(fa[0], fa[1]),
                        Vector2::new(fb[0], fb[1]),
                    ));
                }
            }
        }
    }

    let mut meshes = Vec::with_capacity(n);
    let mut junction_vertices: Vec<Vec<(usize, Vec<usize>)>> =
        vec![Vec::new(); structure.junctions.len()];
    for (ci, c) in structure.components.iter().enumerate() {
        let (m, jv) = mesh_component(c, h, &constraints[ci])?;
        for (jidx, verts) in jv {
            junction_vertices[jidx].push((ci, verts));
        }
        meshes.push(m);
    }

    // Assemble traces and verify conformity.
    let mut traces = Vec::new();
    for (jidx, j) in structure.junctions.iter().enumerate() {
        let sides = &junction_vertices[jidx];
        debug_assert_eq!(sides.len(), 2);
        let params = match &j.geometry {
            JunctionGeometry::Point(_) => vec![0.0],
            JunctionGeometry::Curve(a, b) => {
                let dir = (b - a).normalize();
                let (ci, verts) = &sides[0];
                let comp = &structure.components[*ci];
                verts
                    .iter()
                    .map(|&v| {
                        let f = meshes[*ci].vertices[v];
                        (comp.embed(&f[..comp.dim as usize]) - a).dot(&dir)
                    })
                    .collect()
            }
        };
        // Both sides must realize the same R^3 point sequence.
        for k in 0..params.len() {
            let mut pts = [Vector3::zeros(), Vector3::zeros()];
            for (s, (ci, verts)) in sides.iter().enumerate() {
                let comp = &structure.components[*ci];
                let f = meshes[*ci].vertices[verts[k]];
                pts[s] = comp.embed(&f[..comp.dim as usize]);
            }
            if (pts[0] - pts[1]).norm() > GEOM_TOL {
                return Err(Error::Mesh(format!(
                    "mismatched junction vertex sequences at junction {jidx}, entry {k}"
                )));
            }
        }
        traces.push(JunctionTrace {
            junction: jidx,
            params,
            sides: [sides[0].clone(), sides[1].clone()],
        });
    }

    Ok(MeshSet {
        h,
        meshes,
        junction_traces: traces,
    })
}

type JunctionVerts = Vec<(usize, Vec<usize>)>;

fn mesh_component(
    c: &Component,
    h: f64,
    constraints: &[MeshConstraint],
) -> Result<(ComponentMesh, JunctionVerts)> {
    match &c.shape {
        Shape::Interval { a, b } => mesh_interval(c, *a, *b, h, constraints),
        Shape::Disc { center, radius } => mesh_disc(c, *center, *radius, h, constraints),
        Shape::Polygon { vertices } => mesh_polygon(c, vertices, h, constraints),
    }
}

fn mesh_interval(
    c: &Component,
    a: f64,
    b: f64,
    h: f64,
    constraints: &[MeshConstraint],
) -> Result<(ComponentMesh, JunctionVerts)> {
    if h > b - a {
        return Err(Error::Mesh(format!(
            "h = {h} exceeds the length {} of component {}",
            b - a,
            c.id
        )));
    }
    let mut breaks: Vec<(usize, f64)> = Vec::new();
    for con in constraints {
        match con {
            MeshConstraint::Point(j, f) => breaks.push((*j, f[0])),
            MeshConstraint::Chord(..) => {
                return Err(Error::Mesh(format!(
                    "component {}: curve junction on a 1-dimensional component",
                    c.id
                )))
            }
        }
    }
    breaks.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    let mut knots = vec![a];
    for (_, s) in &breaks {
        if *s > knots.last().unwrap() + GEOM_TOL && *s < b - GEOM_TOL {
            knots.push(*s);
        } else if (*s - a).abs() <= GEOM_TOL || (*s - b).abs() <= GEOM_TOL {
            // Junction at an endpoint: already a vertex.
        }
    }
    knots.push(b);

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    for w in knots.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let nsub = ((s1 - s0) / h).ceil().max(1.0) as usize;
        for k in 0..nsub {
            vertices.push([s0 + (s1 - s0) * k as f64 / nsub as f64, 0.0]);
        }
    }
    vertices.push([b, 0.0]);
    let segments: Vec<[usize; 2]> = (0..vertices.len() - 1).map(|k| [k, k + 1]).collect();
    let mut on_boundary = vec![false; vertices.len()];
    on_boundary[0] = true;
    *on_boundary.last_mut().unwrap() = true;

    let mut jv = Vec::new();
    for (j, s) in breaks {
        let v = vertices
            .iter()
            .position(|p| (p[0] - s).abs() <= GEOM_TOL)
            .ok_or_else(|| Error::Mesh("junction breakpoint lost during subdivision".into()))?;
        jv.push((j, vec![v]));
    }

    Ok((
        ComponentMesh {
            dim: 1,
            vertices,
            segments,
            triangles: Vec::new(),
            on_boundary,
        },
        jv,
    ))
}

fn mesh_disc(
    c: &Component,
    center: Vector2<f64>,
    radius: f64,
    h: f64,
    constraints: &[MeshConstraint],
) -> Result<(ComponentMesh, JunctionVerts)> {
    if h > radius {
        return Err(Error::Mesh(format!(
            "h = {h} exceeds the radius {radius} of component {}",
            c.id
        )));
    }
    // Diameter constraints: every curve junction must run through the center
    // with both endpoints on the rim.
    let mut diameters: Vec<(usize, f64)> = Vec::new(); // (junction, angle in [0, pi))
    let mut center_points: Vec<usize> = Vec::new();
    for con in constraints {
        match con {
            MeshConstraint::Point(j, f) => {
                let p = Vector2::new(f[0], f[1]);
                if (p - center).norm() > GEOM_TOL {
                    return Err(Error::Mesh(format!(
                        "component {}: point junction away from the disc center is not \
                         supported by the sector template",
                        c.id
                    )));
                }
                center_points.push(*j);
            }
            MeshConstraint::Chord(j, pa, pb) => {
                let (ra, rb) = ((pa - center).norm(), (pb - center).norm());
                let mid = (pa + pb) * 0.5;
                if (ra - radius).abs() > GEOM_TOL
                    || (rb - radius).abs() > GEOM_TOL
                    || (mid - center).norm() > GEOM_TOL
                {
                    return Err(Error::Mesh(format!(
                        "component {}: curve junction is not a full diameter; the sector \
                         template requires junction chords through the center",
                        c.id
                    )));
                }
                let d = pb - pa;
                let mut angle = d.y.atan2(d.x);
                if angle < 0.0 {
                    angle += std::f64::consts::PI;
                }
                if (angle - std::f64::consts::PI).abs() < 1e-12 {
                    angle = 0.0;
                }
                diameters.push((*j, angle));
            }
        }
    }

    let nr = (radius / h).ceil() as usize;
    let mut na = ((TAU * radius / h).ceil() as usize).max(8);
    if na % 2 == 1 {
        na += 1;
    }
    let theta0 = diameters.first().map(|(_, a)| *a).unwrap_or(0.0);
    // All diameter angles must land on the angular grid.
    let da = TAU / na as f64;
    for (_, ang) in &diameters {
        let steps = (ang - theta0) / da;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Mesh(format!(
                "component {}: junction diameters are not commensurate with one \
                 angular grid",
                c.id
            )));
        }
    }

    // Vertices: center + nr rings of na vertices.
    let mut vertices = Vec::with_capacity(1 + nr * na);
    vertices.push([center.x, center.y]);
    for k in 1..=nr {
        let r = radius * k as f64 / nr as f64;
        for j in 0..na {
            let th = theta0 + da * j as f64;
            vertices.push([center.x + r * th.cos(), center.y + r * th.sin()]);
        }
    }
    let vid = |k: usize, j: usize| -> usize {
        if k == 0 {
            0
        } else {
            1 + (k - 1) * na + (j % na)
        }
    };

    let mut triangles = Vec::new();
    let mut push_tri = |a: usize, b: usize, cc: usize, vs: &Vec<[f64; 2]>| {
        let (p0, p1, p2) = (vs[a], vs[b], vs[cc]);
        let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        if area2 >= 0.0 {
            triangles.push([a, b, cc]);
        } else {
            triangles.push([a, cc, b]);
        }
    };
    for j in 0..na {
        push_tri(0, vid(1, j), vid(1, j + 1), &vertices);
    }
    for k in 1..nr {
        for j in 0..na {
            let (a, b) = (vid(k, j), vid(k, j + 1));
            let (cc, d) = (vid(k + 1, j + 1), vid(k + 1, j));
            // Mirror-symmetric split about the theta0 diameter.
            if j < na / 2 {
                push_tri(a, b, d, &vertices);
                push_tri(b, cc, d, &vertices);
            } else {
                push_tri(a, b, cc, &vertices);
                push_tri(a, cc, d, &vertices);
            }
        }
    }
    for t in &triangles {
        let (p0, p1, p2) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        let area =
            0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        if area < 1e-14 {
            return Err(Error::Mesh(format!(
                "degenerate triangle (area {area:.3e}) in component {}",
                c.id
            )));
        }
    }

    let mut on_boundary = vec![false; vertices.len()];
    for j in 0..na {
        on_boundary[vid(nr, j)] = true;
    }

    // Junction vertex lists.
    let mut jv = Vec::new();
    for j in center_points {
        jv.push((j, vec![0]));
    }
    for (jidx, ang) in diameters {
        let j_pos = ((ang - theta0) / da).round() as usize % na;
        let j_neg = (j_pos + na / 2) % na;
        // Order along the chord from the endpoint at angle ang + pi.
        let mut seq = Vec::with_capacity(2 * nr + 1);
        for k in (1..=nr).rev() {
            seq.push(vid(k, j_neg));
        }
        seq.push(0);
        for k in 1..=nr {
            seq.push(vid(k, j_pos));
        }
        jv.push((jidx, seq));
    }

    Ok((
        ComponentMesh {
            dim: 2,
            vertices,
            segments: Vec::new(),
            triangles,
            on_boundary,
        },
        jv,
    ))
}

fn mesh_polygon(
    c: &Component,
    poly: &[Vector2<f64>],
    h: f64,
    constraints: &[MeshConstraint],
) -> Result<(ComponentMesh, JunctionVerts)> {
    let min_edge = (0..poly.len())
        .map(|i| (poly[(i + 1) % poly.len()] - poly[i]).norm())
        .fold(f64::INFINITY, f64::min);
    if h > min_edge {
        return Err(Error::Mesh(format!(
            "h = {h} exceeds the shortest polygon edge {min_edge} of component {}",
            c.id
        )));
    }
    for con in constraints {
        if let MeshConstraint::Chord(..) = con {
            return Err(Error::Mesh(format!(
                "component {}: curve junctions on polygon components are not supported",
                c.id
            )));
        }
    }

    let mut vertices: Vec<[f64; 2]> = poly.iter().map(|p| [p.x, p.y]).collect();
    let mut triangles = ear_clip(poly)?;

    // Uniform 4-way refinement until every edge is at most h.
    loop {
        let max_edge = triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| {
                let (p, q) = (vertices[a], vertices[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        if max_edge <= h {
            break;
        }
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut mid = [0usize; 3];
            for (e, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].iter().enumerate() {
                let key = (*a.min(b), *a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let (p, q) = (vertices[key.0], vertices[key.1]);
                    vertices.push([(p[0] + q[0]) * 0.5, (p[1] + q[1]) * 0.5]);
                    vertices.len() - 1
                });
            }
            next.push([t[0], mid[0], mid[2]]);
            next.push([mid[0], t[1], mid[1]]);
            next.push([mid[2], mid[1], t[2]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        triangles = next;
    }

    let on_boundary = vertices
        .iter()
        .map(|p| c.shape.on_boundary(&p[..], 1e-9))
        .collect();

    let mut jv = Vec::new();
    for con in constraints {
        if let MeshConstraint::Point(j, f) = con {
            let v = vertices
                .iter()
                .position(|p| ((p[0] - f[0]).powi(2) + (p[1] - f[1]).powi(2)).sqrt() <= GEOM_TOL)
                .ok_or_else(|| {
                    Error::Mesh(format!(
                        "component {}: point junction does not coincide with a mesh vertex \
                         of the refined polygon triangulation",
                        c.id
                    ))
                })?;
            jv.push((*j, vec![v]));
        }
    }

    Ok((
        ComponentMesh {
            dim: 2,
            vertices,
            segments: Vec::new(),
            triangles,
            on_boundary,
        },
        jv,
    ))
}

fn ear_clip(poly: &[Vector2<f64>]) -> Result<Vec<[usize; 3]>> {
    let n = poly.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    let cross = |a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>| {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    };
    let mut guard = 0usize;
    while idx.len() > 3 {
        guard += 1;
        if guard > n * n + 16 {
            return Err(Error::Mesh("ear clipping failed (polygon not simple?)".into()));
        }
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (pa, pb, pc) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (poly[pa], poly[pb], poly[pc]);
            if cross(a, b, c) <= 1e-14 {
                continue;
            }
            // No other vertex inside the candidate ear.
            let mut ok = true;
            for &q in &idx {
                if q == pa || q == pb || q == pc {
                    continue;
                }
                let p = poly[q];
                if cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.push([pa, pb, pc]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(Error::Mesh("ear clipping stalled (polygon not simple?)".into()));
        }
    }
    out.push([idx[0], idx[1], idx[2]]);
    Ok(out)
}

/// Serialize one component mesh in the plain-text block format
/// (`vertices`, `cells`, `junction_nodes` blocks).
pub fn export_component_mesh(ms: &MeshSet, comp_idx: usize) -> String {
    let m = &ms.meshes[comp_idx];
    let mut out = String::new();
    let _ = writeln!(out, "vertices {}", m.vertices.len());
    for v in &m.vertices {
        if m.dim == 1 {
            let _ = writeln!(out, "{}", v[0]);
        } else {
            let _ = writeln!(out, "{} {}", v[0], v[1]);
        }
    }
    let _ = writeln!(out, "cells {}", m.n_cells());
    if m.dim == 1 {
        for s in &m.segments {
            let _ = writeln!(out, "{} {}", s[0], s[1]);
        }
    } else {
        for t in &m.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
    }
    let rows: Vec<(usize, usize)> = ms
        .junction_traces
        .iter()
        .flat_map(|tr| {
            tr.sides
                .iter()
                .filter(|(ci, _)| *ci == comp_idx)
                .flat_map(|(_, verts)| verts.iter().map(|&v| (tr.junction, v)))
                .collect::<Vec<_>>()
        })
        .collect();
    let _ = writeln!(out, "junction_nodes {}", rows.len());
    for (j, v) in rows {
        let _ = writeln!(out, "{j} {v}");
    }
    out
}
