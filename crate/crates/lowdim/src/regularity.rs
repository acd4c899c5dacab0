//! Computable regularity diagnostics: junction traces, the
//! inclusion-exclusion extension on the crossed-disc model, Cosserat copy
//! fields, discrete H^2 seminorms via gradient recovery, and continuity
//! checks.
//!
//! The extension and Cosserat operations are implemented for the generic
//! orthogonal model geometries (two crossed discs, two crossed segments);
//! general structures reduce to these models locally.

use crate::dof::{barycentric, Field};
use crate::error::{Error, Result};
use crate::mesh::ComponentMesh;
use crate::structure::{Component, JunctionGeometry, GEOM_TOL};
use crate::Discretization;
use nalgebra::Vector3;

/// Nodal values of a field along one side of a junction.
#[derive(Debug, Clone)]
pub struct TraceField {
    pub junction: usize,
    pub side: usize,
    /// Strictly increasing arclength parameters along the junction.
    pub params: Vec<f64>,
    pub values: Vec<f64>,
}

/// Trace of a coupled field along a junction, seen from one component.
pub fn trace_on_junction(
    disc: &Discretization,
    u: &Field,
    junction: usize,
    side_component: u32,
) -> Result<TraceField> {
    let ci = disc
        .structure
        .component_index(side_component)
        .ok_or_else(|| Error::InvalidArg(format!("no component {side_component}")))?;
    let tr = disc
        .ms
        .trace_of(junction)
        .ok_or_else(|| Error::InvalidArg(format!("no junction {junction}")))?;
    let side = tr
        .sides
        .iter()
        .position(|(c, _)| *c == ci)
        .ok_or_else(|| {
            Error::InvalidArg(format!(
                "component {side_component} is not adjacent to junction {junction}"
            ))
        })?;
    let values = tr.sides[side]
        .1
        .iter()
        .map(|&v| u.0[disc.dm.local_to_global[ci][v]])
        .collect();
    Ok(TraceField {
        junction,
        side,
        params: tr.params.clone(),
        values,
    })
}

/// Max and L^2(Sigma) norms of the side-trace difference of an uncoupled
/// per-component representation (`values[ci][vertex]`).
pub fn trace_mismatch(
    disc: &Discretization,
    values: &[Vec<f64>],
    junction: usize,
) -> Result<(f64, f64)> {
    let tr = disc
        .ms
        .trace_of(junction)
        .ok_or_else(|| Error::InvalidArg(format!("no junction {junction}")))?;
    let (c0, v0) = &tr.sides[0];
    let (c1, v1) = &tr.sides[1];
    let diffs: Vec<f64> = v0
        .iter()
        .zip(v1)
        .map(|(&a, &b)| values[*c0][a] - values[*c1][b])
        .collect();
    let max = diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let l2 = if diffs.len() == 1 {
        diffs[0].abs()
    } else {
        let mut acc = 0.0;
        for k in 0..diffs.len() - 1 {
            let len = tr.params[k + 1] - tr.params[k];
            let (a, b) = (diffs[k], diffs[k + 1]);
            acc += len * (a * a + a * b + b * b) / 3.0;
        }
        acc.sqrt()
    };
    Ok((max, l2))
}

/// Split a coupled field into per-component vertex values.
pub fn split_field(disc: &Discretization, u: &Field) -> Vec<Vec<f64>> {
    disc.dm
        .local_to_global
        .iter()
        .map(|l2g| l2g.iter().map(|&g| u.0[g]).collect())
        .collect()
}

/// Max nodal jump across every junction (zero for shared dofs by
/// construction; the actual gap for independent mixed-dimension dofs).
pub fn continuity_check(disc: &Discretization, u: &Field) -> Vec<(usize, f64)> {
    let vals = split_field(disc, u);
    disc.ms
        .junction_traces
        .iter()
        .map(|tr| {
            let (c0, v0) = &tr.sides[0];
            let (c1, v1) = &tr.sides[1];
            let jump = v0
                .iter()
                .zip(v1)
                .map(|(&a, &b)| (vals[*c0][a] - vals[*c1][b]).abs())
                .fold(0.0_f64, f64::max);
            (tr.junction, jump)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// P1 interpolation and gradient recovery
// ---------------------------------------------------------------------------

/// P1 interpolation of per-vertex values at a frame point.
pub fn interp_p1(mesh: &ComponentMesh, values: &[f64], frame: &[f64]) -> Result<f64> {
    if mesh.dim == 1 {
        let s = frame[0];
        for seg in &mesh.segments {
            let (s0, s1) = (mesh.vertices[seg[0]][0], mesh.vertices[seg[1]][0]);
            if s >= s0 - GEOM_TOL && s <= s1 + GEOM_TOL {
                let t = ((s - s0) / (s1 - s0)).clamp(0.0, 1.0);
                return Ok(values[seg[0]] * (1.0 - t) + values[seg[1]] * t);
            }
        }
    } else {
        let p = [frame[0], frame[1]];
        for tri in &mesh.triangles {
            let bary = barycentric(
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
                p,
            );
            if bary.iter().all(|&l| l >= -1e-10) {
                return Ok(bary[0] * values[tri[0]]
                    + bary[1] * values[tri[1]]
                    + bary[2] * values[tri[2]]);
            }
        }
    }
    Err(Error::Geometry(format!(
        "query point {frame:?} lies outside the meshed component"
    )))
}

/// Measure-weighted nodal average of element gradients in frame coordinates.
pub fn recovered_gradient(mesh: &ComponentMesh, values: &[f64]) -> Vec<[f64; 2]> {
    let n = mesh.n_vertices();
    let mut acc = vec![[0.0; 2]; n];
    let mut wsum = vec![0.0; n];
    if mesh.dim == 1 {
        for seg in &mesh.segments {
            let (s0, s1) = (mesh.vertices[seg[0]][0], mesh.vertices[seg[1]][0]);
            let len = s1 - s0;
            let g = (values[seg[1]] - values[seg[0]]) / len;
            for &v in seg {
                acc[v][0] += len * g;
                wsum[v] += len;
            }
        }
    } else {
        for tri in &mesh.triangles {
            let (p0, p1, p2) = (
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            );
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let area = 0.5 * det;
            let g = [
                ((p1[1] - p2[1]) * values[tri[0]]
                    + (p2[1] - p0[1]) * values[tri[1]]
                    + (p0[1] - p1[1]) * values[tri[2]])
                    / det,
                ((p2[0] - p1[0]) * values[tri[0]]
                    + (p0[0] - p2[0]) * values[tri[1]]
                    + (p1[0] - p0[0]) * values[tri[2]])
                    / det,
            ];
            for &v in tri {
                acc[v][0] += area * g[0];
                acc[v][1] += area * g[1];
                wsum[v] += area;
            }
        }
    }
    for v in 0..n {
        if wsum[v] > 0.0 {
            acc[v][0] /= wsum[v];
            acc[v][1] /= wsum[v];
        }
    }
    acc
}

/// Discrete H^2 seminorm of a field on one component: Dirichlet energy of
/// the recovered gradient over elements at boundary distance > offset
/// (default 2h), square-rooted. Junction sets are interior and do not count
/// as boundary.
pub fn h2_seminorm(
    disc: &Discretization,
    u: &Field,
    comp_idx: usize,
    offset: Option<f64>,
) -> f64 {
    let offset = offset.unwrap_or(2.0 * disc.ms.h);
    let c = &disc.structure.components[comp_idx];
    let mesh = &disc.ms.meshes[comp_idx];
    let values: Vec<f64> = disc.dm.local_to_global[comp_idx]
        .iter()
        .map(|&g| u.0[g])
        .collect();
    let grad = recovered_gradient(mesh, &values);

    let included = |verts: &[usize]| {
        verts.iter().all(|&v| {
            c.shape
                .boundary_distance(&mesh.vertices[v][..c.dim as usize])
                > offset - 1e-12
        })
    };

    let mut energy = 0.0;
    if mesh.dim == 1 {
        for seg in &mesh.segments {
            if !included(seg) {
                continue;
            }
            let (s0, s1) = (mesh.vertices[seg[0]][0], mesh.vertices[seg[1]][0]);
            let len = s1 - s0;
            let theta = c.theta.eval(&[0.5 * (s0 + s1)]);
            let d = (grad[seg[1]][0] - grad[seg[0]][0]) / len;
            energy += theta * len * d * d;
        }
    } else {
        for tri in &mesh.triangles {
            if !included(tri) {
                continue;
            }
            let (p0, p1, p2) = (
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            );
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let area = 0.5 * det;
            let mid = [
                (p0[0] + p1[0] + p2[0]) / 3.0,
                (p0[1] + p1[1] + p2[1]) / 3.0,
            ];
            let theta = c.theta.eval(&mid);
            for comp in 0..2 {
                let vals = [grad[tri[0]][comp], grad[tri[1]][comp], grad[tri[2]][comp]];
                let gx = ((p1[1] - p2[1]) * vals[0]
                    + (p2[1] - p0[1]) * vals[1]
                    + (p0[1] - p1[1]) * vals[2])
                    / det;
                let gy = ((p2[0] - p1[0]) * vals[0]
                    + (p0[0] - p2[0]) * vals[1]
                    + (p1[0] - p0[0]) * vals[2])
                    / det;
                energy += theta * area * (gx * gx + gy * gy);
            }
        }
    }
    energy.sqrt()
}

// ---------------------------------------------------------------------------
// Model geometries for the extension and Cosserat operations
// ---------------------------------------------------------------------------

/// One side of an orthogonal crossing model.
#[derive(Debug, Clone)]
pub struct ModelSide {
    pub comp: usize,
    /// In-plane unit direction transverse to the junction (the tangent
    /// itself for segments).
    pub transverse: Vector3<f64>,
    /// Unit normal of the component (2D) or the other segment's direction
    /// (1D); carries the Cosserat values.
    pub normal: Vector3<f64>,
}

/// Supported model geometries for the extension/Cosserat operations.
#[derive(Debug, Clone)]
pub enum ModelGeometry {
    /// Two discs crossing orthogonally along a shared diameter.
    CrossedDiscs {
        junction: usize,
        /// Junction line: origin and unit direction.
        origin: Vector3<f64>,
        axis: Vector3<f64>,
        sides: [ModelSide; 2],
    },
    /// Two orthogonal segments crossing at a point.
    CrossedSegments {
        junction: usize,
        point: Vector3<f64>,
        sides: [ModelSide; 2],
    },
}

/// Recognize a supported two-component orthogonal crossing model.
pub fn detect_model(disc: &Discretization) -> Result<ModelGeometry> {
    let s = &disc.structure;
    if s.components.len() != 2 || s.junctions.len() != 1 {
        return Err(Error::Geometry(
            "model operations need exactly two components with one junction".into(),
        ));
    }
    let j = &s.junctions[0];
    let (c0, c1) = (&s.components[0], &s.components[1]);
    match (&j.geometry, c0.dim, c1.dim) {
        (JunctionGeometry::Curve(a, b), 2, 2) => {
            let axis = (b - a).normalize();
            let mut sides = Vec::new();
            for c in [c0, c1] {
                let n = c.normals()[0];
                if n.dot(&axis).abs() > 1e-9 {
                    return Err(Error::Geometry(
                        "junction is not a line of either patch plane".into(),
                    ));
                }
                sides.push(ModelSide {
                    comp: s.component_index(c.id).unwrap(),
                    transverse: n.cross(&axis),
                    normal: n,
                });
            }
            // Orthogonality: each transverse direction is the other's normal.
            for (i, o) in [(0, 1), (1, 0)] {
                let d: f64 = sides[i].transverse.dot(&sides[o].normal).abs();
                if (d - 1.0).abs() > 1e-9 {
                    return Err(Error::Geometry(
                        "patches do not cross orthogonally; unsupported geometry".into(),
                    ));
                }
            }
            Ok(ModelGeometry::CrossedDiscs {
                junction: 0,
                origin: *a,
                axis,
                sides: [sides[0].clone(), sides[1].clone()],
            })
        }
        (JunctionGeometry::Point(p), 1, 1) => {
            let (d0, d1) = (c0.tangents[0], c1.tangents[0]);
            if d0.dot(&d1).abs() > 1e-9 {
                return Err(Error::Geometry(
                    "segments do not cross orthogonally; unsupported geometry".into(),
                ));
            }
            Ok(ModelGeometry::CrossedSegments {
                junction: 0,
                point: *p,
                sides: [
                    ModelSide {
                        comp: 0,
                        transverse: d0,
                        normal: d1,
                    },
                    ModelSide {
                        comp: 1,
                        transverse: d1,
                        normal: d0,
                    },
                ],
            })
        }
        _ => Err(Error::Geometry(
            "unsupported geometry for model operations".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Inclusion-exclusion extension
// ---------------------------------------------------------------------------

/// Ambient extension on the crossed-disc model:
/// u_2(transverse_2 slice) - trace(axis) + u_1(transverse_1 slice),
/// each term by P1 interpolation.
pub fn extend_inclusion_exclusion(
    disc: &Discretization,
    u: &Field,
    queries: &[Vector3<f64>],
) -> Result<Vec<f64>> {
    let model = detect_model(disc)?;
    let ModelGeometry::CrossedDiscs {
        junction,
        origin,
        axis,
        sides,
    } = model
    else {
        return Err(Error::Geometry(
            "the extension is defined on the crossed-disc model".into(),
        ));
    };
    let vals = split_field(disc, u);
    let tr = disc.ms.trace_of(junction).unwrap();
    let trace_values: Vec<f64> = tr.sides[0]
        .1
        .iter()
        .map(|&v| vals[tr.sides[0].0][v])
        .collect();

    let mut out = Vec::with_capacity(queries.len());
    for p in queries {
        let rel = p - origin;
        let y = rel.dot(&axis);
        let x = rel.dot(&sides[0].transverse);
        let z = rel.dot(&sides[1].transverse);

        let p1 = origin + axis * y + sides[0].transverse * x;
        let p2 = origin + axis * y + sides[1].transverse * z;
        let c1 = &disc.structure.components[sides[0].comp];
        let c2 = &disc.structure.components[sides[1].comp];
        let u1 = interp_p1(
            &disc.ms.meshes[sides[0].comp],
            &vals[sides[0].comp],
            &c1.frame_coords(&p1),
        )?;
        let u2 = interp_p1(
            &disc.ms.meshes[sides[1].comp],
            &vals[sides[1].comp],
            &c2.frame_coords(&p2),
        )?;
        let tr_val = interp_1d(&tr.params, &trace_values, y)?;
        out.push(u2 - tr_val + u1);
    }
    Ok(out)
}

fn interp_1d(params: &[f64], values: &[f64], x: f64) -> Result<f64> {
    if x < params[0] - GEOM_TOL || x > *params.last().unwrap() + GEOM_TOL {
        return Err(Error::Geometry(format!(
            "parameter {x} outside the junction range"
        )));
    }
    for k in 0..params.len() - 1 {
        if x <= params[k + 1] + GEOM_TOL {
            let t = ((x - params[k]) / (params[k + 1] - params[k])).clamp(0.0, 1.0);
            return Ok(values[k] * (1.0 - t) + values[k + 1] * t);
        }
    }
    Ok(*values.last().unwrap())
}

// ---------------------------------------------------------------------------
// Cosserat copy and compatibility
// ---------------------------------------------------------------------------

/// Normal-valued nodal field: per component, a coefficient along the
/// component's Cosserat direction (tangential part identically zero).
#[derive(Debug, Clone)]
pub struct CosseratField {
    /// Per component: unit direction carrying the values.
    pub directions: Vec<Vector3<f64>>,
    /// Per component: nodal coefficients.
    pub coeffs: Vec<Vec<f64>>,
}

impl CosseratField {
    pub fn zero(disc: &Discretization) -> Self {
        let directions = disc
            .structure
            .components
            .iter()
            .map(|c| c.normals()[0])
            .collect();
        let coeffs = disc
            .ms
            .meshes
            .iter()
            .map(|m| vec![0.0; m.n_vertices()])
            .collect();
        CosseratField { directions, coeffs }
    }

    /// Ambient vector at a node.
    pub fn vector_at(&self, comp: usize, vertex: usize) -> Vector3<f64> {
        self.directions[comp] * self.coeffs[comp][vertex]
    }
}

/// Transverse tangential derivative of a field on a component, as nodal
/// values: (recovered gradient) . transverse.
fn transverse_derivative(
    disc: &Discretization,
    vals: &[Vec<f64>],
    side: &ModelSide,
) -> Vec<f64> {
    let c = &disc.structure.components[side.comp];
    let mesh = &disc.ms.meshes[side.comp];
    let grad = recovered_gradient(mesh, &vals[side.comp]);
    // Transverse direction in frame coordinates.
    let alpha: Vec<f64> = c.tangents.iter().map(|t| t.dot(&side.transverse)).collect();
    (0..mesh.n_vertices())
        .map(|v| {
            let mut d = alpha[0] * grad[v][0];
            if c.dim == 2 {
                d += alpha[1] * grad[v][1];
            }
            d
        })
        .collect()
}

/// Cosserat copy: on each component the normal coefficient equals the other
/// component's transverse tangential derivative sampled along the junction
/// (at the junction point for segments), transported constantly in the
/// transverse coordinate.
pub fn cosserat_copy(disc: &Discretization, u: &Field) -> Result<CosseratField> {
    let model = detect_model(disc)?;
    let vals = split_field(disc, u);
    let mut out = CosseratField::zero(disc);

    match model {
        ModelGeometry::CrossedDiscs {
            junction,
            origin,
            axis,
            sides,
        } => {
            let tr = disc.ms.trace_of(junction).unwrap();
            for (i, o) in [(0usize, 1usize), (1, 0)] {
                let other = &sides[o];
                let here = &sides[i];
                let d_other = transverse_derivative(disc, &vals, other);
                // Values of the other side's transverse derivative along the
                // junction, by trace parameter.
                let side_pos = tr
                    .sides
                    .iter()
                    .position(|(cidx, _)| *cidx == other.comp)
                    .unwrap();
                let sigma_vals: Vec<f64> = tr.sides[side_pos]
                    .1
                    .iter()
                    .map(|&v| d_other[v])
                    .collect();
                // Orientation of the copied ambient component.
                let sign = other.transverse.dot(&here.normal);
                let c_here = &disc.structure.components[here.comp];
                let mesh = &disc.ms.meshes[here.comp];
                for v in 0..mesh.n_vertices() {
                    let p = c_here.embed(&mesh.vertices[v][..2]);
                    let y = (p - origin).dot(&axis);
                    out.coeffs[here.comp][v] =
                        sign * interp_1d(&tr.params, &sigma_vals, y.clamp(
                            tr.params[0],
                            *tr.params.last().unwrap(),
                        ))?;
                }
                out.directions[here.comp] = here.normal;
            }
        }
        ModelGeometry::CrossedSegments { junction, sides, .. } => {
            let tr = disc.ms.trace_of(junction).unwrap();
            for (i, o) in [(0usize, 1usize), (1, 0)] {
                let other = &sides[o];
                let here = &sides[i];
                let d_other = transverse_derivative(disc, &vals, other);
                let side_pos = tr
                    .sides
                    .iter()
                    .position(|(cidx, _)| *cidx == other.comp)
                    .unwrap();
                let at_junction = d_other[tr.sides[side_pos].1[0]];
                let sign = other.transverse.dot(&here.normal);
                let nverts = disc.ms.meshes[here.comp].n_vertices();
                out.coeffs[here.comp] = vec![sign * at_junction; nverts];
                out.directions[here.comp] = here.normal;
            }
        }
    }
    Ok(out)
}

/// Compatibility report for a pair (u, b): the three ambient component
/// fields of grad_mu u + b, their per-component discrete H^1 norms, and the
/// junction mismatch per ambient slot.
#[derive(Debug, Clone)]
pub struct CosseratReport {
    /// Max junction mismatch per ambient coordinate slot.
    pub slot_mismatch: [f64; 3],
    /// Per component, per ambient slot: discrete H^1 norm of the field.
    pub h1_norms: Vec<[f64; 3]>,
    pub pass: bool,
    pub tolerance: f64,
}

/// Check that grad_mu u + b glues into a vector field whose three ambient
/// components match across the junction (trace agreement slot by slot).
/// The along-junction slot is canonicalized from the shared trace, so only
/// genuine transverse/normal gaps register.
pub fn cosserat_compatibility(
    disc: &Discretization,
    u: &Field,
    b: &CosseratField,
    tol: f64,
) -> Result<CosseratReport> {
    let model = detect_model(disc)?;
    let vals = split_field(disc, u);

    // Ambient nodal vectors of grad_mu u + b per component.
    let mut ambient: Vec<Vec<Vector3<f64>>> = Vec::new();
    for (ci, c) in disc.structure.components.iter().enumerate() {
        let mesh = &disc.ms.meshes[ci];
        let grad = recovered_gradient(mesh, &vals[ci]);
        let mut vecs = Vec::with_capacity(mesh.n_vertices());
        for v in 0..mesh.n_vertices() {
            let mut w = c.tangents[0] * grad[v][0];
            if c.dim == 2 {
                w += c.tangents[1] * grad[v][1];
            }
            w += b.vector_at(ci, v);
            vecs.push(w);
        }
        ambient.push(vecs);
    }

    let (junction, axis) = match &model {
        ModelGeometry::CrossedDiscs { junction, axis, .. } => (*junction, Some(*axis)),
        ModelGeometry::CrossedSegments { junction, .. } => (*junction, None),
    };
    let tr = disc.ms.trace_of(junction).unwrap();

    // Canonical along-junction derivative from the shared trace.
    let axis_derivative: Option<Vec<f64>> = axis.map(|_| {
        let (c0, v0) = &tr.sides[0];
        let trace_vals: Vec<f64> = v0.iter().map(|&v| vals[*c0][v]).collect();
        let n = trace_vals.len();
        let mut d = vec![0.0; n];
        for k in 0..n {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            d[k] = (trace_vals[hi] - trace_vals[lo]) / (tr.params[hi] - tr.params[lo]);
        }
        d
    });

    let mut slot_mismatch = [0.0_f64; 3];
    for k in 0..tr.params.len() {
        let mut vecs = [Vector3::zeros(), Vector3::zeros()];
        for (s, (ci, verts)) in tr.sides.iter().enumerate() {
            let mut w = ambient[*ci][verts[k]];
            if let (Some(axis), Some(dv)) = (axis, &axis_derivative) {
                // Replace the axis slot with the canonical trace derivative.
                w += axis * (dv[k] - w.dot(&axis));
            }
            vecs[s] = w;
        }
        let diff = vecs[0] - vecs[1];
        for slot in 0..3 {
            slot_mismatch[slot] = slot_mismatch[slot].max(diff[slot].abs());
        }
    }

    // Per-component H^1 norms of each ambient slot field.
    let mut h1_norms = Vec::new();
    for (ci, c) in disc.structure.components.iter().enumerate() {
        let mesh = &disc.ms.meshes[ci];
        let mut norms = [0.0_f64; 3];
        for (slot, norm) in norms.iter_mut().enumerate() {
            let nodal: Vec<f64> = (0..mesh.n_vertices())
                .map(|v| ambient[ci][v][slot])
                .collect();
            *norm = h1_norm_component(c, mesh, &nodal);
        }
        h1_norms.push(norms);
    }

    let worst = slot_mismatch.iter().fold(0.0_f64, |m, &x| m.max(x));
    Ok(CosseratReport {
        slot_mismatch,
        h1_norms,
        pass: worst <= tol,
        tolerance: tol,
    })
}

/// Discrete H^1 norm (L^2 + Dirichlet energy, theta-weighted) of nodal data
/// on one component.
fn h1_norm_component(c: &Component, mesh: &ComponentMesh, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    if mesh.dim == 1 {
        for seg in &mesh.segments {
            let (s0, s1) = (mesh.vertices[seg[0]][0], mesh.vertices[seg[1]][0]);
            let len = s1 - s0;
            let theta = c.theta.eval(&[0.5 * (s0 + s1)]);
            let (a, b) = (values[seg[0]], values[seg[1]]);
            let g = (b - a) / len;
            acc += theta * (len * (a * a + a * b + b * b) / 3.0 + len * g * g);
        }
    } else {
        for tri in &mesh.triangles {
            let (p0, p1, p2) = (
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            );
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let area = 0.5 * det;
            let mid = [
                (p0[0] + p1[0] + p2[0]) / 3.0,
                (p0[1] + p1[1] + p2[1]) / 3.0,
            ];
            let theta = c.theta.eval(&mid);
            let vals = [values[tri[0]], values[tri[1]], values[tri[2]]];
            let gx =
                ((p1[1] - p2[1]) * vals[0] + (p2[1] - p0[1]) * vals[1] + (p0[1] - p1[1]) * vals[2])
                    / det;
            let gy =
                ((p2[0] - p1[0]) * vals[0] + (p0[0] - p2[0]) * vals[1] + (p1[0] - p0[0]) * vals[2])
                    / det;
            let l2 = area * (vals[0] * vals[0] + vals[1] * vals[1] + vals[2] * vals[2]
                + vals[0] * vals[1]
                + vals[1] * vals[2]
                + vals[0] * vals[2])
                / 6.0;
            acc += theta * (l2 + area * (gx * gx + gy * gy));
        }
    }
    acc.sqrt()
}
