//! Assembly of the discrete bilinear forms: stiffness
//! int theta (B_mu grad u . grad v), mass int theta u v, loads
//! int theta f v, and measure integrals of analytic integrands.
//!
//! Element loops run data-parallel over fixed chunks merged in chunk order,
//! so assembled values are bitwise deterministic.

use crate::coeff::{relax_matrix, CoefficientMatrix};
use crate::dof::{DofMap, Field};
use crate::error::{Error, Result};
use crate::mesh::MeshSet;
use crate::quad::{integrate_disc, GAUSS3_01, TRI_DEG4};
use crate::structure::{Component, Shape, Structure};
use nalgebra::{DVector, Vector3};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Symmetric sparse matrix in compressed-row storage (full pattern kept for
/// matrix-vector products; values exactly symmetric by construction).
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseSym {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// Quadratic form x^T A x.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.matvec(x))
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] += self.vals[k];
            }
        }
        m
    }

    /// Coordinate-list text dump (`row col value` per line).
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let _ = writeln!(out, "{} {} {}", r, self.col_idx[k], self.vals[k]);
            }
        }
        out
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }
}

/// Assembled stiffness/mass pencil over a dof map.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub k: SparseSym,
    pub m: SparseSym,
}

/// Per-component scalar data (right-hand sides, initial data), evaluated in
/// frame coordinates; components without an entry evaluate to zero.
pub struct ComponentFn<'a> {
    funcs: BTreeMap<usize, Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>>,
}

impl<'a> ComponentFn<'a> {
    pub fn new() -> Self {
        ComponentFn {
            funcs: BTreeMap::new(),
        }
    }

    /// Set the function on the component with the given index.
    pub fn set(mut self, comp_idx: usize, f: impl Fn(&[f64]) -> f64 + Sync + 'a) -> Self {
        self.funcs.insert(comp_idx, Box::new(f));
        self
    }

    pub fn eval(&self, comp_idx: usize, frame: &[f64]) -> f64 {
        self.funcs.get(&comp_idx).map_or(0.0, |f| f(frame))
    }

    pub fn has(&self, comp_idx: usize) -> bool {
        self.funcs.contains_key(&comp_idx)
    }
}

impl<'a> Default for ComponentFn<'a> {
    fn default() -> Self {
        Self::new()
    }
}

/// Quadrature points with weights (weight includes the element measure) and
/// the P1 basis values/frame gradients at each point for one element.
struct ElementQuad {
    /// (weight, frame point, basis values, frame gradients per node)
    points: Vec<(f64, [f64; 2], Vec<f64>, Vec<[f64; 2]>)>,
    nodes: Vec<usize>,
}

fn element_quads(mesh: &crate::mesh::ComponentMesh) -> Vec<ElementQuad> {
    let mut out = Vec::with_capacity(mesh.n_cells());
    if mesh.dim == 1 {
        for seg in &mesh.segments {
            let (s0, s1) = (mesh.vertices[seg[0]][0], mesh.vertices[seg[1]][0]);
            let len = s1 - s0;
            let grads = vec![[-1.0 / len, 0.0], [1.0 / len, 0.0]];
            let points = GAUSS3_01
                .iter()
                .map(|&(q, w)| {
                    let s = s0 + q * len;
                    (w * len, [s, 0.0], vec![1.0 - q, q], grads.clone())
                })
                .collect();
            out.push(ElementQuad {
                points,
                nodes: seg.to_vec(),
            });
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
            // Constant P1 gradients in frame coordinates.
            let g = vec![
                [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
            ];
            let points = TRI_DEG4
                .iter()
                .map(|&(bary, w)| {
                    let u = bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0];
                    let v = bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1];
                    (w * area, [u, v], bary.to_vec(), g.clone())
                })
                .collect();
            out.push(ElementQuad {
                points,
                nodes: tri.to_vec(),
            });
        }
    }
    out
}

/// Embed a frame gradient in R^3 via the component tangents.
fn embed_gradient(c: &Component, g: &[f64; 2]) -> Vector3<f64> {
    let mut v = c.tangents[0] * g[0];
    if c.dim == 2 {
        v += c.tangents[1] * g[1];
    }
    v
}

fn assemble_symmetric(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    kernel: impl Fn(&Component, &ElementQuad) -> Result<Vec<(usize, usize, f64)>> + Sync,
) -> Result<SparseSym> {
    let mut all: Vec<(usize, usize, f64)> = Vec::new();
    for (ci, c) in structure.components.iter().enumerate() {
        let quads = element_quads(&ms.meshes[ci]);
        let l2g = &dm.local_to_global[ci];
        // Fixed chunking keeps the merge order independent of scheduling.
        let chunk = 256usize;
        let chunks: Vec<Result<Vec<(usize, usize, f64)>>> = quads
            .par_chunks(chunk)
            .map(|qs| {
                let mut trips = Vec::new();
                for eq in qs {
                    for (a, b, v) in kernel(c, eq)? {
                        trips.push((l2g[eq.nodes[a]], l2g[eq.nodes[b]], v));
                    }
                }
                Ok(trips)
            })
            .collect();
        for ch in chunks {
            all.extend(ch?);
        }
    }
    Ok(SparseSym::from_triplets(dm.n_dofs, all))
}

/// Stiffness matrix K[a,b] = sum_i int theta_i (B_mu grad phi_b) . grad phi_a.
pub fn assemble_stiffness(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    coeff: &CoefficientMatrix,
) -> Result<SparseSym> {
    assemble_symmetric(structure, ms, dm, |c, eq| {
        let n = eq.nodes.len();
        let tangents = &c.tangents;
        let normals = c.normals();
        let mut local = vec![0.0; n * n];
        for (w, fp, _, grads) in &eq.points {
            let frame = &fp[..c.dim as usize];
            let x = c.embed(frame);
            let b = coeff.eval(&x);
            let bmu = relax_matrix(&b, tangents, &normals)?;
            let theta = c.theta.eval(frame);
            let g3: Vec<Vector3<f64>> = grads.iter().map(|g| embed_gradient(c, g)).collect();
            for a in 0..n {
                let bga = bmu * g3[a];
                for bb in a..n {
                    local[a * n + bb] += w * theta * bga.dot(&g3[bb]);
                }
            }
        }
        let mut trips = Vec::with_capacity(n * n);
        for a in 0..n {
            for bb in a..n {
                let v = local[a * n + bb];
                trips.push((a, bb, v));
                if bb != a {
                    trips.push((bb, a, v));
                }
            }
        }
        Ok(trips)
    })
}

/// Mass matrix M[a,b] = sum_i int theta_i phi_a phi_b.
pub fn assemble_mass(structure: &Structure, ms: &MeshSet, dm: &DofMap) -> Result<SparseSym> {
    assemble_symmetric(structure, ms, dm, |c, eq| {
        let n = eq.nodes.len();
        let mut local = vec![0.0; n * n];
        for (w, fp, basis, _) in &eq.points {
            let theta = c.theta.eval(&fp[..c.dim as usize]);
            for a in 0..n {
                for bb in a..n {
                    local[a * n + bb] += w * theta * basis[a] * basis[bb];
                }
            }
        }
        let mut trips = Vec::with_capacity(n * n);
        for a in 0..n {
            for bb in a..n {
                let v = local[a * n + bb];
                trips.push((a, bb, v));
                if bb != a {
                    trips.push((bb, a, v));
                }
            }
        }
        Ok(trips)
    })
}

/// Assemble both matrices of the pencil.
pub fn assemble_system(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    coeff: &CoefficientMatrix,
) -> Result<FemSystem> {
    Ok(FemSystem {
        k: assemble_stiffness(structure, ms, dm, coeff)?,
        m: assemble_mass(structure, ms, dm)?,
    })
}

/// Load vector F[a] = sum_i int theta_i f phi_a.
pub fn assemble_load(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    f: &ComponentFn,
) -> Field {
    let mut out = DVector::zeros(dm.n_dofs);
    for (ci, c) in structure.components.iter().enumerate() {
        if !f.has(ci) {
            continue;
        }
        for eq in element_quads(&ms.meshes[ci]) {
            for (w, fp, basis, _) in &eq.points {
                let frame = &fp[..c.dim as usize];
                let v = w * c.theta.eval(frame) * f.eval(ci, frame);
                for (a, &node) in eq.nodes.iter().enumerate() {
                    out[dm.local_to_global[ci][node]] += v * basis[a];
                }
            }
        }
    }
    Field(out)
}

/// Nodal interpolant of per-component data.
pub fn interpolate(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    f: &ComponentFn,
) -> Field {
    let mut out = DVector::zeros(dm.n_dofs);
    for (ci, c) in structure.components.iter().enumerate() {
        let m = &ms.meshes[ci];
        for (v, p) in m.vertices.iter().enumerate() {
            out[dm.local_to_global[ci][v]] = f.eval(ci, &p[..c.dim as usize]);
        }
    }
    Field(out)
}

/// Measure integral sum_i int theta_i g dS_i of analytic per-component data.
///
/// Segments and polygons integrate with the composite element rules on exact
/// geometry; discs integrate on the exact circle via polar panels aligned
/// with the mesh template, refined threefold, so curved-boundary error stays
/// below composite-rule accuracy.
pub fn integrate(structure: &Structure, ms: &MeshSet, g: &ComponentFn) -> f64 {
    let all: Vec<usize> = (0..structure.components.len()).collect();
    integrate_over(structure, ms, g, &all)
}

/// Measure integral restricted to a set of component indices.
pub fn integrate_over(
    structure: &Structure,
    ms: &MeshSet,
    g: &ComponentFn,
    comps: &[usize],
) -> f64 {
    let mut acc = 0.0;
    for &ci in comps {
        let c = &structure.components[ci];
        if !g.has(ci) {
            continue;
        }
        acc += match &c.shape {
            Shape::Disc { center, radius } => {
                let nr = ((radius / ms.h).ceil() as usize).max(1) * 3;
                let na = ((std::f64::consts::TAU * radius / ms.h).ceil() as usize).max(8);
                integrate_disc([center.x, center.y], *radius, 0.0, nr, na, |u, v| {
                    c.theta.eval(&[u, v]) * g.eval(ci, &[u, v])
                })
            }
            _ => {
                let mut sum = 0.0;
                for eq in element_quads(&ms.meshes[ci]) {
                    for (w, fp, _, _) in &eq.points {
                        let frame = &fp[..c.dim as usize];
                        sum += w * c.theta.eval(frame) * g.eval(ci, frame);
                    }
                }
                sum
            }
        };
    }
    acc
}

/// L^2_mu distance between a P1 field and analytic per-component data,
/// by element-wise quadrature.
pub fn l2_error(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    u: &Field,
    reference: &ComponentFn,
) -> f64 {
    let mut acc = 0.0;
    for (ci, c) in structure.components.iter().enumerate() {
        for eq in element_quads(&ms.meshes[ci]) {
            for (w, fp, basis, _) in &eq.points {
                let frame = &fp[..c.dim as usize];
                let uh: f64 = eq
                    .nodes
                    .iter()
                    .zip(basis)
                    .map(|(&node, b)| b * u.0[dm.local_to_global[ci][node]])
                    .sum();
                let d = uh - reference.eval(ci, frame);
                acc += w * c.theta.eval(frame) * d * d;
            }
        }
    }
    acc.sqrt()
}

/// Verify that the declared ellipticity constant holds at sampled quadrature
/// points for sampled directions in Im B (spot check).
pub fn check_ellipticity(
    structure: &Structure,
    ms: &MeshSet,
    coeff: &CoefficientMatrix,
    n_samples: usize,
) -> Result<()> {
    let lambda = coeff.lambda();
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for (ci, c) in structure.components.iter().enumerate() {
        let quads = element_quads(&ms.meshes[ci]);
        if quads.is_empty() {
            continue;
        }
        for _ in 0..n_samples {
            let eq = &quads[(next() * quads.len() as f64) as usize % quads.len()];
            let (_, fp, _, _) = &eq.points[0];
            let x = c.embed(&fp[..c.dim as usize]);
            let b = coeff.eval(&x);
            if (b - b.transpose()).amax() > 1e-12 {
                return Err(Error::InvalidArg("coefficient matrix not symmetric".into()));
            }
            let xi = Vector3::new(next() - 0.5, next() - 0.5, next() - 0.5);
            // Project into Im B.
            let eig = b.symmetric_eigen();
            let scale = eig.eigenvalues.amax().max(1.0);
            let mut v = Vector3::zeros();
            for k in 0..3 {
                if eig.eigenvalues[k].abs() > 1e-12 * scale {
                    let col = eig.eigenvectors.column(k);
                    v += col * col.dot(&xi);
                }
            }
            if v.norm() < 1e-9 {
                continue;
            }
            if (b * v).dot(&v) < lambda * v.norm_squared() * (1.0 - 1e-9) {
                return Err(Error::InvalidArg(format!(
                    "declared ellipticity constant {lambda} violated at a sample point"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoefficientMatrix;
    use crate::structure::{builtin, BuiltinName, Component, Shape, Theta};
    use crate::Discretization;
    use nalgebra::{Matrix3, Vector2};
    use std::f64::consts::PI;

    fn single_segment(a: f64, b: f64) -> Structure {
        let c = Component::new(
            1,
            Vector3::zeros(),
            vec![Vector3::y()],
            Shape::Interval { a, b },
            Theta::Constant(1.0),
        )
        .unwrap();
        Structure::new("segment", vec![c]).unwrap()
    }

    #[test]
    fn p1_stiffness_on_two_elements() {
        let disc = Discretization::new(single_segment(0.0, 2.0), 1.0).unwrap();
        let k = assemble_stiffness(&disc.structure, &disc.ms, &disc.dm, &CoefficientMatrix::Identity)
            .unwrap();
        let expect = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((k.entry(r, c) - expect[r][c]).abs() < 1e-14, "({r},{c})");
            }
        }
    }

    #[test]
    fn p1_mass_on_one_element() {
        let disc = Discretization::new(single_segment(0.0, 1.0), 1.0).unwrap();
        let m = assemble_mass(&disc.structure, &disc.ms, &disc.dm).unwrap();
        let expect = [[2.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 6.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((m.entry(r, c) - expect[r][c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn indicators_span_the_kernel() {
        for name in [
            BuiltinName::CrossSegments,
            BuiltinName::CrossDiscs,
            BuiltinName::DiscPlusSegment,
        ] {
            let disc = Discretization::new(builtin(name, 1.0).unwrap(), 0.3).unwrap();
            let k = assemble_stiffness(
                &disc.structure,
                &disc.ms,
                &disc.dm,
                &CoefficientMatrix::Identity,
            )
            .unwrap();
            for g in 0..disc.dm.kernel_groups.len() {
                let chi = disc.dm.group_indicator(g);
                let r = k.matvec(&chi.0);
                assert!(r.amax() < 1e-12, "{name:?} group {g}: |K chi| = {}", r.amax());
            }
        }
    }

    #[test]
    fn mass_total_is_the_measure() {
        let disc =
            Discretization::new(builtin(BuiltinName::CrossSegments, 1.0).unwrap(), 0.25).unwrap();
        let m = assemble_mass(&disc.structure, &disc.ms, &disc.dm).unwrap();
        let ones = DVector::from_element(disc.dm.n_dofs, 1.0);
        assert!((ones.dot(&m.matvec(&ones)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cross_segments_stiffness_is_a_coupled_block_sum() {
        // Brute-force dense assembly of the same 4-element meshes, sharing
        // the origin dof, compared entrywise.
        let disc =
            Discretization::new(builtin(BuiltinName::CrossSegments, 1.0).unwrap(), 0.5).unwrap();
        let k = assemble_stiffness(
            &disc.structure,
            &disc.ms,
            &disc.dm,
            &CoefficientMatrix::Identity,
        )
        .unwrap();
        let n = disc.dm.n_dofs;
        let mut dense = vec![vec![0.0; n]; n];
        for ci in 0..2 {
            let mesh = &disc.ms.meshes[ci];
            for seg in &mesh.segments {
                let len = mesh.vertices[seg[1]][0] - mesh.vertices[seg[0]][0];
                let local = [[1.0 / len, -1.0 / len], [-1.0 / len, 1.0 / len]];
                for a in 0..2 {
                    for b in 0..2 {
                        let ga = disc.dm.local_to_global[ci][seg[a]];
                        let gb = disc.dm.local_to_global[ci][seg[b]];
                        dense[ga][gb] += local[a][b];
                    }
                }
            }
        }
        for r in 0..n {
            for c in 0..n {
                assert!((k.entry(r, c) - dense[r][c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn identity_coefficient_matches_plain_tangent_assembly() {
        // Dual route: assemble with the relaxation pipeline (B = I) and with
        // plain frame-coordinate gradients; entries must agree to 1e-13.
        let disc =
            Discretization::new(builtin(BuiltinName::CrossDiscs, 1.0).unwrap(), 0.35).unwrap();
        let k = assemble_stiffness(
            &disc.structure,
            &disc.ms,
            &disc.dm,
            &CoefficientMatrix::Identity,
        )
        .unwrap();
        let n = disc.dm.n_dofs;
        let mut dense = vec![vec![0.0; n]; n];
        for (ci, _c) in disc.structure.components.iter().enumerate() {
            let mesh = &disc.ms.meshes[ci];
            for tri in &mesh.triangles {
                let (p0, p1, p2) = (
                    mesh.vertices[tri[0]],
                    mesh.vertices[tri[1]],
                    mesh.vertices[tri[2]],
                );
                let det =
                    (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                let area = det / 2.0;
                let g = [
                    [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                    [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                    [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
                ];
                for a in 0..3 {
                    for b in 0..3 {
                        let ga = disc.dm.local_to_global[ci][tri[a]];
                        let gb = disc.dm.local_to_global[ci][tri[b]];
                        dense[ga][gb] += area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            }
        }
        for r in 0..n {
            for kk in k.row_ptr[r]..k.row_ptr[r + 1] {
                let c = k.col_idx[kk];
                assert!((k.vals[kk] - dense[r][c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stiffness_spd_on_random_vectors() {
        let disc =
            Discretization::new(builtin(BuiltinName::CrossDiscs, 1.0).unwrap(), 0.4).unwrap();
        let b = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, 0.0, 0.1, 0.0, 1.0);
        let coeff = CoefficientMatrix::constant(b, 0.5).unwrap();
        let k = assemble_stiffness(&disc.structure, &disc.ms, &disc.dm, &coeff).unwrap();
        let m = assemble_mass(&disc.structure, &disc.ms, &disc.dm).unwrap();
        // Exact symmetry by construction.
        for r in 0..k.n {
            for kk in k.row_ptr[r]..k.row_ptr[r + 1] {
                assert_eq!(k.vals[kk], k.entry(k.col_idx[kk], r));
            }
        }
        let mut state = 42u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..1000 {
            let x = DVector::from_fn(k.n, |_, _| next());
            assert!(k.quad_form(&x) >= -1e-10);
            assert!(m.quad_form(&x) > 0.0);
        }
    }

    #[test]
    fn load_vectors_match_partition_of_unity() {
        let disc = Discretization::new(single_segment(-1.0, 1.0), 0.25).unwrap();
        let zero = assemble_load(&disc.structure, &disc.ms, &disc.dm, &ComponentFn::new());
        assert!(zero.0.amax() == 0.0);
        let one = assemble_load(
            &disc.structure,
            &disc.ms,
            &disc.dm,
            &ComponentFn::new().set(0, |_| 1.0),
        );
        assert!((one.0.sum() - 2.0).abs() < 1e-13);

        let cross =
            Discretization::new(builtin(BuiltinName::CrossSegments, 1.0).unwrap(), 0.25).unwrap();
        let f = ComponentFn::new().set(0, |p: &[f64]| p[0]);
        let load = assemble_load(&cross.structure, &cross.ms, &cross.dm, &f);
        assert!(load.0.sum().abs() < 1e-14);
    }

    #[test]
    fn quartic_fixture_integrates_exactly() {
        let disc =
            Discretization::new(builtin(BuiltinName::CrossSegments, 1.0).unwrap(), 0.25).unwrap();
        let quartic = |y: f64| {
            -21.0 / 1080.0 - y.powi(4) / 12.0 + y.powi(3) / 6.0 + y * y / 6.0 - y / 2.0
        };
        let v1 = integrate(
            &disc.structure,
            &disc.ms,
            &ComponentFn::new().set(0, move |p: &[f64]| quartic(p[0])),
        );
        assert!((v1 - 7.0 / 180.0).abs() < 1e-15);
        let v2 = integrate(
            &disc.structure,
            &disc.ms,
            &ComponentFn::new().set(1, |_: &[f64]| -21.0 / 1080.0),
        );
        assert!((v2 + 7.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn disc_laplacian_fixture_integrates_to_zero() {
        let disc =
            Discretization::new(builtin(BuiltinName::CrossDiscs, 1.0).unwrap(), 0.05).unwrap();
        let lap = |u: f64, v: f64| {
            let r2 = u * u + v * v;
            -4.0 * PI * (PI * r2).sin() - 4.0 * PI * PI * r2 * (PI * r2).cos()
        };
        let val = integrate(
            &disc.structure,
            &disc.ms,
            &ComponentFn::new().set(0, move |p: &[f64]| lap(p[0], p[1])),
        );
        assert!(val.abs() < 1e-8, "got {val}");
        let area = integrate(
            &disc.structure,
            &disc.ms,
            &ComponentFn::new().set(0, |_: &[f64]| 1.0).set(1, |_: &[f64]| 1.0),
        );
        assert!((area - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn variable_density_weights_the_mass() {
        // theta = 1 + s^2 on [0, 1]: measure = 4/3.
        let c = Component::new(
            1,
            Vector3::zeros(),
            vec![Vector3::y()],
            Shape::Interval { a: 0.0, b: 1.0 },
            Theta::Poly(vec![(vec![0], 1.0), (vec![2], 1.0)]),
        )
        .unwrap();
        let s = Structure::new("weighted", vec![c]).unwrap();
        let disc = Discretization::new(s, 0.1).unwrap();
        let m = assemble_mass(&disc.structure, &disc.ms, &disc.dm).unwrap();
        let ones = DVector::from_element(disc.dm.n_dofs, 1.0);
        assert!((ones.dot(&m.matvec(&ones)) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_coefficient_propagates_from_relaxation() {
        let disc =
            Discretization::new(builtin(BuiltinName::CrossDiscs, 1.0).unwrap(), 0.5).unwrap();
        let b = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let coeff = CoefficientMatrix::Constant { b, lambda: 1.0 };
        assert!(
            assemble_stiffness(&disc.structure, &disc.ms, &disc.dm, &coeff).is_err()
        );
    }

    #[test]
    fn sparse_from_triplets_accumulates() {
        let m = SparseSym::from_triplets(
            3,
            vec![(0, 0, 1.0), (0, 0, 2.0), (2, 1, 4.0), (1, 2, 4.0), (0, 2, 0.5)],
        );
        assert_eq!(m.entry(0, 0), 3.0);
        assert_eq!(m.entry(2, 1), 4.0);
        assert_eq!(m.entry(0, 2), 0.5);
        assert_eq!(m.entry(1, 1), 0.0);
        assert_eq!(m.nnz(), 4);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = m.matvec(&x);
        assert!((y[0] - (3.0 + 1.5)).abs() < 1e-15);
        assert!((y[1] - 12.0).abs() < 1e-15);
        assert!((y[2] - 8.0).abs() < 1e-15);
    }

    #[test]
    fn theta_weighted_disc_measure() {
        // theta = 1 + u^2 + v^2 over the unit disc: pi + pi/2.
        let c = Component::new(
            1,
            Vector3::zeros(),
            vec![Vector3::x(), Vector3::y()],
            Shape::Disc {
                center: Vector2::zeros(),
                radius: 1.0,
            },
            Theta::Poly(vec![(vec![0, 0], 1.0), (vec![2, 0], 1.0), (vec![0, 2], 1.0)]),
        )
        .unwrap();
        let s = Structure::new("weighted_disc", vec![c]).unwrap();
        let disc = Discretization::new(s, 0.2).unwrap();
        let v = integrate(
            &disc.structure,
            &disc.ms,
            &ComponentFn::new().set(0, |_: &[f64]| 1.0),
        );
        assert!((v - 1.5 * PI).abs() < 1e-12, "got {v}");
    }
}
