//! Global degree-of-freedom numbering for piecewise-linear nodal elements.
//!
//! Coupling rule: matching junction vertices of two components of EQUAL
//! dimension are identified into one global dof (trace equality); vertices at
//! mixed-dimension junctions stay distinct (zero extensions are admissible,
//! so no constraint couples the components). Kernel groups are the maximal
//! sets of components whose union indicator is constant under the tangent
//! gradient: the transitive closure of equal-dimension adjacency.

use crate::error::{Error, Result};
use crate::mesh::MeshSet;
use crate::quad::{integrate_interval, integrate_triangle};
use crate::structure::Structure;
use nalgebra::DVector;

/// Nodal coefficient vector over a [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub DVector<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Junction coupling policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JunctionPolicy {
    /// Equal dimensions: matching junction vertices share one global dof.
    Shared,
    /// Mixed dimensions: both sides keep independent dofs.
    Independent,
}

/// Global dof numbering plus the kernel-group partition.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_dofs: usize,
    /// Per component: local vertex -> global dof.
    pub local_to_global: Vec<Vec<usize>>,
    /// Partition of component indices into kernel groups, each sorted.
    pub kernel_groups: Vec<Vec<usize>>,
    /// Measure (theta-weighted) of each group's union of components.
    pub group_measures: Vec<f64>,
    /// Policy per junction (structure junction order).
    pub junction_policies: Vec<JunctionPolicy>,
}

impl DofMap {
    /// Group index of a component index.
    pub fn group_of(&self, comp_idx: usize) -> usize {
        self.kernel_groups
            .iter()
            .position(|g| g.contains(&comp_idx))
            .expect("component outside the group partition")
    }

    /// Global dofs carried by the components of one group (sorted).
    pub fn group_dofs(&self, group: usize) -> Vec<usize> {
        let mut dofs: Vec<usize> = self.kernel_groups[group]
            .iter()
            .flat_map(|&ci| self.local_to_global[ci].iter().copied())
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        dofs
    }

    /// Indicator field of a group (1 on its dofs, 0 elsewhere).
    pub fn group_indicator(&self, group: usize) -> Field {
        let mut f = Field::zeros(self.n_dofs);
        for d in self.group_dofs(group) {
            f.0[d] = 1.0;
        }
        f
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Deterministic: lower root wins.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// The maximal groups of components whose union indicator has zero tangent
/// gradient: transitive closure of "equal dimension and nonempty
/// intersection".
pub fn kernel_groups(structure: &Structure) -> Vec<Vec<usize>> {
    let n = structure.components.len();
    let mut uf = UnionFind::new(n);
    for j in &structure.junctions {
        if j.equal_dim {
            let a = structure.component_index(j.pair.0).unwrap();
            let b = structure.component_index(j.pair.1).unwrap();
            uf.union(a, b);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for ci in 0..n {
        let r = uf.find(ci);
        match root_of[r] {
            Some(g) => groups[g].push(ci),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![ci]);
            }
        }
    }
    groups
}

/// Build the global dof map from a conforming mesh set.
pub fn build_dof_map(structure: &Structure, ms: &MeshSet) -> Result<DofMap> {
    let n_comp = structure.components.len();
    if ms.meshes.len() != n_comp {
        return Err(Error::InvalidArg("mesh set does not match structure".into()));
    }
    // Flat vertex index space across components.
    let offsets: Vec<usize> = {
        let mut off = vec![0usize];
        for m in &ms.meshes {
            off.push(off.last().unwrap() + m.n_vertices());
        }
        off
    };
    let total = *offsets.last().unwrap();
    let mut uf = UnionFind::new(total);

    let mut policies = Vec::with_capacity(structure.junctions.len());
    for (jidx, j) in structure.junctions.iter().enumerate() {
        let policy = if j.equal_dim {
            JunctionPolicy::Shared
        } else {
            JunctionPolicy::Independent
        };
        policies.push(policy);
        if policy == JunctionPolicy::Shared {
            let tr = ms
                .trace_of(jidx)
                .ok_or_else(|| Error::Mesh(format!("missing junction trace {jidx}")))?;
            let (c0, v0) = &tr.sides[0];
            let (c1, v1) = &tr.sides[1];
            if v0.len() != v1.len() {
                return Err(Error::Mesh(format!(
                    "mismatched junction vertex sequences at junction {jidx}"
                )));
            }
            for (a, b) in v0.iter().zip(v1) {
                uf.union(offsets[*c0] + a, offsets[*c1] + b);
            }
        }
    }

    // Deterministic global numbering: first visit order of roots.
    let mut global_of_root: Vec<Option<usize>> = vec![None; total];
    let mut n_dofs = 0usize;
    let mut local_to_global = Vec::with_capacity(n_comp);
    for ci in 0..n_comp {
        let mut map = Vec::with_capacity(ms.meshes[ci].n_vertices());
        for v in 0..ms.meshes[ci].n_vertices() {
            let r = uf.find(offsets[ci] + v);
            let g = match global_of_root[r] {
                Some(g) => g,
                None => {
                    global_of_root[r] = Some(n_dofs);
                    n_dofs += 1;
                    n_dofs - 1
                }
            };
            map.push(g);
        }
        local_to_global.push(map);
    }

    let groups = kernel_groups(structure);
    let group_measures = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|&ci| component_measure(structure, ms, ci))
                .sum()
        })
        .collect();

    Ok(DofMap {
        n_dofs,
        local_to_global,
        kernel_groups: groups,
        group_measures,
        junction_policies: policies,
    })
}

/// Theta-weighted measure of one meshed component (element-wise quadrature;
/// exact for the supported polynomial densities on straight elements).
pub fn component_measure(structure: &Structure, ms: &MeshSet, comp_idx: usize) -> f64 {
    let c = &structure.components[comp_idx];
    let m = &ms.meshes[comp_idx];
    let mut acc = 0.0;
    if m.dim == 1 {
        for seg in &m.segments {
            let (a, b) = (m.vertices[seg[0]][0], m.vertices[seg[1]][0]);
            acc += integrate_interval(a.min(b), a.max(b), 1, |s| c.theta.eval(&[s]));
        }
    } else {
        for t in &m.triangles {
            acc += integrate_triangle(
                m.vertices[t[0]],
                m.vertices[t[1]],
                m.vertices[t[2]],
                |u, v| c.theta.eval(&[u, v]),
            );
        }
    }
    acc
}

/// Mu-integral of a P1 nodal field over a set of components, by element-wise
/// quadrature of the interpolant (exact for affine elements).
pub fn integrate_field_over(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    u: &Field,
    comp_set: &[usize],
) -> f64 {
    let mut acc = 0.0;
    for &ci in comp_set {
        let c = &structure.components[ci];
        let m = &ms.meshes[ci];
        let l2g = &dm.local_to_global[ci];
        if m.dim == 1 {
            for seg in &m.segments {
                let (s0, s1) = (m.vertices[seg[0]][0], m.vertices[seg[1]][0]);
                let (u0, u1) = (u.0[l2g[seg[0]]], u.0[l2g[seg[1]]]);
                acc += integrate_interval(s0, s1, 1, |s| {
                    let t = (s - s0) / (s1 - s0);
                    c.theta.eval(&[s]) * (u0 * (1.0 - t) + u1 * t)
                });
            }
        } else {
            for t in &m.triangles {
                let (p0, p1, p2) = (m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
                let (u0, u1, u2) = (u.0[l2g[t[0]]], u.0[l2g[t[1]]], u.0[l2g[t[2]]]);
                acc += integrate_triangle(p0, p1, p2, |uu, vv| {
                    let bary = barycentric(p0, p1, p2, [uu, vv]);
                    c.theta.eval(&[uu, vv]) * (bary[0] * u0 + bary[1] * u1 + bary[2] * u2)
                });
            }
        }
    }
    acc
}

pub(crate) fn barycentric(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], p: [f64; 2]) -> [f64; 3] {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
    let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Projection onto a kernel group: the piecewise-constant field equal to the
/// mu-weighted mean of `u` over the group, zero elsewhere.
pub fn group_projection(
    structure: &Structure,
    ms: &MeshSet,
    dm: &DofMap,
    u: &Field,
    group: usize,
) -> Result<Field> {
    if group >= dm.kernel_groups.len() {
        return Err(Error::InvalidArg(format!("no kernel group {group}")));
    }
    let mass = dm.group_measures[group];
    let mean = integrate_field_over(structure, ms, dm, u, &dm.kernel_groups[group]) / mass;
    let mut out = Field::zeros(dm.n_dofs);
    for d in dm.group_dofs(group) {
        out.0[d] = mean;
    }
    Ok(out)
}
