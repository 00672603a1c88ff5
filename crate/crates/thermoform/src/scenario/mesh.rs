//! Deterministic triangulated meshes of an annular sheet blank.
//!
//! The blank is meshed as concentric node rings joined by a monotone angular
//! merge, which yields near-equilateral triangles at a prescribed edge
//! length. The innermost and outermost ring radii are corrected so the
//! polygonal boundary encloses exactly the area of the corresponding circle;
//! the lumped nodal volumes therefore partition the analytic annulus volume
//! `pi (r_out^2 - r_hole^2) s` to round-off, which downstream volume-weighted
//! error norms and disturbance scalings rely on.

use crate::error::{Error, Result};

/// Triangulated mid-surface sheet mesh.
///
/// Coordinates describe the undeformed blank in the z = 0 plane; forming
/// displacements are carried separately by parameter trajectories. Lumped
/// nodal areas assign each element's area in equal parts to its three
/// vertices.
#[derive(Debug, Clone)]
pub struct Mesh {
    coords: Vec<[f64; 3]>,
    elements: Vec<[usize; 3]>,
    thickness: f64,
    lumped_area: Vec<f64>,
    rim_edges: Vec<[usize; 2]>,
}

impl Mesh {
    /// Assembles a mesh from explicit parts, recomputing lumped areas.
    ///
    /// Intended for tests and importers; `build_sheet_mesh` is the production
    /// path. Fails if any element has non-positive area or refers to a
    /// missing node.
    pub fn from_parts(
        coords: Vec<[f64; 3]>,
        elements: Vec<[usize; 3]>,
        thickness: f64,
        rim_edges: Vec<[usize; 2]>,
    ) -> Result<Self> {
        if !(thickness > 0.0) || !thickness.is_finite() {
            return Err(Error::BadResolution(thickness));
        }
        let n = coords.len();
        for (e, el) in elements.iter().enumerate() {
            if el.iter().any(|&i| i >= n) {
                return Err(Error::ShapeMismatch {
                    context: format!("element {e} connectivity"),
                    expected: format!("node ids < {n}"),
                    found: format!("{el:?}"),
                });
            }
        }
        let mut mesh = Mesh {
            coords,
            elements,
            thickness,
            lumped_area: vec![0.0; n],
            rim_edges,
        };
        mesh.recompute_lumped_areas()?;
        Ok(mesh)
    }

    fn recompute_lumped_areas(&mut self) -> Result<()> {
        self.lumped_area = vec![0.0; self.coords.len()];
        for (e, el) in self.elements.iter().enumerate() {
            let area = triangle_area(
                &self.coords[el[0]],
                &self.coords[el[1]],
                &self.coords[el[2]],
            );
            if !(area > 0.0) || !area.is_finite() {
                return Err(Error::DegenerateElement { element: e, area });
            }
            let share = area / 3.0;
            for &i in el {
                self.lumped_area[i] += share;
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    /// Undeformed lumped nodal area [m^2].
    pub fn lumped_area(&self) -> &[f64] {
        &self.lumped_area
    }

    /// Undeformed lumped nodal volume [m^3] (area times sheet thickness).
    pub fn lumped_volume(&self, node: usize) -> f64 {
        self.lumped_area[node] * self.thickness
    }

    /// All lumped nodal volumes [m^3].
    pub fn lumped_volumes(&self) -> Vec<f64> {
        self.lumped_area
            .iter()
            .map(|a| a * self.thickness)
            .collect()
    }

    /// Edges on the free rim (outer boundary and hole boundary).
    pub fn rim_edges(&self) -> &[[usize; 2]] {
        &self.rim_edges
    }

    /// Undeformed rim length attributed to each node (half of each adjacent
    /// rim edge) [m]. Zero for interior nodes.
    pub fn rim_length_share(&self) -> Vec<f64> {
        let mut share = vec![0.0; self.coords.len()];
        for edge in &self.rim_edges {
            let a = &self.coords[edge[0]];
            let b = &self.coords[edge[1]];
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                .sqrt();
            share[edge[0]] += 0.5 * len;
            share[edge[1]] += 0.5 * len;
        }
        share
    }

    /// Total mid-surface area [m^2].
    pub fn total_area(&self) -> f64 {
        self.lumped_area.iter().sum()
    }

    /// In-plane distance of a node from the blank axis [m].
    pub fn radius(&self, node: usize) -> f64 {
        let c = &self.coords[node];
        c[0].hypot(c[1])
    }
}

/// Area of a (possibly 3D) triangle via the cross product.
pub fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Builds the annular blank mesh: hole of radius `hole`, outer radius
/// `outer`, target edge length `edge`, sheet thickness `thickness` (all in
/// meters).
///
/// The construction is fully deterministic. Boundary ring radii carry a
/// small correction (relative order `1/m^2` for `m` ring nodes) so that the
/// polygonal boundary area equals the circular one and the mesh volume
/// matches `pi (outer^2 - hole^2) * thickness` to round-off.
pub fn build_sheet_mesh(outer: f64, hole: f64, edge: f64, thickness: f64) -> Result<Mesh> {
    if !(outer.is_finite() && hole.is_finite()) || hole <= 0.0 || hole >= outer {
        return Err(Error::DegenerateGeometry { outer, hole });
    }
    if !(edge > 0.0) || !edge.is_finite() {
        return Err(Error::BadResolution(edge));
    }
    if !(thickness > 0.0) || !thickness.is_finite() {
        return Err(Error::BadResolution(thickness));
    }

    let bands = ((outer - hole) / edge).round().max(1.0) as usize;
    let n_rings = bands + 1;

    // Nominal ring radii and per-ring node counts.
    let mut ring_radius = Vec::with_capacity(n_rings);
    let mut ring_count = Vec::with_capacity(n_rings);
    for j in 0..n_rings {
        let r = hole + (outer - hole) * j as f64 / bands as f64;
        let m = ((2.0 * std::f64::consts::PI * r / edge).round() as usize).max(8);
        ring_radius.push(r);
        ring_count.push(m);
    }

    // Area-exact correction of the two boundary rings: a regular m-gon of
    // circumradius R has area (m/2) R^2 sin(2 pi / m); choose R so that it
    // equals pi r^2.
    let correct = |r: f64, m: usize| {
        let t = 2.0 * std::f64::consts::PI / m as f64;
        r * (t / t.sin()).sqrt()
    };
    ring_radius[0] = correct(ring_radius[0], ring_count[0]);
    ring_radius[n_rings - 1] = correct(ring_radius[n_rings - 1], ring_count[n_rings - 1]);

    // Node coordinates, ring by ring, with a half-step angular stagger on
    // alternating rings for better-shaped triangles.
    let mut coords = Vec::new();
    let mut ring_base = Vec::with_capacity(n_rings);
    let mut ring_offset = Vec::with_capacity(n_rings);
    for j in 0..n_rings {
        ring_base.push(coords.len());
        let m = ring_count[j];
        let offset = if j % 2 == 1 {
            std::f64::consts::PI / m as f64
        } else {
            0.0
        };
        ring_offset.push(offset);
        for i in 0..m {
            let theta = offset + 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            coords.push([
                ring_radius[j] * theta.cos(),
                ring_radius[j] * theta.sin(),
                0.0,
            ]);
        }
    }

    // Band triangulation by monotone angular merge of the two rings.
    let mut elements = Vec::new();
    for j in 0..bands {
        let (ma, mb) = (ring_count[j], ring_count[j + 1]);
        let (base_a, base_b) = (ring_base[j], ring_base[j + 1]);
        let step_a = 2.0 * std::f64::consts::PI / ma as f64;
        let step_b = 2.0 * std::f64::consts::PI / mb as f64;
        let angle_a = |i: usize| ring_offset[j] + step_a * i as f64;
        let angle_b = |k: usize| ring_offset[j + 1] + step_b * k as f64;

        let (mut i, mut k) = (0usize, 0usize);
        while i < ma || k < mb {
            let advance_inner = if i == ma {
                false
            } else if k == mb {
                true
            } else {
                angle_a(i + 1) <= angle_b(k + 1)
            };
            if advance_inner {
                elements.push([
                    base_a + i % ma,
                    base_b + k % mb,
                    base_a + (i + 1) % ma,
                ]);
                i += 1;
            } else {
                elements.push([
                    base_a + i % ma,
                    base_b + k % mb,
                    base_b + (k + 1) % mb,
                ]);
                k += 1;
            }
        }
    }

    // Free rim: the hole ring and the outer ring.
    let mut rim_edges = Vec::new();
    for &j in &[0, n_rings - 1] {
        let (base, m) = (ring_base[j], ring_count[j]);
        for i in 0..m {
            rim_edges.push([base + i, base + (i + 1) % m]);
        }
    }

    Mesh::from_parts(coords, elements, thickness, rim_edges)
}
