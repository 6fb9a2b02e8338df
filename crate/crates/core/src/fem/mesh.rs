//! Structured disk triangulations.
//!
//! A disk of radius `R` is meshed from concentric rings of vertices. Ring `k`
//! sits at radius `k * dr` with `dr ~ h`, and carries enough vertices to keep
//! tangential spacing at about `0.75 h`; the slightly finer tangential target
//! keeps the polygonal-boundary area deficit (the disk area minus the area of
//! the inscribed polygon) well below quadrature tolerances at the default
//! spacings. Adjacent rings are stitched with a two-pointer sweep that
//! advances whichever ring has the smaller next angle, which yields a
//! conforming, positively oriented triangulation with `n_inner + n_outer`
//! triangles per annulus.
//!
//! The origin is always vertex `0`; the outermost ring is placed exactly on
//! the circle. A uniform grid over the bounding box indexes triangles for
//! point location.

use super::FemError;

/// Hard cap on generated vertices; requests above this are refused instead of
/// exhausting memory.
const VERTEX_CAP: usize = 3_000_000;

/// Tangential spacing target as a fraction of `h`.
const TANGENTIAL_FACTOR: f64 = 0.75;

/// Conforming triangulation of a closed disk centred at the origin.
#[derive(Debug, Clone)]
pub struct TriMesh {
    /// Vertex coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Triangles as counter-clockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Indices of vertices on the outer circle, ascending.
    pub boundary_vertices: Vec<usize>,
    /// Disk radius.
    pub radius: f64,
    /// Target mesh spacing the mesh was built for.
    pub h: f64,
    locator: GridIndex,
}

/// Structural diagnostics for a mesh; see [`audit`].
#[derive(Debug, Clone)]
pub struct MeshAudit {
    pub min_signed_area: f64,
    pub max_edge_len: f64,
    pub max_circumradius: f64,
    /// Largest distance of a boundary vertex from the circle of radius `radius`.
    pub boundary_max_deviation: f64,
    /// Edges shared by more than two triangles (must be zero).
    pub nonconforming_edges: usize,
    /// Edges used by exactly one triangle whose endpoints are not both
    /// boundary vertices (must be zero).
    pub dangling_boundary_edges: usize,
    /// Interior edges (shared by exactly two triangles).
    pub interior_edges: usize,
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_vertices.binary_search(&v).is_ok()
    }

    /// Coordinates of triangle `t`.
    #[inline]
    pub fn tri_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise order).
    #[inline]
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.tri_coords(t);
        signed_area(p0, p1, p2)
    }

    /// Constant gradients of the three nodal basis functions on triangle `t`,
    /// together with the triangle area.
    pub fn p1_gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let [p0, p1, p2] = self.tri_coords(t);
        let area2 = 2.0 * signed_area(p0, p1, p2);
        // grad lambda_i is the inward normal of the opposite edge over 2|T|.
        let g0 = [(p1[1] - p2[1]) / area2, (p2[0] - p1[0]) / area2];
        let g1 = [(p2[1] - p0[1]) / area2, (p0[0] - p2[0]) / area2];
        let g2 = [(p0[1] - p1[1]) / area2, (p1[0] - p0[0]) / area2];
        ([g0, g1, g2], area2 / 2.0)
    }

    /// Locate the triangle containing `p` and return `(triangle, barycentric)`.
    ///
    /// Points inside the disk but marginally outside the polygonal boundary
    /// (the sliver between a boundary chord and the arc) are assigned to the
    /// nearest triangle. Points outside the disk are an error.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3]), FemError> {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r > self.radius * (1.0 + 1e-12) + 1e-14 {
            return Err(FemError::OutsideDomain { x: p[0], y: p[1] });
        }
        const TOL: f64 = -1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in self.locator.candidates(p) {
            let bc = self.barycentric(t, p);
            let min_bc = bc[0].min(bc[1]).min(bc[2]);
            if min_bc >= TOL {
                return Ok((t, bc));
            }
            if best.map_or(true, |(_, _, m)| min_bc > m) {
                best = Some((t, bc, min_bc));
            }
        }
        // Chord sliver or rounding: fall back to the best candidate seen.
        if let Some((t, bc, m)) = best {
            if m > -0.05 {
                let clamped = clamp_barycentric(bc);
                return Ok((t, clamped));
            }
        }
        Err(FemError::OutsideDomain { x: p[0], y: p[1] })
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.tri_coords(t);
        let total = signed_area(p0, p1, p2);
        let l0 = signed_area(p, p1, p2) / total;
        let l1 = signed_area(p0, p, p2) / total;
        let l2 = 1.0 - l0 - l1;
        [l0, l1, l2]
    }
}

#[inline]
fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn clamp_barycentric(bc: [f64; 3]) -> [f64; 3] {
    let mut c = [bc[0].max(0.0), bc[1].max(0.0), bc[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    if s > 0.0 {
        for v in &mut c {
            *v /= s;
        }
    }
    c
}

/// Triangulate the closed disk of the given radius with target spacing `h`.
///
/// The origin is vertex `0` and the outermost ring lies exactly on the
/// circle. Refuses spacings that would exceed the vertex cap.
pub fn mesh_disk(radius: f64, h: f64) -> Result<TriMesh, FemError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(FemError::InvalidMeshParams {
            message: format!("radius must be positive and finite, got {radius}"),
        });
    }
    if !(h.is_finite() && h > 0.0 && h <= radius) {
        return Err(FemError::InvalidMeshParams {
            message: format!("spacing must satisfy 0 < h <= radius, got h={h}, radius={radius}"),
        });
    }

    let rings = (radius / h).round().max(1.0) as usize;
    let dr = radius / rings as f64;
    let tangential = TANGENTIAL_FACTOR * h;

    let ring_count = |k: usize| -> usize {
        let circumference = 2.0 * std::f64::consts::PI * (k as f64) * dr;
        ((circumference / tangential).ceil() as usize).max(6)
    };

    let estimated: usize = 1 + (1..=rings).map(ring_count).sum::<usize>();
    if estimated > VERTEX_CAP {
        return Err(FemError::MeshTooFine {
            radius,
            h,
            estimated_vertices: estimated,
            cap: VERTEX_CAP,
        });
    }

    let mut vertices: Vec<[f64; 2]> = Vec::with_capacity(estimated);
    vertices.push([0.0, 0.0]);
    let mut ring_start = Vec::with_capacity(rings + 1);
    let mut ring_size = Vec::with_capacity(rings + 1);
    for k in 1..=rings {
        let n = ring_count(k);
        // Outermost ring sits exactly on the circle.
        let r = if k == rings { radius } else { k as f64 * dr };
        ring_start.push(vertices.len());
        ring_size.push(n);
        for j in 0..n {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // Central fan.
    let n1 = ring_size[0];
    let s1 = ring_start[0];
    for j in 0..n1 {
        triangles.push([0, s1 + j, s1 + (j + 1) % n1]);
    }
    // Annular strips.
    for k in 1..rings {
        let (si, ni) = (ring_start[k - 1], ring_size[k - 1]);
        let (so, no) = (ring_start[k], ring_size[k]);
        stitch_rings(&mut triangles, si, ni, so, no);
    }

    let boundary_vertices: Vec<usize> = {
        let s = ring_start[rings - 1];
        (s..s + ring_size[rings - 1]).collect()
    };

    let locator = GridIndex::build(&vertices, &triangles, radius, h);
    let mesh = TriMesh {
        vertices,
        triangles,
        boundary_vertices,
        radius,
        h,
        locator,
    };
    debug_assert!(mesh.triangles.iter().enumerate().all(|(t, _)| {
        mesh.signed_area(t) > 0.0
    }));
    Ok(mesh)
}

/// Stitch two concentric rings with a two-pointer angular sweep.
///
/// `si, ni` describe the inner ring (start index, count), `so, no` the outer.
/// Produces `ni + no` counter-clockwise triangles covering the annulus.
fn stitch_rings(triangles: &mut Vec<[usize; 3]>, si: usize, ni: usize, so: usize, no: usize) {
    let angle = |j: usize, n: usize| 2.0 * std::f64::consts::PI * j as f64 / n as f64;
    let mut i = 0usize; // inner steps taken
    let mut j = 0usize; // outer steps taken
    while i < ni || j < no {
        let next_inner = angle(i + 1, ni);
        let next_outer = angle(j + 1, no);
        let inner_cur = si + i % ni;
        let outer_cur = so + j % no;
        // Advance whichever ring has the smaller next angle; break the tie in
        // favour of the outer ring so aligned rings stitch consistently.
        if j < no && (i == ni || next_outer <= next_inner) {
            let outer_next = so + (j + 1) % no;
            triangles.push([outer_cur, outer_next, inner_cur]);
            j += 1;
        } else {
            let inner_next = si + (i + 1) % ni;
            triangles.push([inner_cur, outer_cur, inner_next]);
            i += 1;
        }
    }
}

/// Uniform bounding-box grid of triangle indices for point location.
#[derive(Debug, Clone)]
struct GridIndex {
    min: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl GridIndex {
    fn build(vertices: &[[f64; 2]], triangles: &[[usize; 3]], radius: f64, h: f64) -> Self {
        let min = [-radius, -radius];
        let cell = (2.0 * h).max(radius * 1e-6);
        let nx = ((2.0 * radius / cell).ceil() as usize).max(1);
        let ny = nx;
        let mut cells = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let xs = tri.map(|v| vertices[v][0]);
            let ys = tri.map(|v| vertices[v][1]);
            let (x0, x1) = (
                xs.iter().cloned().fold(f64::INFINITY, f64::min),
                xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                ys.iter().cloned().fold(f64::INFINITY, f64::min),
                ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            let ix0 = Self::clamp_idx((x0 - min[0]) / cell, nx);
            let ix1 = Self::clamp_idx((x1 - min[0]) / cell, nx);
            let iy0 = Self::clamp_idx((y0 - min[1]) / cell, ny);
            let iy1 = Self::clamp_idx((y1 - min[1]) / cell, ny);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    cells[iy * nx + ix].push(t as u32);
                }
            }
        }
        GridIndex {
            min,
            cell,
            nx,
            ny,
            cells,
        }
    }

    fn clamp_idx(v: f64, n: usize) -> usize {
        if v < 0.0 {
            0
        } else {
            (v as usize).min(n - 1)
        }
    }

    /// Triangles whose bounding boxes cover the cell of `p` or its neighbours.
    fn candidates(&self, p: [f64; 2]) -> impl Iterator<Item = usize> + '_ {
        let ix = Self::clamp_idx((p[0] - self.min[0]) / self.cell, self.nx) as isize;
        let iy = Self::clamp_idx((p[1] - self.min[1]) / self.cell, self.ny) as isize;
        let nx = self.nx as isize;
        let ny = self.ny as isize;
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter_map(move |dx| {
                let cx = ix + dx;
                let cy = iy + dy;
                if cx >= 0 && cx < nx && cy >= 0 && cy < ny {
                    Some((cy * nx + cx) as usize)
                } else {
                    None
                }
            })
        })
        .flat_map(move |c| self.cells[c].iter().map(|&t| t as usize))
    }
}

/// Structural audit used by tests and diagnostics: orientation, conformity,
/// boundary placement, and element size/shape extremes.
pub fn audit(mesh: &TriMesh) -> MeshAudit {
    use std::collections::HashMap;

    let mut min_signed_area = f64::INFINITY;
    let mut max_edge_len: f64 = 0.0;
    let mut max_circumradius: f64 = 0.0;
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();

    for t in 0..mesh.n_triangles() {
        let area = mesh.signed_area(t);
        min_signed_area = min_signed_area.min(area);
        let [p0, p1, p2] = mesh.tri_coords(t);
        let e = [
            ((p1[0] - p0[0]).hypot(p1[1] - p0[1])),
            ((p2[0] - p1[0]).hypot(p2[1] - p1[1])),
            ((p0[0] - p2[0]).hypot(p0[1] - p2[1])),
        ];
        for len in e {
            max_edge_len = max_edge_len.max(len);
        }
        // Circumradius = abc / (4 * area).
        if area > 0.0 {
            max_circumradius = max_circumradius.max(e[0] * e[1] * e[2] / (4.0 * area));
        }
        let [a, b, c] = mesh.triangles[t];
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let key = (u.min(v), u.max(v));
            *edge_use.entry(key).or_insert(0) += 1;
        }
    }

    let mut nonconforming_edges = 0;
    let mut dangling_boundary_edges = 0;
    let mut interior_edges = 0;
    for (&(u, v), &count) in &edge_use {
        match count {
            1 => {
                if !(mesh.is_boundary(u) && mesh.is_boundary(v)) {
                    dangling_boundary_edges += 1;
                }
            }
            2 => interior_edges += 1,
            _ => nonconforming_edges += 1,
        }
    }

    let boundary_max_deviation = mesh
        .boundary_vertices
        .iter()
        .map(|&v| {
            let [x, y] = mesh.vertices[v];
            ((x * x + y * y).sqrt() - mesh.radius).abs()
        })
        .fold(0.0, f64::max);

    MeshAudit {
        min_signed_area,
        max_edge_len,
        max_circumradius,
        boundary_max_deviation,
        nonconforming_edges,
        dangling_boundary_edges,
        interior_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_disk_has_expected_scale() {
        let mesh = mesh_disk(1.0, 0.5).unwrap();
        let n = mesh.n_vertices();
        assert!((10..=60).contains(&n), "vertex count {n} outside [10, 60]");
        assert_eq!(mesh.vertices[0], [0.0, 0.0], "origin must be vertex 0");
    }

    #[test]
    fn audit_is_clean_on_moderate_mesh() {
        let mesh = mesh_disk(2.0, 0.1).unwrap();
        let report = audit(&mesh);
        assert!(report.min_signed_area > 0.0, "orientation must be positive");
        assert!(
            report.max_edge_len <= 1.5 * 0.1,
            "max edge {} too long",
            report.max_edge_len
        );
        assert!(
            report.max_circumradius <= 1.5 * 0.1,
            "max circumradius {} too large",
            report.max_circumradius
        );
        assert!(report.boundary_max_deviation <= 1e-10 * 2.0);
        assert_eq!(report.nonconforming_edges, 0);
        assert_eq!(report.dangling_boundary_edges, 0);
    }

    #[test]
    fn audit_is_clean_across_spacings() {
        for (r, h) in [(1.0, 0.5), (1.0, 0.23), (3.0, 0.17), (0.25, 0.04)] {
            let mesh = mesh_disk(r, h).unwrap();
            let report = audit(&mesh);
            assert!(report.min_signed_area > 0.0, "r={r} h={h}");
            assert_eq!(report.nonconforming_edges, 0, "r={r} h={h}");
            assert_eq!(report.dangling_boundary_edges, 0, "r={r} h={h}");
            assert!(report.max_edge_len <= 1.5 * h, "r={r} h={h}");
            assert!(report.boundary_max_deviation <= 1e-10 * r, "r={r} h={h}");
        }
    }

    #[test]
    fn too_fine_spacing_is_refused_with_estimate() {
        match mesh_disk(100.0, 1e-4) {
            Err(FemError::MeshTooFine {
                estimated_vertices, ..
            }) => assert!(estimated_vertices > VERTEX_CAP),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn invalid_parameters_are_refused() {
        assert!(mesh_disk(-1.0, 0.1).is_err());
        assert!(mesh_disk(1.0, 0.0).is_err());
        assert!(mesh_disk(1.0, 2.0).is_err());
        assert!(mesh_disk(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn locate_agrees_with_barycentric_interpolation() {
        let mesh = mesh_disk(1.0, 0.2).unwrap();
        // Points strictly inside, including near the centre and near the rim.
        for p in [[0.0, 0.0], [0.3, -0.2], [0.0, 0.95], [-0.7, 0.65]] {
            let (t, bc) = mesh.locate(p).unwrap();
            let [p0, p1, p2] = mesh.tri_coords(t);
            let rx = bc[0] * p0[0] + bc[1] * p1[0] + bc[2] * p2[0];
            let ry = bc[0] * p0[1] + bc[1] * p1[1] + bc[2] * p2[1];
            assert!((rx - p[0]).abs() < 1e-9 && (ry - p[1]).abs() < 1e-9);
        }
        assert!(mesh.locate([1.2, 0.0]).is_err());
    }

    #[test]
    fn boundary_point_in_chord_sliver_is_still_located() {
        let mesh = mesh_disk(1.0, 0.2).unwrap();
        // A point on the circle between two boundary vertices lies just
        // outside the polygon; location clamps to the nearest triangle.
        let n = mesh.boundary_vertices.len();
        let theta = std::f64::consts::PI / n as f64; // halfway between vertices
        let p = [0.999_999 * theta.cos(), 0.999_999 * theta.sin()];
        let (t, bc) = mesh.locate(p).unwrap();
        assert!(t < mesh.n_triangles());
        assert!(bc.iter().all(|&l| (0.0..=1.0 + 1e-12).contains(&l)));
    }
}
