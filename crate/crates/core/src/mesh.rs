//! Reference icosphere and piecewise-linear maps defined on it.
//!
//! The domain of every surface is a fixed geodesic icosphere. Its cotangent
//! weights and barycentric dual areas are computed once on the reference
//! positions, so the Dirichlet energy of a map is a fixed quadratic form in
//! the image positions. Faces are wound so that the identity embedding has
//! positive volume.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::Matrix3;

use crate::functionals;
use crate::{Error, Result, Vec3};

/// Largest subdivision depth accepted by [`build_icosphere`].
pub const MAX_LEVEL: u32 = 8;

/// Bound on reference cotangents.
pub const COT_CLAMP: f64 = 1e6;

/// Image triangles smaller than this fraction of the mean area are degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-14;

/// Triangulated unit sphere. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SphereMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cotan_weights: Vec<f64>,
    dual_areas: Vec<f64>,
    face_areas: Vec<f64>,
    vertex_faces: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
    reflection: Vec<usize>,
    level: u32,
}

impl SphereMesh {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Reference positions (unit vectors).
    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Undirected edges, `edge[0] < edge[1]`.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// `(cot a + cot b) / 2` per edge, aligned with [`Self::edges`].
    pub fn cotan_weights(&self) -> &[f64] {
        &self.cotan_weights
    }

    /// Barycentric dual area of each vertex on the reference sphere.
    pub fn dual_areas(&self) -> &[f64] {
        &self.dual_areas
    }

    /// Reference (flat) triangle areas.
    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn reference_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    pub fn vertex_faces(&self, i: usize) -> &[usize] {
        &self.vertex_faces[i]
    }

    pub fn vertex_neighbors(&self, i: usize) -> &[usize] {
        &self.vertex_neighbors[i]
    }

    /// Vertex permutation realizing the reflection `z -> -z` of the reference
    /// sphere. It is an involution and reverses the face orientation.
    pub fn reflection(&self) -> &[usize] {
        &self.reflection
    }
}

/// Builds the icosphere of the given subdivision depth.
pub fn build_icosphere(level: u32) -> Result<SphereMesh> {
    if level > MAX_LEVEL {
        return Err(Error::Resource(format!(
            "icosphere level {level} exceeds the limit {MAX_LEVEL}"
        )));
    }
    let (mut vertices, mut faces) = icosahedron();
    let mut reflection = level0_reflection(&vertices);

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            new_faces.push([a, ab, ca]);
            new_faces.push([b, bc, ab]);
            new_faces.push([c, ca, bc]);
            new_faces.push([ab, bc, ca]);
        }
        let mut next_reflection = reflection.clone();
        next_reflection.resize(vertices.len(), usize::MAX);
        for (&(a, b), &m) in &midpoints {
            let (ra, rb) = (reflection[a], reflection[b]);
            next_reflection[m] = midpoints[&(ra.min(rb), ra.max(rb))];
        }
        reflection = next_reflection;
        faces = new_faces;
    }

    Ok(assemble(vertices, faces, reflection, level))
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|v| Vec3::new(v[0], v[1], v[2]).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

fn level0_reflection(vertices: &[Vec3]) -> Vec<usize> {
    vertices
        .iter()
        .map(|v| {
            let target = Vec3::new(v.x, v.y, -v.z);
            vertices
                .iter()
                .position(|w| (w - target).norm() < 1e-12)
                .expect("icosahedron is symmetric under z -> -z")
        })
        .collect()
}

fn assemble(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, reflection: Vec<usize>, level: u32) -> SphereMesh {
    let n = vertices.len();
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut cotan_weights = Vec::new();
    let mut dual_areas = vec![0.0; n];
    let mut face_areas = Vec::with_capacity(faces.len());
    let mut vertex_faces = vec![Vec::new(); n];
    let mut vertex_neighbors = vec![Vec::new(); n];

    for (f, tri) in faces.iter().enumerate() {
        let p = tri.map(|i| vertices[i]);
        let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        face_areas.push(area);
        for k in 0..3 {
            let (i, j, o) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            dual_areas[i] += area / 3.0;
            vertex_faces[i].push(f);
            let e1 = vertices[i] - vertices[o];
            let e2 = vertices[j] - vertices[o];
            let cot = (e1.dot(&e2) / e1.cross(&e2).norm()).clamp(-COT_CLAMP, COT_CLAMP);
            let key = (i.min(j), i.max(j));
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                cotan_weights.push(0.0);
                vertex_neighbors[key.0].push(key.1);
                vertex_neighbors[key.1].push(key.0);
                edges.len() - 1
            });
            cotan_weights[e] += 0.5 * cot;
        }
    }

    SphereMesh {
        vertices,
        faces,
        edges,
        cotan_weights,
        dual_areas,
        face_areas,
        vertex_faces,
        vertex_neighbors,
        reflection,
        level,
    }
}

/// A piecewise-linear map `u: S^2 -> R^3`, one position per reference vertex.
#[derive(Debug, Clone)]
pub struct SurfaceMap {
    mesh: Arc<SphereMesh>,
    positions: Vec<Vec3>,
}

impl PartialEq for SurfaceMap {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) && self.positions == other.positions
    }
}

impl SurfaceMap {
    pub fn new(mesh: Arc<SphereMesh>, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != mesh.vertex_count() {
            return Err(Error::InvalidArgument(format!(
                "{} positions for a mesh with {} vertices",
                positions.len(),
                mesh.vertex_count()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite position at vertex {i}")));
        }
        Ok(Self { mesh, positions })
    }

    /// The reference embedding.
    pub fn identity(mesh: Arc<SphereMesh>) -> Self {
        let positions = mesh.vertices().to_vec();
        Self { mesh, positions }
    }

    pub fn constant(mesh: Arc<SphereMesh>, p: Vec3) -> Self {
        let positions = vec![p; mesh.vertex_count()];
        Self { mesh, positions }
    }

    pub fn mesh(&self) -> &SphereMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Applies `f` to every position.
    pub fn map_positions<F: Fn(&Vec3) -> Vec3>(&self, f: F) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            positions: self.positions.iter().map(f).collect(),
        }
    }

    /// `s * u`.
    pub fn scaled(&self, s: f64) -> Self {
        self.map_positions(|p| p * s)
    }

    /// `u + shift`.
    pub fn translated(&self, shift: &Vec3) -> Self {
        self.map_positions(|p| p + shift)
    }

    /// Dual-area-weighted mean position.
    pub fn centroid(&self) -> Vec3 {
        let w = self.mesh.dual_areas();
        let total: f64 = w.iter().sum();
        self.positions.iter().zip(w).map(|(p, &a)| p * a).sum::<Vec3>() / total
    }

    /// Image triangle vertices of face `f`.
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        self.mesh.faces[f].map(|i| self.positions[i])
    }

    /// Rescales about the centroid so that the enclosed volume equals `t`.
    pub fn rescaled_to_volume(&self, t: f64) -> Result<Self> {
        let v = functionals::volume(self);
        if v == 0.0 || !v.is_finite() || (v > 0.0) != (t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cannot rescale volume {v} to {t}"
            )));
        }
        let tau = (t / v).cbrt();
        let c = self.centroid();
        Ok(self.map_positions(|p| c + (p - c) * tau))
    }

    /// Checks image triangles against the degeneracy threshold.
    pub fn check_degeneracy(&self) -> Result<()> {
        let areas: Vec<f64> = (0..self.mesh.face_count())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .collect();
        let mean = areas.iter().sum::<f64>() / areas.len() as f64;
        let threshold = DEGENERATE_AREA_RATIO * mean;
        match areas.iter().position(|&a| !(a >= threshold) || a == 0.0) {
            Some(face) => Err(Error::MeshDegenerate {
                face,
                area: areas[face],
                threshold,
            }),
            None => Ok(()),
        }
    }

    /// Writes the image mesh as ASCII OBJ.
    pub fn write_obj<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# level {} sphere map", self.mesh.level())?;
        for p in &self.positions {
            writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
        }
        for f in self.mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

/// Round sphere of algebraic volume `t` centered at `center`.
///
/// Negative `t` uses the reflected parametrization. The result is rescaled so
/// that its discrete volume equals `t`.
pub fn init_sphere(mesh: &Arc<SphereMesh>, t: f64, center: Vec3) -> Result<SurfaceMap> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("sphere volume must be nonzero, got {t}")));
    }
    let r = (3.0 * t.abs() / (4.0 * std::f64::consts::PI)).cbrt();
    let outward = SurfaceMap::identity(Arc::clone(mesh)).map_positions(|p| center + p * r);
    let oriented = if t > 0.0 { outward } else { flip_orientation(&outward) };
    let v = functionals::volume(&oriented);
    let tau = (t / v).cbrt();
    Ok(oriented.map_positions(|p| center + (p - center) * tau))
}

/// Composes `u` with the reflection `z -> -z` of the reference sphere.
pub fn flip_orientation(u: &SurfaceMap) -> SurfaceMap {
    let positions = u.mesh.reflection().iter().map(|&j| u.positions[j]).collect();
    SurfaceMap {
        mesh: Arc::clone(&u.mesh),
        positions,
    }
}

/// One Jacobi pass of tangential relaxation.
///
/// Each vertex moves within its image tangent plane toward the area-weighted
/// centroid of its one-ring, measured against the offset the same vertex has
/// in the reference mesh (mapped through the best local linear fit). Maps
/// that are similarities of the reference are fixed points. The enclosed
/// volume is restored afterwards by a uniform rescale.
pub fn tangential_smooth(u: &SurfaceMap, strength: f64) -> Result<SurfaceMap> {
    if !strength.is_finite() {
        return Err(Error::InvalidArgument("smoothing strength must be finite".into()));
    }
    if strength == 0.0 {
        return Ok(u.clone());
    }
    u.check_degeneracy()?;
    let mesh = u.mesh();
    let reference = mesh.vertices();
    let x = u.positions();

    let drift: Vec<Vec3> = (0..mesh.vertex_count())
        .map(|i| {
            let faces = mesh.vertex_faces(i);
            let (mut weight, mut centroid_ref, mut centroid_img) = (0.0, Vec3::zeros(), Vec3::zeros());
            let mut normal = Vec3::zeros();
            for &f in faces {
                let a = mesh.face_areas()[f];
                let tri = mesh.faces()[f];
                let c_ref = tri.iter().map(|&k| reference[k]).sum::<Vec3>() / 3.0;
                let c_img = tri.iter().map(|&k| x[k]).sum::<Vec3>() / 3.0;
                weight += a;
                centroid_ref += c_ref * a;
                centroid_img += c_img * a;
                let [p0, p1, p2] = tri.map(|k| x[k]);
                normal += (p1 - p0).cross(&(p2 - p0));
            }
            let offset_ref = centroid_ref / weight - reference[i];
            let offset_img = centroid_img / weight - x[i];

            // least-squares linear map from reference to image edge vectors
            let mut rr = Matrix3::zeros();
            let mut ir = Matrix3::zeros();
            for &j in mesh.vertex_neighbors(i) {
                let d = reference[j] - reference[i];
                let e = x[j] - x[i];
                rr += d * d.transpose();
                ir += e * d.transpose();
            }
            let fit = match rr.try_inverse() {
                Some(inv) => ir * inv,
                None => Matrix3::zeros(),
            };
            let delta = offset_img - fit * offset_ref;
            let n = normal.normalize();
            delta - n * n.dot(&delta)
        })
        .collect();

    let target = functionals::volume(u);
    let moved = SurfaceMap {
        mesh: Arc::clone(&u.mesh),
        positions: x.iter().zip(&drift).map(|(p, d)| p + d * strength).collect(),
    };
    moved.check_degeneracy()?;
    moved.rescaled_to_volume(target)
}
