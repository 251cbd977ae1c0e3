//! Resampling of scattered samples onto the integer pixel grid.
//!
//! Samples are triangulated (Delaunay) and every grid position inside the
//! convex hull is interpolated from the triangle that contains it, either
//! barycentric-linearly or with a C1 Clough-Tocher cubic macro-element.
//! Positions outside the hull are black.
//!
//! Exactly coincident sample positions are collapsed first, keeping the value
//! that comes last in input order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;
use crate::image::{LumaImage, MAX_LUMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    Cubic,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::Linear => "linear",
            Interpolation::Cubic => "cubic",
        }
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Self::Linear),
            "cubic" => Ok(Self::Cubic),
            other => Err(format!(
                "unknown interpolation `{other}` (expected linear or cubic)"
            )),
        }
    }
}

/// Relative area below which a triangle counts as a sliver.
const SLIVER_RATIO: f64 = 1e-12;
/// Barycentric slack so that points on shared edges are never lost.
const INSIDE_TOL: f64 = 1e-10;

/// Interpolates `values` given at `positions` onto a `height x width` grid.
pub fn resample_scattered(
    positions: &[PixelCoord],
    values: &[f64],
    height: usize,
    width: usize,
    interp: Interpolation,
) -> Result<LumaImage> {
    if positions.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} positions but {} values",
            positions.len(),
            values.len()
        )));
    }
    let mesh = Mesh::build(positions, values)?;
    let (owner, slivers) = mesh.rasterize(height, width);
    let grads = match interp {
        Interpolation::Linear => Vec::new(),
        Interpolation::Cubic => mesh.estimate_gradients(),
    };

    let mut out = vec![0.0; height * width];
    out.par_chunks_mut(width).enumerate().for_each(|(m, row)| {
        for (n, v) in row.iter_mut().enumerate() {
            let idx = m * width + n;
            let q = [n as f64, m as f64];
            let value = match owner[idx] {
                Cell::Outside => 0.0,
                Cell::Sliver(t) => mesh.nearest_vertex_value(slivers[t as usize], q),
                Cell::Triangle(t) => match interp {
                    Interpolation::Linear => mesh.eval_linear(t as usize, q),
                    Interpolation::Cubic => mesh.eval_cubic(t as usize, q, &grads),
                },
            };
            *v = value.clamp(0.0, MAX_LUMA);
        }
    });
    LumaImage::from_vec(height, width, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cell {
    Outside,
    Triangle(u32),
    Sliver(u32),
}

/// Triangulated sample set in (column, row) coordinates.
struct Mesh {
    points: Vec<[f64; 2]>,
    values: Vec<f64>,
    triangles: Vec<[usize; 3]>,
    /// Neighbouring triangle across the edge opposite each vertex.
    neighbors: Vec<[Option<usize>; 3]>,
    /// Vertex one-rings.
    adjacency: Vec<Vec<usize>>,
    sliver: Vec<bool>,
}

impl Mesh {
    fn build(positions: &[PixelCoord], values: &[f64]) -> Result<Self> {
        let mut index: HashMap<(u64, u64), usize> = HashMap::with_capacity(positions.len());
        let mut points = Vec::with_capacity(positions.len());
        let mut vals = Vec::with_capacity(positions.len());
        for (p, &v) in positions.iter().zip(values) {
            if !(p.m.is_finite() && p.n.is_finite() && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite scattered sample at ({}, {})",
                    p.m, p.n
                )));
            }
            // +0.0 and -0.0 are the same position.
            let key = ((p.n + 0.0).to_bits(), (p.m + 0.0).to_bits());
            match index.get(&key) {
                Some(&i) => vals[i] = v,
                None => {
                    index.insert(key, points.len());
                    points.push([p.n, p.m]);
                    vals.push(v);
                }
            }
        }
        if points.len() < 3 {
            return Err(Error::DegenerateTargets(points.len()));
        }

        let spade_points: Vec<Point2<f64>> =
            points.iter().map(|p| Point2::new(p[0], p[1])).collect();
        let tri = DelaunayTriangulation::<Point2<f64>>::bulk_load_stable(spade_points)
            .map_err(|e| Error::InvalidParameter(format!("triangulation failed: {e:?}")))?;
        if tri.num_inner_faces() == 0 || tri.num_vertices() != points.len() {
            return Err(Error::DegenerateTargets(points.len()));
        }

        let mut face_slot = HashMap::with_capacity(tri.num_inner_faces());
        let mut triangles = Vec::with_capacity(tri.num_inner_faces());
        for (slot, face) in tri.inner_faces().enumerate() {
            face_slot.insert(face.fix().index(), slot);
            let v = face.vertices();
            triangles.push([v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]);
        }

        let mut neighbors = vec![[None; 3]; triangles.len()];
        for face in tri.inner_faces() {
            let slot = face_slot[&face.fix().index()];
            let verts = triangles[slot];
            for edge in face.adjacent_edges() {
                let [a, b] = edge.vertices().map(|v| v.fix().index());
                let opposite = (0..3)
                    .find(|&k| verts[k] != a && verts[k] != b)
                    .expect("triangle edge shares two vertices");
                neighbors[slot][opposite] = edge
                    .rev()
                    .face()
                    .as_inner()
                    .map(|f| face_slot[&f.fix().index()]);
            }
        }

        let mut adjacency = vec![Vec::new(); points.len()];
        for v in tri.vertices() {
            adjacency[v.fix().index()] = v.out_edges().map(|e| e.to().fix().index()).collect();
        }

        let sliver = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| points[i]);
                let area2 = cross(a, b, c).abs();
                let longest = dist2(a, b).max(dist2(b, c)).max(dist2(c, a));
                area2 <= SLIVER_RATIO * longest
            })
            .collect();

        Ok(Self {
            points,
            values: vals,
            triangles,
            neighbors,
            adjacency,
            sliver,
        })
    }

    /// Assigns every grid position to the first triangle (in triangulation
    /// order) that contains it. Returns the cell map and the sliver triangles
    /// referenced by `Cell::Sliver`.
    fn rasterize(&self, height: usize, width: usize) -> (Vec<Cell>, Vec<usize>) {
        let mut owner = vec![Cell::Outside; height * width];
        let mut slivers = Vec::new();
        for pass_slivers in [false, true] {
            for (t, tri) in self.triangles.iter().enumerate() {
                if self.sliver[t] != pass_slivers {
                    continue;
                }
                let [a, b, c] = tri.map(|i| self.points[i]);
                let Some((n0, n1, m0, m1)) = grid_bbox(a, b, c, height, width) else {
                    continue;
                };
                let cell = if pass_slivers {
                    slivers.push(t);
                    Cell::Sliver(slivers.len() as u32 - 1)
                } else {
                    Cell::Triangle(t as u32)
                };
                for m in m0..=m1 {
                    for n in n0..=n1 {
                        let slot = &mut owner[m * width + n];
                        if *slot != Cell::Outside {
                            continue;
                        }
                        let q = [n as f64, m as f64];
                        let inside = if pass_slivers {
                            on_segment_hull(a, b, c, q)
                        } else {
                            barycentric(a, b, c, q).iter().all(|&l| l >= -INSIDE_TOL)
                        };
                        if inside {
                            *slot = cell;
                        }
                    }
                }
            }
        }
        (owner, slivers)
    }

    fn vertex_hit(&self, t: usize, q: [f64; 2]) -> Option<f64> {
        self.triangles[t]
            .iter()
            .find(|&&i| self.points[i] == q)
            .map(|&i| self.values[i])
    }

    fn eval_linear(&self, t: usize, q: [f64; 2]) -> f64 {
        if let Some(v) = self.vertex_hit(t, q) {
            return v;
        }
        let tri = self.triangles[t];
        let [a, b, c] = tri.map(|i| self.points[i]);
        let l = barycentric(a, b, c, q);
        l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]]
    }

    fn nearest_vertex_value(&self, t: usize, q: [f64; 2]) -> f64 {
        let tri = self.triangles[t];
        let mut best = tri[0];
        for &i in &tri[1..] {
            if dist2(self.points[i], q) < dist2(self.points[best], q) {
                best = i;
            }
        }
        self.values[best]
    }

    fn eval_cubic(&self, t: usize, q: [f64; 2], grads: &[[f64; 2]]) -> f64 {
        if let Some(v) = self.vertex_hit(t, q) {
            return v;
        }
        let tri = self.triangles[t];
        let pts = tri.map(|i| self.points[i]);
        let mut g = [-0.5; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            if let Some(nb) = self.neighbors[t][k] {
                let [a, b, c] = self.triangles[nb].map(|i| self.points[i]);
                let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
                let cb = barycentric(pts[0], pts[1], pts[2], centroid);
                let (i, j) = match k {
                    0 => (2, 1),
                    1 => (0, 2),
                    _ => (1, 0),
                };
                *gk = (2.0 * cb[i] + cb[j] - 1.0) / (2.0 - 3.0 * cb[i] - 3.0 * cb[j]);
            }
        }
        clough_tocher(
            pts,
            tri.map(|i| self.values[i]),
            tri.map(|i| grads[i]),
            g,
            barycentric(pts[0], pts[1], pts[2], q),
        )
    }

    /// Per-vertex gradients from a least-squares quadratic fit over the
    /// vertex neighbourhood, falling back to a plane fit and then to zero.
    fn estimate_gradients(&self) -> Vec<[f64; 2]> {
        (0..self.points.len())
            .into_par_iter()
            .map(|i| {
                let mut hood: Vec<usize> = self.adjacency[i].clone();
                if hood.len() < 5 {
                    let ring: Vec<usize> = hood.clone();
                    for j in ring {
                        hood.extend(self.adjacency[j].iter().copied().filter(|&k| k != i));
                    }
                    hood.sort_unstable();
                    hood.dedup();
                }
                fit_gradient(
                    self.points[i],
                    self.values[i],
                    &hood,
                    &self.points,
                    &self.values,
                )
                .unwrap_or([0.0, 0.0])
            })
            .collect()
    }
}

fn fit_gradient(
    center: [f64; 2],
    value: f64,
    hood: &[usize],
    points: &[[f64; 2]],
    values: &[f64],
) -> Option<[f64; 2]> {
    if hood.is_empty() {
        return None;
    }
    let scale = hood
        .iter()
        .map(|&j| dist2(points[j], center).sqrt())
        .sum::<f64>()
        / hood.len() as f64;
    if scale == 0.0 {
        return None;
    }
    let rows: Vec<([f64; 5], f64)> = hood
        .iter()
        .map(|&j| {
            let u = (points[j][0] - center[0]) / scale;
            let v = (points[j][1] - center[1]) / scale;
            ([u, v, u * u, u * v, v * v], values[j] - value)
        })
        .collect();
    for unknowns in [5usize, 2] {
        if rows.len() < unknowns {
            continue;
        }
        if let Some(c) = least_squares(&rows, unknowns) {
            return Some([c[0] / scale, c[1] / scale]);
        }
    }
    None
}

/// Solves the normal equations of the first `k` basis columns.
fn least_squares(rows: &[([f64; 5], f64)], k: usize) -> Option<Vec<f64>> {
    let mut a = vec![vec![0.0; k + 1]; k];
    for (basis, y) in rows {
        for r in 0..k {
            for c in 0..k {
                a[r][c] += basis[r] * basis[c];
            }
            a[r][k] += basis[r] * y;
        }
    }
    let max_diag = (0..k).map(|r| a[r][r]).fold(0.0, f64::max);
    let tol = 1e-10 * max_diag.max(f64::MIN_POSITIVE);
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= tol {
            return None;
        }
        a.swap(col, pivot);
        for r in col + 1..k {
            let factor = a[r][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(r);
            for (x, p) in lower[0][col..=k].iter_mut().zip(&upper[col][col..=k]) {
                *x -= factor * p;
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let tail: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][k] - tail) / a[r][r];
    }
    Some(x)
}

/// Clough-Tocher macro-element on triangle `p` with vertex values `f`,
/// vertex gradients `df`, cross-edge direction parameters `g` (one per
/// edge, opposite the same-index vertex) and evaluation point `b` in
/// barycentric coordinates.
pub(crate) fn clough_tocher(
    p: [[f64; 2]; 3],
    f: [f64; 3],
    df: [[f64; 2]; 3],
    g: [f64; 3],
    b: [f64; 3],
) -> f64 {
    let sub = |x: [f64; 2], y: [f64; 2]| [x[0] - y[0], x[1] - y[1]];
    let dot = |x: [f64; 2], y: [f64; 2]| x[0] * y[0] + x[1] * y[1];
    let e12 = sub(p[1], p[0]);
    let e23 = sub(p[2], p[1]);
    let e31 = sub(p[0], p[2]);

    let df12 = dot(df[0], e12);
    let df21 = -dot(df[1], e12);
    let df23 = dot(df[1], e23);
    let df32 = -dot(df[2], e23);
    let df31 = dot(df[2], e31);
    let df13 = -dot(df[0], e31);

    let c3000 = f[0];
    let c2100 = (df12 + 3.0 * c3000) / 3.0;
    let c2010 = (df13 + 3.0 * c3000) / 3.0;
    let c0300 = f[1];
    let c1200 = (df21 + 3.0 * c0300) / 3.0;
    let c0210 = (df23 + 3.0 * c0300) / 3.0;
    let c0030 = f[2];
    let c1020 = (df31 + 3.0 * c0030) / 3.0;
    let c0120 = (df32 + 3.0 * c0030) / 3.0;

    let c2001 = (c2100 + c2010 + c3000) / 3.0;
    let c0201 = (c1200 + c0300 + c0210) / 3.0;
    let c0021 = (c1020 + c0120 + c0030) / 3.0;

    // Cross-edge derivative along each edge is linear.
    let c0111 = (g[0] * (-c0300 + 3.0 * c0210 - 3.0 * c0120 + c0030)
        + (-c0300 + 2.0 * c0210 - c0120 + c0021 + c0201))
        / 2.0;
    let c1011 = (g[1] * (-c0030 + 3.0 * c1020 - 3.0 * c2010 + c3000)
        + (-c0030 + 2.0 * c1020 - c2010 + c2001 + c0021))
        / 2.0;
    let c1101 = (g[2] * (-c3000 + 3.0 * c2100 - 3.0 * c1200 + c0300)
        + (-c3000 + 2.0 * c2100 - c1200 + c2001 + c0201))
        / 2.0;

    let c1002 = (c1101 + c1011 + c2001) / 3.0;
    let c0102 = (c1101 + c0111 + c0201) / 3.0;
    let c0012 = (c1011 + c0111 + c0021) / 3.0;
    let c0003 = (c1002 + c0102 + c0012) / 3.0;

    let minval = b[0].min(b[1]).min(b[2]);
    let b1 = b[0] - minval;
    let b2 = b[1] - minval;
    let b3 = b[2] - minval;
    let b4 = 3.0 * minval;

    if b1 == 0.0 {
        b2.powi(3) * c0300
            + 3.0 * b2 * b2 * b3 * c0210
            + 3.0 * b2 * b3 * b3 * c0120
            + b3.powi(3) * c0030
            + 3.0 * b2 * b2 * b4 * c0201
            + 6.0 * b2 * b3 * b4 * c0111
            + 3.0 * b3 * b3 * b4 * c0021
            + 3.0 * b2 * b4 * b4 * c0102
            + 3.0 * b3 * b4 * b4 * c0012
            + b4.powi(3) * c0003
    } else if b2 == 0.0 {
        b3.powi(3) * c0030
            + 3.0 * b3 * b3 * b1 * c1020
            + 3.0 * b3 * b1 * b1 * c2010
            + b1.powi(3) * c3000
            + 3.0 * b3 * b3 * b4 * c0021
            + 6.0 * b3 * b1 * b4 * c1011
            + 3.0 * b1 * b1 * b4 * c2001
            + 3.0 * b3 * b4 * b4 * c0012
            + 3.0 * b1 * b4 * b4 * c1002
            + b4.powi(3) * c0003
    } else {
        b1.powi(3) * c3000
            + 3.0 * b1 * b1 * b2 * c2100
            + 3.0 * b1 * b2 * b2 * c1200
            + b2.powi(3) * c0300
            + 3.0 * b1 * b1 * b4 * c2001
            + 6.0 * b1 * b2 * b4 * c1101
            + 3.0 * b2 * b2 * b4 * c0201
            + 3.0 * b1 * b4 * b4 * c1002
            + 3.0 * b2 * b4 * b4 * c0102
            + b4.powi(3) * c0003
    }
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[inline]
fn barycentric(a: [f64; 2], b: [f64; 2], c: [f64; 2], q: [f64; 2]) -> [f64; 3] {
    let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
    let l0 = ((b[1] - c[1]) * (q[0] - c[0]) + (c[0] - b[0]) * (q[1] - c[1])) / det;
    let l1 = ((c[1] - a[1]) * (q[0] - c[0]) + (a[0] - c[0]) * (q[1] - c[1])) / det;
    [l0, l1, 1.0 - l0 - l1]
}

/// Containment test for near-degenerate triangles: `q` must lie within a
/// tiny distance of the triangle's longest side.
fn on_segment_hull(a: [f64; 2], b: [f64; 2], c: [f64; 2], q: [f64; 2]) -> bool {
    let (p0, p1) = [(a, b), (b, c), (c, a)]
        .into_iter()
        .max_by(|x, y| dist2(x.0, x.1).total_cmp(&dist2(y.0, y.1)))
        .unwrap();
    let len2 = dist2(p0, p1);
    if len2 == 0.0 {
        return q == p0;
    }
    let t = ((q[0] - p0[0]) * (p1[0] - p0[0]) + (q[1] - p0[1]) * (p1[1] - p0[1])) / len2;
    if !(-INSIDE_TOL..=1.0 + INSIDE_TOL).contains(&t) {
        return false;
    }
    let proj = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
    dist2(proj, q) <= 1e-12 * len2
}

/// Integer grid positions covered by the triangle's bounding box, as
/// inclusive (n0, n1, m0, m1), or `None` if it misses the grid.
fn grid_bbox(
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    height: usize,
    width: usize,
) -> Option<(usize, usize, usize, usize)> {
    let xmin = a[0].min(b[0]).min(c[0]).ceil().max(0.0);
    let xmax = a[0].max(b[0]).max(c[0]).floor().min(width as f64 - 1.0);
    let ymin = a[1].min(b[1]).min(c[1]).ceil().max(0.0);
    let ymax = a[1].max(b[1]).max(c[1]).floor().min(height as f64 - 1.0);
    if xmin > xmax || ymin > ymax {
        return None;
    }
    Some((xmin as usize, xmax as usize, ymin as usize, ymax as usize))
}
