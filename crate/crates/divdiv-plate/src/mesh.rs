//! Conforming triangle meshes with boundary labels and newest vertex bisection.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn sub(self, o: Point2) -> [f64; 2] {
        [self.x - o.x, self.y - o.y]
    }
    pub fn mid(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }
    pub fn dist(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BcKind {
    Clamped,
    SimplySupported,
    Free,
}

impl BcKind {
    pub fn letter(self) -> char {
        match self {
            BcKind::Clamped => 'C',
            BcKind::SimplySupported => 'S',
            BcKind::Free => 'F',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryLabel {
    pub kind: BcKind,
    pub component: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectInfo {
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    /// parent edge lay on the boundary
    pub on_boundary: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub p: Point2,
    pub initial: bool,
    pub bisect: Option<BisectInfo>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    /// counterclockwise; the refinement edge is opposite `v[0]`
    pub v: [usize; 3],
    pub generation: u32,
}

impl Triangle {
    pub fn refinement_edge(&self) -> (usize, usize) {
        (self.v[1], self.v[2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// sorted, `v[0] < v[1]`
    pub v: [usize; 2],
    /// adjacent triangles; the second is `None` on the boundary
    pub tris: [Option<usize>; 2],
    pub label: Option<BoundaryLabel>,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.label.is_some()
    }
    pub fn midpoint(&self, m: &Mesh) -> Point2 {
        m.vertices[self.v[0]].p.mid(m.vertices[self.v[1]].p)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-conforming connectivity: {0}")]
    NonConforming(String),
    #[error("degenerate triangle {0}")]
    Degenerate(usize),
    #[error("boundary edge ({0}, {1}) has no label")]
    Unlabeled(usize, usize),
    #[error("vertex {0} is not a bisection vertex")]
    NotBisection(usize),
}

/// Geometric data of one triangle, local vertex `a_i`, edge `e_i` opposite `a_i`
/// running from `a_{i+1}` to `a_{i+2}`.
#[derive(Clone, Debug)]
pub struct TriGeom {
    pub id: usize,
    pub p: [Point2; 3],
    pub area: f64,
    pub n: [[f64; 2]; 3],
    pub t: [[f64; 2]; 3],
    pub h: [f64; 3],
    pub len: [f64; 3],
    pub grad_lambda: [[f64; 2]; 3],
    pub c: [f64; 3],
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl TriGeom {
    pub fn new(id: usize, p: [Point2; 3]) -> Result<Self, MeshError> {
        let d1 = p[1].sub(p[0]);
        let d2 = p[2].sub(p[0]);
        let area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0]);
        let scale = d1[0].abs().max(d1[1].abs()).max(d2[0].abs()).max(d2[1].abs());
        if !(area > 1e-14 * scale * scale) {
            return Err(MeshError::Degenerate(id));
        }
        let mut n = [[0.0; 2]; 3];
        let mut t = [[0.0; 2]; 3];
        let mut h = [0.0; 3];
        let mut len = [0.0; 3];
        let mut gl = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            let d = b.sub(a);
            let l = d[0].hypot(d[1]);
            len[i] = l;
            n[i] = [d[1] / l, -d[0] / l];
            t[i] = [-n[i][1], n[i][0]];
            h[i] = 2.0 * area / l;
            gl[i] = [-n[i][0] / h[i], -n[i][1] / h[i]];
        }
        let mut c = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            c[i] = -h[i] / (2.0 * dot(n[i], t[j]) * dot(n[i], t[k]));
        }
        Ok(Self { id, p, area, n, t, h, len, grad_lambda: gl, c })
    }

    pub fn point(&self, l: [f64; 3]) -> Point2 {
        Point2::new(
            l[0] * self.p[0].x + l[1] * self.p[1].x + l[2] * self.p[2].x,
            l[0] * self.p[0].y + l[1] * self.p[1].y + l[2] * self.p[2].y,
        )
    }

    pub fn barycentric(&self, x: Point2) -> [f64; 3] {
        let mut l = [0.0; 3];
        for i in 0..3 {
            let a = self.p[(i + 1) % 3];
            // lambda_i vanishes at a_{i+1} on e_i
            l[i] = dot(self.grad_lambda[i], x.sub(a));
        }
        l
    }

    pub fn centroid(&self) -> Point2 {
        self.point([1.0 / 3.0; 3])
    }

    pub fn diameter(&self) -> f64 {
        self.len[0].max(self.len[1]).max(self.len[2])
    }

    /// Smallest interior angle in radians.
    pub fn min_angle(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..3 {
            let a = self.p[(i + 1) % 3].sub(self.p[i]);
            let b = self.p[(i + 2) % 3].sub(self.p[i]);
            let cos = dot(a, b) / (a[0].hypot(a[1]) * b[0].hypot(b[1]));
            m = m.min(cos.clamp(-1.0, 1.0).acos());
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// `tri_edges[k][i]` is the global edge opposite local vertex `i`
    pub tri_edges: Vec<[usize; 3]>,
    /// parent triangle in the mesh this one was refined from
    pub parent: Vec<Option<usize>>,
    /// interior corner points of the clamped part
    pub corners_c: Vec<usize>,
    /// interior corner points of the free part
    pub corners_f: Vec<usize>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw data. Orientation is fixed to counterclockwise and
    /// the refinement edge is the longest edge (ties to the smallest opposite vertex).
    pub fn from_raw(
        points: Vec<Point2>,
        tris: Vec<[usize; 3]>,
        labels: &[(usize, usize, BoundaryLabel)],
    ) -> Result<Self, MeshError> {
        let mut triangles = Vec::with_capacity(tris.len());
        for (k, t) in tris.iter().enumerate() {
            for &v in t {
                if v >= points.len() {
                    return Err(MeshError::NonConforming(format!(
                        "triangle {k} references missing vertex {v}"
                    )));
                }
            }
            let mut v = *t;
            let g = TriGeom::new(k, [points[v[0]], points[v[1]], points[v[2]]]);
            if g.is_err() {
                v.swap(1, 2);
                TriGeom::new(k, [points[v[0]], points[v[1]], points[v[2]]])?;
            }
            // choose the refinement edge
            let lens: Vec<f64> = (0..3)
                .map(|i| points[v[(i + 1) % 3]].dist(points[v[(i + 2) % 3]]))
                .collect();
            let lmax = lens.iter().cloned().fold(0.0, f64::max);
            let mut best = None;
            for i in 0..3 {
                if lens[i] >= lmax * (1.0 - 1e-12) {
                    match best {
                        None => best = Some(i),
                        Some(b) if v[i] < v[b] => best = Some(i),
                        _ => {}
                    }
                }
            }
            let r = best.unwrap();
            let v = [v[r], v[(r + 1) % 3], v[(r + 2) % 3]];
            triangles.push(Triangle { v, generation: 0 });
        }
        let vertices = points
            .into_iter()
            .map(|p| Vertex { p, initial: true, bisect: None })
            .collect();
        let mut label_map = HashMap::new();
        for &(a, b, l) in labels {
            label_map.insert(key(a, b), l);
        }
        let n = triangles.len();
        Self::assemble(vertices, triangles, vec![None; n], &label_map)
    }

    fn assemble(
        vertices: Vec<Vertex>,
        triangles: Vec<Triangle>,
        parent: Vec<Option<usize>>,
        labels: &HashMap<(usize, usize), BoundaryLabel>,
    ) -> Result<Self, MeshError> {
        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for i in 0..3 {
                let kk = key(t.v[(i + 1) % 3], t.v[(i + 2) % 3]);
                let e = *edge_lookup.entry(kk).or_insert_with(|| {
                    edges.push(Edge {
                        v: [kk.0, kk.1],
                        tris: [None, None],
                        label: None,
                        normal: [0.0; 2],
                        tangent: [0.0; 2],
                        length: 0.0,
                    });
                    edges.len() - 1
                });
                let ed = &mut edges[e];
                if ed.tris[0].is_none() {
                    ed.tris[0] = Some(k);
                } else if ed.tris[1].is_none() {
                    ed.tris[1] = Some(k);
                } else {
                    return Err(MeshError::NonConforming(format!(
                        "edge ({}, {}) shared by more than two triangles",
                        kk.0, kk.1
                    )));
                }
                te[i] = e;
            }
            tri_edges.push(te);
        }
        for e in edges.iter_mut() {
            let a = vertices[e.v[0]].p;
            let b = vertices[e.v[1]].p;
            let d = b.sub(a);
            let l = d[0].hypot(d[1]);
            e.length = l;
            let t = [d[0] / l, d[1] / l];
            let mut n = [t[1], -t[0]];
            if e.tris[1].is_none() {
                let lab = labels.get(&(e.v[0], e.v[1])).copied();
                match lab {
                    Some(l) => e.label = Some(l),
                    None => return Err(MeshError::Unlabeled(e.v[0], e.v[1])),
                }
                // outward: away from the adjacent triangle centroid
                let k = e.tris[0].unwrap();
                let tv = triangles[k].v;
                let c = Point2::new(
                    (vertices[tv[0]].p.x + vertices[tv[1]].p.x + vertices[tv[2]].p.x) / 3.0,
                    (vertices[tv[0]].p.y + vertices[tv[1]].p.y + vertices[tv[2]].p.y) / 3.0,
                );
                if dot(n, c.sub(a)) > 0.0 {
                    n = [-n[0], -n[1]];
                }
            }
            e.normal = n;
            e.tangent = [-n[1], n[0]];
        }
        let mut m = Mesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            parent,
            corners_c: vec![],
            corners_f: vec![],
            edge_lookup,
        };
        m.check_components()?;
        m.compute_corners();
        Ok(m)
    }

    fn check_components(&self) -> Result<(), MeshError> {
        let mut at: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.is_boundary() {
                at.entry(e.v[0]).or_default().push(i);
                at.entry(e.v[1]).or_default().push(i);
            }
        }
        for (v, es) in &at {
            if es.len() != 2 {
                return Err(MeshError::NonConforming(format!(
                    "boundary vertex {v} has {} boundary edges",
                    es.len()
                )));
            }
            let (a, b) = (self.edges[es[0]].label.unwrap(), self.edges[es[1]].label.unwrap());
            if a.kind == b.kind && a.component != b.component {
                return Err(MeshError::NonConforming(format!(
                    "boundary component ids change at vertex {v} within one run"
                )));
            }
        }
        Ok(())
    }

    /// Boundary edges around vertex `v`, ordered (incoming, outgoing) along the
    /// counterclockwise traversal of the boundary.
    pub fn boundary_pair(&self, v: usize) -> Option<(usize, usize)> {
        let mut inc = None;
        let mut out = None;
        for (i, e) in self.edges.iter().enumerate() {
            if !e.is_boundary() || (e.v[0] != v && e.v[1] != v) {
                continue;
            }
            let other = if e.v[0] == v { e.v[1] } else { e.v[0] };
            let d = self.vertices[other].p.sub(self.vertices[v].p);
            if dot(d, e.tangent) > 0.0 {
                out = Some(i);
            } else {
                inc = Some(i);
            }
        }
        Some((inc?, out?))
    }

    fn compute_corners(&mut self) {
        let mut cc = vec![];
        let mut cf = vec![];
        let mut seen = vec![false; self.vertices.len()];
        for e in &self.edges {
            if !e.is_boundary() {
                continue;
            }
            for &v in &e.v {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                if let Some((a, b)) = self.boundary_pair(v) {
                    let (la, lb) = (self.edges[a].label.unwrap(), self.edges[b].label.unwrap());
                    if la.kind != lb.kind {
                        continue;
                    }
                    let na = self.edges[a].normal;
                    let nb = self.edges[b].normal;
                    let cross = na[0] * nb[1] - na[1] * nb[0];
                    if cross.abs() > 1e-10 || dot(na, nb) < 0.0 {
                        match la.kind {
                            BcKind::Clamped => cc.push(v),
                            BcKind::Free => cf.push(v),
                            BcKind::SimplySupported => {}
                        }
                    }
                }
            }
        }
        cc.sort_unstable();
        cf.sort_unstable();
        self.corners_c = cc;
        self.corners_f = cf;
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    pub fn geometry(&self, k: usize) -> TriGeom {
        let v = self.triangles[k].v;
        TriGeom::new(k, [self.vertices[v[0]].p, self.vertices[v[1]].p, self.vertices[v[2]].p])
            .expect("valid mesh holds non-degenerate triangles")
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    pub fn is_contractible(&self) -> bool {
        self.euler_characteristic() == 1
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .map(|k| self.geometry(k).min_angle())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut star = vec![vec![]; self.num_vertices()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &v in &t.v {
                star[v].push(k);
            }
        }
        star
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut b = vec![false; self.num_vertices()];
        for e in &self.edges {
            if e.is_boundary() {
                b[e.v[0]] = true;
                b[e.v[1]] = true;
            }
        }
        b
    }

    /// Vertices created by bisecting an interior edge.
    pub fn interior_bisection_vertices(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v.bisect, Some(b) if !b.on_boundary))
            .map(|(i, _)| i)
            .collect()
    }

    /// The two sides of a bisection vertex star.
    pub fn patches(&self, x: usize) -> Result<(Vec<usize>, Vec<usize>), MeshError> {
        let info = self.vertices[x].bisect.ok_or(MeshError::NotBisection(x))?;
        self.patches_with_normal(x, info.normal, info.on_boundary)
    }

    pub fn patches_with_normal(
        &self,
        x: usize,
        n: [f64; 2],
        on_boundary: bool,
    ) -> Result<(Vec<usize>, Vec<usize>), MeshError> {
        let xp = self.vertices[x].p;
        let mut plus = vec![];
        let mut minus = vec![];
        for (k, t) in self.triangles.iter().enumerate() {
            if !t.v.contains(&x) {
                continue;
            }
            let c = self.geometry(k).centroid();
            if !on_boundary && dot(c.sub(xp), n) > 0.0 {
                plus.push(k);
            } else {
                minus.push(k);
            }
        }
        Ok((plus, minus))
    }

    pub fn boundary_labels(&self) -> HashMap<(usize, usize), BoundaryLabel> {
        self.edges
            .iter()
            .filter_map(|e| e.label.map(|l| ((e.v[0], e.v[1]), l)))
            .collect()
    }

    /// Bisects the marked triangles (at least once each) and closes the mesh.
    pub fn bisect(&self, marked: &[usize]) -> Mesh {
        let mut edges = vec![false; self.num_edges()];
        for &k in marked {
            let (a, b) = self.triangles[k].refinement_edge();
            edges[self.edge_between(a, b).unwrap()] = true;
        }
        self.refine_edges(edges)
    }

    /// Bisects every edge: each triangle becomes four.
    pub fn uniform_refine(&self) -> Mesh {
        self.refine_edges(vec![true; self.num_edges()])
    }

    fn refine_edges(&self, mut marked: Vec<bool>) -> Mesh {
        // closure: a triangle with any marked edge must split its refinement edge
        loop {
            let mut changed = false;
            for (k, t) in self.triangles.iter().enumerate() {
                let te = self.tri_edges[k];
                let any = te.iter().any(|&e| marked[e]);
                let r = te[0];
                if any && !marked[r] {
                    marked[r] = true;
                    changed = true;
                }
                let _ = t;
            }
            if !changed {
                break;
            }
        }
        if !marked.iter().any(|&m| m) {
            return self.clone();
        }
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            if marked[i] {
                let p = e.midpoint(self);
                vertices.push(Vertex {
                    p,
                    initial: false,
                    bisect: Some(BisectInfo {
                        normal: e.normal,
                        tangent: e.tangent,
                        on_boundary: e.is_boundary(),
                    }),
                });
                mid.insert((e.v[0], e.v[1]), vertices.len() - 1);
            }
        }
        let mut labels = self.boundary_labels();
        for e in &self.edges {
            if let (Some(l), Some(&m)) = (e.label, mid.get(&(e.v[0], e.v[1]))) {
                labels.insert(key(e.v[0], m), l);
                labels.insert(key(m, e.v[1]), l);
            }
        }
        let mut triangles = Vec::new();
        let mut parent = Vec::new();
        for (k, t) in self.triangles.iter().enumerate() {
            split(t, &mid, &mut |c| {
                triangles.push(c);
                parent.push(Some(k));
            });
        }
        Mesh::assemble(vertices, triangles, parent, &labels)
            .expect("bisection preserves mesh validity")
    }

    /// Triangles whose centroid lies within `r` of `p`.
    pub fn triangles_near(&self, p: Point2, r: f64) -> Vec<usize> {
        (0..self.num_triangles())
            .filter(|&k| self.geometry(k).centroid().dist(p) < r)
            .collect()
    }
}

fn split(t: &Triangle, mid: &HashMap<(usize, usize), usize>, out: &mut dyn FnMut(Triangle)) {
    let [p0, p1, p2] = t.v;
    match mid.get(&key(p1, p2)) {
        None => out(*t),
        Some(&m) => {
            let g = t.generation + 1;
            split(&Triangle { v: [m, p0, p1], generation: g }, mid, out);
            split(&Triangle { v: [m, p2, p0], generation: g }, mid, out);
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// Parses the plain-text mesh format.
pub fn load_mesh(text: &str) -> Result<Mesh, MeshError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let last = text.lines().count();
    let mut pos = 0;
    let mut next = |what: &str| -> Result<(usize, &str), MeshError> {
        let r = lines.get(pos).copied().ok_or_else(|| parse_err(last, format!("unexpected end of input in {what}")));
        pos += 1;
        r
    };
    fn count(l: (usize, &str), name: &str) -> Result<usize, MeshError> {
        let mut w = l.1.split_whitespace();
        if w.next() != Some(name) {
            return Err(parse_err(l.0, format!("expected `{name} N`")));
        }
        w.next().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| parse_err(l.0, "bad count"))
    }
    let nv = count(next("header")?, "vertices")?;
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertices")?;
        let f: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(ln, "bad coordinate"))?;
        if f.len() != 2 || !f.iter().all(|v| v.is_finite()) {
            return Err(parse_err(ln, "expected two finite coordinates"));
        }
        points.push(Point2::new(f[0], f[1]));
    }
    let nt = count(next("header")?, "triangles")?;
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next("triangles")?;
        let v: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(ln, "bad vertex index"))?;
        if v.len() != 3 {
            return Err(parse_err(ln, "expected three vertex indices"));
        }
        if let Some(&bad) = v.iter().find(|&&i| i >= nv) {
            return Err(parse_err(ln, format!("vertex {bad} does not exist")));
        }
        tris.push([v[0], v[1], v[2]]);
    }
    let nb = count(next("header")?, "boundary")?;
    let mut labels = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = next("boundary")?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 4 {
            return Err(parse_err(ln, "expected `i j LABEL comp`"));
        }
        let a: usize = w[0].parse().map_err(|_| parse_err(ln, "bad vertex index"))?;
        let b: usize = w[1].parse().map_err(|_| parse_err(ln, "bad vertex index"))?;
        if a >= nv || b >= nv {
            return Err(parse_err(ln, "vertex does not exist"));
        }
        let kind = match w[2] {
            "C" => BcKind::Clamped,
            "S" => BcKind::SimplySupported,
            "F" => BcKind::Free,
            o => return Err(parse_err(ln, format!("unknown label `{o}`"))),
        };
        let component = w[3].parse().map_err(|_| parse_err(ln, "bad component id"))?;
        labels.push((a, b, BoundaryLabel { kind, component }));
    }
    if let Ok((ln, _)) = next("trailer") {
        return Err(parse_err(ln, "trailing content"));
    }
    Mesh::from_raw(points, tris, &labels)
}

/// Writes the mesh in the format read by [`load_mesh`].
pub fn write_mesh(m: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "vertices {}", m.num_vertices());
    for v in &m.vertices {
        let _ = writeln!(s, "{:.17e} {:.17e}", v.p.x, v.p.y);
    }
    let _ = writeln!(s, "triangles {}", m.num_triangles());
    for t in &m.triangles {
        let _ = writeln!(s, "{} {} {}", t.v[0], t.v[1], t.v[2]);
    }
    let b: BTreeMap<(usize, usize), BoundaryLabel> = m.boundary_labels().into_iter().collect();
    let _ = writeln!(s, "boundary {}", b.len());
    for ((i, j), l) in b {
        let _ = writeln!(s, "{i} {j} {} {}", l.kind.letter(), l.component);
    }
    s
}

/// Convenience builders for the meshes used by the examples and tests.
pub mod builders {
    use super::*;

    fn lab(kind: BcKind, component: usize) -> BoundaryLabel {
        BoundaryLabel { kind, component }
    }

    /// Unit square split along the diagonal (0,0)-(1,1), all edges of one kind.
    pub fn unit_square(kind: BcKind) -> Mesh {
        let p = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let l = lab(kind, 0);
        Mesh::from_raw(
            p,
            vec![[0, 1, 2], [0, 2, 3]],
            &[(0, 1, l), (1, 2, l), (2, 3, l), (3, 0, l)],
        )
        .unwrap()
    }

    /// Unit square as an n x n grid of squares, each cut by its (0,0)-(1,1)
    /// diagonal.
    pub fn unit_square_grid(n: usize, kind: BcKind) -> Mesh {
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut p = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                p.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let mut tris = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let l = lab(kind, 0);
        let mut b = Vec::with_capacity(4 * n);
        for i in 0..n {
            b.push((id(i, 0), id(i + 1, 0), l));
            b.push((id(n, i), id(n, i + 1), l));
            b.push((id(i + 1, n), id(i, n), l));
            b.push((id(0, i + 1), id(0, i), l));
        }
        Mesh::from_raw(p, tris, &b).unwrap()
    }

    /// (-1,1)^2 without the closed third quadrant; clamped on the two legs at
    /// the reentrant corner, free elsewhere.
    pub fn lshape_clamped_corner() -> Mesh {
        let p = vec![
            Point2::new(0.0, -1.0),
            Point2::new(1.0, -1.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
        ];
        let t = vec![[3, 0, 1], [3, 1, 4], [3, 4, 7], [3, 7, 6], [3, 6, 5], [3, 5, 2]];
        let c = lab(BcKind::Clamped, 0);
        let f = lab(BcKind::Free, 0);
        Mesh::from_raw(
            p,
            t,
            &[
                (2, 3, c),
                (3, 0, c),
                (0, 1, f),
                (1, 4, f),
                (4, 7, f),
                (7, 6, f),
                (6, 5, f),
                (5, 2, f),
            ],
        )
        .unwrap()
    }

    /// (-1,1)^2 without [0,1]x[-1,0]; simply supported on the two reentrant
    /// edges, clamped elsewhere.
    pub fn lshape_simply_supported() -> Mesh {
        let p = vec![
            Point2::new(-1.0, -1.0),
            Point2::new(0.0, -1.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
        ];
        let t = vec![[3, 0, 1], [3, 2, 0], [3, 5, 2], [3, 6, 5], [3, 7, 6], [3, 4, 7]];
        let s = lab(BcKind::SimplySupported, 0);
        let c = lab(BcKind::Clamped, 0);
        Mesh::from_raw(
            p,
            t,
            &[
                (1, 3, s),
                (3, 4, s),
                (4, 7, c),
                (7, 6, c),
                (6, 5, c),
                (5, 2, c),
                (2, 0, c),
                (0, 1, c),
            ],
        )
        .unwrap()
    }

    /// Annulus-like square ring, used to exercise the contractibility check.
    pub fn square_ring() -> Mesh {
        let mut p = vec![];
        for &(x, y) in &[(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (0.0, 3.0)] {
            p.push(Point2::new(x, y));
        }
        for &(x, y) in &[(1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0)] {
            p.push(Point2::new(x, y));
        }
        let t = vec![
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        let c = lab(BcKind::Clamped, 0);
        let c1 = lab(BcKind::Clamped, 1);
        Mesh::from_raw(
            p,
            t,
            &[
                (0, 1, c),
                (1, 2, c),
                (2, 3, c),
                (3, 0, c),
                (4, 5, c1),
                (5, 6, c1),
                (6, 7, c1),
                (7, 4, c1),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::builders::*;
    use super::*;

    #[test]
    fn square_counts() {
        let m = unit_square(BcKind::Clamped);
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_triangles()), (4, 5, 2));
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn reference_triangle_geometry() {
        let g = TriGeom::new(
            0,
            [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
        )
        .unwrap();
        // edge opposite (0,1) is the bottom edge
        assert!((g.n[2][0]).abs() < 1e-15 && (g.n[2][1] + 1.0).abs() < 1e-15);
        assert!((g.h[2] - 1.0).abs() < 1e-15);
        assert!((g.grad_lambda[2][0]).abs() < 1e-15 && (g.grad_lambda[2][1] - 1.0).abs() < 1e-15);
        // c_3 from the dot products by hand: t_1 = (-1,1)/sqrt2 ... n_3 = (0,-1)
        let t1 = [-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let t2 = [0.0, -1.0];
        let expect = -1.0 / (2.0 * (-t1[1]) * (-t2[1]));
        assert!((g.c[2] - expect).abs() < 1e-14);
    }

    #[test]
    fn equilateral_heights() {
        let s = 3f64.sqrt() / 2.0;
        let g = TriGeom::new(
            0,
            [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.5, s)],
        )
        .unwrap();
        for i in 0..3 {
            assert!((g.h[i] - s).abs() < 1e-14);
        }
    }

    #[test]
    fn barycentric_roundtrip() {
        let g = TriGeom::new(
            0,
            [Point2::new(0.1, 0.2), Point2::new(1.3, -0.1), Point2::new(0.4, 0.9)],
        )
        .unwrap();
        let l = [0.2, 0.3, 0.5];
        let b = g.barycentric(g.point(l));
        for i in 0..3 {
            assert!((b[i] - l[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_rejected() {
        let r = TriGeom::new(
            3,
            [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)],
        );
        assert_eq!(r.unwrap_err(), MeshError::Degenerate(3));
    }

    #[test]
    fn bisect_empty_is_identity() {
        let m = unit_square(BcKind::Clamped);
        let r = m.bisect(&[]);
        assert_eq!(r.num_triangles(), 2);
        assert_eq!(r.triangles, m.triangles);
    }

    #[test]
    fn bisect_completion_on_square() {
        let m = unit_square(BcKind::Clamped);
        // both refinement edges are the shared diagonal
        let r = m.bisect(&[0]);
        assert_eq!(r.num_triangles(), 4);
        assert_eq!(r.num_vertices(), 5);
        assert_eq!(r.interior_bisection_vertices(), vec![4]);
    }

    #[test]
    fn bisect_boundary_refinement_edge() {
        let p = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let l = BoundaryLabel { kind: BcKind::Clamped, component: 0 };
        let m = Mesh::from_raw(p, vec![[0, 1, 2]], &[(0, 1, l), (1, 2, l), (2, 0, l)]).unwrap();
        let r = m.bisect(&[0]);
        assert_eq!((r.num_triangles(), r.num_vertices()), (2, 4));
        let (plus, minus) = r.patches(3).unwrap();
        assert!(plus.is_empty());
        assert_eq!(minus.len(), 2);
    }

    #[test]
    fn uniform_counts() {
        let m = unit_square(BcKind::Clamped);
        let r = m.uniform_refine();
        assert_eq!(r.num_triangles(), 8);
        assert_eq!(r.num_vertices(), m.num_vertices() + m.num_edges());
        let r2 = r.uniform_refine().uniform_refine();
        assert_eq!(r2.num_triangles(), 128);
        assert_eq!(r2.euler_characteristic(), 1);
        for t in &r.triangles {
            assert_eq!(t.generation, 2);
        }
    }

    #[test]
    fn patches_split_star() {
        let m = unit_square(BcKind::Clamped).bisect(&[0]);
        let (p, q) = m.patches(4).unwrap();
        assert_eq!((p.len(), q.len()), (2, 2));
        assert!(m.patches(0).is_err());
    }

    #[test]
    fn lshape_labels() {
        let m = lshape_clamped_corner();
        let nc = m
            .edges
            .iter()
            .filter(|e| matches!(e.label, Some(l) if l.kind == BcKind::Clamped))
            .count();
        assert_eq!(nc, 2);
        let cf: Vec<Point2> = m.corners_f.iter().map(|&v| m.vertices[v].p).collect();
        assert_eq!(cf.len(), 3);
        assert!(cf.contains(&Point2::new(1.0, -1.0)));
        assert!(cf.contains(&Point2::new(1.0, 1.0)));
        assert!(cf.contains(&Point2::new(-1.0, 1.0)));
        assert_eq!(m.corners_c.len(), 1);
        // outward normals
        for e in m.edges.iter().filter(|e| e.is_boundary()) {
            let c = m.geometry(e.tris[0].unwrap()).centroid();
            assert!(dot(e.normal, c.sub(m.vertices[e.v[0]].p)) < 0.0);
        }
    }

    #[test]
    fn load_and_errors() {
        let txt = "# square\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 4\n0 1 C 0\n1 2 C 0\n2 3 C 0\n3 0 C 0\n";
        let m = load_mesh(txt).unwrap();
        assert_eq!(m.num_edges(), 5);
        let back = load_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back.triangles, m.triangles);
        let bad = txt.replace("0 2 3", "0 2 7");
        assert!(matches!(load_mesh(&bad), Err(MeshError::Parse { line: 9, .. })));
        let unl = txt.replace("boundary 4", "boundary 3").replace("3 0 C 0\n", "");
        assert_eq!(load_mesh(&unl).unwrap_err(), MeshError::Unlabeled(0, 3));
    }

    #[test]
    fn ring_is_not_contractible() {
        assert_eq!(square_ring().euler_characteristic(), 0);
    }
}
