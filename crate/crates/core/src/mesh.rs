//! Structured quadrilateral meshes of rectangular domains.
//!
//! Corner (Q4) nodes and the biquadratic (Q9) node set are ordered
//! lexicographically by `(y, x)`; elements are numbered row-major from the
//! bottom-left corner. The Q4 node `(i, j)` coincides with the Q9 node
//! `(2i, 2j)` bit for bit.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Region an element belongs to in the quarter five-spot layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Interior,
    Injection,
    Production,
}

/// Local edge numbering: bottom, right, top, left (counterclockwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalEdge {
    Bottom = 0,
    Right = 1,
    Top = 2,
    Left = 3,
}

impl LocalEdge {
    pub const ALL: [LocalEdge; 4] = [LocalEdge::Bottom, LocalEdge::Right, LocalEdge::Top, LocalEdge::Left];

    /// Local Q4 corner indices of the edge, counterclockwise.
    pub fn corners(self) -> [usize; 2] {
        match self {
            LocalEdge::Bottom => [0, 1],
            LocalEdge::Right => [1, 2],
            LocalEdge::Top => [2, 3],
            LocalEdge::Left => [3, 0],
        }
    }

    /// Local Q9 node indices (corner, midside, corner).
    pub fn q9_nodes(self) -> [usize; 3] {
        match self {
            LocalEdge::Bottom => [0, 4, 1],
            LocalEdge::Right => [1, 5, 2],
            LocalEdge::Top => [2, 6, 3],
            LocalEdge::Left => [3, 7, 0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub edge: LocalEdge,
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredQuadMesh {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub well_size: f64,
    pub corner_nodes: Vec<[f64; 2]>,
    pub q9_nodes: Vec<[f64; 2]>,
    pub elem_conn_q4: Vec<[usize; 4]>,
    pub elem_conn_q9: Vec<[usize; 9]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub subdomain_tag: Vec<Subdomain>,
    pub h_elem: Vec<f64>,
    /// False when the well squares do not fall on element lines and were
    /// classified by centroid only.
    pub grid_aligned: bool,
}

fn coord(index: usize, divisions: usize, length: f64) -> f64 {
    if index == divisions {
        length
    } else {
        index as f64 * length / divisions as f64
    }
}

/// Builds an `nx × ny` mesh of the square `[0, L]²` and tags the
/// `W × W` injection (bottom-left) and production (top-right) squares.
pub fn build_structured_mesh(nx: usize, ny: usize, length: f64, well_size: f64) -> Result<StructuredQuadMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::invalid(format!("mesh needs at least 2x2 elements, got {nx}x{ny}")));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("domain length must be positive, got {length}")));
    }
    if !(well_size > 0.0) {
        return Err(Error::invalid(format!("well size must be positive, got {well_size}")));
    }
    if well_size >= 0.5 * length {
        return Err(Error::invalid(format!(
            "well size {well_size} must be smaller than half the domain length {length}"
        )));
    }

    let n9x = 2 * nx + 1;
    let n9y = 2 * ny + 1;

    let mut q9_nodes = Vec::with_capacity(n9x * n9y);
    for jj in 0..n9y {
        let y = coord(jj, 2 * ny, length);
        for ii in 0..n9x {
            q9_nodes.push([coord(ii, 2 * nx, length), y]);
        }
    }
    let mut corner_nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            corner_nodes.push(q9_nodes[2 * j * n9x + 2 * i]);
        }
    }

    let nel = nx * ny;
    let mut elem_conn_q4 = Vec::with_capacity(nel);
    let mut elem_conn_q9 = Vec::with_capacity(nel);
    let mut h_elem = Vec::with_capacity(nel);
    let mut subdomain_tag = Vec::with_capacity(nel);
    for j in 0..ny {
        for i in 0..nx {
            let c = |di: usize, dj: usize| (j + dj) * (nx + 1) + i + di;
            let q4 = [c(0, 0), c(1, 0), c(1, 1), c(0, 1)];
            let q = |di: usize, dj: usize| (2 * j + dj) * n9x + 2 * i + di;
            let q9 = [q(0, 0), q(2, 0), q(2, 2), q(0, 2), q(1, 0), q(2, 1), q(1, 2), q(0, 1), q(1, 1)];

            let xs: [[f64; 2]; 4] = q4.map(|n| corner_nodes[n]);
            let mut h: f64 = 0.0;
            for k in 0..4 {
                let a = xs[k];
                let b = xs[(k + 1) % 4];
                h = h.max(libm::hypot(b[0] - a[0], b[1] - a[1]));
            }
            let cx = 0.25 * xs.iter().map(|p| p[0]).sum::<f64>();
            let cy = 0.25 * xs.iter().map(|p| p[1]).sum::<f64>();
            let tag = if cx <= well_size && cy <= well_size {
                Subdomain::Injection
            } else if cx >= length - well_size && cy >= length - well_size {
                Subdomain::Production
            } else {
                Subdomain::Interior
            };

            elem_conn_q4.push(q4);
            elem_conn_q9.push(q9);
            h_elem.push(h);
            subdomain_tag.push(tag);
        }
    }

    let grid_aligned = is_aligned(well_size, length, nx) && is_aligned(well_size, length, ny);
    if !grid_aligned {
        log::warn!(
            "well size {well_size} does not align with the {nx}x{ny} grid; wells classified by element centroid"
        );
    }

    let mut mesh = StructuredQuadMesh {
        nx,
        ny,
        length,
        well_size,
        corner_nodes,
        q9_nodes,
        elem_conn_q4,
        elem_conn_q9,
        boundary_edges: Vec::new(),
        subdomain_tag,
        h_elem,
        grid_aligned,
    };
    mesh.boundary_edges = boundary_edges(&mesh);
    Ok(mesh)
}

fn is_aligned(well_size: f64, length: f64, n: usize) -> bool {
    let cells = well_size * n as f64 / length;
    (cells - libm::round(cells)).abs() < 1e-9
}

/// Every edge on the domain boundary with its outward unit normal, in the
/// order bottom row, right column, top row, left column.
pub fn boundary_edges(mesh: &StructuredQuadMesh) -> Vec<BoundaryEdge> {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let mut edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        edges.push(BoundaryEdge { element: i, edge: LocalEdge::Bottom, normal: [0.0, -1.0] });
    }
    for j in 0..ny {
        edges.push(BoundaryEdge { element: j * nx + nx - 1, edge: LocalEdge::Right, normal: [1.0, 0.0] });
    }
    for i in (0..nx).rev() {
        edges.push(BoundaryEdge { element: (ny - 1) * nx + i, edge: LocalEdge::Top, normal: [0.0, 1.0] });
    }
    for j in (0..ny).rev() {
        edges.push(BoundaryEdge { element: j * nx, edge: LocalEdge::Left, normal: [-1.0, 0.0] });
    }
    edges
}

impl StructuredQuadMesh {
    pub fn num_elements(&self) -> usize {
        self.elem_conn_q4.len()
    }

    pub fn num_corner_nodes(&self) -> usize {
        self.corner_nodes.len()
    }

    pub fn num_q9_nodes(&self) -> usize {
        self.q9_nodes.len()
    }

    /// Corner coordinates of element `e` in local counterclockwise order.
    pub fn element_corners(&self, e: usize) -> [[f64; 2]; 4] {
        self.elem_conn_q4[e].map(|n| self.corner_nodes[n])
    }

    /// Index of the Q9 node that coincides with corner node `n`.
    pub fn corner_to_q9(&self, n: usize) -> usize {
        let i = n % (self.nx + 1);
        let j = n / (self.nx + 1);
        2 * j * (2 * self.nx + 1) + 2 * i
    }

    /// Corner node index of the point mirrored across the diagonal `y = x`.
    /// Only meaningful for square grids.
    pub fn diagonal_mirror(&self, n: usize) -> usize {
        let i = n % (self.nx + 1);
        let j = n / (self.nx + 1);
        i * (self.nx + 1) + j
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let p = self.element_corners(e);
        let mut twice = 0.0;
        for k in 0..4 {
            let a = p[k];
            let b = p[(k + 1) % 4];
            twice += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * twice
    }

    pub fn count_tagged(&self, tag: Subdomain) -> usize {
        self.subdomain_tag.iter().filter(|&&t| t == tag).count()
    }

    /// Q4 nodes lying on the domain boundary.
    pub fn boundary_corner_nodes(&self) -> Vec<usize> {
        let (nx, ny) = (self.nx, self.ny);
        (0..self.num_corner_nodes())
            .filter(|&n| {
                let i = n % (nx + 1);
                let j = n / (nx + 1);
                i == 0 || j == 0 || i == nx || j == ny
            })
            .collect()
    }
}

impl fmt::Display for StructuredQuadMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} mesh of [0, {}]^2: {} Q4 nodes, {} Q9 nodes, {} boundary edges, {} injection / {} production elements",
            self.nx,
            self.ny,
            self.length,
            self.num_corner_nodes(),
            self.num_q9_nodes(),
            self.boundary_edges.len(),
            self.count_tagged(Subdomain::Injection),
            self.count_tagged(Subdomain::Production),
        )
    }
}
