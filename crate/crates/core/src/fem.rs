//! Reference elements, Gauss quadrature and the isoparametric map.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// Q4: bilinear Lagrange on the four corners.
    Bilinear4,
    /// Q9: biquadratic Lagrange on corners, edge midpoints and the center.
    Biquadratic9,
}

const Q4_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
const Q9_NODES: [[f64; 2]; 9] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, 0.0],
];

impl ElementKind {
    pub fn num_nodes(self) -> usize {
        match self {
            ElementKind::Bilinear4 => 4,
            ElementKind::Biquadratic9 => 9,
        }
    }

    pub fn local_nodes(self) -> &'static [[f64; 2]] {
        match self {
            ElementKind::Bilinear4 => &Q4_NODES,
            ElementKind::Biquadratic9 => &Q9_NODES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceElement {
    pub kind: ElementKind,
}

impl ReferenceElement {
    pub fn new(kind: ElementKind) -> Self {
        Self { kind }
    }

    pub fn local_nodes(&self) -> &'static [[f64; 2]] {
        self.kind.local_nodes()
    }

    pub fn eval(&self, xi: f64, eta: f64) -> Result<BasisValues> {
        eval_basis(self.kind, xi, eta)
    }
}

/// Basis values and derivatives at one point. Only the first `n` entries of
/// each array are meaningful. Second derivatives are stored as `[xx, xy, yy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisValues {
    pub n: usize,
    pub values: [f64; 9],
    pub grads: [[f64; 2]; 9],
    pub hessians: [[f64; 3]; 9],
}

impl BasisValues {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    pub fn grads(&self) -> &[[f64; 2]] {
        &self.grads[..self.n]
    }

    pub fn hessians(&self) -> &[[f64; 3]] {
        &self.hessians[..self.n]
    }

    /// Interpolates nodal scalars: value, gradient.
    pub fn interpolate(&self, nodal: impl Fn(usize) -> f64) -> (f64, [f64; 2]) {
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for a in 0..self.n {
            let ua = nodal(a);
            u += self.values[a] * ua;
            g[0] += self.grads[a][0] * ua;
            g[1] += self.grads[a][1] * ua;
        }
        (u, g)
    }
}

// 1D Lagrange bases: value, first and second derivative.
fn linear_1d(node: f64, s: f64) -> [f64; 3] {
    [0.5 * (1.0 + node * s), 0.5 * node, 0.0]
}

fn quadratic_1d(node: f64, s: f64) -> [f64; 3] {
    if node < 0.0 {
        [0.5 * s * (s - 1.0), s - 0.5, 1.0]
    } else if node > 0.0 {
        [0.5 * s * (s + 1.0), s + 0.5, 1.0]
    } else {
        [1.0 - s * s, -2.0 * s, -2.0]
    }
}

const REF_TOL: f64 = 1e-12;

pub fn eval_basis(kind: ElementKind, xi: f64, eta: f64) -> Result<BasisValues> {
    if !(xi.abs() <= 1.0 + REF_TOL && eta.abs() <= 1.0 + REF_TOL) {
        return Err(Error::invalid(format!("point ({xi}, {eta}) lies outside the reference square")));
    }
    let basis_1d: fn(f64, f64) -> [f64; 3] = match kind {
        ElementKind::Bilinear4 => linear_1d,
        ElementKind::Biquadratic9 => quadratic_1d,
    };
    let mut out = BasisValues { n: kind.num_nodes(), values: [0.0; 9], grads: [[0.0; 2]; 9], hessians: [[0.0; 3]; 9] };
    for (a, node) in kind.local_nodes().iter().enumerate() {
        let fx = basis_1d(node[0], xi);
        let fy = basis_1d(node[1], eta);
        out.values[a] = fx[0] * fy[0];
        out.grads[a] = [fx[1] * fy[0], fx[0] * fy[1]];
        out.hessians[a] = [fx[2] * fy[0], fx[1] * fy[1], fx[0] * fy[2]];
    }
    Ok(out)
}

/// Tensor-product Gauss–Legendre rule on `[-1, 1]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

fn gauss_1d(n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let r = match n {
        1 => (alloc::vec![0.0], alloc::vec![2.0]),
        2 => {
            let a = 1.0 / libm::sqrt(3.0);
            (alloc::vec![-a, a], alloc::vec![1.0, 1.0])
        }
        3 => {
            let a = libm::sqrt(3.0 / 5.0);
            (alloc::vec![-a, 0.0, a], alloc::vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = 2.0 / 7.0 * libm::sqrt(6.0 / 5.0);
            let inner = libm::sqrt(3.0 / 7.0 - s);
            let outer = libm::sqrt(3.0 / 7.0 + s);
            let w_inner = (18.0 + libm::sqrt(30.0)) / 36.0;
            let w_outer = (18.0 - libm::sqrt(30.0)) / 36.0;
            (alloc::vec![-outer, -inner, inner, outer], alloc::vec![w_outer, w_inner, w_inner, w_outer])
        }
        _ => return None,
    };
    Some(r)
}

/// `n × n` Gauss rule, exact for polynomials of degree `2n - 1` per axis.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    let (p, w) = gauss_1d(n).ok_or_else(|| Error::invalid(format!("unsupported Gauss rule order {n}")))?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([p[i], p[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Result of mapping a reference point through the bilinear geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub x: [f64; 2],
    /// `jacobian[i][j] = ∂x_i / ∂ξ_j`.
    pub jacobian: [[f64; 2]; 2],
    pub det_j: f64,
    /// Basis functions with physical first and second derivatives.
    pub basis: BasisValues,
}

/// Maps `(ξ, η)` through the bilinear geometry of `corners` and pushes the
/// derivatives of the `kind` basis to physical coordinates.
pub fn isoparametric_map(corners: &[[f64; 2]; 4], kind: ElementKind, xi: f64, eta: f64) -> Result<MappedPoint> {
    let geo = eval_basis(ElementKind::Bilinear4, xi, eta)?;
    let reference = eval_basis(kind, xi, eta)?;
    map_with(corners, &geo, &reference)
}

/// Same as [`isoparametric_map`] with precomputed reference tables.
pub fn map_with(corners: &[[f64; 2]; 4], geo: &BasisValues, reference: &BasisValues) -> Result<MappedPoint> {
    let mut x = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    // Only the mixed second derivative of a bilinear map is non-zero.
    let mut x_mixed = [0.0; 2];
    for a in 0..4 {
        for i in 0..2 {
            x[i] += geo.values[a] * corners[a][i];
            jac[i][0] += geo.grads[a][0] * corners[a][i];
            jac[i][1] += geo.grads[a][1] * corners[a][i];
            x_mixed[i] += geo.hessians[a][1] * corners[a][i];
        }
    }
    let det_j = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if !(det_j > 0.0) {
        return Err(Error::DegenerateElement { element: usize::MAX, det_j });
    }
    // inv[j][i] = ∂ξ_j / ∂x_i
    let inv = [[jac[1][1] / det_j, -jac[0][1] / det_j], [-jac[1][0] / det_j, jac[0][0] / det_j]];

    let mut basis = *reference;
    for a in 0..reference.n {
        let gr = reference.grads[a];
        let g = [gr[0] * inv[0][0] + gr[1] * inv[1][0], gr[0] * inv[0][1] + gr[1] * inv[1][1]];
        basis.grads[a] = g;

        // reference Hessian corrected for the curvature of the map
        let hr = reference.hessians[a];
        let corr = g[0] * x_mixed[0] + g[1] * x_mixed[1];
        let h = [[hr[0], hr[1] - corr], [hr[1] - corr, hr[2]]];
        // H_x = inv^T h inv
        let mut hx = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += inv[p][i] * h[p][q] * inv[q][j];
                    }
                }
                hx[i][j] = s;
            }
        }
        basis.hessians[a] = [hx[0][0], hx[0][1], hx[1][1]];
    }
    Ok(MappedPoint { x, jacobian: jac, det_j, basis })
}

/// Reference basis tables at every point of a quadrature rule, shared by
/// all element loops.
#[derive(Debug, Clone)]
pub struct QuadratureTables {
    pub rule: QuadratureRule,
    pub geometry: Vec<BasisValues>,
    pub q4: Vec<BasisValues>,
    pub q9: Vec<BasisValues>,
}

impl QuadratureTables {
    pub fn new(order: usize) -> Result<Self> {
        let rule = gauss_rule(order)?;
        let table = |kind| rule.points.iter().map(|p| eval_basis(kind, p[0], p[1])).collect::<Result<Vec<_>>>();
        let q4 = table(ElementKind::Bilinear4)?;
        let q9 = table(ElementKind::Biquadratic9)?;
        Ok(Self { geometry: q4.clone(), q4, q9, rule })
    }

    /// Default 3×3 Gauss tables.
    pub fn standard() -> Self {
        Self::new(3).expect("3-point Gauss rule is supported")
    }
}
