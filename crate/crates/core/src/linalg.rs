//! Sparse assembly and direct solution of the flow and transport systems.
//!
//! Matrices are stored in compressed row form over a fixed sparsity
//! pattern built once from the element connectivity. Assembly scatters
//! dense element blocks into the pattern in element order, so the global
//! sums are reproducible bit for bit.
//!
//! [`SparseSystem::solve`] eliminates Dirichlet constraints symmetrically,
//! optionally fixes the additive constant of a block of unknowns so that
//! their arithmetic mean is zero, and factors the result with a sparse LU
//! (partial pivoting). Symmetric saddle-point systems can instead use a
//! shifted `LDLᵀ` factorization, see [`Factorization`].

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::Range;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::{LdltError, LdltRegularization};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Result};

/// Required relative residual of every solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Pattern containing every `(row, col)` pair in `entries`.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (r, c) in entries {
            if r >= n {
                return Err(Error::IndexOutOfRange { index: r, dim: n });
            }
            if c >= n {
                return Err(Error::IndexOutOfRange { index: c, dim: n });
            }
            pairs.push((r, c));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _) in &pairs {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = pairs.into_iter().map(|(_, c)| c).collect();
        Ok(Self { n, row_ptr, col_idx })
    }

    /// Pattern coupling every pair of dofs that share an element.
    pub fn from_element_maps<'a>(n: usize, maps: impl IntoIterator<Item = &'a [usize]>) -> Result<Self> {
        let mut entries = Vec::new();
        for map in maps {
            for &r in map {
                for &c in map {
                    entries.push((r, c));
                }
            }
        }
        Self::from_entries(n, entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }
}

/// Square matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row >= self.dim() || col >= self.dim() {
            return 0.0;
        }
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        let n = self.dim();
        if row >= n {
            return Err(Error::IndexOutOfRange { index: row, dim: n });
        }
        if col >= n {
            return Err(Error::IndexOutOfRange { index: col, dim: n });
        }
        let k = self.pattern.position(row, col).ok_or(Error::NotInPattern { row, col })?;
        self.values[k] += value;
        Ok(())
    }

    /// Iterates `(row, col, value)` over stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            let (lo, hi) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
            (lo..hi).map(move |k| (r, self.pattern.col_idx[k], self.values[k]))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (r, yr) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
            let mut s = 0.0;
            for k in lo..hi {
                s += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yr = s;
        }
        y
    }
}

/// A linear system together with its essential constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Dirichlet set: `(dof, prescribed value)`.
    pub constraints: Vec<(usize, f64)>,
    /// Unknowns whose arithmetic mean is constrained to zero.
    pub mean_zero: Option<Range<usize>>,
}

impl SparseSystem {
    pub fn new(pattern: Arc<SparsityPattern>) -> Self {
        let n = pattern.n;
        Self { matrix: CsrMatrix::zeros(pattern), rhs: vec![0.0; n], constraints: Vec::new(), mean_zero: None }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Adds the dense row-major block `local` at the rows and columns given
    /// by `map`.
    pub fn scatter_add(&mut self, local: &[f64], map: &[usize]) -> Result<()> {
        let m = map.len();
        if local.len() != m * m {
            return Err(Error::invalid(format!("local block has {} entries for a map of length {m}", local.len())));
        }
        for (i, &gi) in map.iter().enumerate() {
            for (j, &gj) in map.iter().enumerate() {
                self.matrix.add(gi, gj, local[i * m + j])?;
            }
        }
        Ok(())
    }

    pub fn scatter_add_rhs(&mut self, local: &[f64], map: &[usize]) -> Result<()> {
        let n = self.dim();
        for (&v, &g) in local.iter().zip(map) {
            if g >= n {
                return Err(Error::IndexOutOfRange { index: g, dim: n });
            }
            self.rhs[g] += v;
        }
        Ok(())
    }

    pub fn constrain(&mut self, dof: usize, value: f64) {
        self.constraints.push((dof, value));
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        DirectSolver::new().solve(self)
    }

    /// Writes the matrix in coordinate text format, one `row col value` per line.
    pub fn dump_coordinate(&self) -> String {
        let mut s = String::new();
        for (r, c, v) in self.matrix.entries() {
            let _ = writeln!(s, "{r} {c} {v:e}");
        }
        s
    }
}

/// Constrained system in compressed column form.
struct Prepared {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    rhs: Vec<f64>,
}

impl Prepared {
    fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// max_i |b − Ax|_i / (|A||x| + |b|)_i
    fn backward_error(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        let mut denom: Vec<f64> = self.rhs.iter().map(|b| b.abs()).collect();
        for c in 0..self.dim() {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                denom[self.row_idx[k]] += (self.values[k] * x[c]).abs();
            }
        }
        r.iter().zip(&denom).map(|(r, d)| if *d > 0.0 { r.abs() / d } else if *r == 0.0 { 0.0 } else { f64::INFINITY }).fold(0.0, f64::max)
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.rhs.clone();
        for c in 0..self.dim() {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                r[self.row_idx[k]] -= self.values[k] * x[c];
            }
        }
        r
    }
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn prepare(system: &SparseSystem) -> Result<Prepared> {
    let n = system.dim();
    if system.rhs.len() != n {
        return Err(Error::invalid(format!("rhs has length {} for a system of dimension {n}", system.rhs.len())));
    }
    let mut prescribed: Vec<Option<f64>> = vec![None; n];
    for &(dof, value) in &system.constraints {
        if dof >= n {
            return Err(Error::IndexOutOfRange { index: dof, dim: n });
        }
        if prescribed[dof].is_some() {
            return Err(Error::invalid(format!("dof {dof} is constrained twice")));
        }
        prescribed[dof] = Some(value);
    }
    // The mean-zero gauge is realized by pinning the first unknown of the
    // block to zero and shifting the block afterwards. Bordering with a
    // multiplier row would couple the whole block densely and ruin the
    // sparse factorization.
    if let Some(g) = &system.mean_zero {
        if g.end > n || g.is_empty() {
            return Err(Error::invalid(format!("mean-zero block {g:?} is invalid for dimension {n}")));
        }
        if let Some(d) = g.clone().find(|&d| prescribed[d].is_some()) {
            return Err(Error::invalid(format!("dof {d} is both constrained and in the mean-zero block")));
        }
        prescribed[g.start] = Some(0.0);
    }
    let dim = n;

    let mut rhs = vec![0.0; dim];
    rhs[..n].copy_from_slice(&system.rhs);
    let pattern = &system.matrix.pattern;
    let values = &system.matrix.values;

    // Row-wise pass: drop constrained rows and columns, moving known
    // column contributions to the right-hand side.
    let mut col_count = vec![0usize; dim + 1];
    for r in 0..n {
        if prescribed[r].is_some() {
            col_count[r + 1] += 1;
            continue;
        }
        for k in pattern.row_ptr[r]..pattern.row_ptr[r + 1] {
            let c = pattern.col_idx[k];
            match prescribed[c] {
                Some(value) => rhs[r] -= values[k] * value,
                None => col_count[c + 1] += 1,
            }
        }
    }
    for (dof, p) in prescribed.iter().enumerate() {
        if let Some(v) = p {
            rhs[dof] = *v;
        }
    }
    for c in 0..dim {
        col_count[c + 1] += col_count[c];
    }
    let col_ptr = col_count;
    let nnz = col_ptr[dim];
    let mut next = col_ptr.clone();
    let mut row_idx = vec![0usize; nnz];
    let mut vals = vec![0.0; nnz];
    let mut push = |r: usize, c: usize, v: f64, next: &mut Vec<usize>| {
        let k = next[c];
        row_idx[k] = r;
        vals[k] = v;
        next[c] += 1;
    };
    // Rows are visited in increasing order, so every column comes out sorted.
    for r in 0..n {
        if prescribed[r].is_some() {
            push(r, r, 1.0, &mut next);
            continue;
        }
        for k in pattern.row_ptr[r]..pattern.row_ptr[r + 1] {
            let c = pattern.col_idx[k];
            if prescribed[c].is_none() {
                push(r, c, values[k], &mut next);
            }
        }
    }
    Ok(Prepared { col_ptr, row_idx, values: vals, rhs })
}

/// How [`DirectSolver`] factors the constrained matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Factorization {
    /// General sparse LU with partial pivoting.
    #[default]
    Lu,
    /// Symmetric saddle-point matrix whose positive definite block is
    /// everything outside `constraint_block`. Factored as `LDLᵀ` after
    /// shifting the zero block by a tiny negative multiple of the identity,
    /// which makes the matrix quasi-definite. Iterative refinement against
    /// the unshifted matrix then removes the perturbation.
    SaddlePoint { constraint_block: Range<usize> },
}

/// Relative size of the shift applied to the zero block of a saddle-point
/// matrix before factoring.
const SADDLE_SHIFT: f64 = 1e-10;
const MAX_REFINEMENT: usize = 10;
/// Componentwise backward error below which a solution is accepted even when
/// the normwise residual misses [`SOLVE_TOLERANCE`].
pub const BACKWARD_ERROR_FLOOR: f64 = 1e-12;

/// Solves once, then refines against the unshifted matrix until the
/// residual stops decreasing.
fn refine(numeric: &Numeric<'_>, prep: &Prepared, d: &[f64]) -> (Vec<f64>, f64) {
    // the factor is of D A D, so A⁻¹ b = D (D A D)⁻¹ D b
    let apply = |b: &[f64]| -> Vec<f64> {
        let db: Vec<f64> = b.iter().zip(d).map(|(b, d)| b * d).collect();
        numeric.solve(&db).iter().zip(d).map(|(y, d)| y * d).collect()
    };
    let mut x = apply(&prep.rhs);
    let b_norm = norm2(&prep.rhs);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut res = norm2(&prep.residual(&x)) / scale;
    log::trace!("direct solve: initial relative residual {res:e}");
    for _ in 0..MAX_REFINEMENT {
        if res <= 1e-2 * SOLVE_TOLERANCE {
            break;
        }
        let r = prep.residual(&x);
        let dx = apply(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let cres = norm2(&prep.residual(&candidate)) / scale;
        if !(cres < res) {
            break;
        }
        x = candidate;
        res = cres;
    }
    (x, res)
}

#[derive(Debug, Clone)]
enum Symbolic {
    Lu(faer::sparse::linalg::solvers::SymbolicLu<usize>),
    Ldlt(Arc<SymbolicCholesky<usize>>),
}

enum Numeric<'a> {
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Ldlt { symbolic: &'a SymbolicCholesky<usize>, values: Vec<f64> },
}

impl Numeric<'_> {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let dim = b.len();
        let mut rhs = Mat::<f64>::from_fn(dim, 1, |i, _| b[i]);
        match self {
            Numeric::Lu(lu) => rhs = lu.solve(&rhs),
            Numeric::Ldlt { symbolic, values } => {
                let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                LdltRef::new(symbolic, values).solve_in_place_with_conj(
                    Conj::No,
                    rhs.as_mut(),
                    Par::Seq,
                    MemStack::new(&mut mem),
                );
            }
        }
        (0..dim).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Sparse direct solver that reuses its symbolic analysis while the
/// sparsity pattern stays the same.
#[derive(Debug, Clone, Default)]
pub struct DirectSolver {
    kind: Factorization,
    symbolic: Option<(Vec<usize>, Vec<usize>, Symbolic)>,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_factorization(kind: Factorization) -> Self {
        Self { kind, symbolic: None }
    }

    fn analyse(&mut self, prep: &Prepared) -> Result<&Symbolic> {
        let reuse = matches!(&self.symbolic, Some((cp, ri, _)) if *cp == prep.col_ptr && *ri == prep.row_idx);
        if !reuse {
            let dim = prep.dim();
            let sym = SymbolicSparseColMat::new_checked(dim, dim, prep.col_ptr.clone(), None, prep.row_idx.clone());
            let analysed = match self.kind {
                Factorization::Lu => Symbolic::Lu(
                    faer::sparse::linalg::solvers::SymbolicLu::try_new(sym.as_ref())
                        .map_err(|_| Error::SingularSystem { pivot: 0 })?,
                ),
                Factorization::SaddlePoint { .. } => Symbolic::Ldlt(Arc::new(
                    factorize_symbolic_cholesky(sym.as_ref(), Side::Lower, SymmetricOrdering::Amd, Default::default())
                        .map_err(|_| Error::SingularSystem { pivot: 0 })?,
                )),
            };
            self.symbolic = Some((prep.col_ptr.clone(), prep.row_idx.clone(), analysed));
        }
        Ok(&self.symbolic.as_ref().expect("symbolic factorization present").2)
    }

    pub fn solve(&mut self, system: &SparseSystem) -> Result<Vec<f64>> {
        let n = system.dim();
        if n == 0 {
            return Ok(Vec::new());
        }
        let prep = prepare(system)?;
        let dim = prep.dim();

        // Structurally empty rows or columns cannot be pivoted.
        for c in 0..dim {
            let empty = (prep.col_ptr[c]..prep.col_ptr[c + 1]).all(|k| prep.values[k] == 0.0);
            if empty {
                return Err(Error::SingularSystem { pivot: c });
            }
        }
        let mut row_has_entry = vec![false; dim];
        for (k, &r) in prep.row_idx.iter().enumerate() {
            if prep.values[k] != 0.0 {
                row_has_entry[r] = true;
            }
        }
        if let Some(r) = row_has_entry.iter().position(|&b| !b) {
            return Err(Error::SingularSystem { pivot: r });
        }

        let d = equilibrate(&prep);
        let scaled = scale_values(&prep, &d);
        let kind = self.kind.clone();
        let symbolic = self.analyse(&prep)?;
        let sym = || SymbolicSparseColMat::new_checked(dim, dim, prep.col_ptr.clone(), None, prep.row_idx.clone());
        let numeric = match (symbolic, &kind) {
            (Symbolic::Lu(analysed), _) => {
                let mat = SparseColMat::new(sym(), scaled.values.clone());
                Numeric::Lu(
                    faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(analysed.clone(), mat.as_ref()).map_err(
                        |e| match e {
                            LuError::SymbolicSingular { index } => Error::SingularSystem { pivot: index },
                            LuError::Generic(_) => Error::SingularSystem { pivot: 0 },
                        },
                    )?,
                )
            }
            (Symbolic::Ldlt(analysed), Factorization::SaddlePoint { constraint_block }) => {
                let (values, signs, shift) = shifted_saddle(&scaled, system, constraint_block);
                let mat = SparseColMat::new(sym(), values);
                let mut l_values = vec![0.0; analysed.len_val()];
                let mut mem = MemBuffer::new(analysed.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
                let regularization = LdltRegularization {
                    dynamic_regularization_signs: Some(&signs),
                    dynamic_regularization_delta: shift,
                    dynamic_regularization_epsilon: 1e-3 * shift,
                };
                analysed
                    .factorize_numeric_ldlt(
                        &mut l_values,
                        mat.as_ref(),
                        Side::Lower,
                        regularization,
                        Par::Seq,
                        MemStack::new(&mut mem),
                        Default::default(),
                    )
                    .map_err(|e| match e {
                        LdltError::ZeroPivot { index } => Error::SingularSystem { pivot: index },
                    })?;
                Numeric::Ldlt { symbolic: analysed, values: l_values }
            }
            (Symbolic::Ldlt(_), Factorization::Lu) => unreachable!("symbolic analysis follows the factorization kind"),
        };

        let (mut x, mut res) = refine(&numeric, &prep, &d);
        drop(numeric);
        if !(res <= SOLVE_TOLERANCE) && matches!(kind, Factorization::SaddlePoint { .. }) {
            // The shifted LDLᵀ can lose too much accuracy on badly scaled
            // matrices; a pivoted LU of the unshifted matrix is slower but
            // more robust.
            log::debug!("saddle-point LDLᵀ reached residual {res:e}; retrying with LU");
            let sym = SymbolicSparseColMat::new_checked(dim, dim, prep.col_ptr.clone(), None, prep.row_idx.clone());
            let lu = faer::sparse::linalg::solvers::SymbolicLu::try_new(sym.as_ref()).ok().and_then(|s| {
                let mat = SparseColMat::new(sym.clone(), scaled.values.clone());
                faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(s, mat.as_ref()).ok()
            });
            if let Some(lu) = lu {
                let (lx, lres) = refine(&Numeric::Lu(lu), &prep, &d);
                if lres < res {
                    (x, res) = (lx, lres);
                }
            }
        }
        log::trace!("direct solve: dim {dim}, relative residual {res:e}");
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { pivot: i });
        }
        if !(res <= SOLVE_TOLERANCE) {
            let omega = prep.backward_error(&x);
            log::debug!("direct solve: componentwise backward error {omega:e}");
            if !(omega <= BACKWARD_ERROR_FLOOR) {
                if !res.is_finite() || res > 1e-2 {
                    let pivot = x.iter().map(|v| v.abs()).enumerate().fold((0, 0.0), |a, (i, v)| if v > a.1 { (i, v) } else { a }).0;
                    return Err(Error::SingularSystem { pivot });
                }
                return Err(Error::ConvergenceFailure { residual: res });
            }
            // The normwise residual is above the contract only because the
            // right-hand side is tiny next to |A||x|; the solution is exact
            // to rounding for a componentwise perturbation of A and b.
            log::warn!("direct solve: relative residual {res:e} at rounding floor (backward error {omega:e}); accepted");
        }
        for &(dof, value) in &system.constraints {
            x[dof] = value;
        }
        if let Some(g) = &system.mean_zero {
            let mean = x[g.clone()].iter().sum::<f64>() / g.len() as f64;
            x[g.clone()].iter_mut().for_each(|v| *v -= mean);
        }
        Ok(x)
    }
}

const EQUILIBRATION_PASSES: usize = 8;

/// Symmetric Ruiz scaling `d` such that every row and column of `D A D` has
/// a largest entry close to one. Keeps symmetric matrices symmetric.
fn equilibrate(prep: &Prepared) -> Vec<f64> {
    let dim = prep.dim();
    let mut d = vec![1.0; dim];
    for _ in 0..EQUILIBRATION_PASSES {
        let mut m = vec![0.0f64; dim];
        for c in 0..dim {
            for k in prep.col_ptr[c]..prep.col_ptr[c + 1] {
                let r = prep.row_idx[k];
                let a = (d[r] * prep.values[k] * d[c]).abs();
                m[r] = m[r].max(a);
                m[c] = m[c].max(a);
            }
        }
        for (d, m) in d.iter_mut().zip(&m) {
            if *m > 0.0 && m.is_finite() {
                *d /= libm::sqrt(*m);
            }
        }
    }
    d
}

fn scale_values(prep: &Prepared, d: &[f64]) -> Prepared {
    let mut values = prep.values.clone();
    for c in 0..prep.dim() {
        for k in prep.col_ptr[c]..prep.col_ptr[c + 1] {
            values[k] *= d[prep.row_idx[k]] * d[c];
        }
    }
    Prepared {
        col_ptr: prep.col_ptr.clone(),
        row_idx: prep.row_idx.clone(),
        values,
        rhs: prep.rhs.iter().zip(d).map(|(b, d)| b * d).collect(),
    }
}

/// Values of the prepared saddle-point matrix with the free diagonal entries
/// of the constraint block shifted to `−shift`, the expected pivot signs, and
/// the shift itself.
fn shifted_saddle(prep: &Prepared, system: &SparseSystem, block: &Range<usize>) -> (Vec<f64>, Vec<i8>, f64) {
    let dim = prep.dim();
    let mut fixed = vec![false; dim];
    for &(dof, _) in &system.constraints {
        fixed[dof] = true;
    }
    if let Some(g) = &system.mean_zero {
        fixed[g.start] = true;
    }
    let mut max_diag = 0.0f64;
    for c in (0..dim).filter(|c| !block.contains(c) && !fixed[*c]) {
        for k in prep.col_ptr[c]..prep.col_ptr[c + 1] {
            if prep.row_idx[k] == c {
                max_diag = max_diag.max(prep.values[k].abs());
            }
        }
    }
    let shift = SADDLE_SHIFT * if max_diag > 0.0 { max_diag } else { 1.0 };
    let mut values = prep.values.clone();
    let mut signs = vec![1i8; dim];
    for c in block.clone().filter(|&c| c < dim && !fixed[c]) {
        signs[c] = -1;
        for k in prep.col_ptr[c]..prep.col_ptr[c + 1] {
            if prep.row_idx[k] == c {
                values[k] -= shift;
            }
        }
    }
    (values, signs, shift)
}
