//! Coboundary operators, Hodge Laplacians, harmonic cochains, sheaf
//! normalization, and the factor-width-two test.
//!
//! Operators act degreewise on cochain spaces `C^k = (+)_{dim s = k} F(s)`.
//! With non-identity stalk inner products `M`, adjoints are taken with
//! respect to `M`; operators are reported in the orthonormalized frame
//! `M^{1/2} . M^{-1/2}`, so every returned matrix is plainly symmetric and
//! its eigenvalues are those of the `M`-self-adjoint operator. Cochain
//! arguments and results are always in raw stalk coordinates; the frame
//! change happens inside.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sheaf::CellularSheaf;

/// A degree-k block vector: one block per k-cell, in complex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub blocks: Vec<DVector<f64>>,
}

impl Cochain {
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Row/column block bookkeeping for a degree-k cochain space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockIndex {
    cells: Vec<String>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    lookup: HashMap<String, usize>,
    total: usize,
}

impl BlockIndex {
    pub fn for_degree(sheaf: &CellularSheaf, k: usize) -> Self {
        let cell_indices = sheaf.base().cells_of_dim(k);
        let mut cells = Vec::with_capacity(cell_indices.len());
        let mut offsets = Vec::with_capacity(cell_indices.len());
        let mut sizes = Vec::with_capacity(cell_indices.len());
        let mut lookup = HashMap::new();
        let mut total = 0;
        for &i in &cell_indices {
            let id = sheaf.base().cell(i).id.clone();
            lookup.insert(id.clone(), cells.len());
            cells.push(id);
            offsets.push(total);
            sizes.push(sheaf.stalk_dim(i));
            total += sheaf.stalk_dim(i);
        }
        BlockIndex {
            cells,
            offsets,
            sizes,
            lookup,
            total,
        }
    }

    /// Builds an index directly from `(cell id, block size)` pairs.
    pub fn from_parts(pairs: &[(String, usize)]) -> Self {
        let mut cells = Vec::with_capacity(pairs.len());
        let mut offsets = Vec::with_capacity(pairs.len());
        let mut sizes = Vec::with_capacity(pairs.len());
        let mut lookup = HashMap::new();
        let mut total = 0;
        for (id, size) in pairs {
            lookup.insert(id.clone(), cells.len());
            cells.push(id.clone());
            offsets.push(total);
            sizes.push(*size);
            total += size;
        }
        BlockIndex {
            cells,
            offsets,
            sizes,
            lookup,
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[String] {
        &self.cells
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownCell(id.to_string()))
    }

    pub fn offset(&self, pos: usize) -> usize {
        self.offsets[pos]
    }

    pub fn size(&self, pos: usize) -> usize {
        self.sizes[pos]
    }
}

/// A dense matrix with block index structure on rows and columns.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    pub matrix: DMatrix<f64>,
    pub rows: BlockIndex,
    pub cols: BlockIndex,
}

impl LinearOperator {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// The block submatrix addressed by a row cell and a column cell.
    pub fn block(&self, row_cell: &str, col_cell: &str) -> Result<DMatrix<f64>> {
        let r = self.rows.position(row_cell)?;
        let c = self.cols.position(col_cell)?;
        Ok(self
            .matrix
            .view(
                (self.rows.offset(r), self.cols.offset(c)),
                (self.rows.size(r), self.cols.size(c)),
            )
            .into())
    }

    /// Zeroes every off-diagonal block (square block structure assumed).
    pub fn block_diagonal(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        for p in 0..self.rows.len() {
            let (off, size) = (self.rows.offset(p), self.rows.size(p));
            d.view_mut((off, off), (size, size))
                .copy_from(&self.matrix.view((off, off), (size, size)));
        }
        d
    }
}

/// Which part of the Hodge Laplacian to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    Up,
    Down,
    Full,
}

/// Flattens a cochain into the concatenated coordinate vector.
pub fn flatten(sheaf: &CellularSheaf, x: &Cochain) -> DVector<f64> {
    let index = BlockIndex::for_degree(sheaf, x.degree);
    let mut v = DVector::zeros(index.total());
    for (p, b) in x.blocks.iter().enumerate() {
        v.rows_mut(index.offset(p), b.len()).copy_from(b);
    }
    v
}

/// Splits a concatenated vector back into per-cell blocks.
pub fn unflatten(sheaf: &CellularSheaf, k: usize, v: &DVector<f64>) -> Cochain {
    let index = BlockIndex::for_degree(sheaf, k);
    let blocks = (0..index.len())
        .map(|p| v.rows(index.offset(p), index.size(p)).into())
        .collect();
    Cochain { degree: k, blocks }
}

/// The all-zeros degree-k cochain.
pub fn zero_cochain(sheaf: &CellularSheaf, k: usize) -> Cochain {
    let index = BlockIndex::for_degree(sheaf, k);
    Cochain {
        degree: k,
        blocks: (0..index.len())
            .map(|p| DVector::zeros(index.size(p)))
            .collect(),
    }
}

/// Builds a degree-k cochain from named blocks; unnamed cells get zeros.
pub fn cochain_from_blocks(
    sheaf: &CellularSheaf,
    k: usize,
    blocks: &HashMap<String, DVector<f64>>,
) -> Result<Cochain> {
    let index = BlockIndex::for_degree(sheaf, k);
    let mut out = zero_cochain(sheaf, k);
    for (id, b) in blocks {
        let p = index.position(id)?;
        if b.len() != index.size(p) {
            return Err(Error::BlockLength {
                cell: id.clone(),
                got: b.len(),
                expected: index.size(p),
            });
        }
        out.blocks[p] = b.clone();
    }
    Ok(out)
}

/// The raw coboundary `d^k: C^k -> C^{k+1}` with block `(t,s) = [s:t] F_{s<t}`.
pub fn coboundary(sheaf: &CellularSheaf, k: usize) -> LinearOperator {
    let rows = BlockIndex::for_degree(sheaf, k + 1);
    let cols = BlockIndex::for_degree(sheaf, k);
    let mut matrix = DMatrix::zeros(rows.total(), cols.total());
    let base = sheaf.base();
    for (cp, col_id) in cols.cells().iter().enumerate() {
        let fi = base.index_of(col_id).expect("indexed cell");
        for &(ci, sign) in base.cofaces_of(fi) {
            let rp = rows.position(&base.cell(ci).id).expect("coface indexed");
            let block = sheaf.restriction(fi, ci) * sign as f64;
            matrix
                .view_mut((rows.offset(rp), cols.offset(cp)), block.shape())
                .copy_from(&block);
        }
    }
    LinearOperator { matrix, rows, cols }
}

/// Block-diagonal `M^{1/2}` and `M^{-1/2}` over degree-k stalks, or `None`
/// when every inner product in the degree is the identity.
fn frame(sheaf: &CellularSheaf, k: usize) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    let cells = sheaf.base().cells_of_dim(k);
    if cells
        .iter()
        .all(|&i| sheaf.inner_product(i).is_none())
    {
        return Ok(None);
    }
    let index = BlockIndex::for_degree(sheaf, k);
    let mut sqrt = DMatrix::zeros(index.total(), index.total());
    let mut inv = DMatrix::zeros(index.total(), index.total());
    for (p, &i) in cells.iter().enumerate() {
        let d = sheaf.stalk_dim(i);
        let (s, si) = match sheaf.inner_product(i) {
            None => (DMatrix::identity(d, d), DMatrix::identity(d, d)),
            Some(m) => linalg::spd_sqrt(m, 0.0)
                .ok_or_else(|| Error::NotSpd(sheaf.base().cell(i).id.clone()))?,
        };
        let off = index.offset(p);
        sqrt.view_mut((off, off), (d, d)).copy_from(&s);
        inv.view_mut((off, off), (d, d)).copy_from(&si);
    }
    Ok(Some((sqrt, inv)))
}

/// Coboundary in orthonormalized frames: `M_{k+1}^{1/2} d^k M_k^{-1/2}`.
pub fn framed_coboundary(sheaf: &CellularSheaf, k: usize) -> Result<LinearOperator> {
    let mut delta = coboundary(sheaf, k);
    if let Some((up_sqrt, _)) = frame(sheaf, k + 1)? {
        delta.matrix = up_sqrt * delta.matrix;
    }
    if let Some((_, low_inv)) = frame(sheaf, k)? {
        delta.matrix *= low_inv;
    }
    Ok(delta)
}

/// Converts a cochain to orthonormalized frame coordinates.
pub fn to_frame(sheaf: &CellularSheaf, x: &Cochain) -> Result<DVector<f64>> {
    let v = flatten(sheaf, x);
    Ok(match frame(sheaf, x.degree)? {
        Some((sqrt, _)) => sqrt * v,
        None => v,
    })
}

/// Converts orthonormalized frame coordinates back to a cochain.
pub fn from_frame(sheaf: &CellularSheaf, k: usize, v: &DVector<f64>) -> Result<Cochain> {
    let raw = match frame(sheaf, k)? {
        Some((_, inv)) => inv * v,
        None => v.clone(),
    };
    Ok(unflatten(sheaf, k, &raw))
}

/// Inner product `<x, y>` of two degree-k cochains under the stalk weights.
pub fn cochain_inner(sheaf: &CellularSheaf, x: &Cochain, y: &Cochain) -> Result<f64> {
    Ok(to_frame(sheaf, x)?.dot(&to_frame(sheaf, y)?))
}

/// The degree-k up-, down-, or full Hodge Laplacian in the orthonormalized
/// frame; always symmetric positive semidefinite.
pub fn laplacian(sheaf: &CellularSheaf, k: usize, kind: LaplacianKind) -> Result<LinearOperator> {
    let index = BlockIndex::for_degree(sheaf, k);
    let n = index.total();
    let mut matrix = DMatrix::zeros(n, n);
    if matches!(kind, LaplacianKind::Up | LaplacianKind::Full) {
        let up = framed_coboundary(sheaf, k)?;
        matrix += up.matrix.transpose() * &up.matrix;
    }
    if matches!(kind, LaplacianKind::Down | LaplacianKind::Full) && k > 0 {
        let down = framed_coboundary(sheaf, k - 1)?;
        matrix += &down.matrix * down.matrix.transpose();
    }
    Ok(LinearOperator {
        matrix,
        rows: index.clone(),
        cols: index,
    })
}

pub fn up_laplacian(sheaf: &CellularSheaf, k: usize) -> Result<LinearOperator> {
    laplacian(sheaf, k, LaplacianKind::Up)
}

pub fn down_laplacian(sheaf: &CellularSheaf, k: usize) -> Result<LinearOperator> {
    laplacian(sheaf, k, LaplacianKind::Down)
}

pub fn hodge_laplacian(sheaf: &CellularSheaf, k: usize) -> Result<LinearOperator> {
    laplacian(sheaf, k, LaplacianKind::Full)
}

/// Orthonormal (under the stalk inner products) basis of `ker D^k`, the
/// harmonic k-cochains. The basis dimension is `dim H^k`.
pub fn harmonic_cochains(
    sheaf: &CellularSheaf,
    k: usize,
    tol: Option<f64>,
) -> Result<Vec<Cochain>> {
    let delta = hodge_laplacian(sheaf, k)?;
    let basis = linalg::kernel_basis(&delta.matrix, tol);
    (0..basis.ncols())
        .map(|j| from_frame(sheaf, k, &basis.column(j).into()))
        .collect()
}

/// `dim H^k`, the dimension of degree-k sheaf cohomology.
pub fn cohomology_dim(sheaf: &CellularSheaf, k: usize, tol: Option<f64>) -> Result<usize> {
    let delta = hodge_laplacian(sheaf, k)?;
    Ok(linalg::kernel_basis(&delta.matrix, tol).ncols())
}

/// `dim H^k(X, A)`: cohomology of the cochains vanishing on the subcomplex
/// `A`, computed as the Hodge kernel of the coboundaries restricted to cells
/// outside `A`.
pub fn relative_cohomology_dim(
    sheaf: &CellularSheaf,
    subcomplex: &HashSet<String>,
    k: usize,
    tol: Option<f64>,
) -> Result<usize> {
    let base = sheaf.base();
    for id in subcomplex {
        base.index_of(id)?;
    }
    if !base.is_subcomplex(subcomplex)? {
        let offender = subcomplex
            .iter()
            .find(|id| {
                let i = base.index_of(id).unwrap();
                base.faces_of(i)
                    .iter()
                    .any(|&(fi, _)| !subcomplex.contains(&base.cell(fi).id))
            })
            .unwrap();
        let i = base.index_of(offender)?;
        let face = base
            .faces_of(i)
            .iter()
            .find(|&&(fi, _)| !subcomplex.contains(&base.cell(fi).id))
            .map(|&(fi, _)| base.cell(fi).id.clone())
            .unwrap();
        return Err(Error::NotSubcomplex {
            member: offender.clone(),
            face,
        });
    }
    let keep = |index: &BlockIndex| -> Vec<usize> {
        let mut cols = Vec::new();
        for p in 0..index.len() {
            if !subcomplex.contains(&index.cells()[p]) {
                for j in 0..index.size(p) {
                    cols.push(index.offset(p) + j);
                }
            }
        }
        cols
    };
    let restrict = |op: &LinearOperator| -> DMatrix<f64> {
        let rows = keep(&op.rows);
        let cols = keep(&op.cols);
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (r, &ri) in rows.iter().enumerate() {
            for (c, &ci) in cols.iter().enumerate() {
                m[(r, c)] = op.matrix[(ri, ci)];
            }
        }
        m
    };
    let up = restrict(&framed_coboundary(sheaf, k)?);
    let mut delta = up.transpose() * &up;
    if k > 0 {
        let down = restrict(&framed_coboundary(sheaf, k - 1)?);
        delta += &down * down.transpose();
    }
    Ok(linalg::kernel_basis(&delta, tol).ncols())
}

/// Residual of the normalization condition at every cell: the operator norm
/// of `D^T M_up D - M` on the orthogonal complement of `ker D` per stalk.
pub fn normalization_residual(sheaf: &CellularSheaf) -> Result<f64> {
    let base = sheaf.base();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        if base.cofaces_of(i).is_empty() {
            continue;
        }
        let (stacked, m_up) = stalk_coboundary(sheaf, i)?;
        let m = sheaf
            .inner_product(i)
            .cloned()
            .unwrap_or_else(|| DMatrix::identity(sheaf.stalk_dim(i), sheaf.stalk_dim(i)));
        let kernel = linalg::nullspace(&stacked, None);
        // Basis of the M-orthocomplement of the kernel.
        let q = m_orthocomplement(&kernel, &m);
        if q.ncols() == 0 {
            continue;
        }
        let form = q.transpose() * (stacked.transpose() * &m_up * &stacked - &m) * &q;
        worst = worst.max(linalg::operator_norm(&form));
    }
    Ok(worst)
}

/// The per-stalk coboundary column `F(s) -> (+)_t F(t)` over the cofaces of
/// cell `i`, together with the block-diagonal inner product on the target.
fn stalk_coboundary(sheaf: &CellularSheaf, i: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let base = sheaf.base();
    let cofaces = base.cofaces_of(i);
    let rows: usize = cofaces.iter().map(|&(c, _)| sheaf.stalk_dim(c)).sum();
    let cols = sheaf.stalk_dim(i);
    let mut stacked = DMatrix::zeros(rows, cols);
    let mut m_up = DMatrix::zeros(rows, rows);
    let mut off = 0;
    for &(ci, sign) in cofaces {
        let block = sheaf.restriction(i, ci) * sign as f64;
        stacked.view_mut((off, 0), block.shape()).copy_from(&block);
        let d = sheaf.stalk_dim(ci);
        let ip = sheaf
            .inner_product(ci)
            .cloned()
            .unwrap_or_else(|| DMatrix::identity(d, d));
        m_up.view_mut((off, off), (d, d)).copy_from(&ip);
        off += d;
    }
    Ok((stacked, m_up))
}

/// Columns spanning the M-orthogonal complement of `span(kernel)`.
fn m_orthocomplement(kernel: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if kernel.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    // x is M-orthogonal to the kernel iff K^T M x = 0.
    linalg::nullspace(&(kernel.transpose() * m), None)
}

/// Reweights the sheaf so that every coboundary is an isometry off its
/// kernel, stalk by stalk. Inner products are rebuilt top-down: at each cell,
/// `<x,y>' = <D(I-P)x, D(I-P)y> + <Px, Py>` with `P` the orthogonal
/// projection onto the stalkwise kernel of the coboundary.
pub fn normalize_sheaf(sheaf: &CellularSheaf) -> Result<CellularSheaf> {
    let base = sheaf.base();
    let top = match base.top_dim() {
        Some(t) => t,
        None => return Ok(sheaf.clone()),
    };
    let mut current = sheaf.clone();
    for d in (0..top).rev() {
        let mut ips: Vec<Option<DMatrix<f64>>> = (0..base.len())
            .map(|i| current.inner_product(i).cloned())
            .collect();
        for i in base.cells_of_dim(d) {
            let dim = current.stalk_dim(i);
            if dim == 0 {
                continue;
            }
            let m_old = current
                .inner_product(i)
                .cloned()
                .unwrap_or_else(|| DMatrix::identity(dim, dim));
            if base.cofaces_of(i).is_empty() {
                continue;
            }
            let (stacked, m_up) = stalk_coboundary(&current, i)?;
            let kernel = linalg::nullspace(&stacked, None);
            let projector = if kernel.ncols() == 0 {
                DMatrix::zeros(dim, dim)
            } else {
                // M_old-orthogonal projection onto the kernel.
                let gram = kernel.transpose() * &m_old * &kernel;
                let gram_inv = linalg::pinv_psd(&gram, None);
                &kernel * gram_inv * kernel.transpose() * &m_old
            };
            let q = DMatrix::identity(dim, dim) - &projector;
            let dq = &stacked * &q;
            let m_new = linalg::symmetrize(
                &(dq.transpose() * &m_up * dq + projector.transpose() * &m_old * &projector),
            );
            ips[i] = Some(m_new);
        }
        current = current.with_inner_products(ips);
    }
    Ok(current)
}

/// Degree-0 normalized Laplacian `D^{+/2} L D^{+/2}` of a graph sheaf, with
/// `D` the block diagonal of the up-Laplacian.
pub fn normalized_laplacian(sheaf: &CellularSheaf, tol: Option<f64>) -> Result<LinearOperator> {
    if sheaf.base().top_dim().unwrap_or(0) > 1 {
        return Err(Error::NotGraph);
    }
    let l = up_laplacian(sheaf, 0)?;
    let d = l.block_diagonal();
    let d_half = linalg::pinv_sqrt_psd(&d, tol);
    Ok(LinearOperator {
        matrix: &d_half * &l.matrix * &d_half,
        rows: l.rows,
        cols: l.cols,
    })
}

/// Why a factor-width-two test failed.
#[derive(Debug, Clone)]
pub enum FactorWidthObstruction {
    NotSymmetric { residual: f64 },
    NotPsd { lambda_min: f64 },
    NotScalable { rho: f64 },
}

/// Outcome of [`is_factor_width_two`]: either a positive diagonal scaling
/// that certifies generalized diagonal dominance, or an obstruction.
#[derive(Debug, Clone)]
pub struct FactorWidthReport {
    pub width_two: bool,
    pub scaling: Option<DVector<f64>>,
    pub obstruction: Option<FactorWidthObstruction>,
    /// Worst row violation of weak diagonal dominance after scaling.
    pub dominance_margin: f64,
}

/// Tests whether a symmetric matrix has factor width at most two, i.e. is
/// PSD and generalized weakly diagonally dominant: there is a positive
/// diagonal `D` making `D L D` weakly diagonally dominant.
///
/// The scaling comes from the Perron eigenvector of the scaled off-diagonal
/// magnitude matrix, component by component of its support graph; dominance
/// holds exactly when its spectral radius is at most one.
pub fn is_factor_width_two(l: &DMatrix<f64>, tol: f64) -> FactorWidthReport {
    let n = l.nrows();
    let fail = |obstruction| FactorWidthReport {
        width_two: false,
        scaling: None,
        obstruction: Some(obstruction),
        dominance_margin: f64::INFINITY,
    };
    let sym = linalg::symmetry_residual(l);
    if sym > tol {
        return fail(FactorWidthObstruction::NotSymmetric { residual: sym });
    }
    if n == 0 {
        return FactorWidthReport {
            width_two: true,
            scaling: Some(DVector::zeros(0)),
            obstruction: None,
            dominance_margin: 0.0,
        };
    }
    let scale = l.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let (vals, _) = linalg::sorted_symmetric_eigen(l);
    if vals[0] < -tol * scale {
        return fail(FactorWidthObstruction::NotPsd { lambda_min: vals[0] });
    }
    // Zero-diagonal rows of a PSD matrix are entirely zero; give them d = 1.
    let support: Vec<usize> = (0..n).filter(|&i| l[(i, i)] > tol * scale).collect();
    let mut d = DVector::from_element(n, 1.0);
    if !support.is_empty() {
        let m = support.len();
        let mut s = DMatrix::zeros(m, m);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                if i != j {
                    s[(a, b)] = l[(i, j)].abs() / (l[(i, i)] * l[(j, j)]).sqrt();
                }
            }
        }
        // Connected components of the off-diagonal support graph; the Perron
        // vector is strictly positive on each component.
        let mut comp = vec![usize::MAX; m];
        let mut n_comp = 0;
        for start in 0..m {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            while let Some(a) = stack.pop() {
                if comp[a] != usize::MAX {
                    continue;
                }
                comp[a] = n_comp;
                for b in 0..m {
                    if s[(a, b)] != 0.0 && comp[b] == usize::MAX {
                        stack.push(b);
                    }
                }
            }
            n_comp += 1;
        }
        let mut rho_max = 0.0f64;
        for c in 0..n_comp {
            let members: Vec<usize> = (0..m).filter(|&a| comp[a] == c).collect();
            if members.len() == 1 {
                continue;
            }
            let mut sub = DMatrix::zeros(members.len(), members.len());
            for (a, &i) in members.iter().enumerate() {
                for (b, &j) in members.iter().enumerate() {
                    sub[(a, b)] = s[(i, j)];
                }
            }
            let (svals, svecs) = linalg::sorted_symmetric_eigen(&sub);
            let rho = svals[svals.len() - 1];
            rho_max = rho_max.max(rho);
            let perron = svecs.column(svals.len() - 1);
            let mut w = DVector::from_iterator(members.len(), perron.iter().map(|v| v.abs()));
            let wmax = w.iter().fold(0.0f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
            w /= wmax;
            for (a, &i) in members.iter().enumerate() {
                d[support[i]] = w[a].max(f64::MIN_POSITIVE) / l[(support[i], support[i])].sqrt();
            }
        }
        if rho_max > 1.0 + tol {
            return fail(FactorWidthObstruction::NotScalable { rho: rho_max });
        }
    }
    // Verify the certificate: worst violation of row dominance of D L D.
    let mut margin = 0.0f64;
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if j != i {
                row_sum += d[i] * l[(i, j)].abs() * d[j];
            }
        }
        margin = margin.max(row_sum - d[i] * d[i] * l[(i, i)]);
    }
    if margin > tol * scale {
        return fail(FactorWidthObstruction::NotScalable { rho: f64::NAN });
    }
    FactorWidthReport {
        width_two: true,
        scaling: Some(d),
        obstruction: None,
        dominance_margin: margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::CellComplex;
    use approx::assert_relative_eq;

    fn p2_const() -> CellularSheaf {
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        CellularSheaf::constant(&x, 1, None).unwrap()
    }

    fn k3_const() -> CellularSheaf {
        let x = CellComplex::build_graph(
            &["v1", "v2", "v3"],
            &[("e1", "v1", "v2"), ("e2", "v2", "v3"), ("e3", "v1", "v3")],
        )
        .unwrap();
        CellularSheaf::constant(&x, 1, None).unwrap()
    }

    fn triangle_const() -> CellularSheaf {
        let x = CellComplex::build_simplicial(&[vec!["a", "b", "c"]]).unwrap();
        CellularSheaf::constant(&x, 1, None).unwrap()
    }

    #[test]
    fn coboundary_of_p2() {
        let f = p2_const();
        let d = coboundary(&f, 0);
        assert_eq!(d.matrix, DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]));
    }

    #[test]
    fn k3_coboundary_degrees() {
        let f = k3_const();
        let d = coboundary(&f, 0);
        let l = d.matrix.transpose() * &d.matrix;
        for i in 0..3 {
            assert_relative_eq!(l[(i, i)], 2.0);
        }
    }

    #[test]
    fn coboundary_squares_to_zero() {
        let f = triangle_const();
        let d0 = coboundary(&f, 0);
        let d1 = coboundary(&f, 1);
        assert_relative_eq!((&d1.matrix * &d0.matrix).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn p2_laplacian() {
        let f = p2_const();
        let l = up_laplacian(&f, 0).unwrap();
        assert_relative_eq!(
            (l.matrix - DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn partial_isometry_pair_blocks() {
        // Two plane stalks mapped to a line: [1 0] and [1/2, sqrt(3)/2].
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let s3 = 3.0f64.sqrt();
        let stalk_dims = HashMap::from([
            ("v1".to_string(), 2),
            ("v2".to_string(), 2),
            ("e".to_string(), 1),
        ]);
        let restrictions = HashMap::from([
            (
                ("v1".to_string(), "e".to_string()),
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            ),
            (
                ("v2".to_string(), "e".to_string()),
                DMatrix::from_row_slice(1, 2, &[0.5, s3 / 2.0]),
            ),
        ]);
        let f = CellularSheaf::new(x, &stalk_dims, &restrictions, &HashMap::new()).unwrap();
        let l = up_laplacian(&f, 0).unwrap();
        let d11 = l.block("v1", "v1").unwrap();
        let d22 = l.block("v2", "v2").unwrap();
        let off = l.block("v1", "v2").unwrap();
        assert_relative_eq!(
            (d11 - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            (d22 - DMatrix::from_row_slice(2, 2, &[0.25, s3 / 4.0, s3 / 4.0, 0.75])).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            (off - DMatrix::from_row_slice(2, 2, &[-0.5, -s3 / 2.0, 0.0, 0.0])).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn two_nonisomorphic_sheaves_same_laplacian() {
        let target = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);

        // One edge plus a dangling edge at each vertex.
        let x = CellComplex::from_cells(
            vec![
                ("v1".into(), 0),
                ("v2".into(), 0),
                ("e".into(), 1),
                ("d1".into(), 1),
                ("d2".into(), 1),
            ],
            vec![
                ("v1".into(), "e".into(), -1),
                ("v2".into(), "e".into(), 1),
                ("v1".into(), "d1".into(), 1),
                ("v2".into(), "d2".into(), 1),
            ],
        )
        .unwrap();
        let stalk_dims = HashMap::from([
            ("v1".to_string(), 1),
            ("v2".to_string(), 1),
            ("e".to_string(), 1),
            ("d1".to_string(), 1),
            ("d2".to_string(), 1),
        ]);
        let one = DMatrix::from_element(1, 1, 1.0);
        let restrictions = HashMap::from([
            (("v1".to_string(), "e".to_string()), one.clone()),
            (("v2".to_string(), "e".to_string()), one.clone()),
            (("v1".to_string(), "d1".to_string()), one.clone()),
            (("v2".to_string(), "d2".to_string()), one.clone()),
        ]);
        let a = CellularSheaf::new(x, &stalk_dims, &restrictions, &HashMap::new()).unwrap();

        // A single edge with a two-dimensional edge stalk.
        let y = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let dims_b = HashMap::from([
            ("v1".to_string(), 1),
            ("v2".to_string(), 1),
            ("e".to_string(), 2),
        ]);
        let r2 = 2.0f64.sqrt();
        let restr_b = HashMap::from([
            (
                ("v1".to_string(), "e".to_string()),
                DMatrix::from_column_slice(2, 1, &[r2, 0.0]),
            ),
            (
                ("v2".to_string(), "e".to_string()),
                DMatrix::from_column_slice(2, 1, &[1.0 / r2, (1.5f64).sqrt()]),
            ),
        ]);
        let b = CellularSheaf::new(y, &dims_b, &restr_b, &HashMap::new()).unwrap();

        for f in [&a, &b] {
            let l = up_laplacian(f, 0).unwrap();
            assert_relative_eq!((&l.matrix - &target).norm(), 0.0, epsilon = 1e-12);
        }
        assert_ne!(a.cochain_dim(1), b.cochain_dim(1));
    }

    #[test]
    fn weighted_inner_products_change_adjoints() {
        // One edge with stalk weights 4, 1, 9 and maps [1], [2]. The
        // M-adjoint Laplacian is diag(1/4, 1) * dT * 9 * d with spectrum
        // {0, 153/4}; in the orthonormal frame the matrix is
        // [[9/4, -9], [-9, 36]].
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let stalk_dims = HashMap::from([
            ("v1".to_string(), 1),
            ("v2".to_string(), 1),
            ("e".to_string(), 1),
        ]);
        let restrictions = HashMap::from([
            (("v1".to_string(), "e".to_string()), DMatrix::from_element(1, 1, 1.0)),
            (("v2".to_string(), "e".to_string()), DMatrix::from_element(1, 1, 2.0)),
        ]);
        let inner_products = HashMap::from([
            ("v1".to_string(), DMatrix::from_element(1, 1, 4.0)),
            ("v2".to_string(), DMatrix::from_element(1, 1, 1.0)),
            ("e".to_string(), DMatrix::from_element(1, 1, 9.0)),
        ]);
        let f = CellularSheaf::new(x, &stalk_dims, &restrictions, &inner_products).unwrap();
        let l = up_laplacian(&f, 0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.25, -9.0, -9.0, 36.0]);
        assert_relative_eq!((l.block("v1", "v1").unwrap()[(0, 0)]), 2.25, epsilon = 1e-12);
        assert_relative_eq!((&l.matrix - expected).norm(), 0.0, epsilon = 1e-12);
        let (vals, _) = linalg::sorted_symmetric_eigen(&l.matrix);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 38.25, epsilon = 1e-12);

        // The harmonic section (2, 1) scaled to unit M-norm 1/sqrt(17).
        let basis = harmonic_cochains(&f, 0, None).unwrap();
        assert_eq!(basis.len(), 1);
        let h = &basis[0];
        let ratio = h.blocks[0][0] / h.blocks[1][0];
        assert_relative_eq!(ratio, 2.0, epsilon = 1e-10);
        assert_relative_eq!(cochain_inner(&f, h, h).unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(h.blocks[1][0].abs(), 1.0 / 17.0f64.sqrt(), epsilon = 1e-10);

        // Weighted inner products of raw cochains.
        let a = cochain_from_blocks(
            &f,
            0,
            &HashMap::from([("v1".to_string(), DVector::from_element(1, 1.0))]),
        )
        .unwrap();
        let b = cochain_from_blocks(
            &f,
            0,
            &HashMap::from([
                ("v1".to_string(), DVector::from_element(1, 1.0)),
                ("v2".to_string(), DVector::from_element(1, 1.0)),
            ]),
        )
        .unwrap();
        assert_relative_eq!(cochain_inner(&f, &a, &b).unwrap(), 4.0, epsilon = 1e-12);

        // The normalized Laplacian still hits the classical P2 spectrum.
        let norm = normalized_laplacian(&f, None).unwrap();
        let (nvals, _) = linalg::sorted_symmetric_eigen(&norm.matrix);
        assert_relative_eq!(nvals[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(nvals[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_space_of_connected_graph() {
        let f = k3_const();
        let basis = harmonic_cochains(&f, 0, None).unwrap();
        assert_eq!(basis.len(), 1);
        let b = &basis[0];
        let val = b.blocks[0][0];
        for block in &b.blocks {
            assert_relative_eq!(block[0], val, epsilon = 1e-10);
        }
        assert_relative_eq!(flatten(&f, b).norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn hollow_triangle_has_h1() {
        let f = k3_const();
        assert_eq!(cohomology_dim(&f, 1, None).unwrap(), 1);
        // The filled triangle kills it.
        let t = triangle_const();
        assert_eq!(cohomology_dim(&t, 1, None).unwrap(), 0);
    }

    #[test]
    fn relative_cohomology_cases() {
        let x = CellComplex::build_graph(
            &["v1", "v2", "v3"],
            &[("e1", "v1", "v2"), ("e2", "v2", "v3")],
        )
        .unwrap();
        let f = CellularSheaf::constant(&x, 1, None).unwrap();
        let everything: HashSet<String> =
            x.cells().iter().map(|c| c.id.clone()).collect();
        for k in 0..2 {
            assert_eq!(relative_cohomology_dim(&f, &everything, k, None).unwrap(), 0);
        }
        let ends: HashSet<String> = ["v1", "v3"].iter().map(|s| s.to_string()).collect();
        assert_eq!(relative_cohomology_dim(&f, &ends, 0, None).unwrap(), 0);
        let empty = HashSet::new();
        assert_eq!(
            relative_cohomology_dim(&f, &empty, 0, None).unwrap(),
            cohomology_dim(&f, 0, None).unwrap()
        );
        // A vertex set missing a face of a member edge is not a subcomplex.
        let bad: HashSet<String> = ["e1"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            relative_cohomology_dim(&f, &bad, 0, None),
            Err(Error::NotSubcomplex { .. })
        ));
    }

    #[test]
    fn normalize_constant_graph_sheaf_matches_degree_scaling() {
        let f = k3_const();
        let n = normalize_sheaf(&f).unwrap();
        let l = up_laplacian(&n, 0).unwrap();
        // D^{-1/2} L D^{-1/2} for K3.
        let raw = up_laplacian(&f, 0).unwrap();
        let d_half = linalg::pinv_sqrt_psd(&raw.block_diagonal(), None);
        let expected = &d_half * &raw.matrix * &d_half;
        assert_relative_eq!((l.matrix - expected).norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!(normalization_residual(&n).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn normalized_k3_spectrum() {
        let f = k3_const();
        let l = normalized_laplacian(&f, None).unwrap();
        let (vals, _) = linalg::sorted_symmetric_eigen(&l.matrix);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(vals[1], 1.5, epsilon = 1e-10);
        assert_relative_eq!(vals[2], 1.5, epsilon = 1e-10);
    }

    #[test]
    fn p2_normalized_hits_upper_bound() {
        let f = p2_const();
        let l = normalized_laplacian(&f, None).unwrap();
        let (vals, _) = linalg::sorted_symmetric_eigen(&l.matrix);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let scales = HashMap::from([("e1".to_string(), 3.0), ("e2".to_string(), 0.25)]);
        let f = CellularSheaf::constant(k3_const().base(), 2, Some(&scales)).unwrap();
        let once = normalize_sheaf(&f).unwrap();
        let twice = normalize_sheaf(&once).unwrap();
        for i in 0..once.base().len() {
            let a = once
                .inner_product(i)
                .cloned()
                .unwrap_or_else(|| DMatrix::identity(once.stalk_dim(i), once.stalk_dim(i)));
            let b = twice
                .inner_product(i)
                .cloned()
                .unwrap_or_else(|| DMatrix::identity(twice.stalk_dim(i), twice.stalk_dim(i)));
            assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn factor_width_two_cases() {
        let k3 = up_laplacian(&k3_const(), 0).unwrap().matrix;
        let report = is_factor_width_two(&k3, 1e-9);
        assert!(report.width_two);
        let d = report.scaling.unwrap();
        for i in 0..3 {
            assert_relative_eq!(d[i], d[0], epsilon = 1e-9);
        }

        let small = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        assert!(is_factor_width_two(&small, 1e-9).width_two);

        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let report = is_factor_width_two(&indefinite, 1e-9);
        assert!(!report.width_two);
        assert!(matches!(
            report.obstruction,
            Some(FactorWidthObstruction::NotPsd { .. })
        ));

        // GDD but badly scaled: the certificate must still be found.
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 100.0, 100.0, 20000.0]);
        assert!(is_factor_width_two(&skew, 1e-9).width_two);
    }

    #[test]
    fn zero_sheaf_is_empty_everywhere() {
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let f = CellularSheaf::constant(&x, 0, None).unwrap();
        assert_eq!(up_laplacian(&f, 0).unwrap().matrix.nrows(), 0);
        assert_eq!(harmonic_cochains(&f, 0, None).unwrap().len(), 0);
    }

    #[test]
    fn cochain_block_roundtrip() {
        let f = k3_const();
        let blocks = HashMap::from([
            ("v1".to_string(), DVector::from_element(1, 2.0)),
            ("v3".to_string(), DVector::from_element(1, -1.0)),
        ]);
        let x = cochain_from_blocks(&f, 0, &blocks).unwrap();
        let v = flatten(&f, &x);
        let back = unflatten(&f, 0, &v);
        assert_eq!(x, back);
        assert!(matches!(
            cochain_from_blocks(
                &f,
                0,
                &HashMap::from([("v1".to_string(), DVector::zeros(3))])
            ),
            Err(Error::BlockLength { .. })
        ));
    }
}
