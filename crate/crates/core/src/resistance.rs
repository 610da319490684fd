//! Effective resistance between homologous cycles, per-cell resistance
//! forms, and the randomized spectral sparsifier.
//!
//! Boundary operators are realized as inner-product adjoints of the
//! coboundaries, so the resistance of degree-k cycles runs through the
//! degree-k up-Laplacian `L = d* d` and its pseudoinverse.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hodge::{self, framed_coboundary, up_laplacian, BlockIndex, Cochain};
use crate::linalg;
use crate::sheaf::CellularSheaf;
use crate::spectral::Spectrum;

/// Default tolerance for cycle and homology membership checks.
pub const RESISTANCE_TOL: f64 = 1e-8;

/// The quadratic form of effective resistance over a single cell.
#[derive(Debug, Clone)]
pub struct ResistanceForm {
    pub cell: String,
    pub matrix: DMatrix<f64>,
}

impl ResistanceForm {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Checks that `x` is a degree-k cycle: the adjoint boundary `d_{k-1}* x`
/// vanishes to tolerance. Degree-0 cochains are always cycles.
fn require_cycle(sheaf: &CellularSheaf, x: &Cochain, name: &str, tol: f64) -> Result<DVector<f64>> {
    let framed = hodge::to_frame(sheaf, x)?;
    if x.degree > 0 {
        let down = framed_coboundary(sheaf, x.degree - 1)?;
        let residual = (down.matrix.transpose() * &framed).norm();
        if residual > tol * framed.norm().max(1.0) {
            return Err(Error::NotCycle(name.to_string(), residual));
        }
    }
    Ok(framed)
}

/// Effective resistance `<b-a, L+ (b-a)>` between homologous degree-k cycles,
/// cross-checked against the least-norm chain problem
/// `min |c|^2 s.t. d* c = b - a`.
pub fn effective_resistance(
    sheaf: &CellularSheaf,
    k: usize,
    a: &Cochain,
    b: &Cochain,
    tol: Option<f64>,
) -> Result<f64> {
    let tol = tol.unwrap_or(RESISTANCE_TOL);
    if a.degree != k || b.degree != k {
        return Err(Error::DegreeMismatch {
            got: a.degree.max(b.degree),
            expected: k,
        });
    }
    let fa = require_cycle(sheaf, a, "first cycle", tol)?;
    let fb = require_cycle(sheaf, b, "second cycle", tol)?;
    let diff = fb - fa;
    if diff.norm() == 0.0 {
        return Ok(0.0);
    }
    // Homology: b - a must lie in the image of the boundary d_k*.
    let delta = framed_coboundary(sheaf, k)?;
    let boundary = delta.matrix.transpose();
    let least_norm = linalg::least_norm_solve(&boundary, &diff, None);
    let residual = (&boundary * &least_norm - &diff).norm();
    if residual > tol * diff.norm() {
        return Err(Error::NotHomologous(residual));
    }
    let l = up_laplacian(sheaf, k)?;
    let via_pinv = diff.dot(&(linalg::pinv_psd(&l.matrix, None) * &diff));
    let via_chain = least_norm.norm_squared();
    // Two independent solvers must agree.
    let scale = via_pinv.abs().max(via_chain.abs()).max(1.0);
    debug_assert!(
        (via_pinv - via_chain).abs() <= 1e-6 * scale,
        "resistance solvers disagree: {via_pinv} vs {via_chain}"
    );
    Ok(via_pinv)
}

/// Least-norm chain route for the same quantity, exposed for cross-checks.
pub fn effective_resistance_least_norm(
    sheaf: &CellularSheaf,
    k: usize,
    a: &Cochain,
    b: &Cochain,
    tol: Option<f64>,
) -> Result<f64> {
    let tol = tol.unwrap_or(RESISTANCE_TOL);
    let fa = require_cycle(sheaf, a, "first cycle", tol)?;
    let fb = require_cycle(sheaf, b, "second cycle", tol)?;
    let diff = fb - fa;
    if diff.norm() == 0.0 {
        return Ok(0.0);
    }
    let delta = framed_coboundary(sheaf, k)?;
    let boundary = delta.matrix.transpose();
    let least_norm = linalg::least_norm_solve(&boundary, &diff, None);
    let residual = (&boundary * &least_norm - &diff).norm();
    if residual > tol * diff.norm() {
        return Err(Error::NotHomologous(residual));
    }
    Ok(least_norm.norm_squared())
}

/// Resistance forms of every cell of dimension `k + 1`, sharing one
/// coboundary assembly and one pseudoinverse.
pub fn resistance_forms(sheaf: &CellularSheaf, k: usize, tol: Option<f64>) -> Result<Vec<ResistanceForm>> {
    let delta = framed_coboundary(sheaf, k)?;
    let l = delta.matrix.transpose() * &delta.matrix;
    let pinv = linalg::pinv_psd(&l, tol);
    let rows = &delta.rows;
    let mut out = Vec::with_capacity(rows.len());
    for p in 0..rows.len() {
        // The block row of the coboundary belonging to this cell, transposed:
        // the boundary restricted to the cell's stalk.
        let block_row: DMatrix<f64> = delta
            .matrix
            .view((rows.offset(p), 0), (rows.size(p), delta.matrix.ncols()))
            .into();
        let q = &block_row * &pinv * block_row.transpose();
        out.push(ResistanceForm {
            cell: rows.cells()[p].clone(),
            matrix: linalg::symmetrize(&q),
        });
    }
    Ok(out)
}

/// The resistance form of a (k+1)-cell: `(d|_s)* L+ (d|_s)` as a quadratic
/// form on the cell's stalk.
pub fn cell_resistance(sheaf: &CellularSheaf, cell: &str, tol: Option<f64>) -> Result<ResistanceForm> {
    let i = sheaf.base().index_of(cell)?;
    let dim = sheaf.base().dim_of(i);
    if dim == 0 {
        return Err(Error::unmet(format!(
            "cell {cell} has dimension 0; resistance forms live on cells of positive dimension"
        )));
    }
    let k = dim - 1;
    let delta = framed_coboundary(sheaf, k)?;
    let rows = &delta.rows;
    let p = rows.position(cell)?;
    let block_row: DMatrix<f64> = delta
        .matrix
        .view((rows.offset(p), 0), (rows.size(p), delta.matrix.ncols()))
        .into();
    let l = up_laplacian(sheaf, k)?;
    let pinv = linalg::pinv_psd(&l.matrix, tol);
    let q = &block_row * pinv * block_row.transpose();
    Ok(ResistanceForm {
        cell: cell.to_string(),
        matrix: linalg::symmetrize(&q),
    })
}

/// Sum of resistance-form traces over all top-cells, and the dimension of
/// the codimension-1 cochain space. The sum never exceeds the dimension.
pub fn resistance_trace_sum(sheaf: &CellularSheaf) -> Result<(f64, usize)> {
    let d = sheaf
        .base()
        .top_dim()
        .ok_or_else(|| Error::unmet("empty complex"))?;
    if d == 0 {
        return Err(Error::unmet("complex has no cells of positive dimension"));
    }
    let n = sheaf.cochain_dim(d - 1);
    let sum = resistance_forms(sheaf, d - 1, None)?
        .iter()
        .map(|f| f.trace())
        .sum();
    Ok((sum, n))
}

/// Outcome of one sparsification run.
#[derive(Debug, Clone)]
pub struct SparsifyReport {
    pub seed: u64,
    pub epsilon: f64,
    /// Dimension `n` of the codimension-1 cochain space.
    pub n: usize,
    pub total_cells: usize,
    pub kept_cells: usize,
    /// Per-cell keep probabilities, in top-cell order.
    pub probabilities: Vec<f64>,
    /// Extreme eigenvalues of `L^{+/2} L' L^{+/2}` on the orthocomplement of
    /// the kernel of `L`.
    pub min_relative_eigenvalue: f64,
    pub max_relative_eigenvalue: f64,
    /// Whether the two-sided `(1 +/- eps)` guarantee held on this run.
    pub within_guarantee: bool,
}

/// Randomized spectral sparsifier: keeps each top-cell independently with
/// probability `min(1, 4 eps^-2 log(n) tr R(s))` and rescales kept cells'
/// restriction maps by `1/sqrt(p)`. Sampling uses a counter-based generator
/// (ChaCha8) with one stream per cell, so the outcome is reproducible from
/// the seed alone. The `(1 +/- eps)` bound holds with high probability, not
/// deterministically; the report flags violations rather than erroring.
pub fn sparsify(
    sheaf: &CellularSheaf,
    epsilon: f64,
    seed: u64,
) -> Result<(CellularSheaf, SparsifyReport)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let base = sheaf.base();
    let d = base
        .top_dim()
        .ok_or_else(|| Error::unmet("empty complex"))?;
    if d == 0 {
        return Err(Error::unmet("complex has no cells of positive dimension"));
    }
    let n = sheaf.cochain_dim(d - 1);
    if n < 2 {
        return Err(Error::unmet("codimension-1 cochain space must have dimension >= 2"));
    }
    let top_cells = base.cells_of_dim(d);
    let factor = 4.0 * epsilon.powi(-2) * (n as f64).ln();
    let forms = resistance_forms(sheaf, d - 1, None)?;
    let trace_of: HashMap<&str, f64> = forms
        .iter()
        .map(|f| (f.cell.as_str(), f.trace()))
        .collect();
    let mut probabilities = Vec::with_capacity(top_cells.len());
    for &i in &top_cells {
        let trace = trace_of[base.cell(i).id.as_str()];
        probabilities.push((factor * trace).min(1.0));
    }

    let mut keep: Vec<bool> = Vec::with_capacity(top_cells.len());
    for (c, &p) in probabilities.iter().enumerate() {
        if p >= 1.0 {
            keep.push(true);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        keep.push(rng.random::<f64>() < p);
    }

    // Deleted top-cells form an upward-closed set (they are maximal).
    let dropped: std::collections::HashSet<String> = top_cells
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| !k)
        .map(|(&i, _)| base.cell(i).id.clone())
        .collect();
    let mut sparse = crate::spectral::deleted_sheaf(sheaf, &dropped)?;
    for (c, &i) in top_cells.iter().enumerate() {
        if keep[c] && probabilities[c] < 1.0 {
            let id = base.cell(i).id.clone();
            let rescale = 1.0 / probabilities[c].sqrt();
            let ci = sparse.base().index_of(&id)?;
            let faces: Vec<usize> = sparse
                .base()
                .faces_of(ci)
                .iter()
                .map(|&(fi, _)| fi)
                .collect();
            for fi in faces {
                let face_id = sparse.base().cell(fi).id.clone();
                let scaled = sparse.restriction(fi, ci) * rescale;
                sparse = sparse.with_restriction(&face_id, &id, scaled)?;
            }
        }
    }

    let l = up_laplacian(sheaf, d - 1)?;
    let l_sparse = up_laplacian(&sparse, d - 1)?;
    let pinv_half = linalg::pinv_sqrt_psd(&l.matrix, None);
    let relative = &pinv_half * &l_sparse.matrix * &pinv_half;
    // Restrict to the orthocomplement of ker L.
    let spec = Spectrum {
        eigenvalues: {
            let (vals, _) = linalg::sorted_symmetric_eigen(&l.matrix);
            vals.iter().copied().collect()
        },
        zero_tol: 0.0,
    };
    let scale = spec.eigenvalues.last().copied().unwrap_or(0.0);
    let cut = linalg::default_zero_tol(l.matrix.nrows(), scale);
    let kernel_dim = spec.eigenvalues.iter().filter(|v| **v <= cut).count();
    let range_basis = {
        let (vals, vecs) = linalg::sorted_symmetric_eigen(&l.matrix);
        let dim = vals.len() - kernel_dim;
        let mut basis = DMatrix::zeros(vals.len(), dim);
        for j in 0..dim {
            basis.set_column(j, &vecs.column(kernel_dim + j));
        }
        basis
    };
    let restricted = range_basis.transpose() * relative * &range_basis;
    let (rel_vals, _) = linalg::sorted_symmetric_eigen(&restricted);
    let (min_rel, max_rel) = if rel_vals.is_empty() {
        (1.0, 1.0)
    } else {
        (rel_vals[0], rel_vals[rel_vals.len() - 1])
    };

    let kept_cells = keep.iter().filter(|k| **k).count();
    let report = SparsifyReport {
        seed,
        epsilon,
        n,
        total_cells: top_cells.len(),
        kept_cells,
        probabilities,
        min_relative_eigenvalue: min_rel,
        max_relative_eigenvalue: max_rel,
        within_guarantee: min_rel >= 1.0 - epsilon - RESISTANCE_TOL
            && max_rel <= 1.0 + epsilon + RESISTANCE_TOL,
    };
    Ok((sparse, report))
}

/// Unit 0-cycle supported on one vertex coordinate.
pub fn unit_vertex_cycle(sheaf: &CellularSheaf, vertex: &str, coordinate: usize) -> Result<Cochain> {
    let index = BlockIndex::for_degree(sheaf, 0);
    let p = index.position(vertex)?;
    if coordinate >= index.size(p) {
        return Err(Error::BlockLength {
            cell: vertex.to_string(),
            got: coordinate,
            expected: index.size(p),
        });
    }
    let mut x = hodge::zero_cochain(sheaf, 0);
    x.blocks[p][coordinate] = 1.0;
    Ok(x)
}
