//! Laplacian diffusion dynamics and approximations to the constant sheaf.
//!
//! The flow `x' = -D x` drives a cochain to the orthogonal projection of its
//! initial condition onto the harmonic space; the explicit-Euler discretized
//! version is what a distributed system would actually run. Approximations
//! to the constant sheaf replace edge stalks by quotients, trading per-edge
//! communication against the spectral gap.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::hodge::{self, Cochain};
use crate::linalg;
use crate::sheaf::{CellularSheaf, SheafMorphism};
use crate::spectral::{self, Spectrum};

/// A recipe for an approximation to the constant sheaf: a section space and
/// one subspace of it to quotient away per edge.
#[derive(Debug, Clone)]
pub struct ApproximationSpec {
    pub graph: CellComplex,
    pub section_dim: usize,
    /// Per-edge basis matrices (columns span the subspace to kill).
    pub subspaces: HashMap<String, DMatrix<f64>>,
}

impl ApproximationSpec {
    pub fn new(
        graph: CellComplex,
        section_dim: usize,
        subspaces: HashMap<String, DMatrix<f64>>,
    ) -> Result<Self> {
        if graph.top_dim().unwrap_or(0) > 1 {
            return Err(Error::NotGraph);
        }
        for ei in graph.cells_of_dim(1) {
            let id = &graph.cell(ei).id;
            let basis = subspaces
                .get(id)
                .ok_or_else(|| Error::UnknownCell(format!("no subspace for edge {id}")))?;
            if basis.nrows() != section_dim {
                return Err(Error::ShapeMismatch {
                    context: format!("subspace basis on {id}"),
                    rows: basis.nrows(),
                    cols: basis.ncols(),
                    expected_rows: section_dim,
                    expected_cols: basis.ncols(),
                });
            }
            if basis.ncols() > section_dim {
                return Err(Error::unmet(format!(
                    "subspace on {id} has more columns than the section dimension"
                )));
            }
            if linalg::rank(basis, None) != basis.ncols() {
                return Err(Error::unmet(format!(
                    "subspace basis on {id} has dependent columns"
                )));
            }
        }
        Ok(ApproximationSpec {
            graph,
            section_dim,
            subspaces,
        })
    }
}

/// Orthogonal projection of a cochain onto the harmonic space of degree k.
pub fn harmonic_projection(sheaf: &CellularSheaf, k: usize, x0: &Cochain) -> Result<Cochain> {
    let delta = hodge::hodge_laplacian(sheaf, k)?;
    let kernel = linalg::kernel_basis(&delta.matrix, None);
    let framed = hodge::to_frame(sheaf, x0)?;
    let projected = &kernel * (kernel.transpose() * framed);
    hodge::from_frame(sheaf, k, &projected)
}

/// One diffusion run: the trajectory, per-step Dirichlet energies, and the
/// distance of the final iterate from the harmonic projection of `x0`.
#[derive(Debug, Clone)]
pub struct DiffusionRun {
    pub trajectory: Vec<Cochain>,
    pub energies: Vec<f64>,
    pub projection_distance: f64,
}

/// Explicit-Euler diffusion `x_{t+1} = x_t - dt D x_t` for `steps` steps.
/// Requires `dt < 2 / lambda_max` for stability; energies `<x, Dx>` are
/// recorded at every step and decrease monotonically for stable steps.
pub fn diffuse(
    sheaf: &CellularSheaf,
    k: usize,
    x0: &Cochain,
    dt: f64,
    steps: usize,
) -> Result<DiffusionRun> {
    let delta = hodge::hodge_laplacian(sheaf, k)?;
    let lambda_max = linalg::lambda_max(&delta.matrix);
    if lambda_max > 0.0 && dt >= 2.0 / lambda_max {
        return Err(Error::UnstableTimestep {
            dt,
            limit: 2.0 / lambda_max,
        });
    }
    let mut framed = hodge::to_frame(sheaf, x0)?;
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    trajectory.push(x0.clone());
    energies.push(framed.dot(&(&delta.matrix * &framed)));
    for _ in 0..steps {
        framed -= dt * (&delta.matrix * &framed);
        trajectory.push(hodge::from_frame(sheaf, k, &framed)?);
        energies.push(framed.dot(&(&delta.matrix * &framed)));
    }
    let projection = hodge::to_frame(sheaf, &harmonic_projection(sheaf, k, x0)?)?;
    let projection_distance = (&framed - projection).norm();
    Ok(DiffusionRun {
        trajectory,
        energies,
        projection_distance,
    })
}

/// Result of building an approximation to the constant sheaf.
#[derive(Debug, Clone)]
pub struct Approximation {
    pub sheaf: CellularSheaf,
    /// The quotient morphism from the constant sheaf onto the approximation.
    pub morphism: SheafMorphism,
    /// Whether global sections match the section space: `dim H^0 = dim V`.
    pub is_valid: bool,
}

/// Builds the sheaf with vertex stalks `V`, edge stalks `V / K_e`, and both
/// restriction maps on each edge equal to the orthonormal-row quotient onto
/// the complement of `K_e`. Validity means no extra global sections.
pub fn approximate_constant_sheaf(spec: &ApproximationSpec) -> Result<Approximation> {
    let graph = &spec.graph;
    let dim_v = spec.section_dim;
    let mut stalk_dims: HashMap<String, usize> = graph
        .cells_of_dim(0)
        .into_iter()
        .map(|i| (graph.cell(i).id.clone(), dim_v))
        .collect();
    let mut restrictions: HashMap<(String, String), DMatrix<f64>> = HashMap::new();
    let mut components: HashMap<String, DMatrix<f64>> = graph
        .cells_of_dim(0)
        .into_iter()
        .map(|i| (graph.cell(i).id.clone(), DMatrix::identity(dim_v, dim_v)))
        .collect();
    for ei in graph.cells_of_dim(1) {
        let id = graph.cell(ei).id.clone();
        let basis = &spec.subspaces[&id];
        let quotient = orthonormal_complement_rows(basis, dim_v);
        stalk_dims.insert(id.clone(), quotient.nrows());
        components.insert(id.clone(), quotient.clone());
        for &(vi, _) in graph.faces_of(ei) {
            restrictions.insert((graph.cell(vi).id.clone(), id.clone()), quotient.clone());
        }
    }
    let sheaf = CellularSheaf::new(graph.clone(), &stalk_dims, &restrictions, &HashMap::new())?;
    let constant = CellularSheaf::constant(graph, dim_v, None)?;
    let morphism = SheafMorphism::new(constant, sheaf.clone(), &components)?;
    let is_valid = hodge::cohomology_dim(&sheaf, 0, None)? == dim_v;
    Ok(Approximation {
        sheaf,
        morphism,
        is_valid,
    })
}

/// Rows form an orthonormal basis of the orthogonal complement of the
/// column span of `basis` in `R^dim`.
fn orthonormal_complement_rows(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::identity(dim, dim);
    }
    linalg::nullspace(&basis.transpose(), None).transpose()
}

/// One offending cutset: its edges and the dimension of the intersection of
/// their subspaces.
#[derive(Debug, Clone)]
pub struct CutsetViolation {
    pub cutset: Vec<String>,
    pub intersection_dim: usize,
}

/// Report of the bounded cutset enumeration.
#[derive(Debug, Clone)]
pub struct CutsetReport {
    /// Side-size cap used for the bipartition enumeration.
    pub cap: usize,
    pub checked: usize,
    pub violations: Vec<CutsetViolation>,
    pub passes: bool,
}

/// Necessary condition for validity: every enumerated cutset must have
/// subspaces intersecting in zero. Enumerates all single-edge cutsets
/// (bridges) plus the crossing sets of connected vertex bipartitions whose
/// smaller side has at most `cap` vertices (default 4). Passing is necessary
/// but not sufficient.
pub fn check_cutset_condition(spec: &ApproximationSpec, cap: Option<usize>) -> Result<CutsetReport> {
    let graph = &spec.graph;
    if !graph.is_graph_connected(None) {
        return Err(Error::Disconnected);
    }
    let cap = cap.unwrap_or(4);
    let vertices = graph.cells_of_dim(0);
    let nv = vertices.len();
    let mut cutsets: Vec<Vec<String>> = Vec::new();

    // Single edges that disconnect the graph.
    for ei in graph.cells_of_dim(1) {
        let id = graph.cell(ei).id.clone();
        let dropped: HashSet<String> = [id.clone()].into_iter().collect();
        let remaining = graph.delete_upward_closed(&dropped)?;
        if !remaining.is_graph_connected(None) {
            cutsets.push(vec![id]);
        }
    }

    // Crossing sets of connected bipartitions with a small side.
    let vertex_pos: HashMap<usize, usize> =
        vertices.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let limit = cap.min(nv.saturating_sub(1));
    let mut subset = vec![0usize; limit];
    for size in 1..=limit {
        // Iterate over all vertex subsets of the given size.
        for (p, slot) in subset.iter_mut().enumerate().take(size) {
            *slot = p;
        }
        loop {
            let side: HashSet<usize> = subset[..size].iter().map(|&p| vertices[p]).collect();
            let complement: HashSet<usize> = vertices
                .iter()
                .copied()
                .filter(|i| !side.contains(i))
                .collect();
            if !complement.is_empty()
                && graph.is_graph_connected(Some(&side))
                && graph.is_graph_connected(Some(&complement))
            {
                let mut crossing = Vec::new();
                for ei in graph.cells_of_dim(1) {
                    let faces = graph.faces_of(ei);
                    let sides: Vec<bool> =
                        faces.iter().map(|&(vi, _)| side.contains(&vi)).collect();
                    if sides.iter().any(|s| *s) && sides.iter().any(|s| !*s) {
                        crossing.push(graph.cell(ei).id.clone());
                    }
                }
                if !crossing.is_empty() {
                    crossing.sort();
                    cutsets.push(crossing);
                }
            }
            // Next combination; stop after the last one was processed.
            let mut advanced = false;
            let mut p = size;
            while p > 0 {
                p -= 1;
                if subset[p] != p + nv - size {
                    subset[p] += 1;
                    for q in (p + 1)..size {
                        subset[q] = subset[q - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
            let _ = vertex_pos;
        }
    }
    cutsets.sort();
    cutsets.dedup();

    let mut violations = Vec::new();
    for cutset in &cutsets {
        // x lies in the intersection iff every quotient map kills it.
        let mut rows = 0;
        for id in cutset {
            let basis = &spec.subspaces[id];
            rows += spec.section_dim - basis.ncols();
        }
        let mut stacked = DMatrix::zeros(rows, spec.section_dim);
        let mut off = 0;
        for id in cutset {
            let quotient = orthonormal_complement_rows(&spec.subspaces[id], spec.section_dim);
            stacked
                .view_mut((off, 0), quotient.shape())
                .copy_from(&quotient);
            off += quotient.nrows();
        }
        let dim = linalg::nullspace(&stacked, None).ncols();
        if dim > 0 {
            violations.push(CutsetViolation {
                cutset: cutset.clone(),
                intersection_dim: dim,
            });
        }
    }
    Ok(CutsetReport {
        cap,
        checked: cutsets.len(),
        passes: violations.is_empty(),
        violations,
    })
}

/// Report of the spectral comparison between an approximation and the
/// constant sheaf it approximates.
#[derive(Debug, Clone)]
pub struct ApproximationBoundReport {
    /// Constant edge stalk dimension `k`.
    pub edge_dim: usize,
    pub section_dim: usize,
    pub lambda_sheaf: f64,
    pub lambda_constant: f64,
    pub lambda_sheaf_max: f64,
    pub lambda_constant_max: f64,
    /// `lambda_F <= (k / dim V) lambda_const`.
    pub lower_holds: bool,
    /// `lambda_F_max >= (k / dim V) lambda_const_max`.
    pub upper_holds: bool,
}

/// Checks the spectral comparison for a valid approximation with orthogonal
/// projection quotients and constant edge stalk dimension.
pub fn approximation_spectral_bound_check(
    approx: &Approximation,
) -> Result<ApproximationBoundReport> {
    if !approx.is_valid {
        return Err(Error::unmet(
            "approximation is not valid: extra global sections present",
        ));
    }
    let sheaf = &approx.sheaf;
    let graph = sheaf.base();
    let edges = graph.cells_of_dim(1);
    if edges.is_empty() {
        return Err(Error::unmet("graph has no edges"));
    }
    let edge_dim = sheaf.stalk_dim(edges[0]);
    for &e in &edges {
        if sheaf.stalk_dim(e) != edge_dim {
            return Err(Error::unmet("edge stalk dimensions are not constant"));
        }
        for &(vi, _) in graph.faces_of(e) {
            let r = sheaf.restriction(vi, e);
            let residual = linalg::orthogonality_residual(&r.transpose());
            if residual > 1e-8 {
                return Err(Error::NotOrthogonal {
                    context: format!("quotient map into {}", graph.cell(e).id),
                    residual,
                });
            }
        }
    }
    let section_dim = sheaf.stalk_dim(graph.cells_of_dim(0)[0]);
    let constant = CellularSheaf::constant(graph, section_dim, None)?;
    let spec_f = spectral::up_spectrum(sheaf, 0)?;
    let spec_c = spectral::up_spectrum(&constant, 0)?;
    let ratio = edge_dim as f64 / section_dim as f64;
    let lambda_sheaf = smallest_nontrivial(&spec_f);
    let lambda_constant = smallest_nontrivial(&spec_c);
    let tol = 1e-9 * spec_c.max().max(1.0);
    Ok(ApproximationBoundReport {
        edge_dim,
        section_dim,
        lambda_sheaf,
        lambda_constant,
        lambda_sheaf_max: spec_f.max(),
        lambda_constant_max: spec_c.max(),
        lower_holds: lambda_sheaf <= ratio * lambda_constant + tol,
        upper_holds: spec_f.max() >= ratio * spec_c.max() - tol,
    })
}

fn smallest_nontrivial(spec: &Spectrum) -> f64 {
    spec.smallest_nonzero().unwrap_or(0.0)
}

/// Applies the coboundary to the constant cochain `(w, ..., w)`; the result
/// is zero for every approximation to the constant sheaf.
pub fn constant_cochain_residual(sheaf: &CellularSheaf, w: &DVector<f64>) -> Result<f64> {
    let graph = sheaf.base();
    let mut blocks = HashMap::new();
    for i in graph.cells_of_dim(0) {
        blocks.insert(graph.cell(i).id.clone(), w.clone());
    }
    let x = hodge::cochain_from_blocks(sheaf, 0, &blocks)?;
    let delta = hodge::coboundary(sheaf, 0);
    Ok((delta.matrix * hodge::flatten(sheaf, &x)).norm())
}
