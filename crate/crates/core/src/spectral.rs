//! Eigenvalue computation and the spectral relations: Hodge spectrum
//! identities, interlacing under deletion, morphism conjugation, cell-map
//! spectra, product spectra, frustration, and threshold rounding.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::hodge::{
    self, coboundary, framed_coboundary, up_laplacian, BlockIndex, Cochain, LinearOperator,
};
use crate::linalg;
use crate::sheaf::{CellMap, CellularSheaf, SheafMorphism};

/// Default tolerance for spectral multiset comparisons, scaled by the largest
/// eigenvalue involved.
pub const SPECTRAL_TOL: f64 = 1e-8;

/// Sorted eigenvalue list with the zero-clustering threshold used.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub zero_tol: f64,
}

impl Spectrum {
    fn from_symmetric(matrix: &DMatrix<f64>) -> Spectrum {
        let (vals, _) = linalg::sorted_symmetric_eigen(matrix);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Spectrum {
            eigenvalues: vals.iter().copied().collect(),
            zero_tol: linalg::default_zero_tol(vals.len(), scale),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues above the given threshold (own threshold when `None`).
    pub fn nonzero(&self, tol: Option<f64>) -> Vec<f64> {
        let cut = tol.unwrap_or(self.zero_tol);
        self.eigenvalues.iter().copied().filter(|v| *v > cut).collect()
    }

    pub fn multiplicity_of_zero(&self) -> usize {
        self.len() - self.nonzero(None).len()
    }

    /// Smallest eigenvalue above the zero threshold, if any.
    pub fn smallest_nonzero(&self) -> Option<f64> {
        self.nonzero(None).first().copied()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Pads with zeros up to length `n` (keeps the list sorted).
    pub fn padded(&self, n: usize) -> Spectrum {
        let mut eigenvalues = vec![0.0; n.saturating_sub(self.len())];
        eigenvalues.extend_from_slice(&self.eigenvalues);
        eigenvalues.sort_by(f64::total_cmp);
        Spectrum {
            eigenvalues,
            zero_tol: self.zero_tol,
        }
    }
}

/// Full spectrum of a self-adjoint operator; rejects matrices whose
/// symmetrization residual exceeds `SPECTRAL_TOL` times the matrix scale.
pub fn spectrum(op: &LinearOperator) -> Result<Spectrum> {
    let scale = op.matrix.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let residual = linalg::symmetry_residual(&op.matrix);
    if residual > SPECTRAL_TOL * scale {
        return Err(Error::NotSymmetric(residual));
    }
    Ok(Spectrum::from_symmetric(&op.matrix))
}

/// Max distance between two sorted multisets of equal length.
pub fn multiset_mismatch(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(
        a.iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
    )
}

/// Outcome of the two Hodge spectrum identities at one degree.
#[derive(Debug, Clone)]
pub struct HodgeRelationReport {
    /// Mismatch between nonzero spec of the full Laplacian and the disjoint
    /// union of the nonzero up/down spectra. `None` when counts differ.
    pub full_vs_parts: Option<f64>,
    /// Mismatch between nonzero up spectrum at `k` and nonzero down spectrum
    /// at `k+1`.
    pub up_vs_next_down: Option<f64>,
    pub holds: bool,
}

/// Verifies that the nonzero spectrum of the full Laplacian is the disjoint
/// union of the nonzero up/down spectra, and that the nonzero up spectrum at
/// degree `k` matches the nonzero down spectrum at degree `k+1`.
pub fn check_hodge_spectral_relations(
    sheaf: &CellularSheaf,
    k: usize,
    tol: f64,
) -> Result<HodgeRelationReport> {
    let full = spectrum(&hodge::hodge_laplacian(sheaf, k)?)?;
    let up = spectrum(&up_laplacian(sheaf, k)?)?;
    let down = spectrum(&hodge::down_laplacian(sheaf, k)?)?;
    let next_down = spectrum(&hodge::down_laplacian(sheaf, k + 1)?)?;

    let scale = full.max().max(up.max()).max(next_down.max()).max(1.0);
    let cut = full
        .zero_tol
        .max(up.zero_tol)
        .max(down.zero_tol)
        .max(next_down.zero_tol)
        .max(tol * scale);

    let mut union: Vec<f64> = up.nonzero(Some(cut));
    union.extend(down.nonzero(Some(cut)));
    union.sort_by(f64::total_cmp);
    let full_vs_parts = multiset_mismatch(&full.nonzero(Some(cut)), &union);

    let up_vs_next_down = multiset_mismatch(&up.nonzero(Some(cut)), &next_down.nonzero(Some(cut)));

    let within = |m: &Option<f64>| m.is_some_and(|v| v <= tol * scale);
    Ok(HodgeRelationReport {
        holds: within(&full_vs_parts) && within(&up_vs_next_down),
        full_vs_parts,
        up_vs_next_down,
    })
}

/// `(p,q)`-interlacing: `lambda_{k-p} <= mu_k <= lambda_{k+q}` for all `k`,
/// with out-of-range indices clamped to the ends. Lengths must agree.
pub fn check_interlacing(lambda: &Spectrum, mu: &Spectrum, p: usize, q: usize) -> Result<bool> {
    let n = lambda.len();
    if mu.len() != n {
        return Err(Error::SpectrumLength(n, mu.len()));
    }
    if n == 0 {
        return Ok(true);
    }
    let slack = lambda.zero_tol.max(mu.zero_tol);
    let l = |k: isize| -> f64 {
        let idx = k.clamp(1, n as isize) as usize - 1;
        lambda.eigenvalues[idx]
    };
    for k in 1..=n {
        let m = mu.eigenvalues[k - 1];
        if m < l(k as isize - p as isize) - slack || m > l(k as isize + q as isize) + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Report for interlacing under deletion of an upward-closed cell set.
#[derive(Debug, Clone)]
pub struct DeletionInterlacingReport {
    /// Rank bound `t = dim C^k - dim H^k(X; G)` for the zeroed sheaf `G`.
    pub t: usize,
    pub original: Spectrum,
    pub padded_deleted: Spectrum,
    pub interlaced: bool,
    /// `(t,t)`-interlacing of normalized Laplacians; graph degree 0 only.
    /// The two-sided claim can fail (deleting an edge from a triangle already
    /// does it); the provable half is `normalized_lower_interlaced`.
    pub normalized_interlaced: Option<bool>,
    /// The lower half `mu_k >= lambda_{k-t}` for the normalized Laplacians.
    pub normalized_lower_interlaced: Option<bool>,
}

/// Restriction of the sheaf to the complement of an upward-closed cell set,
/// via pullback along the inclusion.
pub fn deleted_sheaf(sheaf: &CellularSheaf, cells: &HashSet<String>) -> Result<CellularSheaf> {
    let sub = sheaf.base().delete_upward_closed(cells)?;
    let assignments: HashMap<String, String> = sub
        .cells()
        .iter()
        .map(|c| (c.id.clone(), c.id.clone()))
        .collect();
    let inclusion = CellMap::new(sub, sheaf.base().clone(), &assignments)?;
    sheaf.pullback(&inclusion)
}

/// The comparison sheaf with the same stalks but every restriction map
/// between cells outside `cells` set to zero.
fn zeroed_outside(sheaf: &CellularSheaf, cells: &HashSet<String>) -> Result<CellularSheaf> {
    let base = sheaf.base();
    let stalk_dims: HashMap<String, usize> = base
        .cells()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.clone(), sheaf.stalk_dim(i)))
        .collect();
    let mut restrictions = HashMap::new();
    for fi in 0..base.len() {
        for &(ci, _) in base.cofaces_of(fi) {
            let f_id = base.cell(fi).id.clone();
            let c_id = base.cell(ci).id.clone();
            let keep = cells.contains(&f_id) || cells.contains(&c_id);
            let m = if keep {
                sheaf.restriction(fi, ci).clone()
            } else {
                DMatrix::zeros(sheaf.stalk_dim(ci), sheaf.stalk_dim(fi))
            };
            restrictions.insert((f_id, c_id), m);
        }
    }
    let inner_products: HashMap<String, DMatrix<f64>> = base
        .cells()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| sheaf.inner_product(i).map(|m| (c.id.clone(), m.clone())))
        .collect();
    CellularSheaf::new(base.clone(), &stalk_dims, &restrictions, &inner_products)
}

/// Deletes an upward-closed cell set, pads the deleted sheaf's degree-k
/// Hodge spectrum with zeros, and verifies `(t,0)`-interlacing with the
/// original spectrum; for graphs at degree 0 also the `(t,t)` claim for the
/// normalized Laplacians.
pub fn deletion_interlacing(
    sheaf: &CellularSheaf,
    cells: &HashSet<String>,
    k: usize,
) -> Result<DeletionInterlacingReport> {
    if !sheaf.base().is_upward_closed(cells)? {
        let member = cells
            .iter()
            .find(|id| {
                let i = sheaf.base().index_of(id).unwrap();
                sheaf
                    .base()
                    .cofaces_of(i)
                    .iter()
                    .any(|&(ci, _)| !cells.contains(&sheaf.base().cell(ci).id))
            })
            .unwrap()
            .clone();
        let i = sheaf.base().index_of(&member)?;
        let coface = sheaf
            .base()
            .cofaces_of(i)
            .iter()
            .find(|&&(ci, _)| !cells.contains(&sheaf.base().cell(ci).id))
            .map(|&(ci, _)| sheaf.base().cell(ci).id.clone())
            .unwrap();
        return Err(Error::NotUpwardClosed { member, coface });
    }
    let original = spectrum(&hodge::hodge_laplacian(sheaf, k)?)?;
    let deleted = deleted_sheaf(sheaf, cells)?;
    let padded_deleted = spectrum(&hodge::hodge_laplacian(&deleted, k)?)?.padded(original.len());

    let zeroed = zeroed_outside(sheaf, cells)?;
    let t = sheaf.cochain_dim(k) - hodge::cohomology_dim(&zeroed, k, None)?;

    let interlaced = check_interlacing(&original, &padded_deleted, t, 0)?;

    let (normalized_interlaced, normalized_lower_interlaced) =
        if k == 0 && sheaf.base().top_dim().unwrap_or(0) <= 1 {
            let norm_orig = spectrum(&hodge::normalized_laplacian(sheaf, None)?)?;
            let norm_del =
                spectrum(&hodge::normalized_laplacian(&deleted, None)?)?.padded(norm_orig.len());
            let both = check_interlacing(&norm_orig, &norm_del, t, t)?;
            let slack = norm_orig.zero_tol.max(norm_del.zero_tol);
            let n = norm_orig.len();
            let lower = (1..=n).all(|j| {
                let idx = (j as isize - t as isize).clamp(1, n as isize) as usize - 1;
                norm_del.eigenvalues[j - 1] >= norm_orig.eigenvalues[idx] - slack
            });
            (Some(both), Some(lower))
        } else {
            (None, None)
        };

    Ok(DeletionInterlacingReport {
        t,
        original,
        padded_deleted,
        interlaced,
        normalized_interlaced,
        normalized_lower_interlaced,
    })
}

fn frame_matrix(
    sheaf: &CellularSheaf,
    k: usize,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    if !sheaf.has_nontrivial_inner_products() {
        return Ok(None);
    }
    let index = BlockIndex::for_degree(sheaf, k);
    let mut sqrt = DMatrix::zeros(index.total(), index.total());
    let mut inv = DMatrix::zeros(index.total(), index.total());
    for (p, id) in index.cells().iter().enumerate() {
        let i = sheaf.base().index_of(id)?;
        let d = sheaf.stalk_dim(i);
        let (s, si) = match sheaf.inner_product(i) {
            None => (DMatrix::identity(d, d), DMatrix::identity(d, d)),
            Some(m) => linalg::spd_sqrt(m, 0.0).ok_or_else(|| Error::NotSpd(id.clone()))?,
        };
        let off = index.offset(p);
        sqrt.view_mut((off, off), (d, d)).copy_from(&s);
        inv.view_mut((off, off), (d, d)).copy_from(&si);
    }
    Ok(Some((sqrt, inv)))
}

/// Block-diagonal matrix of the degree-k morphism components, in the
/// orthonormalized frames of source and target.
fn framed_morphism_blocks(phi: &SheafMorphism, k: usize) -> Result<DMatrix<f64>> {
    let rows = BlockIndex::for_degree(phi.target(), k);
    let cols = BlockIndex::for_degree(phi.source(), k);
    let mut m = DMatrix::zeros(rows.total(), cols.total());
    for (p, id) in cols.cells().iter().enumerate() {
        let i = phi.source().base().index_of(id)?;
        let rp = rows.position(id)?;
        let block = phi.component(i);
        m.view_mut((rows.offset(rp), cols.offset(p)), block.shape())
            .copy_from(block);
    }
    if let Some((sqrt, _)) = frame_matrix(phi.target(), k)? {
        m = sqrt * m;
    }
    if let Some((_, inv)) = frame_matrix(phi.source(), k)? {
        m *= inv;
    }
    Ok(m)
}

/// Report for the conjugation identity `L_F = (phi^k)* L_G phi^k`.
#[derive(Debug, Clone)]
pub struct MorphismConjugationReport {
    pub unitarity_residual: f64,
    pub unitary: bool,
    pub conjugation_residual: f64,
    pub holds: bool,
}

/// Tests unitarity of the degree-(k+1) component map and the conjugation
/// identity between the degree-k up-Laplacians.
pub fn morphism_conjugation_check(
    phi: &SheafMorphism,
    k: usize,
    tol: f64,
) -> Result<MorphismConjugationReport> {
    let up = framed_morphism_blocks(phi, k + 1)?;
    let unitarity_residual = linalg::orthogonality_residual(&up);
    let unitary = unitarity_residual <= tol;
    let low = framed_morphism_blocks(phi, k)?;
    let l_f = up_laplacian(phi.source(), k)?.matrix;
    let l_g = up_laplacian(phi.target(), k)?.matrix;
    let conjugated = low.transpose() * l_g * &low;
    let scale = l_f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let conjugation_residual = linalg::operator_norm(&(conjugated - &l_f));
    Ok(MorphismConjugationReport {
        unitarity_residual,
        unitary,
        conjugation_residual,
        holds: unitary && conjugation_residual <= tol * scale,
    })
}

/// Report comparing two spectra related by a cell map.
#[derive(Debug, Clone)]
pub struct MapSpectrumReport {
    pub mismatch: Option<f64>,
    pub holds: bool,
}

/// Pushforward isospectrality: the degree-k up-Laplacians of `F` and of its
/// pushforward along a locally injective map have equal spectra.
pub fn pushforward_isospectral_check(
    map: &CellMap,
    sheaf: &CellularSheaf,
    k: usize,
) -> Result<MapSpectrumReport> {
    let pushed = sheaf.pushforward(map)?;
    let a = spectrum(&up_laplacian(sheaf, k)?)?;
    let b = spectrum(&up_laplacian(&pushed, k)?)?;
    let scale = a.max().max(b.max()).max(1.0);
    let mismatch = multiset_mismatch(&a.eigenvalues, &b.eigenvalues);
    Ok(MapSpectrumReport {
        holds: mismatch.is_some_and(|m| m <= SPECTRAL_TOL * scale),
        mismatch,
    })
}

/// Covering containment: the spectrum of `L^k_F` is contained in the spectrum
/// of the pullback along a covering map. Reports the worst match distance.
pub fn covering_containment_check(
    map: &CellMap,
    sheaf: &CellularSheaf,
    k: usize,
) -> Result<MapSpectrumReport> {
    map.require_covering()?;
    if *map.target() != *sheaf.base() {
        return Err(Error::BaseMismatch);
    }
    let pulled = sheaf.pullback(map)?;
    let small = spectrum(&up_laplacian(sheaf, k)?)?;
    let big = spectrum(&up_laplacian(&pulled, k)?)?;
    let scale = small.max().max(big.max()).max(1.0);
    let mut pool = big.eigenvalues.clone();
    let mut worst = 0.0f64;
    for v in &small.eigenvalues {
        // Nearest unused eigenvalue of the pullback.
        let (best_idx, best_dist) = pool
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (w - v).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::unmet("pullback spectrum exhausted"))?;
        worst = worst.max(best_dist);
        pool.swap_remove(best_idx);
    }
    Ok(MapSpectrumReport {
        mismatch: Some(worst),
        holds: worst <= SPECTRAL_TOL * scale,
    })
}

/// Report for the constant-fiber eigenvalue bound.
#[derive(Debug, Clone)]
pub struct FiberBoundReport {
    pub base_lambda: Option<f64>,
    pub pullback_lambda: Option<f64>,
    pub ratio: f64,
    pub holds: bool,
}

/// For a dimension-preserving map with constant fiber sizes `l_d`, checks
/// `lambda(F) >= (l_d / l_{d+1}) lambda(f*F)` on the smallest nonzero
/// eigenvalues of the degree-d up-Laplacians.
pub fn fiber_bound_check(
    map: &CellMap,
    sheaf: &CellularSheaf,
    d: usize,
) -> Result<FiberBoundReport> {
    map.validate()?;
    map.require_dimension_preserving()?;
    if *map.target() != *sheaf.base() {
        return Err(Error::BaseMismatch);
    }
    let sizes = map.constant_fiber_sizes()?;
    let l_d = *sizes
        .get(&d)
        .ok_or_else(|| Error::unmet(format!("no cells of dimension {d}")))?;
    let l_d1 = *sizes
        .get(&(d + 1))
        .ok_or_else(|| Error::unmet(format!("no cells of dimension {}", d + 1)))?;
    let pulled = sheaf.pullback(map)?;
    let base_spec = spectrum(&up_laplacian(sheaf, d)?)?;
    let pull_spec = spectrum(&up_laplacian(&pulled, d)?)?;
    let ratio = l_d as f64 / l_d1 as f64;
    let (base_lambda, pullback_lambda) =
        (base_spec.smallest_nonzero(), pull_spec.smallest_nonzero());
    let holds = match (base_lambda, pullback_lambda) {
        (Some(a), Some(b)) => {
            let scale = base_spec.max().max(pull_spec.max()).max(1.0);
            a >= ratio * b - SPECTRAL_TOL * scale
        }
        // Nothing to bound when either spectrum is entirely zero.
        _ => true,
    };
    Ok(FiberBoundReport {
        base_lambda,
        pullback_lambda,
        ratio,
        holds,
    })
}

/// Report for the product spectrum identities.
#[derive(Debug, Clone)]
pub struct ProductSpectrumReport {
    /// Frobenius residual of `L_prod = I (x) L_G + L_F (x) I` at degree 0.
    pub degree0_residual: f64,
    /// Mismatch between the product degree-0 spectrum and all pairwise sums.
    pub degree0_spectrum_mismatch: Option<f64>,
    /// Worst eigenvector residual across tested nonzero pairs at degree 1.
    pub degree1_residual: Option<f64>,
    /// Pairs with a zero factor eigenvalue, skipped by the degree-1 formula.
    pub degree1_skipped: usize,
    pub holds: bool,
}

/// Verifies the degree-0 sum formula and sum-spectrum of an external product,
/// and the degree-1 eigenvector formula when both bases are graphs.
pub fn product_spectrum_check(
    f: &CellularSheaf,
    g: &CellularSheaf,
) -> Result<ProductSpectrumReport> {
    let prod = f.external_product(g)?;
    let l_f = up_laplacian(f, 0)?;
    let l_g = up_laplacian(g, 0)?;
    let l_prod = up_laplacian(&prod, 0)?;

    // Expected degree-0 operator, assembled blockwise in the product order.
    let mut expected = DMatrix::zeros(l_prod.matrix.nrows(), l_prod.matrix.ncols());
    let f_cells = l_f.rows.cells().to_vec();
    let g_cells = l_g.rows.cells().to_vec();
    let name = |a: &str, b: &str| format!("({a},{b})");
    for va in &f_cells {
        for wa in &g_cells {
            let ra = l_prod.rows.position(&name(va, wa))?;
            for vb in &f_cells {
                for wb in &g_cells {
                    let cb = l_prod.cols.position(&name(vb, wb))?;
                    let da_f = l_f.rows.size(l_f.rows.position(va)?);
                    let db_f = l_f.cols.size(l_f.cols.position(vb)?);
                    let da_g = l_g.rows.size(l_g.rows.position(wa)?);
                    let db_g = l_g.cols.size(l_g.cols.position(wb)?);
                    let mut block = DMatrix::zeros(da_f * da_g, db_f * db_g);
                    if wa == wb {
                        block += l_f.block(va, vb)?.kronecker(&DMatrix::identity(da_g, db_g));
                    }
                    if va == vb {
                        block += DMatrix::identity(da_f, db_f).kronecker(&l_g.block(wa, wb)?);
                    }
                    expected
                        .view_mut(
                            (l_prod.rows.offset(ra), l_prod.cols.offset(cb)),
                            block.shape(),
                        )
                        .copy_from(&block);
                }
            }
        }
    }
    let degree0_residual = (&l_prod.matrix - &expected).norm();

    let spec_f = spectrum(&l_f)?;
    let spec_g = spectrum(&l_g)?;
    let spec_prod = spectrum(&l_prod)?;
    let mut sums: Vec<f64> = spec_f
        .eigenvalues
        .iter()
        .flat_map(|a| spec_g.eigenvalues.iter().map(move |b| a + b))
        .collect();
    sums.sort_by(f64::total_cmp);
    let degree0_spectrum_mismatch = multiset_mismatch(&spec_prod.eigenvalues, &sums);

    let graphs = f.base().top_dim().unwrap_or(0) <= 1 && g.base().top_dim().unwrap_or(0) <= 1;
    let (degree1_residual, degree1_skipped) = if graphs {
        check_degree1_product_eigenvectors(f, g, &prod)?
    } else {
        (None, 0)
    };

    let scale = spec_prod.max().max(1.0);
    let holds = degree0_residual <= SPECTRAL_TOL * scale
        && degree0_spectrum_mismatch.is_some_and(|m| m <= SPECTRAL_TOL * scale)
        && degree1_residual.is_none_or(|r| r <= SPECTRAL_TOL * scale);
    Ok(ProductSpectrumReport {
        degree0_residual,
        degree0_spectrum_mismatch,
        degree1_residual,
        degree1_skipped,
        holds,
    })
}

/// For each nonzero eigenpair `(lambda, v_F)`, `(mu, v_G)` builds the block
/// vector with `sqrt(lambda/mu) v_F (x) d_G v_G` over vertex-edge cells and
/// `-sqrt(mu/lambda) d_F v_F (x) v_G` over edge-vertex cells, and measures
/// the eigenvector residual under the product degree-1 up-Laplacian.
fn check_degree1_product_eigenvectors(
    f: &CellularSheaf,
    g: &CellularSheaf,
    prod: &CellularSheaf,
) -> Result<(Option<f64>, usize)> {
    let l1 = up_laplacian(prod, 1)?;
    let l_f = up_laplacian(f, 0)?;
    let l_g = up_laplacian(g, 0)?;
    let (vals_f, vecs_f) = linalg::sorted_symmetric_eigen(&l_f.matrix);
    let (vals_g, vecs_g) = linalg::sorted_symmetric_eigen(&l_g.matrix);
    let spec_f = Spectrum::from_symmetric(&l_f.matrix);
    let spec_g = Spectrum::from_symmetric(&l_g.matrix);
    let delta_f = framed_coboundary(f, 0)?;
    let delta_g = framed_coboundary(g, 0)?;
    let index_f0 = BlockIndex::for_degree(f, 0);
    let index_f1 = BlockIndex::for_degree(f, 1);
    let index_g0 = BlockIndex::for_degree(g, 0);
    let index_g1 = BlockIndex::for_degree(g, 1);
    let index_p1 = BlockIndex::for_degree(prod, 1);
    let name = |a: &str, b: &str| format!("({a},{b})");

    let mut worst: Option<f64> = None;
    let mut skipped = 0;
    for i in 0..vals_f.len() {
        for j in 0..vals_g.len() {
            let (lam, mu) = (vals_f[i], vals_g[j]);
            if lam <= spec_f.zero_tol || mu <= spec_g.zero_tol {
                skipped += 1;
                continue;
            }
            let v_f: DVector<f64> = vecs_f.column(i).into();
            let v_g: DVector<f64> = vecs_g.column(j).into();
            let dgv = &delta_g.matrix * &v_g;
            let dfv = &delta_f.matrix * &v_f;
            let mut w = DVector::zeros(index_p1.total());
            let a = (lam / mu).sqrt();
            let b = (mu / lam).sqrt();
            // Vertex x edge blocks.
            for (pv, v_id) in index_f0.cells().iter().enumerate() {
                for (pe, e_id) in index_g1.cells().iter().enumerate() {
                    let pp = index_p1.position(&name(v_id, e_id))?;
                    let xv = v_f.rows(index_f0.offset(pv), index_f0.size(pv));
                    let ye = dgv.rows(index_g1.offset(pe), index_g1.size(pe));
                    let mut block = DVector::zeros(index_p1.size(pp));
                    for (bi, x) in xv.iter().enumerate() {
                        for (bj, y) in ye.iter().enumerate() {
                            block[bi * ye.len() + bj] = a * x * y;
                        }
                    }
                    w.rows_mut(index_p1.offset(pp), block.len())
                        .copy_from(&block);
                }
            }
            // Edge x vertex blocks, with the Koszul sign.
            for (pe, e_id) in index_f1.cells().iter().enumerate() {
                for (pv, v_id) in index_g0.cells().iter().enumerate() {
                    let pp = index_p1.position(&name(e_id, v_id))?;
                    let xe = dfv.rows(index_f1.offset(pe), index_f1.size(pe));
                    let yv = v_g.rows(index_g0.offset(pv), index_g0.size(pv));
                    let mut block = DVector::zeros(index_p1.size(pp));
                    for (bi, x) in xe.iter().enumerate() {
                        for (bj, y) in yv.iter().enumerate() {
                            block[bi * yv.len() + bj] = -b * x * y;
                        }
                    }
                    w.rows_mut(index_p1.offset(pp), block.len())
                        .copy_from(&block);
                }
            }
            let norm = w.norm();
            if norm == 0.0 {
                skipped += 1;
                continue;
            }
            let residual = (&l1.matrix * &w - (lam + mu) * &w).norm() / norm;
            worst = Some(worst.map_or(residual, |r: f64| r.max(residual)));
        }
    }
    Ok((worst, skipped))
}

/// Frustration `eta(x) = <x, Lx> / <x, Dx>` of a 0-cochain on a graph sheaf,
/// with `D` the block diagonal of the degree-0 up-Laplacian.
pub fn frustration(sheaf: &CellularSheaf, x: &Cochain) -> Result<f64> {
    if x.degree != 0 {
        return Err(Error::DegreeMismatch {
            got: x.degree,
            expected: 0,
        });
    }
    let l = up_laplacian(sheaf, 0)?;
    let d = l.block_diagonal();
    let v = hodge::to_frame(sheaf, x)?;
    let denom = v.dot(&(&d * &v));
    let scale = linalg::lambda_max(&d).max(1.0);
    if denom <= f64::EPSILON * scale * v.norm_squared() {
        return Err(Error::DegenerateQuotient);
    }
    Ok(v.dot(&(&l.matrix * &v)) / denom)
}

/// Threshold rounding: each vertex block becomes `x_v / |x_v|` when
/// `|x_v|^2 >= kappa` and zero otherwise (norms in the stalk inner product).
pub fn threshold_round(sheaf: &CellularSheaf, x: &Cochain, kappa: f64) -> Result<Cochain> {
    if x.degree != 0 {
        return Err(Error::DegreeMismatch {
            got: x.degree,
            expected: 0,
        });
    }
    let cells = sheaf.base().cells_of_dim(0);
    let mut blocks = Vec::with_capacity(x.blocks.len());
    for (p, block) in x.blocks.iter().enumerate() {
        let i = cells[p];
        let norm_sq = match sheaf.inner_product(i) {
            None => block.norm_squared(),
            Some(m) => block.dot(&(m * block)),
        };
        if norm_sq >= kappa && norm_sq > 0.0 {
            blocks.push(block / norm_sq.sqrt());
        } else {
            blocks.push(DVector::zeros(block.len()));
        }
    }
    Ok(Cochain { degree: 0, blocks })
}

/// Scans the breakpoint thresholds `{|x_v|^2}` (the only places the rounding
/// changes) and returns the threshold minimizing the frustration of the
/// rounded cochain, together with that frustration.
pub fn best_rounding(
    sheaf: &CellularSheaf,
    x: &Cochain,
    grid: Option<&[f64]>,
) -> Result<(f64, f64)> {
    let cells = sheaf.base().cells_of_dim(0);
    let mut breakpoints: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => x
            .blocks
            .iter()
            .enumerate()
            .map(|(p, block)| match sheaf.inner_product(cells[p]) {
                None => block.norm_squared(),
                Some(m) => block.dot(&(m * block)),
            })
            .filter(|n| *n > 0.0)
            .collect(),
    };
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let mut best: Option<(f64, f64)> = None;
    for kappa in breakpoints {
        let rounded = threshold_round(sheaf, x, kappa)?;
        if rounded.blocks.iter().all(|b| b.norm() == 0.0) {
            continue;
        }
        match frustration(sheaf, &rounded) {
            Ok(eta) => {
                if best.is_none_or(|(_, e)| eta < e) {
                    best = Some((kappa, eta));
                }
            }
            Err(Error::DegenerateQuotient) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::AllZeroRounding)
}

/// Report for the structural lower bound on coboundary perturbations.
#[derive(Debug, Clone)]
pub struct StructuralCheegerReport {
    /// Squared Frobenius norm of the coboundary difference.
    pub perturbation_sq: f64,
    /// Smallest eigenvalue of `L_F` orthogonal to its harmonic space.
    pub lambda_1: f64,
    /// Whether the hypothesis `dim H^0(F') > dim H^0(F)` is met.
    pub applicable: bool,
    pub holds: bool,
}

/// Measures `|d_F - d_F'|_Fro^2` against `lambda_1(L_F)`; the inequality is
/// asserted when the perturbed sheaf gains global sections.
pub fn structural_cheeger_lower_bound(
    f: &CellularSheaf,
    f_prime: &CellularSheaf,
) -> Result<StructuralCheegerReport> {
    if f.base() != f_prime.base() {
        return Err(Error::BaseMismatch);
    }
    if f.stalk_dims() != f_prime.stalk_dims() {
        return Err(Error::unmet("stalk dimensions differ"));
    }
    let d_f = coboundary(f, 0);
    let d_p = coboundary(f_prime, 0);
    let perturbation_sq = linalg::frobenius_sq(&(&d_f.matrix - &d_p.matrix));
    let spec = spectrum(&up_laplacian(f, 0)?)?;
    let h0_f = hodge::cohomology_dim(f, 0, None)?;
    let h0_p = hodge::cohomology_dim(f_prime, 0, None)?;
    let lambda_1 = if h0_f < spec.len() {
        spec.eigenvalues[h0_f]
    } else {
        0.0
    };
    let applicable = h0_p > h0_f;
    Ok(StructuralCheegerReport {
        perturbation_sq,
        lambda_1,
        applicable,
        holds: perturbation_sq >= lambda_1 - SPECTRAL_TOL * spec.max().max(1.0),
    })
}

/// Convenience: spectrum of the degree-k up-Laplacian.
pub fn up_spectrum(sheaf: &CellularSheaf, k: usize) -> Result<Spectrum> {
    spectrum(&up_laplacian(sheaf, k)?)
}

/// The complete graph on `n` vertices as a 1-dimensional complex.
pub fn complete_graph(n: usize) -> CellComplex {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let vertex_refs: Vec<&str> = vertices.iter().map(|s| s.as_str()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((format!("e{i}_{j}"), i, j));
        }
    }
    let edge_refs: Vec<(&str, &str, &str)> = edges
        .iter()
        .map(|(id, i, j)| (id.as_str(), vertex_refs[*i], vertex_refs[*j]))
        .collect();
    CellComplex::build_graph(&vertex_refs, &edge_refs).expect("complete graph")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodge::cochain_from_blocks;
    use approx::assert_relative_eq;

    fn k3_const() -> CellularSheaf {
        CellularSheaf::constant(&complete_graph(3), 1, None).unwrap()
    }

    fn p2_const() -> CellularSheaf {
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        CellularSheaf::constant(&x, 1, None).unwrap()
    }

    #[test]
    fn spectra_of_small_graphs() {
        let p2 = spectrum(&up_laplacian(&p2_const(), 0).unwrap()).unwrap();
        assert_relative_eq!(p2.eigenvalues[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p2.eigenvalues[1], 2.0, epsilon = 1e-12);

        let k3 = spectrum(&up_laplacian(&k3_const(), 0).unwrap()).unwrap();
        assert_relative_eq!(k3.eigenvalues[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(k3.eigenvalues[1], 3.0, epsilon = 1e-10);
        assert_relative_eq!(k3.eigenvalues[2], 3.0, epsilon = 1e-10);

        let zero = CellularSheaf::constant(&complete_graph(3), 0, None).unwrap();
        assert!(spectrum(&up_laplacian(&zero, 0).unwrap())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn hodge_relations_on_filled_triangle() {
        let x = CellComplex::build_simplicial(&[vec!["a", "b", "c"]]).unwrap();
        let f = CellularSheaf::constant(&x, 1, None).unwrap();
        let report = check_hodge_spectral_relations(&f, 1, SPECTRAL_TOL).unwrap();
        assert!(report.holds, "{report:?}");
        let report0 = check_hodge_spectral_relations(&f, 0, SPECTRAL_TOL).unwrap();
        assert!(report0.holds);
    }

    #[test]
    fn hollow_triangle_up_equals_next_down() {
        let f = k3_const();
        let up = spectrum(&up_laplacian(&f, 0).unwrap()).unwrap();
        let down1 = spectrum(&hodge::down_laplacian(&f, 1).unwrap()).unwrap();
        let a = up.nonzero(None);
        let b = down1.nonzero(None);
        assert_eq!(a.len(), 2);
        assert_relative_eq!(multiset_mismatch(&a, &b).unwrap(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(a[0], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn interlacing_definition() {
        let lam = Spectrum {
            eigenvalues: vec![0.0, 3.0, 3.0],
            zero_tol: 1e-9,
        };
        let mu = Spectrum {
            eigenvalues: vec![0.0, 1.0, 3.0],
            zero_tol: 1e-9,
        };
        assert!(check_interlacing(&lam, &lam, 0, 0).unwrap());
        assert!(check_interlacing(&lam, &mu, 1, 0).unwrap());
        assert!(!check_interlacing(&lam, &mu, 0, 0).unwrap());
        let short = Spectrum {
            eigenvalues: vec![0.0],
            zero_tol: 1e-9,
        };
        assert!(check_interlacing(&lam, &short, 1, 0).is_err());
    }

    #[test]
    fn deletion_interlacing_k3_edge() {
        let f = k3_const();
        let cells: HashSet<String> = ["e1_2"].iter().map(|s| s.to_string()).collect();
        let report = deletion_interlacing(&f, &cells, 0).unwrap();
        assert_eq!(report.t, 1);
        assert!(report.interlaced);
        // Normalized spectra are {0, 3/2, 3/2} vs {0, 1, 2}: the two-sided
        // claim fails at the top (2 > 3/2) while the lower half holds.
        assert_eq!(report.normalized_interlaced, Some(false));
        assert_eq!(report.normalized_lower_interlaced, Some(true));
        let mu = &report.padded_deleted.eigenvalues;
        assert_relative_eq!(mu[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(mu[1], 1.0, epsilon = 1e-9);
        assert_relative_eq!(mu[2], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn deletion_interlacing_edge_cases() {
        let f = k3_const();
        let empty = HashSet::new();
        let report = deletion_interlacing(&f, &empty, 0).unwrap();
        assert_eq!(report.t, 0);
        assert!(report.interlaced);
        assert_relative_eq!(
            multiset_mismatch(
                &report.original.eigenvalues,
                &report.padded_deleted.eigenvalues
            )
            .unwrap(),
            0.0,
            epsilon = 1e-9
        );

        let all_edges: HashSet<String> = ["e0_1", "e0_2", "e1_2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let report = deletion_interlacing(&f, &all_edges, 0).unwrap();
        assert_eq!(report.t, 2);
        assert!(report.interlaced);
        assert!(report
            .padded_deleted
            .eigenvalues
            .iter()
            .all(|v| v.abs() < 1e-12));

        let vertex_only: HashSet<String> = ["v0"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            deletion_interlacing(&f, &vertex_only, 0),
            Err(Error::NotUpwardClosed { .. })
        ));
    }

    #[test]
    fn identity_morphism_conjugation() {
        let f = k3_const();
        let phi = SheafMorphism::identity(&f);
        let report = morphism_conjugation_check(&phi, 0, 1e-9).unwrap();
        assert!(report.unitary);
        assert!(report.holds);
        assert_relative_eq!(report.conjugation_residual, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_morphism_conjugation() {
        // Two presentations of the same orthogonal bundle differ by a basis
        // rotation at one vertex; the rotated morphism is unitary.
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let theta: f64 = 1.1;
        let rot = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let bundle = HashMap::from([("e".to_string(), (rot.clone(), DMatrix::identity(2, 2)))]);
        let f = CellularSheaf::orthogonal_bundle(&x, 2, &bundle, &HashMap::new()).unwrap();
        let trivial = HashMap::from([(
            "e".to_string(),
            (DMatrix::identity(2, 2), DMatrix::identity(2, 2)),
        )]);
        let g = CellularSheaf::orthogonal_bundle(&x, 2, &trivial, &HashMap::new()).unwrap();
        // phi: F -> G with phi_{v1} undoing the rotation.
        let components = HashMap::from([
            ("v1".to_string(), rot),
            ("v2".to_string(), DMatrix::identity(2, 2)),
            ("e".to_string(), DMatrix::identity(2, 2)),
        ]);
        let phi = SheafMorphism::new(f, g, &components).unwrap();
        assert!(phi.validate(1e-10).is_empty());
        let report = morphism_conjugation_check(&phi, 0, 1e-9).unwrap();
        assert!(report.unitary);
        assert!(report.holds, "{report:?}");
    }

    #[test]
    fn non_unitary_morphism_flagged() {
        let f = k3_const();
        let mut components: HashMap<String, DMatrix<f64>> = f
            .base()
            .cells()
            .iter()
            .map(|c| (c.id.clone(), DMatrix::identity(1, 1)))
            .collect();
        components.insert("e0_1".to_string(), DMatrix::from_element(1, 1, 2.0));
        // Scale the target sheaf's edge maps so the squares still commute.
        let g = f
            .with_restriction("v0", "e0_1", DMatrix::from_element(1, 1, 2.0))
            .unwrap()
            .with_restriction("v1", "e0_1", DMatrix::from_element(1, 1, 2.0))
            .unwrap();
        let phi = SheafMorphism::new(f, g, &components).unwrap();
        assert!(phi.validate(1e-10).is_empty());
        let report = morphism_conjugation_check(&phi, 0, 1e-9).unwrap();
        assert!(!report.unitary);
    }

    #[test]
    fn fold_is_isospectral_and_identity_checks_pass() {
        let x = CellComplex::build_graph(
            &["a1", "a2", "b1", "b2"],
            &[("ea", "a1", "a2"), ("eb", "b1", "b2")],
        )
        .unwrap();
        let y = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let assignments = HashMap::from([
            ("a1".to_string(), "v1".to_string()),
            ("a2".to_string(), "v2".to_string()),
            ("b1".to_string(), "v1".to_string()),
            ("b2".to_string(), "v2".to_string()),
            ("ea".to_string(), "e".to_string()),
            ("eb".to_string(), "e".to_string()),
        ]);
        let map = CellMap::new(x.clone(), y, &assignments).unwrap();
        let f = CellularSheaf::constant(&x, 1, None).unwrap();
        let report = pushforward_isospectral_check(&map, &f, 0).unwrap();
        assert!(report.holds, "{report:?}");

        let id = CellMap::identity(f.base());
        assert!(pushforward_isospectral_check(&id, &f, 0).unwrap().holds);
        assert!(covering_containment_check(&id, &f, 0).unwrap().holds);
        assert!(fiber_bound_check(&id, &f, 0).unwrap().holds);
    }

    #[test]
    fn cycle_cover_containment() {
        let c3 = CellComplex::build_graph(
            &["u0", "u1", "u2"],
            &[("f0", "u0", "u1"), ("f1", "u1", "u2"), ("f2", "u2", "u0")],
        )
        .unwrap();
        let c6 = CellComplex::build_graph(
            &["w0", "w1", "w2", "w3", "w4", "w5"],
            &[
                ("g0", "w0", "w1"),
                ("g1", "w1", "w2"),
                ("g2", "w2", "w3"),
                ("g3", "w3", "w4"),
                ("g4", "w4", "w5"),
                ("g5", "w5", "w0"),
            ],
        )
        .unwrap();
        let mut assignments = HashMap::new();
        for i in 0..6 {
            assignments.insert(format!("w{i}"), format!("u{}", i % 3));
            assignments.insert(format!("g{i}"), format!("f{}", i % 3));
        }
        let map = CellMap::new(c6, c3.clone(), &assignments).unwrap();
        let f = CellularSheaf::constant(&c3, 1, None).unwrap();
        let report = covering_containment_check(&map, &f, 0).unwrap();
        assert!(report.holds, "{report:?}");
        // C3 spectrum {0,3,3} inside C6 spectrum {0,1,1,3,3,4}.
        let pulled = f.pullback(&map).unwrap();
        let spec = up_spectrum(&pulled, 0).unwrap();
        let expected = [0.0, 1.0, 1.0, 3.0, 3.0, 4.0];
        assert_relative_eq!(
            multiset_mismatch(&spec.eigenvalues, &expected).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        let bound = fiber_bound_check(&map, &f, 0).unwrap();
        assert!(bound.holds, "{bound:?}");
    }

    #[test]
    fn product_spectra() {
        let f = p2_const();
        let report = product_spectrum_check(&f, &f).unwrap();
        assert!(report.holds, "{report:?}");
        let prod = f.external_product(&f).unwrap();
        let spec = up_spectrum(&prod, 0).unwrap();
        let expected = [0.0, 2.0, 2.0, 4.0];
        assert_relative_eq!(
            multiset_mismatch(&spec.eigenvalues, &expected).unwrap(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn product_with_point_keeps_spectrum() {
        let f = k3_const();
        let point = CellComplex::build_graph(&["p"], &[]).unwrap();
        let g = CellularSheaf::constant(&point, 1, None).unwrap();
        let prod = f.external_product(&g).unwrap();
        let a = up_spectrum(&f, 0).unwrap();
        let b = up_spectrum(&prod, 0).unwrap();
        assert_relative_eq!(
            multiset_mismatch(&a.eigenvalues, &b.eigenvalues).unwrap(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn k3_times_p2_degree1_eigenvector() {
        let f = k3_const();
        let g = p2_const();
        let report = product_spectrum_check(&f, &g).unwrap();
        // Pairs with lambda = 3, mu = 2 must be exercised.
        assert!(report.degree1_residual.is_some());
        assert!(report.holds, "{report:?}");
        // Eigenvalue 5 = 3 + 2 appears in the degree-1 up spectrum.
        let prod = f.external_product(&g).unwrap();
        let spec = up_spectrum(&prod, 1).unwrap();
        assert!(spec.eigenvalues.iter().any(|v| (v - 5.0).abs() < 1e-9));
    }

    #[test]
    fn bundle_spectrum_independent_of_rotation() {
        // A single rotated edge is a unitary change of basis: the spectrum
        // stays {0, 0, 2, 2} for every angle.
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        for theta in [0.0f64, 0.4, 1.3, 2.9] {
            let rot = DMatrix::from_row_slice(
                2,
                2,
                &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
            );
            let bundle = HashMap::from([("e".to_string(), (rot, DMatrix::identity(2, 2)))]);
            let f = CellularSheaf::orthogonal_bundle(&x, 2, &bundle, &HashMap::new()).unwrap();
            let spec = up_spectrum(&f, 0).unwrap();
            assert_relative_eq!(
                multiset_mismatch(&spec.eigenvalues, &[0.0, 0.0, 2.0, 2.0]).unwrap(),
                0.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn perturbed_constant_sheaves_respect_lower_bound() {
        // Random restriction perturbations of the K3 constant sheaf gain no
        // sections, so the coboundary distance dominates lambda_1.
        let mut rng = crate::sample::rng(21);
        let constant = k3_const();
        for _ in 0..20 {
            let mut f = constant.clone();
            for ei in constant.base().cells_of_dim(1) {
                for &(vi, _) in constant.base().faces_of(ei) {
                    let bump = crate::sample::random_matrix(1, 1, &mut rng) * 0.8;
                    let m = constant.restriction(vi, ei) + bump;
                    f = f
                        .with_restriction(
                            &constant.base().cell(vi).id,
                            &constant.base().cell(ei).id,
                            m,
                        )
                        .unwrap();
                }
            }
            let report = structural_cheeger_lower_bound(&f, &constant).unwrap();
            assert!(report.holds, "{report:?}");
        }
    }

    #[test]
    fn frustration_values() {
        // Global sections have zero frustration.
        let f = k3_const();
        let section = cochain_from_blocks(
            &f,
            0,
            &HashMap::from([
                ("v0".to_string(), DVector::from_element(1, 1.0)),
                ("v1".to_string(), DVector::from_element(1, 1.0)),
                ("v2".to_string(), DVector::from_element(1, 1.0)),
            ]),
        )
        .unwrap();
        assert_relative_eq!(frustration(&f, &section).unwrap(), 0.0, epsilon = 1e-14);

        // P2 with x = (1, -1): <x,Lx> = 4, <x,Dx> = 2.
        let p = p2_const();
        let x = cochain_from_blocks(
            &p,
            0,
            &HashMap::from([
                ("v1".to_string(), DVector::from_element(1, 1.0)),
                ("v2".to_string(), DVector::from_element(1, -1.0)),
            ]),
        )
        .unwrap();
        assert_relative_eq!(frustration(&p, &x).unwrap(), 2.0, epsilon = 1e-14);
        // Scale invariance.
        let x2 = cochain_from_blocks(
            &p,
            0,
            &HashMap::from([
                ("v1".to_string(), DVector::from_element(1, -3.0)),
                ("v2".to_string(), DVector::from_element(1, 3.0)),
            ]),
        )
        .unwrap();
        assert_relative_eq!(frustration(&p, &x2).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rounding_rules() {
        let p = p2_const();
        let x = cochain_from_blocks(
            &p,
            0,
            &HashMap::from([
                ("v1".to_string(), DVector::from_element(1, 0.5)),
                ("v2".to_string(), DVector::from_element(1, 1.0)),
            ]),
        )
        .unwrap();
        let keep_both = threshold_round(&p, &x, 0.2).unwrap();
        assert_relative_eq!(keep_both.blocks[0][0].abs(), 1.0);
        assert_relative_eq!(keep_both.blocks[1][0].abs(), 1.0);
        let drop_small = threshold_round(&p, &x, 0.8).unwrap();
        let norms: Vec<f64> = drop_small.blocks.iter().map(|b| b.norm()).collect();
        assert!(norms.contains(&0.0) && norms.contains(&1.0));
    }

    #[test]
    fn unit_section_rounds_to_itself() {
        let f = k3_const();
        let section = cochain_from_blocks(
            &f,
            0,
            &HashMap::from([
                ("v0".to_string(), DVector::from_element(1, 1.0)),
                ("v1".to_string(), DVector::from_element(1, 1.0)),
                ("v2".to_string(), DVector::from_element(1, 1.0)),
            ]),
        )
        .unwrap();
        let rounded = threshold_round(&f, &section, 0.0).unwrap();
        assert_eq!(rounded, section);
        let (_, eta) = best_rounding(&f, &section, None).unwrap();
        assert_relative_eq!(eta, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_isometry_rounding_counterexample() {
        // Frustration 0 but every rounding has positive frustration.
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
        let cochain = cochain_from_blocks(
            &f,
            0,
            &HashMap::from([
                ("v1".to_string(), DVector::from_column_slice(&[0.5, 0.0])),
                ("v2".to_string(), DVector::from_column_slice(&[1.0, 0.0])),
            ]),
        )
        .unwrap();
        assert_relative_eq!(frustration(&f, &cochain).unwrap(), 0.0, epsilon = 1e-12);
        let (_, eta) = best_rounding(&f, &cochain, None).unwrap();
        assert_relative_eq!(eta, 0.2, epsilon = 1e-12);
        assert!(eta > 0.01);
    }

    #[test]
    fn all_zero_rounding_is_an_error() {
        let p = p2_const();
        let zero = hodge::zero_cochain(&p, 0);
        assert!(matches!(
            best_rounding(&p, &zero, None),
            Err(Error::AllZeroRounding)
        ));
    }

    #[test]
    fn structural_cheeger_cases() {
        let p = p2_const();
        // F' = F: zero perturbation, inapplicable but trivially consistent.
        let same = structural_cheeger_lower_bound(&p, &p).unwrap();
        assert!(!same.applicable);
        assert_relative_eq!(same.perturbation_sq, 0.0);

        // Maps (1, -1) against the constant sheaf: perturbation 4 >= lambda_1 = 2.
        let f = p
            .with_restriction("v2", "e", DMatrix::from_element(1, 1, -1.0))
            .unwrap();
        let report = structural_cheeger_lower_bound(&f, &p).unwrap();
        assert_relative_eq!(report.perturbation_sq, 4.0, epsilon = 1e-12);
        assert_relative_eq!(report.lambda_1, 2.0, epsilon = 1e-12);
        assert!(report.holds);
    }
}
