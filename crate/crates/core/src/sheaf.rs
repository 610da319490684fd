//! Weighted cellular sheaves, sheaf morphisms, and sheaf operations.
//!
//! A sheaf assigns to every cell a stalk `R^d` with an inner product (identity
//! unless stated) and to every incident codimension-1 pair a restriction
//! matrix mapping the face stalk into the coface stalk. Operations never
//! mutate; they build new sheaves.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::linalg;

/// Default tolerance for SPD and orthogonality checks (operator norm).
pub const DEFAULT_CHECK_TOL: f64 = 1e-8;

/// A weighted cellular sheaf of real vector spaces over a [`CellComplex`].
#[derive(Debug, Clone)]
pub struct CellularSheaf {
    base: CellComplex,
    stalk_dims: Vec<usize>,
    restrictions: HashMap<(usize, usize), DMatrix<f64>>,
    /// `None` means the identity inner product.
    inner_products: Vec<Option<DMatrix<f64>>>,
}

impl CellularSheaf {
    /// Builds a sheaf from per-cell stalk dimensions, per-incidence
    /// restriction matrices, and optional per-cell inner products.
    ///
    /// Every codimension-1 incident pair of the base must get exactly one
    /// restriction of shape `stalk(coface) x stalk(face)`; inner products
    /// must be SPD within [`DEFAULT_CHECK_TOL`].
    pub fn new(
        base: CellComplex,
        stalk_dims: &HashMap<String, usize>,
        restrictions: &HashMap<(String, String), DMatrix<f64>>,
        inner_products: &HashMap<String, DMatrix<f64>>,
    ) -> Result<Self> {
        let mut dims = vec![0usize; base.len()];
        for (id, d) in stalk_dims {
            dims[base.index_of(id)?] = *d;
        }
        for cell in base.cells() {
            if !stalk_dims.contains_key(&cell.id) {
                return Err(Error::UnknownCell(format!(
                    "no stalk dimension for cell {:?}",
                    cell.id
                )));
            }
        }
        let mut maps = HashMap::new();
        for ((face, coface), m) in restrictions {
            let fi = base.index_of(face)?;
            let ci = base.index_of(coface)?;
            if base.sign(fi, ci) == 0 {
                return Err(Error::NotCodimOne {
                    face: face.clone(),
                    coface: coface.clone(),
                });
            }
            if m.nrows() != dims[ci] || m.ncols() != dims[fi] {
                return Err(Error::ShapeMismatch {
                    context: format!("restriction ({face}, {coface})"),
                    rows: m.nrows(),
                    cols: m.ncols(),
                    expected_rows: dims[ci],
                    expected_cols: dims[fi],
                });
            }
            maps.insert((fi, ci), m.clone());
        }
        for fi in 0..base.len() {
            for &(ci, _) in base.cofaces_of(fi) {
                if !maps.contains_key(&(fi, ci)) {
                    return Err(Error::MissingRestriction {
                        face: base.cell(fi).id.clone(),
                        coface: base.cell(ci).id.clone(),
                    });
                }
            }
        }
        let mut ips = vec![None; base.len()];
        for (id, m) in inner_products {
            let i = base.index_of(id)?;
            if m.nrows() != dims[i] || m.ncols() != dims[i] {
                return Err(Error::ShapeMismatch {
                    context: format!("inner product on {id}"),
                    rows: m.nrows(),
                    cols: m.ncols(),
                    expected_rows: dims[i],
                    expected_cols: dims[i],
                });
            }
            if !linalg::is_spd(m, DEFAULT_CHECK_TOL) {
                return Err(Error::NotSpd(id.clone()));
            }
            ips[i] = Some(m.clone());
        }
        Ok(CellularSheaf {
            base,
            stalk_dims: dims,
            restrictions: maps,
            inner_products: ips,
        })
    }

    /// The constant sheaf with stalk `R^d`, optionally reweighted: with cell
    /// scales `a`, the restriction on `s < t` is `(a_t / a_s) I`.
    pub fn constant(
        base: &CellComplex,
        d: usize,
        scales: Option<&HashMap<String, f64>>,
    ) -> Result<Self> {
        let alpha = |i: usize| -> Result<f64> {
            match scales.and_then(|m| m.get(&base.cell(i).id)) {
                Some(&a) if a > 0.0 => Ok(a),
                Some(_) => Err(Error::NonPositiveScale(base.cell(i).id.clone())),
                None => Ok(1.0),
            }
        };
        if let Some(m) = scales {
            for id in m.keys() {
                base.index_of(id)?;
            }
        }
        let mut restrictions = HashMap::new();
        for fi in 0..base.len() {
            for &(ci, _) in base.cofaces_of(fi) {
                let ratio = alpha(ci)? / alpha(fi)?;
                restrictions.insert((fi, ci), DMatrix::identity(d, d) * ratio);
            }
        }
        Ok(CellularSheaf {
            base: base.clone(),
            stalk_dims: vec![d; base.len()],
            restrictions,
            inner_products: vec![None; base.len()],
        })
    }

    /// An O(n)-bundle on a graph: `F_{v<e} = (a_e / a_v) R` with `R` the
    /// orthogonal matrix given for the tail (`sign -1`) or head (`sign +1`)
    /// side of each edge. Missing scales default to 1.
    pub fn orthogonal_bundle(
        base: &CellComplex,
        n: usize,
        rotations: &HashMap<String, (DMatrix<f64>, DMatrix<f64>)>,
        scales: &HashMap<String, f64>,
    ) -> Result<Self> {
        if base.top_dim().unwrap_or(0) > 1 {
            return Err(Error::NotGraph);
        }
        let alpha = |i: usize| -> Result<f64> {
            match scales.get(&base.cell(i).id) {
                Some(&a) if a > 0.0 => Ok(a),
                Some(_) => Err(Error::NonPositiveScale(base.cell(i).id.clone())),
                None => Ok(1.0),
            }
        };
        let mut restrictions = HashMap::new();
        for ei in base.cells_of_dim(1) {
            let edge = &base.cell(ei).id;
            let (r_tail, r_head) = rotations
                .get(edge)
                .ok_or_else(|| Error::MissingRestriction {
                    face: "(rotation)".into(),
                    coface: edge.clone(),
                })?;
            for r in [r_tail, r_head] {
                if r.nrows() != n || r.ncols() != n {
                    return Err(Error::ShapeMismatch {
                        context: format!("rotation on {edge}"),
                        rows: r.nrows(),
                        cols: r.ncols(),
                        expected_rows: n,
                        expected_cols: n,
                    });
                }
                let residual = linalg::orthogonality_residual(r);
                if residual > DEFAULT_CHECK_TOL {
                    return Err(Error::NotOrthogonal {
                        context: format!("rotation on {edge}"),
                        residual,
                    });
                }
            }
            for &(vi, sign) in base.faces_of(ei) {
                let r = if sign < 0 { r_tail } else { r_head };
                restrictions.insert((vi, ei), r * (alpha(ei)? / alpha(vi)?));
            }
        }
        Ok(CellularSheaf {
            base: base.clone(),
            stalk_dims: vec![n; base.len()],
            restrictions,
            inner_products: vec![None; base.len()],
        })
    }

    /// Direct sum: stalks concatenate and restrictions become block diagonal.
    pub fn direct_sum(&self, other: &CellularSheaf) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        let dims: Vec<usize> = (0..self.base.len())
            .map(|i| self.stalk_dims[i] + other.stalk_dims[i])
            .collect();
        let mut restrictions = HashMap::new();
        for (&(fi, ci), a) in &self.restrictions {
            let b = &other.restrictions[&(fi, ci)];
            let mut m = DMatrix::zeros(dims[ci], a.ncols() + b.ncols());
            m.view_mut((0, 0), a.shape()).copy_from(a);
            m.view_mut(a.shape(), b.shape()).copy_from(b);
            restrictions.insert((fi, ci), m);
        }
        let inner_products = (0..self.base.len())
            .map(|i| match (&self.inner_products[i], &other.inner_products[i]) {
                (None, None) => None,
                (a, b) => {
                    let ma = a.clone().unwrap_or_else(|| {
                        DMatrix::identity(self.stalk_dims[i], self.stalk_dims[i])
                    });
                    let mb = b.clone().unwrap_or_else(|| {
                        DMatrix::identity(other.stalk_dims[i], other.stalk_dims[i])
                    });
                    let mut m = DMatrix::zeros(dims[i], dims[i]);
                    m.view_mut((0, 0), ma.shape()).copy_from(&ma);
                    m.view_mut(ma.shape(), mb.shape()).copy_from(&mb);
                    Some(m)
                }
            })
            .collect();
        Ok(CellularSheaf {
            base: self.base.clone(),
            stalk_dims: dims,
            restrictions,
            inner_products,
        })
    }

    /// Tensor product: stalk dimensions multiply and restrictions become
    /// Kronecker products, as do the inner products.
    pub fn tensor(&self, other: &CellularSheaf) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        let dims: Vec<usize> = (0..self.base.len())
            .map(|i| self.stalk_dims[i] * other.stalk_dims[i])
            .collect();
        let mut restrictions = HashMap::new();
        for (&(fi, ci), a) in &self.restrictions {
            restrictions.insert((fi, ci), a.kronecker(&other.restrictions[&(fi, ci)]));
        }
        let inner_products = (0..self.base.len())
            .map(|i| match (&self.inner_products[i], &other.inner_products[i]) {
                (None, None) => None,
                (a, b) => {
                    let ma = a.clone().unwrap_or_else(|| {
                        DMatrix::identity(self.stalk_dims[i], self.stalk_dims[i])
                    });
                    let mb = b.clone().unwrap_or_else(|| {
                        DMatrix::identity(other.stalk_dims[i], other.stalk_dims[i])
                    });
                    Some(ma.kronecker(&mb))
                }
            })
            .collect();
        Ok(CellularSheaf {
            base: self.base.clone(),
            stalk_dims: dims,
            restrictions,
            inner_products,
        })
    }

    /// Pullback along a cell map into this sheaf's base: stalks and
    /// restrictions are copied along the map, with identities over pairs the
    /// map collapses.
    pub fn pullback(&self, map: &CellMap) -> Result<Self> {
        if *map.target() != self.base {
            return Err(Error::BaseMismatch);
        }
        map.validate()?;
        let source = map.source();
        let dims: Vec<usize> = (0..source.len())
            .map(|i| self.stalk_dims[map.image(i)])
            .collect();
        let mut restrictions = HashMap::new();
        for fi in 0..source.len() {
            for &(ci, _) in source.cofaces_of(fi) {
                let (gf, gc) = (map.image(fi), map.image(ci));
                let m = if gf == gc {
                    DMatrix::identity(dims[ci], dims[fi])
                } else {
                    self.restrictions[&(gf, gc)].clone()
                };
                restrictions.insert((fi, ci), m);
            }
        }
        let inner_products = (0..source.len())
            .map(|i| self.inner_products[map.image(i)].clone())
            .collect();
        Ok(CellularSheaf {
            base: source.clone(),
            stalk_dims: dims,
            restrictions,
            inner_products,
        })
    }

    /// Pushforward along a locally injective, dimension-preserving cell map
    /// out of this sheaf's base. Stalks become direct sums over fibers and
    /// restriction blocks sit on matching fiber pairs.
    pub fn pushforward(&self, map: &CellMap) -> Result<Self> {
        if *map.source() != self.base {
            return Err(Error::BaseMismatch);
        }
        map.validate()?;
        map.require_dimension_preserving()?;
        map.require_locally_injective()?;
        let target = map.target();
        let fibers = map.fibers();
        let dims: Vec<usize> = (0..target.len())
            .map(|t| fibers[t].iter().map(|&s| self.stalk_dims[s]).sum())
            .collect();
        let offsets: Vec<Vec<usize>> = (0..target.len())
            .map(|t| {
                let mut off = Vec::with_capacity(fibers[t].len());
                let mut acc = 0;
                for &s in &fibers[t] {
                    off.push(acc);
                    acc += self.stalk_dims[s];
                }
                off
            })
            .collect();
        let mut restrictions = HashMap::new();
        for fi in 0..target.len() {
            for &(ci, _) in target.cofaces_of(fi) {
                let mut m = DMatrix::zeros(dims[ci], dims[fi]);
                for (a, &sf) in fibers[fi].iter().enumerate() {
                    for (b, &sc) in fibers[ci].iter().enumerate() {
                        if self.base.sign(sf, sc) != 0 {
                            let block = &self.restrictions[&(sf, sc)];
                            m.view_mut((offsets[ci][b], offsets[fi][a]), block.shape())
                                .copy_from(block);
                        }
                    }
                }
                restrictions.insert((fi, ci), m);
            }
        }
        let inner_products = (0..target.len())
            .map(|t| {
                if fibers[t].iter().all(|&s| self.inner_products[s].is_none()) {
                    None
                } else {
                    let mut m = DMatrix::zeros(dims[t], dims[t]);
                    for (a, &s) in fibers[t].iter().enumerate() {
                        let block = self.inner_products[s].clone().unwrap_or_else(|| {
                            DMatrix::identity(self.stalk_dims[s], self.stalk_dims[s])
                        });
                        m.view_mut((offsets[t][a], offsets[t][a]), block.shape())
                            .copy_from(&block);
                    }
                    Some(m)
                }
            })
            .collect();
        Ok(CellularSheaf {
            base: target.clone(),
            stalk_dims: dims,
            restrictions,
            inner_products,
        })
    }

    /// External product on the product complex: the stalk over `(a,b)` is
    /// `F(a) (x) G(b)`, and restrictions are `F_{a<a'} (x) G_{b<b'}` with an
    /// identity on whichever factor stays fixed.
    pub fn external_product(&self, other: &CellularSheaf) -> Result<Self> {
        let base = self.base.product(&other.base)?;
        let name = |a: &str, b: &str| format!("({a},{b})");
        let mut dims = vec![0usize; base.len()];
        let mut ips = vec![None; base.len()];
        for (ai, a) in self.base.cells().iter().enumerate() {
            for (bi, b) in other.base.cells().iter().enumerate() {
                let i = base.index_of(&name(&a.id, &b.id))?;
                dims[i] = self.stalk_dims[ai] * other.stalk_dims[bi];
                ips[i] = match (&self.inner_products[ai], &other.inner_products[bi]) {
                    (None, None) => None,
                    (ma, mb) => {
                        let ma = ma.clone().unwrap_or_else(|| {
                            DMatrix::identity(self.stalk_dims[ai], self.stalk_dims[ai])
                        });
                        let mb = mb.clone().unwrap_or_else(|| {
                            DMatrix::identity(other.stalk_dims[bi], other.stalk_dims[bi])
                        });
                        Some(ma.kronecker(&mb))
                    }
                };
            }
        }
        let mut restrictions = HashMap::new();
        for (ai, a) in self.base.cells().iter().enumerate() {
            for (bi, b) in other.base.cells().iter().enumerate() {
                let fi = base.index_of(&name(&a.id, &b.id))?;
                for &(aci, _) in self.base.cofaces_of(ai) {
                    let ci = base.index_of(&name(&self.base.cell(aci).id, &b.id))?;
                    let block = self.restrictions[&(ai, aci)]
                        .kronecker(&DMatrix::identity(other.stalk_dims[bi], other.stalk_dims[bi]));
                    restrictions.insert((fi, ci), block);
                }
                for &(bci, _) in other.base.cofaces_of(bi) {
                    let ci = base.index_of(&name(&a.id, &other.base.cell(bci).id))?;
                    let block = DMatrix::identity(self.stalk_dims[ai], self.stalk_dims[ai])
                        .kronecker(&other.restrictions[&(bi, bci)]);
                    restrictions.insert((fi, ci), block);
                }
            }
        }
        Ok(CellularSheaf {
            base,
            stalk_dims: dims,
            restrictions,
            inner_products: ips,
        })
    }

    pub fn base(&self) -> &CellComplex {
        &self.base
    }

    pub fn stalk_dim(&self, cell: usize) -> usize {
        self.stalk_dims[cell]
    }

    pub fn stalk_dims(&self) -> &[usize] {
        &self.stalk_dims
    }

    pub fn restriction(&self, face: usize, coface: usize) -> &DMatrix<f64> {
        &self.restrictions[&(face, coface)]
    }

    /// Inner product matrix on a stalk; `None` means identity.
    pub fn inner_product(&self, cell: usize) -> Option<&DMatrix<f64>> {
        self.inner_products[cell].as_ref()
    }

    pub fn has_nontrivial_inner_products(&self) -> bool {
        self.inner_products.iter().any(|m| m.is_some())
    }

    /// Total stalk dimension over cells of dimension `k`.
    pub fn cochain_dim(&self, k: usize) -> usize {
        self.base
            .cells_of_dim(k)
            .iter()
            .map(|&i| self.stalk_dims[i])
            .sum()
    }

    /// Returns a copy with the given per-cell inner products replaced.
    pub(crate) fn with_inner_products(&self, ips: Vec<Option<DMatrix<f64>>>) -> Self {
        CellularSheaf {
            base: self.base.clone(),
            stalk_dims: self.stalk_dims.clone(),
            restrictions: self.restrictions.clone(),
            inner_products: ips,
        }
    }

    /// Returns a copy with one restriction map replaced.
    pub fn with_restriction(&self, face: &str, coface: &str, m: DMatrix<f64>) -> Result<Self> {
        let fi = self.base.index_of(face)?;
        let ci = self.base.index_of(coface)?;
        if self.base.sign(fi, ci) == 0 {
            return Err(Error::NotCodimOne {
                face: face.into(),
                coface: coface.into(),
            });
        }
        if m.nrows() != self.stalk_dims[ci] || m.ncols() != self.stalk_dims[fi] {
            return Err(Error::ShapeMismatch {
                context: format!("restriction ({face}, {coface})"),
                rows: m.nrows(),
                cols: m.ncols(),
                expected_rows: self.stalk_dims[ci],
                expected_cols: self.stalk_dims[fi],
            });
        }
        let mut out = self.clone();
        out.restrictions.insert((fi, ci), m);
        Ok(out)
    }
}

/// An explicit cell map between complexes, given as a cell-to-cell table.
#[derive(Debug, Clone)]
pub struct CellMap {
    source: CellComplex,
    target: CellComplex,
    image: Vec<usize>,
}

impl CellMap {
    pub fn new(
        source: CellComplex,
        target: CellComplex,
        assignments: &HashMap<String, String>,
    ) -> Result<Self> {
        let mut image = vec![0usize; source.len()];
        for (i, cell) in source.cells().iter().enumerate() {
            let to = assignments
                .get(&cell.id)
                .ok_or_else(|| Error::UnknownCell(cell.id.clone()))?;
            image[i] = target.index_of(to)?;
        }
        Ok(CellMap {
            source,
            target,
            image,
        })
    }

    pub fn identity(complex: &CellComplex) -> Self {
        CellMap {
            source: complex.clone(),
            target: complex.clone(),
            image: (0..complex.len()).collect(),
        }
    }

    pub fn source(&self) -> &CellComplex {
        &self.source
    }

    pub fn target(&self) -> &CellComplex {
        &self.target
    }

    pub fn image(&self, cell: usize) -> usize {
        self.image[cell]
    }

    /// Checks that every incident codimension-1 pair maps either to equal
    /// cells or to an incident pair with the same sign.
    pub fn validate(&self) -> Result<()> {
        for fi in 0..self.source.len() {
            for &(ci, sign) in self.source.cofaces_of(fi) {
                let (gf, gc) = (self.image[fi], self.image[ci]);
                if gf == gc {
                    continue;
                }
                if self.target.sign(gf, gc) != sign {
                    return Err(Error::InvalidCellMap {
                        face: self.source.cell(fi).id.clone(),
                        coface: self.source.cell(ci).id.clone(),
                        image_face: self.target.cell(gf).id.clone(),
                        image_coface: self.target.cell(gc).id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_dimension_preserving(&self) -> bool {
        (0..self.source.len())
            .all(|i| self.source.dim_of(i) == self.target.dim_of(self.image[i]))
    }

    pub fn require_dimension_preserving(&self) -> Result<()> {
        for i in 0..self.source.len() {
            if self.source.dim_of(i) != self.target.dim_of(self.image[i]) {
                return Err(Error::NotDimensionPreserving(
                    self.source.cell(i).id.clone(),
                ));
            }
        }
        Ok(())
    }

    /// Fiber `f^{-1}(t)` for every target cell, in source order.
    pub fn fibers(&self) -> Vec<Vec<usize>> {
        let mut fibers = vec![Vec::new(); self.target.len()];
        for (s, &t) in self.image.iter().enumerate() {
            fibers[t].push(s);
        }
        fibers
    }

    /// Local injectivity: over every target cell, the open stars of the fiber
    /// cells are pairwise disjoint and the map is injective on each of them.
    pub fn require_locally_injective(&self) -> Result<()> {
        for (t, fiber) in self.fibers().iter().enumerate() {
            let mut seen: HashSet<usize> = HashSet::new();
            for &s in fiber {
                let star = self.source.star(s);
                let mut images = HashSet::new();
                for &c in &star {
                    if !seen.insert(c) || !images.insert(self.image[c]) {
                        return Err(Error::NotLocallyInjective(
                            self.target.cell(t).id.clone(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Covering check: locally injective, dimension-preserving, surjective,
    /// and each fiber star maps onto the full star of its image.
    pub fn require_covering(&self) -> Result<()> {
        self.require_dimension_preserving()?;
        self.require_locally_injective()?;
        let fibers = self.fibers();
        for (t, fiber) in fibers.iter().enumerate() {
            if fiber.is_empty() {
                return Err(Error::NotCovering(self.target.cell(t).id.clone()));
            }
            let target_star: HashSet<usize> = self.target.star(t).into_iter().collect();
            for &s in fiber {
                let image_star: HashSet<usize> =
                    self.source.star(s).iter().map(|&c| self.image[c]).collect();
                if image_star != target_star {
                    return Err(Error::NotCovering(self.target.cell(t).id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Fiber sizes per dimension, requiring them constant within each
    /// dimension present in the target.
    pub fn constant_fiber_sizes(&self) -> Result<HashMap<usize, usize>> {
        let fibers = self.fibers();
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for (t, fiber) in fibers.iter().enumerate() {
            let d = self.target.dim_of(t);
            match sizes.get(&d) {
                None => {
                    sizes.insert(d, fiber.len());
                }
                Some(&l) if l == fiber.len() => {}
                Some(_) => return Err(Error::NonConstantFiber(d)),
            }
        }
        Ok(sizes)
    }
}

/// A morphism of sheaves over a shared base: one component matrix per cell.
#[derive(Debug, Clone)]
pub struct SheafMorphism {
    source: CellularSheaf,
    target: CellularSheaf,
    components: Vec<DMatrix<f64>>,
}

/// One non-commuting square of a morphism check.
#[derive(Debug, Clone)]
pub struct MorphismViolation {
    pub face: String,
    pub coface: String,
    pub residual: f64,
}

impl SheafMorphism {
    pub fn new(
        source: CellularSheaf,
        target: CellularSheaf,
        components: &HashMap<String, DMatrix<f64>>,
    ) -> Result<Self> {
        if source.base != target.base {
            return Err(Error::BaseMismatch);
        }
        let mut comps = Vec::with_capacity(source.base.len());
        for (i, cell) in source.base.cells().iter().enumerate() {
            let m = components
                .get(&cell.id)
                .ok_or_else(|| Error::UnknownCell(cell.id.clone()))?;
            if m.nrows() != target.stalk_dims[i] || m.ncols() != source.stalk_dims[i] {
                return Err(Error::ShapeMismatch {
                    context: format!("morphism component on {}", cell.id),
                    rows: m.nrows(),
                    cols: m.ncols(),
                    expected_rows: target.stalk_dims[i],
                    expected_cols: source.stalk_dims[i],
                });
            }
            comps.push(m.clone());
        }
        Ok(SheafMorphism {
            source,
            target,
            components: comps,
        })
    }

    pub fn identity(sheaf: &CellularSheaf) -> Self {
        let components = (0..sheaf.base.len())
            .map(|i| DMatrix::identity(sheaf.stalk_dims[i], sheaf.stalk_dims[i]))
            .collect();
        SheafMorphism {
            source: sheaf.clone(),
            target: sheaf.clone(),
            components,
        }
    }

    pub fn source(&self) -> &CellularSheaf {
        &self.source
    }

    pub fn target(&self) -> &CellularSheaf {
        &self.target
    }

    pub fn component(&self, cell: usize) -> &DMatrix<f64> {
        &self.components[cell]
    }

    /// Lists every square `phi_t F_{s<t} = G_{s<t} phi_s` whose operator-norm
    /// residual exceeds `tol`.
    pub fn validate(&self, tol: f64) -> Vec<MorphismViolation> {
        let base = &self.source.base;
        let mut out = Vec::new();
        for fi in 0..base.len() {
            for &(ci, _) in base.cofaces_of(fi) {
                let lhs = &self.components[ci] * self.source.restriction(fi, ci);
                let rhs = self.target.restriction(fi, ci) * &self.components[fi];
                let residual = linalg::operator_norm(&(lhs - rhs));
                if residual > tol {
                    out.push(MorphismViolation {
                        face: base.cell(fi).id.clone(),
                        coface: base.cell(ci).id.clone(),
                        residual,
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p2() -> CellComplex {
        CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap()
    }

    fn k3() -> CellComplex {
        CellComplex::build_graph(
            &["v1", "v2", "v3"],
            &[("e1", "v1", "v2"), ("e2", "v2", "v3"), ("e3", "v1", "v3")],
        )
        .unwrap()
    }

    #[test]
    fn constant_on_p2() {
        let f = CellularSheaf::constant(&p2(), 1, None).unwrap();
        let e = f.base().index_of("e").unwrap();
        for v in f.base().cells_of_dim(0) {
            assert_eq!(f.restriction(v, e), &DMatrix::from_element(1, 1, 1.0));
        }
    }

    #[test]
    fn constant_with_edge_scale() {
        let scales = HashMap::from([("e1".to_string(), 2.0)]);
        let f = CellularSheaf::constant(&k3(), 2, Some(&scales)).unwrap();
        let e1 = f.base().index_of("e1").unwrap();
        for &(v, _) in f.base().faces_of(e1) {
            assert_eq!(f.restriction(v, e1), &(DMatrix::identity(2, 2) * 2.0));
        }
        let bad = HashMap::from([("e1".to_string(), -1.0)]);
        assert!(CellularSheaf::constant(&k3(), 2, Some(&bad)).is_err());
    }

    #[test]
    fn zero_sheaf() {
        let f = CellularSheaf::constant(&k3(), 0, None).unwrap();
        assert_eq!(f.cochain_dim(0), 0);
        assert_eq!(f.cochain_dim(1), 0);
    }

    #[test]
    fn sum_and_tensor_dims() {
        let f = CellularSheaf::constant(&k3(), 2, None).unwrap();
        let g = CellularSheaf::constant(&k3(), 3, None).unwrap();
        let s = f.direct_sum(&g).unwrap();
        let t = f.tensor(&g).unwrap();
        for i in 0..s.base().len() {
            assert_eq!(s.stalk_dim(i), 5);
            assert_eq!(t.stalk_dim(i), 6);
        }
    }

    #[test]
    fn sum_with_zero_is_identity() {
        let f = CellularSheaf::constant(&k3(), 2, None).unwrap();
        let z = CellularSheaf::constant(&k3(), 0, None).unwrap();
        let s = f.direct_sum(&z).unwrap();
        for fi in 0..f.base().len() {
            assert_eq!(s.stalk_dim(fi), f.stalk_dim(fi));
            for &(ci, _) in f.base().cofaces_of(fi) {
                assert_eq!(s.restriction(fi, ci), f.restriction(fi, ci));
            }
        }
    }

    #[test]
    fn tensor_of_constants_is_constant() {
        let f = CellularSheaf::constant(&k3(), 1, None).unwrap();
        let t = f.tensor(&f).unwrap();
        let e1 = t.base().index_of("e1").unwrap();
        for &(v, _) in t.base().faces_of(e1) {
            assert_eq!(t.restriction(v, e1), &DMatrix::identity(1, 1));
        }
    }

    #[test]
    fn base_mismatch_rejected() {
        let f = CellularSheaf::constant(&k3(), 1, None).unwrap();
        let g = CellularSheaf::constant(&p2(), 1, None).unwrap();
        assert!(matches!(f.direct_sum(&g), Err(Error::BaseMismatch)));
    }

    #[test]
    fn pullback_along_identity() {
        let f = CellularSheaf::constant(&k3(), 2, None).unwrap();
        let id = CellMap::identity(f.base());
        let g = f.pullback(&id).unwrap();
        let e1 = g.base().index_of("e1").unwrap();
        for &(v, _) in g.base().faces_of(e1) {
            assert_eq!(g.restriction(v, e1), f.restriction(v, e1));
        }
    }

    #[test]
    fn pullback_of_constant_along_cycle_cover() {
        // C6 double-covering C3; orientations chosen consistently.
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
        let map = CellMap::new(c6.clone(), c3.clone(), &assignments).unwrap();
        map.require_covering().unwrap();
        let g = CellularSheaf::constant(&c3, 1, None).unwrap();
        let pulled = g.pullback(&map).unwrap();
        for fi in 0..pulled.base().len() {
            for &(ci, _) in pulled.base().cofaces_of(fi) {
                assert_eq!(pulled.restriction(fi, ci), &DMatrix::identity(1, 1));
            }
        }
    }

    #[test]
    fn invalid_vertex_collapse_rejected() {
        // Send e to a vertex while its endpoints map to different vertices.
        let x = p2();
        let y = CellComplex::build_graph(&["w1", "w2"], &[("f", "w1", "w2")]).unwrap();
        let assignments = HashMap::from([
            ("v1".to_string(), "w1".to_string()),
            ("v2".to_string(), "w2".to_string()),
            ("e".to_string(), "w1".to_string()),
        ]);
        let map = CellMap::new(x, y, &assignments).unwrap();
        assert!(matches!(map.validate(), Err(Error::InvalidCellMap { .. })));
    }

    #[test]
    fn pushforward_of_two_copies() {
        // Two disjoint copies of P2 folded onto P2: stalks become R^2 with
        // diagonal restrictions.
        let x = CellComplex::build_graph(
            &["a1", "a2", "b1", "b2"],
            &[("ea", "a1", "a2"), ("eb", "b1", "b2")],
        )
        .unwrap();
        let y = p2();
        let assignments = HashMap::from([
            ("a1".to_string(), "v1".to_string()),
            ("a2".to_string(), "v2".to_string()),
            ("b1".to_string(), "v1".to_string()),
            ("b2".to_string(), "v2".to_string()),
            ("ea".to_string(), "e".to_string()),
            ("eb".to_string(), "e".to_string()),
        ]);
        let map = CellMap::new(x.clone(), y.clone(), &assignments).unwrap();
        let f = CellularSheaf::constant(&x, 1, None).unwrap();
        let pushed = f.pushforward(&map).unwrap();
        let e = pushed.base().index_of("e").unwrap();
        for &(v, _) in pushed.base().faces_of(e) {
            assert_eq!(pushed.stalk_dim(v), 2);
            assert_eq!(pushed.restriction(v, e), &DMatrix::identity(2, 2));
        }
        // Total stalk dimension per degree is preserved.
        assert_eq!(pushed.cochain_dim(0), f.cochain_dim(0));
        assert_eq!(pushed.cochain_dim(1), f.cochain_dim(1));
    }

    #[test]
    fn pushforward_along_identity_is_identity() {
        let f = CellularSheaf::constant(&k3(), 2, None).unwrap();
        let id = CellMap::identity(f.base());
        let pushed = f.pushforward(&id).unwrap();
        for fi in 0..f.base().len() {
            assert_eq!(pushed.stalk_dim(fi), f.stalk_dim(fi));
            for &(ci, _) in f.base().cofaces_of(fi) {
                assert_eq!(pushed.restriction(fi, ci), f.restriction(fi, ci));
            }
        }
    }

    #[test]
    fn fold_edge_onto_vertex_not_locally_injective() {
        let x = p2();
        let y = CellComplex::build_graph(&["w"], &[]).unwrap();
        let assignments = HashMap::from([
            ("v1".to_string(), "w".to_string()),
            ("v2".to_string(), "w".to_string()),
            ("e".to_string(), "w".to_string()),
        ]);
        let map = CellMap::new(x, y, &assignments).unwrap();
        assert!(map.require_dimension_preserving().is_err());
        assert!(map.require_locally_injective().is_err());
    }

    #[test]
    fn external_product_of_constants() {
        let f = CellularSheaf::constant(&p2(), 1, None).unwrap();
        let prod = f.external_product(&f).unwrap();
        for fi in 0..prod.base().len() {
            assert_eq!(prod.stalk_dim(fi), 1);
            for &(ci, _) in prod.base().cofaces_of(fi) {
                assert_eq!(prod.restriction(fi, ci), &DMatrix::identity(1, 1));
            }
        }
    }

    #[test]
    fn orthogonal_bundle_basics() {
        let theta: f64 = 0.7;
        let rot = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let rotations =
            HashMap::from([("e".to_string(), (rot.clone(), DMatrix::identity(2, 2)))]);
        let f =
            CellularSheaf::orthogonal_bundle(&p2(), 2, &rotations, &HashMap::new()).unwrap();
        let e = f.base().index_of("e").unwrap();
        let v1 = f.base().index_of("v1").unwrap();
        assert_relative_eq!((f.restriction(v1, e) - rot).norm(), 0.0, epsilon = 1e-12);

        let skewed = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let bad = HashMap::from([("e".to_string(), (skewed, DMatrix::identity(2, 2)))]);
        assert!(matches!(
            CellularSheaf::orthogonal_bundle(&p2(), 2, &bad, &HashMap::new()),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn bundle_with_identity_rotations_is_constant() {
        let rotations = HashMap::from([
            ("e".to_string(), (DMatrix::identity(1, 1), DMatrix::identity(1, 1))),
        ]);
        let f =
            CellularSheaf::orthogonal_bundle(&p2(), 1, &rotations, &HashMap::new()).unwrap();
        let e = f.base().index_of("e").unwrap();
        for &(v, _) in f.base().faces_of(e) {
            assert_eq!(f.restriction(v, e), &DMatrix::identity(1, 1));
        }
    }

    #[test]
    fn identity_morphism_validates() {
        let f = CellularSheaf::constant(&k3(), 2, None).unwrap();
        let phi = SheafMorphism::identity(&f);
        assert!(phi.validate(1e-10).is_empty());
    }

    #[test]
    fn perturbed_morphism_reports_violation() {
        let f = CellularSheaf::constant(&k3(), 2, None).unwrap();
        let mut components: HashMap<String, DMatrix<f64>> = f
            .base()
            .cells()
            .iter()
            .map(|c| (c.id.clone(), DMatrix::identity(2, 2)))
            .collect();
        components.insert("v1".to_string(), DMatrix::identity(2, 2) * 1.5);
        let phi = SheafMorphism::new(f.clone(), f, &components).unwrap();
        let report = phi.validate(1e-10);
        assert!(!report.is_empty());
        assert!(report.iter().all(|v| v.residual > 0.4));
    }

    #[test]
    fn missing_restriction_rejected() {
        let base = p2();
        let stalk_dims = HashMap::from([
            ("v1".to_string(), 1),
            ("v2".to_string(), 1),
            ("e".to_string(), 1),
        ]);
        let restrictions = HashMap::from([(
            ("v1".to_string(), "e".to_string()),
            DMatrix::identity(1, 1),
        )]);
        let err =
            CellularSheaf::new(base, &stalk_dims, &restrictions, &HashMap::new()).unwrap_err();
        assert!(matches!(err, Error::MissingRestriction { .. }));
    }
}
