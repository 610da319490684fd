//! Regular cell complexes as graded face posets with signed incidence.
//!
//! A complex is a finite list of cells, each with an explicit dimension, plus
//! a signed incidence record for codimension-1 pairs only. The full face
//! relation is the transitive closure of those pairs. The signed-incidence
//! condition `sum_g [s:g][g:t] = 0` over all codimension-2 pairs is what makes
//! coboundary operators square to zero; [`CellComplex::validate_incidence`]
//! reports every violation.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// One cell: an opaque id plus an explicit dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: String,
    pub dim: usize,
}

/// A finite regular cell complex, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComplex {
    cells: Vec<Cell>,
    index: HashMap<String, usize>,
    /// Per cell, the (coface index, sign) pairs one dimension up.
    cofaces: Vec<Vec<(usize, i8)>>,
    /// Per cell, the (face index, sign) pairs one dimension down.
    faces: Vec<Vec<(usize, i8)>>,
}

/// A single violation of the signed-incidence condition.
#[derive(Debug, Clone)]
pub struct IncidenceViolation {
    pub face: String,
    pub coface: String,
    /// The offending value of `sum_g [face:g][g:coface]`.
    pub sum: i64,
}

impl CellComplex {
    /// Builds a complex from raw cell and incidence lists.
    ///
    /// Incidence entries are `(face id, coface id, sign)` with the coface one
    /// dimension above the face and sign in `{-1, +1}`. The signed-incidence
    /// condition is *not* enforced here; use [`Self::validate_incidence`].
    pub fn from_cells(
        cells: Vec<(String, usize)>,
        incidence: Vec<(String, String, i8)>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(cells.len());
        let cells: Vec<Cell> = cells
            .into_iter()
            .map(|(id, dim)| Cell { id, dim })
            .collect();
        for (i, cell) in cells.iter().enumerate() {
            if index.insert(cell.id.clone(), i).is_some() {
                return Err(Error::DuplicateCell(cell.id.clone()));
            }
        }
        let mut cofaces = vec![Vec::new(); cells.len()];
        let mut faces = vec![Vec::new(); cells.len()];
        let mut seen = HashSet::new();
        for (face, coface, sign) in incidence {
            let fi = *index
                .get(&face)
                .ok_or_else(|| Error::UnknownCell(face.clone()))?;
            let ci = *index
                .get(&coface)
                .ok_or_else(|| Error::UnknownCell(coface.clone()))?;
            if cells[ci].dim != cells[fi].dim + 1 {
                return Err(Error::NotCodimOne { face, coface });
            }
            if sign != 1 && sign != -1 {
                return Err(Error::BadSign { face, coface });
            }
            if !seen.insert((fi, ci)) {
                return Err(Error::DuplicateCell(format!("incidence ({face}, {coface})")));
            }
            cofaces[fi].push((ci, sign));
            faces[ci].push((fi, sign));
        }
        Ok(CellComplex {
            cells,
            index,
            cofaces,
            faces,
        })
    }

    /// A graph as a 1-dimensional complex: `[tail:e] = -1`, `[head:e] = +1`.
    ///
    /// Parallel edges are allowed; self-loops are rejected because a regular
    /// 1-cell has two distinct faces.
    pub fn build_graph(
        vertex_ids: &[&str],
        edges: &[(&str, &str, &str)],
    ) -> Result<Self> {
        let mut cells: Vec<(String, usize)> =
            vertex_ids.iter().map(|v| (v.to_string(), 0)).collect();
        let mut incidence = Vec::with_capacity(edges.len() * 2);
        for (id, tail, head) in edges {
            if tail == head {
                return Err(Error::SelfLoop(tail.to_string()));
            }
            cells.push((id.to_string(), 1));
            incidence.push((tail.to_string(), id.to_string(), -1));
            incidence.push((head.to_string(), id.to_string(), 1));
        }
        Self::from_cells(cells, incidence)
    }

    /// The simplicial complex generated by the given maximal simplices, with
    /// the alternating orientation `[s:t] = (-1)^i` where `s` omits the i-th
    /// vertex of `t` in sorted order. Cell ids are the sorted vertex lists
    /// joined by `|`.
    pub fn build_simplicial(maximal_simplices: &[Vec<&str>]) -> Result<Self> {
        let mut simplices: HashSet<Vec<String>> = HashSet::new();
        for simplex in maximal_simplices {
            let mut verts: Vec<String> = simplex.iter().map(|v| v.to_string()).collect();
            let before = verts.len();
            verts.sort();
            verts.dedup();
            if verts.len() != before {
                let dup = simplex
                    .iter()
                    .find(|v| simplex.iter().filter(|w| w == v).count() > 1)
                    .unwrap();
                return Err(Error::RepeatedVertex(dup.to_string()));
            }
            // Generate every nonempty subset as a face.
            let n = verts.len();
            for mask in 1u32..(1 << n) {
                let face: Vec<String> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| verts[i].clone())
                    .collect();
                simplices.insert(face);
            }
        }
        let mut sorted: Vec<Vec<String>> = simplices.into_iter().collect();
        sorted.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        let name = |verts: &[String]| verts.join("|");
        let cells: Vec<(String, usize)> = sorted
            .iter()
            .map(|verts| (name(verts), verts.len() - 1))
            .collect();
        let mut incidence = Vec::new();
        for verts in &sorted {
            if verts.len() < 2 {
                continue;
            }
            for omit in 0..verts.len() {
                let face: Vec<String> = verts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != omit)
                    .map(|(_, v)| v.clone())
                    .collect();
                let sign = if omit % 2 == 0 { 1 } else { -1 };
                incidence.push((name(&face), name(verts), sign));
            }
        }
        Self::from_cells(cells, incidence)
    }

    /// Removes an upward-closed set of cells, keeping inherited signs.
    pub fn delete_upward_closed(&self, delete: &HashSet<String>) -> Result<Self> {
        for id in delete {
            let i = self.index_of(id)?;
            for &(ci, _) in &self.cofaces[i] {
                if !delete.contains(&self.cells[ci].id) {
                    return Err(Error::NotUpwardClosed {
                        member: id.clone(),
                        coface: self.cells[ci].id.clone(),
                    });
                }
            }
        }
        let cells = self
            .cells
            .iter()
            .filter(|c| !delete.contains(&c.id))
            .map(|c| (c.id.clone(), c.dim))
            .collect();
        let incidence = self
            .incidence_triples()
            .into_iter()
            .filter(|(f, c, _)| !delete.contains(f) && !delete.contains(c))
            .collect();
        Self::from_cells(cells, incidence)
    }

    /// The product complex: cells `(a,b)` with additive dimension and Koszul
    /// signs `[(a,b):(a',b)] = [a:a']` and `[(a,b):(a,b')] = (-1)^{dim a}[b:b']`.
    pub fn product(&self, other: &CellComplex) -> Result<Self> {
        let name = |a: &str, b: &str| format!("({a},{b})");
        let mut cells = Vec::with_capacity(self.len() * other.len());
        for a in &self.cells {
            for b in &other.cells {
                cells.push((name(&a.id, &b.id), a.dim + b.dim));
            }
        }
        let mut incidence = Vec::new();
        for a in &self.cells {
            let ai = self.index[&a.id];
            for b in &other.cells {
                let bi = other.index[&b.id];
                for &(ci, sign) in &self.cofaces[ai] {
                    incidence.push((
                        name(&a.id, &b.id),
                        name(&self.cells[ci].id, &b.id),
                        sign,
                    ));
                }
                let koszul = if a.dim % 2 == 0 { 1 } else { -1 };
                for &(ci, sign) in &other.cofaces[bi] {
                    incidence.push((
                        name(&a.id, &b.id),
                        name(&a.id, &other.cells[ci].id),
                        koszul * sign,
                    ));
                }
            }
        }
        Self::from_cells(cells, incidence)
    }

    /// Lists every codimension-2 pair violating `sum_g [s:g][g:t] = 0`.
    pub fn validate_incidence(&self) -> Vec<IncidenceViolation> {
        let mut violations = Vec::new();
        for (si, s) in self.cells.iter().enumerate() {
            // Candidate cofaces two dimensions up, reached through any middle cell.
            let mut sums: HashMap<usize, i64> = HashMap::new();
            for &(gi, s_to_g) in &self.cofaces[si] {
                for &(ti, g_to_t) in &self.cofaces[gi] {
                    *sums.entry(ti).or_insert(0) += (s_to_g as i64) * (g_to_t as i64);
                }
            }
            let mut keys: Vec<usize> = sums.keys().copied().collect();
            keys.sort();
            for ti in keys {
                if sums[&ti] != 0 {
                    violations.push(IncidenceViolation {
                        face: s.id.clone(),
                        coface: self.cells[ti].id.clone(),
                        sum: sums[&ti],
                    });
                }
            }
        }
        violations
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Largest cell dimension, or `None` for the empty complex.
    pub fn top_dim(&self) -> Option<usize> {
        self.cells.iter().map(|c| c.dim).max()
    }

    /// Indices of the cells of dimension `k`, in insertion order.
    pub fn cells_of_dim(&self, k: usize) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i].dim == k)
            .collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownCell(id.to_string()))
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn dim_of(&self, i: usize) -> usize {
        self.cells[i].dim
    }

    pub fn cofaces_of(&self, i: usize) -> &[(usize, i8)] {
        &self.cofaces[i]
    }

    pub fn faces_of(&self, i: usize) -> &[(usize, i8)] {
        &self.faces[i]
    }

    /// Incidence sign `[face:coface]`, or 0 when not codimension-1 incident.
    pub fn sign(&self, face: usize, coface: usize) -> i8 {
        self.cofaces[face]
            .iter()
            .find(|(c, _)| *c == coface)
            .map(|(_, s)| *s)
            .unwrap_or(0)
    }

    /// All incidence triples `(face, coface, sign)` by id.
    pub fn incidence_triples(&self) -> Vec<(String, String, i8)> {
        let mut out = Vec::new();
        for (fi, list) in self.cofaces.iter().enumerate() {
            for &(ci, sign) in list {
                out.push((self.cells[fi].id.clone(), self.cells[ci].id.clone(), sign));
            }
        }
        out
    }

    /// Whether `set` is upward-closed (contains all cofaces of its members).
    pub fn is_upward_closed(&self, set: &HashSet<String>) -> Result<bool> {
        for id in set {
            let i = self.index_of(id)?;
            for &(ci, _) in &self.cofaces[i] {
                if !set.contains(&self.cells[ci].id) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Whether `set` is downward-closed, i.e. spans a subcomplex.
    pub fn is_subcomplex(&self, set: &HashSet<String>) -> Result<bool> {
        for id in set {
            let i = self.index_of(id)?;
            for &(fi, _) in &self.faces[i] {
                if !set.contains(&self.cells[fi].id) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// The open star of a cell: the cell itself plus every iterated coface.
    pub fn star(&self, i: usize) -> Vec<usize> {
        let mut seen = HashSet::new();
        let mut stack = vec![i];
        while let Some(j) = stack.pop() {
            if seen.insert(j) {
                for &(ci, _) in &self.cofaces[j] {
                    stack.push(ci);
                }
            }
        }
        let mut out: Vec<usize> = seen.into_iter().collect();
        out.sort();
        out
    }

    /// Connectivity of the vertex-edge graph restricted to `vertices`
    /// (all vertices of the complex when `None`).
    pub fn is_graph_connected(&self, vertices: Option<&HashSet<usize>>) -> bool {
        let verts: Vec<usize> = self
            .cells_of_dim(0)
            .into_iter()
            .filter(|i| vertices.is_none_or(|s| s.contains(i)))
            .collect();
        if verts.len() <= 1 {
            return true;
        }
        let allowed: HashSet<usize> = verts.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut stack = vec![verts[0]];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            for &(e, _) in &self.cofaces[v] {
                if self.cells[e].dim != 1 {
                    continue;
                }
                for &(w, _) in &self.faces[e] {
                    if allowed.contains(&w) && !seen.contains(&w) {
                        stack.push(w);
                    }
                }
            }
        }
        seen.len() == verts.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(set: &[&str]) -> HashSet<String> {
        set.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn p2_signs() {
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let v1 = x.index_of("v1").unwrap();
        let v2 = x.index_of("v2").unwrap();
        let e = x.index_of("e").unwrap();
        assert_eq!(x.sign(v1, e), -1);
        assert_eq!(x.sign(v2, e), 1);
        assert!(x.validate_incidence().is_empty());
    }

    #[test]
    fn k3_counts() {
        let x = CellComplex::build_graph(
            &["v1", "v2", "v3"],
            &[("e1", "v1", "v2"), ("e2", "v2", "v3"), ("e3", "v1", "v3")],
        )
        .unwrap();
        assert_eq!(x.cells_of_dim(0).len(), 3);
        assert_eq!(x.cells_of_dim(1).len(), 3);
        let n_incidences: usize = (0..x.len()).map(|i| x.cofaces_of(i).len()).sum();
        assert_eq!(n_incidences, 6);
    }

    #[test]
    fn self_loop_rejected() {
        let err = CellComplex::build_graph(&["v1"], &[("e", "v1", "v1")]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop(_)));
    }

    #[test]
    fn filled_triangle_is_valid() {
        let x = CellComplex::build_simplicial(&[vec!["a", "b", "c"]]).unwrap();
        assert_eq!(x.cells_of_dim(0).len(), 3);
        assert_eq!(x.cells_of_dim(1).len(), 3);
        assert_eq!(x.cells_of_dim(2).len(), 1);
        assert!(x.validate_incidence().is_empty());
    }

    #[test]
    fn simplicial_path() {
        let x = CellComplex::build_simplicial(&[vec!["a", "b"], vec!["b", "c"]]).unwrap();
        assert_eq!(x.cells_of_dim(0).len(), 3);
        assert_eq!(x.cells_of_dim(1).len(), 2);
    }

    #[test]
    fn repeated_vertex_rejected() {
        let err = CellComplex::build_simplicial(&[vec!["a", "a", "b"]]).unwrap_err();
        assert!(matches!(err, Error::RepeatedVertex(_)));
    }

    #[test]
    fn flipped_sign_detected() {
        let x = CellComplex::build_simplicial(&[vec!["a", "b", "c"]]).unwrap();
        let mut triples = x.incidence_triples();
        for t in triples.iter_mut() {
            if t.0 == "a" && t.1 == "a|b" {
                t.2 = -t.2;
            }
        }
        let cells = x.cells().iter().map(|c| (c.id.clone(), c.dim)).collect();
        let broken = CellComplex::from_cells(cells, triples).unwrap();
        let report = broken.validate_incidence();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].sum.abs(), 2);
    }

    #[test]
    fn graphs_have_no_codim2_pairs() {
        let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        assert!(x.validate_incidence().is_empty());
    }

    #[test]
    fn delete_edge_from_k3() {
        let x = CellComplex::build_graph(
            &["v1", "v2", "v3"],
            &[("e1", "v1", "v2"), ("e2", "v2", "v3"), ("e3", "v1", "v3")],
        )
        .unwrap();
        let y = x.delete_upward_closed(&ids(&["e3"])).unwrap();
        assert_eq!(y.cells_of_dim(0).len(), 3);
        assert_eq!(y.cells_of_dim(1).len(), 2);
        assert!(y.validate_incidence().is_empty());

        let err = x.delete_upward_closed(&ids(&["v1"])).unwrap_err();
        assert!(matches!(err, Error::NotUpwardClosed { .. }));
    }

    #[test]
    fn delete_top_cell() {
        let x = CellComplex::build_simplicial(&[vec!["a", "b", "c"]]).unwrap();
        let y = x.delete_upward_closed(&ids(&["a|b|c"])).unwrap();
        assert_eq!(y.top_dim(), Some(1));
        assert_eq!(y.cells_of_dim(1).len(), 3);
        assert!(y.validate_incidence().is_empty());
    }

    #[test]
    fn product_square() {
        let p2 = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let sq = p2.product(&p2).unwrap();
        assert_eq!(sq.cells_of_dim(0).len(), 4);
        assert_eq!(sq.cells_of_dim(1).len(), 4);
        assert_eq!(sq.cells_of_dim(2).len(), 1);
        assert!(sq.validate_incidence().is_empty());
    }

    #[test]
    fn product_with_point() {
        let p2 = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).unwrap();
        let point = CellComplex::build_graph(&["p"], &[]).unwrap();
        let prod = p2.product(&point).unwrap();
        assert_eq!(prod.len(), p2.len());
        assert_eq!(prod.cells_of_dim(0).len(), 2);
        assert_eq!(prod.cells_of_dim(1).len(), 1);
    }

    #[test]
    fn product_p3_p2() {
        // Hand count: 3*2 = 6 vertices, 2*2 + 3*1 = 7 edges, 2*1 = 2 squares.
        let p3 = CellComplex::build_graph(
            &["a", "b", "c"],
            &[("ab", "a", "b"), ("bc", "b", "c")],
        )
        .unwrap();
        let p2 = CellComplex::build_graph(&["x", "y"], &[("xy", "x", "y")]).unwrap();
        let prod = p3.product(&p2).unwrap();
        assert_eq!(prod.cells_of_dim(0).len(), 6);
        assert_eq!(prod.cells_of_dim(1).len(), 7);
        assert_eq!(prod.cells_of_dim(2).len(), 2);
        assert_eq!(prod.len(), p3.len() * p2.len());
        assert!(prod.validate_incidence().is_empty());
    }

    #[test]
    fn star_of_vertex() {
        let x = CellComplex::build_simplicial(&[vec!["a", "b", "c"]]).unwrap();
        let a = x.index_of("a").unwrap();
        // a itself, two incident edges, and the triangle.
        assert_eq!(x.star(a).len(), 4);
    }
}
