//! Seeded generators for random complexes, sheaves, and bundles, plus a few
//! named fixture sheaves used across tests and the command-line examples.
//!
//! Everything draws from a caller-supplied ChaCha8 generator, so instances
//! are reproducible from a seed.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::complex::CellComplex;
use crate::dynamics::ApproximationSpec;
use crate::error::Result;
use crate::linalg;
use crate::sheaf::CellularSheaf;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn path_graph(n: usize) -> CellComplex {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = vertices.iter().map(|s| s.as_str()).collect();
    let edges: Vec<(String, usize, usize)> = (0..n.saturating_sub(1))
        .map(|i| (format!("e{i}"), i, i + 1))
        .collect();
    let edge_refs: Vec<(&str, &str, &str)> = edges
        .iter()
        .map(|(id, a, b)| (id.as_str(), refs[*a], refs[*b]))
        .collect();
    CellComplex::build_graph(&refs, &edge_refs).expect("path graph")
}

pub fn cycle_graph(n: usize) -> CellComplex {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = vertices.iter().map(|s| s.as_str()).collect();
    let edges: Vec<(String, usize, usize)> =
        (0..n).map(|i| (format!("e{i}"), i, (i + 1) % n)).collect();
    let edge_refs: Vec<(&str, &str, &str)> = edges
        .iter()
        .map(|(id, a, b)| (id.as_str(), refs[*a], refs[*b]))
        .collect();
    CellComplex::build_graph(&refs, &edge_refs).expect("cycle graph")
}

/// Grid graph with `rows x cols` vertices named `v{r}_{c}`.
pub fn grid_graph(rows: usize, cols: usize) -> CellComplex {
    let mut vertices = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            vertices.push(format!("v{r}_{c}"));
        }
    }
    let refs: Vec<&str> = vertices.iter().map(|s| s.as_str()).collect();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((format!("h{r}_{c}"), r * cols + c, r * cols + c + 1));
            }
            if r + 1 < rows {
                edges.push((format!("t{r}_{c}"), r * cols + c, (r + 1) * cols + c));
            }
        }
    }
    let edge_refs: Vec<(&str, &str, &str)> = edges
        .iter()
        .map(|(id, a, b)| (id.as_str(), refs[*a], refs[*b]))
        .collect();
    CellComplex::build_graph(&refs, &edge_refs).expect("grid graph")
}

/// Vertex ids on the border of a grid built by [`grid_graph`].
pub fn grid_perimeter(rows: usize, cols: usize) -> HashSet<String> {
    let mut out = HashSet::new();
    for r in 0..rows {
        for c in 0..cols {
            if r == 0 || c == 0 || r + 1 == rows || c + 1 == cols {
                out.insert(format!("v{r}_{c}"));
            }
        }
    }
    out
}

/// The left and right columns of a grid: a thin boundary set.
pub fn grid_side_columns(rows: usize, cols: usize) -> HashSet<String> {
    let mut out = HashSet::new();
    for r in 0..rows {
        out.insert(format!("v{r}_0"));
        out.insert(format!("v{r}_{}", cols - 1));
    }
    out
}

/// Random connected graph: a shuffled spanning tree plus `extra` random
/// non-duplicate edges.
pub fn random_connected_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> CellComplex {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = vertices.iter().map(|s| s.as_str()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    for i in 1..n {
        let a = order[i];
        let b = order[rng.random_range(0..i)];
        pairs.insert((a.min(b), a.max(b)));
    }
    let mut attempts = 0;
    while pairs.len() < (n - 1) + extra && attempts < 20 * (extra + 1) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
        attempts += 1;
    }
    let mut sorted: Vec<(usize, usize)> = pairs.into_iter().collect();
    sorted.sort();
    let edges: Vec<(String, usize, usize)> = sorted
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| (format!("e{k}"), a, b))
        .collect();
    let edge_refs: Vec<(&str, &str, &str)> = edges
        .iter()
        .map(|(id, a, b)| (id.as_str(), refs[*a], refs[*b]))
        .collect();
    CellComplex::build_graph(&refs, &edge_refs).expect("random graph")
}

/// Random 2-dimensional simplicial complex on `n` vertices containing at
/// least one filled triangle.
pub fn random_simplicial_2complex(
    n: usize,
    triangles: usize,
    extra_edges: usize,
    rng: &mut ChaCha8Rng,
) -> CellComplex {
    let vertices: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut maximal: Vec<Vec<String>> = Vec::new();
    for _ in 0..triangles.max(1) {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(rng);
        maximal.push(vec![
            vertices[ids[0]].clone(),
            vertices[ids[1]].clone(),
            vertices[ids[2]].clone(),
        ]);
    }
    for _ in 0..extra_edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            maximal.push(vec![vertices[a].clone(), vertices[b].clone()]);
        }
    }
    // Connect everything with a path so vertices are never isolated.
    for i in 1..n {
        maximal.push(vec![vertices[i - 1].clone(), vertices[i].clone()]);
    }
    let refs: Vec<Vec<&str>> = maximal
        .iter()
        .map(|s| s.iter().map(|v| v.as_str()).collect())
        .collect();
    CellComplex::build_simplicial(&refs).expect("random simplicial complex")
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Random sheaf with stalk dimensions in `1..=max_dim`. On complexes with
/// 2-cells the triangle-level maps are drawn from the null space of the
/// compatibility constraints, so the coboundaries always square to zero.
pub fn random_sheaf(
    complex: &CellComplex,
    max_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CellularSheaf> {
    let mut stalk_dims: HashMap<String, usize> = HashMap::new();
    for cell in complex.cells() {
        stalk_dims.insert(cell.id.clone(), rng.random_range(1..=max_dim));
    }
    let dim = |id: &str| stalk_dims[id];
    let mut restrictions: HashMap<(String, String), DMatrix<f64>> = HashMap::new();
    // Vertex-to-edge maps are unconstrained.
    for ei in complex.cells_of_dim(1) {
        let e = complex.cell(ei).id.clone();
        for &(vi, _) in complex.faces_of(ei) {
            let v = complex.cell(vi).id.clone();
            let m = random_matrix(dim(&e), dim(&v), rng);
            restrictions.insert((v, e.clone()), m);
        }
    }
    // Edge-to-face maps must satisfy the compatibility constraints; draw
    // their rows from the null space of the per-face constraint matrix.
    for ti in complex.cells_of_dim(2) {
        let t = complex.cell(ti).id.clone();
        let edge_faces: Vec<(usize, i8)> = complex.faces_of(ti).to_vec();
        let edge_dims: Vec<usize> = edge_faces
            .iter()
            .map(|&(ei, _)| dim(&complex.cell(ei).id))
            .collect();
        let total: usize = edge_dims.iter().sum();
        // Constraint rows: one per (vertex of t, vertex coordinate).
        let mut vertex_set: Vec<usize> = Vec::new();
        for &(ei, _) in &edge_faces {
            for &(vi, _) in complex.faces_of(ei) {
                if !vertex_set.contains(&vi) {
                    vertex_set.push(vi);
                }
            }
        }
        let rows: usize = vertex_set
            .iter()
            .map(|&vi| dim(&complex.cell(vi).id))
            .sum();
        let mut constraint = DMatrix::zeros(rows, total);
        let mut row_off = 0;
        for &vi in &vertex_set {
            let v = complex.cell(vi).id.clone();
            let dv = dim(&v);
            let mut col_off = 0;
            for (pos, &(ei, e_sign)) in edge_faces.iter().enumerate() {
                let e = complex.cell(ei).id.clone();
                let v_sign = complex.sign(vi, ei);
                if v_sign != 0 {
                    let coeff = (v_sign * e_sign) as f64;
                    let vmap = &restrictions[&(v.clone(), e.clone())];
                    // Row u of the unknown map contributes <u_e, F_{v<e}[:,c]>.
                    for m in 0..edge_dims[pos] {
                        for c in 0..dv {
                            constraint[(row_off + c, col_off + m)] += coeff * vmap[(m, c)];
                        }
                    }
                }
                col_off += edge_dims[pos];
            }
            row_off += dv;
        }
        let null = linalg::nullspace(&constraint, None);
        let dt = dim(&t);
        let mut maps: Vec<DMatrix<f64>> = edge_dims
            .iter()
            .map(|&de| DMatrix::zeros(dt, de))
            .collect();
        for r in 0..dt {
            let coeffs = random_vector(null.ncols(), rng);
            let row = &null * coeffs;
            let mut col_off = 0;
            for (pos, &de) in edge_dims.iter().enumerate() {
                for m in 0..de {
                    maps[pos][(r, m)] = row[col_off + m];
                }
                col_off += de;
            }
        }
        for (pos, &(ei, _)) in edge_faces.iter().enumerate() {
            let e = complex.cell(ei).id.clone();
            restrictions.insert((e, t.clone()), maps[pos].clone());
        }
    }
    CellularSheaf::new(complex.clone(), &stalk_dims, &restrictions, &HashMap::new())
}

/// Random orthogonal 2x2 matrix: a rotation, or a reflection half the time.
pub fn random_orthogonal2(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    if rng.random_bool(0.5) {
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    } else {
        DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
    }
}

/// Random O(2)-bundle on a graph with unit vertex weights and edge weights
/// in `[0.5, 2]`.
pub fn random_o2_bundle(graph: &CellComplex, rng: &mut ChaCha8Rng) -> Result<CellularSheaf> {
    let mut rotations = HashMap::new();
    let mut scales = HashMap::new();
    for ei in graph.cells_of_dim(1) {
        let id = graph.cell(ei).id.clone();
        rotations.insert(id.clone(), (random_orthogonal2(rng), random_orthogonal2(rng)));
        scales.insert(id, rng.random_range(0.5..2.0));
    }
    CellularSheaf::orthogonal_bundle(graph, 2, &rotations, &scales)
}

/// Random approximation spec with constant kill dimension; retries until the
/// resulting sheaf is a valid approximation (or gives up).
pub fn random_valid_approximation(
    graph: &CellComplex,
    section_dim: usize,
    kill_dim: usize,
    rng: &mut ChaCha8Rng,
    max_tries: usize,
) -> Result<(ApproximationSpec, crate::dynamics::Approximation)> {
    for _ in 0..max_tries {
        let mut subspaces = HashMap::new();
        for ei in graph.cells_of_dim(1) {
            let id = graph.cell(ei).id.clone();
            let basis = random_matrix(section_dim, kill_dim, rng);
            subspaces.insert(id, basis);
        }
        let spec = ApproximationSpec::new(graph.clone(), section_dim, subspaces)?;
        let approx = crate::dynamics::approximate_constant_sheaf(&spec)?;
        if approx.is_valid {
            return Ok((spec, approx));
        }
    }
    Err(crate::error::Error::unmet(
        "no valid approximation found within the retry budget",
    ))
}

/// The star sheaf with a plane-valued centre: three leaves receive the two
/// coordinates and their sum. Its sections are determined by the centre
/// value, and the boundary traces span `{(1,1,0), (1,0,1)}` for the leaf
/// order `v1, v2, v3`.
pub fn star_projection_sheaf() -> CellularSheaf {
    let x = CellComplex::build_graph(
        &["c", "v1", "v2", "v3"],
        &[("e1", "c", "v1"), ("e2", "c", "v2"), ("e3", "c", "v3")],
    )
    .expect("star graph");
    let stalk_dims = HashMap::from([
        ("c".to_string(), 2),
        ("v1".to_string(), 1),
        ("v2".to_string(), 1),
        ("v3".to_string(), 1),
        ("e1".to_string(), 1),
        ("e2".to_string(), 1),
        ("e3".to_string(), 1),
    ]);
    let restrictions = HashMap::from([
        (
            ("c".to_string(), "e1".to_string()),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        ),
        (
            ("c".to_string(), "e2".to_string()),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        ),
        (
            ("c".to_string(), "e3".to_string()),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        ),
        (("v1".to_string(), "e1".to_string()), DMatrix::identity(1, 1)),
        (("v2".to_string(), "e2".to_string()), DMatrix::identity(1, 1)),
        (("v3".to_string(), "e3".to_string()), DMatrix::identity(1, 1)),
    ]);
    CellularSheaf::new(x, &stalk_dims, &restrictions, &HashMap::new()).expect("star sheaf")
}

/// Two plane stalks mapped into a line by partial isometries at sixty
/// degrees, with the frustration-zero cochain that defeats threshold
/// rounding.
pub fn partial_isometry_counterexample() -> (CellularSheaf, crate::hodge::Cochain) {
    let x = CellComplex::build_graph(&["v1", "v2"], &[("e", "v1", "v2")]).expect("edge");
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
    let sheaf =
        CellularSheaf::new(x, &stalk_dims, &restrictions, &HashMap::new()).expect("sheaf");
    let cochain = crate::hodge::cochain_from_blocks(
        &sheaf,
        0,
        &HashMap::from([
            ("v1".to_string(), DVector::from_column_slice(&[0.5, 0.0])),
            ("v2".to_string(), DVector::from_column_slice(&[1.0, 0.0])),
        ]),
    )
    .expect("cochain");
    (sheaf, cochain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodge;

    #[test]
    fn random_sheaves_square_to_zero() {
        let mut r = rng(11);
        for _ in 0..5 {
            let complex = random_simplicial_2complex(7, 3, 2, &mut r);
            let sheaf = random_sheaf(&complex, 3, &mut r).unwrap();
            let d0 = hodge::coboundary(&sheaf, 0);
            let d1 = hodge::coboundary(&sheaf, 1);
            let residual = (&d1.matrix * &d0.matrix).norm();
            assert!(residual < 1e-10, "d^2 residual {residual}");
        }
    }

    #[test]
    fn random_graphs_are_connected() {
        let mut r = rng(5);
        for n in [2, 5, 9] {
            let g = random_connected_graph(n, 3, &mut r);
            assert!(g.is_graph_connected(None));
        }
    }

    #[test]
    fn grid_shapes() {
        let g = grid_graph(3, 4);
        assert_eq!(g.cells_of_dim(0).len(), 12);
        assert_eq!(g.cells_of_dim(1).len(), 3 * 3 + 2 * 4);
        assert_eq!(grid_perimeter(3, 4).len(), 10);
        assert_eq!(grid_side_columns(3, 4).len(), 6);
    }

    #[test]
    fn star_fixture_traces() {
        let f = star_projection_sheaf();
        let basis = hodge::harmonic_cochains(&f, 0, None).unwrap();
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn o2_bundles_are_orthogonal() {
        let mut r = rng(3);
        let g = cycle_graph(5);
        let f = random_o2_bundle(&g, &mut r).unwrap();
        for ei in g.cells_of_dim(1) {
            for &(vi, _) in g.faces_of(ei) {
                let m = f.restriction(vi, ei);
                let scale = linalg::operator_norm(m);
                assert!(linalg::orthogonality_residual(&(m / scale)) < 1e-10);
            }
        }
    }
}
