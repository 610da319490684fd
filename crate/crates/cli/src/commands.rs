//! Command implementations: parse a document, forward to one library
//! operation, and shape the outcome into a report document.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use sheaflap::dynamics;
use sheaflap::harmonic::{self, BoundaryProblem};
use sheaflap::hodge;
use sheaflap::resistance;
use sheaflap::sheaf::CellularSheaf;
use sheaflap::spectral;

use crate::format::{self, Document, SchemaError};
use crate::json::Json;

/// Outcome of a command: the report document plus the exit status
/// (0 success, 1 validation failure).
pub struct Outcome {
    pub report: Json,
    pub failed: bool,
}

impl Outcome {
    fn ok(report: Json) -> Outcome {
        Outcome {
            report,
            failed: false,
        }
    }
}

/// Any failure that should surface as exit code 1 with a structured report.
pub enum CommandError {
    Schema(SchemaError),
    Library(sheaflap::Error),
}

impl From<SchemaError> for CommandError {
    fn from(e: SchemaError) -> Self {
        CommandError::Schema(e)
    }
}

impl From<sheaflap::Error> for CommandError {
    fn from(e: sheaflap::Error) -> Self {
        CommandError::Library(e)
    }
}

impl CommandError {
    pub fn report(&self, command: &str) -> Json {
        let (kind, message, path) = match self {
            CommandError::Schema(e) => ("schema", e.message.clone(), Some(e.path.clone())),
            CommandError::Library(e) => ("operation", e.to_string(), None),
        };
        let mut body = Json::object()
            .with("command", command)
            .with("error", Json::object().with("kind", kind).with("message", message));
        if let (Json::Object(fields), Some(p)) = (&mut body, path) {
            if let Some((_, Json::Object(err_fields))) =
                fields.iter_mut().find(|(k, _)| k == "error")
            {
                err_fields.push(("path".into(), Json::Str(p)));
            }
        }
        wrap_report(body, Vec::new())
    }
}

type CmdResult = Result<Outcome, CommandError>;

fn wrap_report(report: Json, extra_sections: Vec<(&str, Json)>) -> Json {
    let mut root = Json::object().with("version", format::VERSION);
    root.push("report", report);
    for (key, value) in extra_sections {
        root.push(key, value);
    }
    root
}

fn load_sheaf(doc: &Document) -> Result<CellularSheaf, CommandError> {
    let complex = format::build_complex(doc)?;
    Ok(format::build_sheaf(doc, &complex)?)
}

fn id_set(ids: &[String]) -> HashSet<String> {
    ids.iter().cloned().collect()
}

fn matrix_json(m: &DMatrix<f64>) -> Json {
    Json::Array(
        (0..m.nrows())
            .map(|r| Json::Array((0..m.ncols()).map(|c| Json::Float(m[(r, c)])).collect()))
            .collect(),
    )
}

fn spectrum_json(spec: &spectral::Spectrum) -> Json {
    Json::object()
        .with("eigenvalues", spec.eigenvalues.clone())
        .with("zero_tol", spec.zero_tol)
}

/// `validate`: incidence sign condition, sheaf well-formedness, and the
/// square-to-zero residual of adjacent coboundaries.
pub fn validate(doc: &Document, tol: Option<f64>) -> CmdResult {
    let tol = tol.unwrap_or(1e-10);
    let complex = format::build_complex(doc)?;
    let incidence = complex.validate_incidence();
    let mut body = Json::object().with("command", "validate");
    body.push(
        "incidence_violations",
        Json::Array(
            incidence
                .iter()
                .map(|v| {
                    Json::object()
                        .with("face", v.face.as_str())
                        .with("coface", v.coface.as_str())
                        .with("sum", v.sum)
                })
                .collect(),
        ),
    );
    let mut failed = !incidence.is_empty();
    if doc.sheaf.is_some() {
        match format::build_sheaf(doc, &complex) {
            Err(e) => {
                body.push(
                    "sheaf_error",
                    Json::object().with("path", e.path).with("message", e.message),
                );
                failed = true;
            }
            Ok(sheaf) => {
                let top = complex.top_dim().unwrap_or(0);
                let mut residuals = Vec::new();
                for k in 0..top.max(1) {
                    let lower = hodge::coboundary(&sheaf, k);
                    let upper = hodge::coboundary(&sheaf, k + 1);
                    let residual = (&upper.matrix * &lower.matrix).norm();
                    residuals.push(Json::object().with("degree", k).with("residual", residual));
                    if residual > tol {
                        failed = true;
                    }
                }
                body.push("coboundary_square_residuals", Json::Array(residuals));
            }
        }
    }
    body.push("valid", !failed);
    Ok(Outcome {
        report: wrap_report(body, Vec::new()),
        failed,
    })
}

pub enum SpectrumKind {
    Up,
    Down,
    Full,
}

/// `spectrum`: eigenvalues of the chosen degree-k Laplacian.
pub fn spectrum_cmd(
    doc: &Document,
    degree: usize,
    kind: SpectrumKind,
    normalized: bool,
    tol: Option<f64>,
) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let (op, kind_name) = if normalized {
        (hodge::normalized_laplacian(&sheaf, tol)?, "normalized")
    } else {
        match kind {
            SpectrumKind::Up => (hodge::up_laplacian(&sheaf, degree)?, "up"),
            SpectrumKind::Down => (hodge::down_laplacian(&sheaf, degree)?, "down"),
            SpectrumKind::Full => (hodge::hodge_laplacian(&sheaf, degree)?, "full"),
        }
    };
    let spec = spectral::spectrum(&op)?;
    let body = Json::object()
        .with("command", "spectrum")
        .with("degree", degree)
        .with("kind", kind_name)
        .with("spectrum", spectrum_json(&spec));
    Ok(Outcome::ok(wrap_report(body, Vec::new())))
}

/// `harmonic`: orthonormal harmonic basis and the cohomology dimension.
pub fn harmonic_cmd(doc: &Document, degree: usize, tol: Option<f64>) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let basis = hodge::harmonic_cochains(&sheaf, degree, tol)?;
    let body = Json::object()
        .with("command", "harmonic")
        .with("degree", degree)
        .with("cohomology_dim", basis.len())
        .with(
            "basis",
            Json::Array(
                basis
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        format::cochain_json(&format::cochain_to_section(
                            &sheaf,
                            &format!("h{i}"),
                            c,
                        ))
                    })
                    .collect(),
            ),
        );
    Ok(Outcome::ok(wrap_report(body, Vec::new())))
}

/// `extend`: harmonic extension of named boundary values.
pub fn extend_cmd(
    doc: &Document,
    boundary: &[String],
    values_name: &str,
    _tol: Option<f64>,
) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let section = format::find_cochain(doc, values_name)?;
    let blocks = format::cochain_blocks(section);
    let boundary_set = id_set(boundary);
    let values: HashMap<String, _> = blocks
        .into_iter()
        .filter(|(cell, _)| boundary_set.contains(cell))
        .collect();
    let problem = BoundaryProblem::new(&sheaf, section.degree, boundary_set, values);
    let ext = harmonic::harmonic_extension(&problem)?;
    let body = Json::object()
        .with("command", "extend")
        .with("degree", section.degree)
        .with("unique", ext.unique)
        .with(
            "extension",
            format::cochain_json(&format::cochain_to_section(&sheaf, "extension", &ext.cochain)),
        );
    Ok(Outcome::ok(wrap_report(body, Vec::new())))
}

/// `kron`: Schur complement onto the boundary blocks, plus the realized
/// reduced sheaf when the vertex stalks are at most one-dimensional.
pub fn kron_cmd(doc: &Document, boundary: &[String], _tol: Option<f64>) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let l = hodge::up_laplacian(&sheaf, 0)?;
    let boundary_set = id_set(boundary);
    let reduced = harmonic::kron_reduce_matrix(&l, &boundary_set)?;
    let mut body = Json::object()
        .with("command", "kron")
        .with("boundary", reduced.rows.cells().to_vec())
        .with("reduced_matrix", matrix_json(&reduced.matrix));
    let mut sections = Vec::new();
    match harmonic::kron_reduce_sheaf(&sheaf, &boundary_set) {
        Ok(result) => {
            body.push("realized", true);
            body.push("realization_residual", result.residual);
            let out = format::sheaf_to_document(&result.sheaf);
            sections.push(("complex", format::complex_json(&out.complex)));
            sections.push(("sheaf", format::sheaf_json(out.sheaf.as_ref().unwrap())));
        }
        Err(e) => {
            body.push("realized", false);
            body.push("obstruction", e.to_string());
        }
    }
    Ok(Outcome::ok(wrap_report(body, sections)))
}

/// `resistance --cell`: the resistance form of one cell.
pub fn resistance_cell_cmd(doc: &Document, cell: &str, tol: Option<f64>) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let form = resistance::cell_resistance(&sheaf, cell, tol)?;
    let body = Json::object()
        .with("command", "resistance")
        .with("cell", cell)
        .with("matrix", matrix_json(&form.matrix))
        .with("trace", form.trace());
    Ok(Outcome::ok(wrap_report(body, Vec::new())))
}

/// `resistance --between`: effective resistance between two named cycles.
pub fn resistance_between_cmd(
    doc: &Document,
    a_name: &str,
    b_name: &str,
    tol: Option<f64>,
) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let a_section = format::find_cochain(doc, a_name)?;
    let b_section = format::find_cochain(doc, b_name)?;
    if a_section.degree != b_section.degree {
        return Err(SchemaError {
            path: "$.cochains".into(),
            message: format!(
                "cycles have different degrees: {} vs {}",
                a_section.degree, b_section.degree
            ),
        }
        .into());
    }
    let k = a_section.degree;
    let a = hodge::cochain_from_blocks(&sheaf, k, &format::cochain_blocks(a_section))?;
    let b = hodge::cochain_from_blocks(&sheaf, k, &format::cochain_blocks(b_section))?;
    let value = resistance::effective_resistance(&sheaf, k, &a, &b, tol)?;
    let least_norm = resistance::effective_resistance_least_norm(&sheaf, k, &a, &b, tol)?;
    let body = Json::object()
        .with("command", "resistance")
        .with("between", vec![a_name.to_string(), b_name.to_string()])
        .with("degree", k)
        .with("resistance", value)
        .with("least_norm_value", least_norm);
    Ok(Outcome::ok(wrap_report(body, Vec::new())))
}

/// `sparsify`: random subcomplex with rescaled restriction maps.
pub fn sparsify_cmd(doc: &Document, epsilon: f64, seed: u64) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let (sum, n) = resistance::resistance_trace_sum(&sheaf)?;
    let (sparse, report) = resistance::sparsify(&sheaf, epsilon, seed)?;
    let body = Json::object()
        .with("command", "sparsify")
        .with("epsilon", report.epsilon)
        .with("seed", report.seed)
        .with("generator", "chacha8")
        .with("n", report.n)
        .with("total_cells", report.total_cells)
        .with("kept_cells", report.kept_cells)
        .with("resistance_trace_sum", sum)
        .with("foster_bound", n)
        .with("probabilities", report.probabilities.clone())
        .with("min_relative_eigenvalue", report.min_relative_eigenvalue)
        .with("max_relative_eigenvalue", report.max_relative_eigenvalue)
        .with("within_guarantee", report.within_guarantee);
    let out = format::sheaf_to_document(&sparse);
    let sections = vec![
        ("complex", format::complex_json(&out.complex)),
        ("sheaf", format::sheaf_json(out.sheaf.as_ref().unwrap())),
    ];
    Ok(Outcome::ok(wrap_report(body, sections)))
}

/// `diffuse`: explicit-Euler Laplacian flow from a named initial cochain.
pub fn diffuse_cmd(
    doc: &Document,
    degree: usize,
    dt: f64,
    steps: usize,
    x0_name: &str,
) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let section = format::find_cochain(doc, x0_name)?;
    if section.degree != degree {
        return Err(SchemaError {
            path: "$.cochains".into(),
            message: format!(
                "cochain {x0_name:?} has degree {}, expected {degree}",
                section.degree
            ),
        }
        .into());
    }
    let x0 = hodge::cochain_from_blocks(&sheaf, degree, &format::cochain_blocks(section))?;
    let run = dynamics::diffuse(&sheaf, degree, &x0, dt, steps)?;
    let final_state = run.trajectory.last().unwrap();
    let body = Json::object()
        .with("command", "diffuse")
        .with("degree", degree)
        .with("dt", dt)
        .with("steps", steps)
        .with("energies", run.energies.clone())
        .with("projection_distance", run.projection_distance)
        .with(
            "final",
            format::cochain_json(&format::cochain_to_section(&sheaf, "final", final_state)),
        );
    Ok(Outcome::ok(wrap_report(body, Vec::new())))
}

/// `approx-const`: build the approximation described by the spec document.
pub fn approx_const_cmd(doc: &Document) -> CmdResult {
    let complex = format::build_complex(doc)?;
    let spec = format::build_approximation(doc, &complex)?;
    let approx = dynamics::approximate_constant_sheaf(&spec)?;
    let cutsets = dynamics::check_cutset_condition(&spec, None)?;
    let mut body = Json::object()
        .with("command", "approx-const")
        .with("section_dim", spec.section_dim)
        .with("is_valid", approx.is_valid)
        .with("cohomology_dim", hodge::cohomology_dim(&approx.sheaf, 0, None)?);
    body.push(
        "cutsets",
        Json::object()
            .with("cap", cutsets.cap)
            .with("checked", cutsets.checked)
            .with("passes", cutsets.passes)
            .with(
                "violations",
                Json::Array(
                    cutsets
                        .violations
                        .iter()
                        .map(|v| {
                            Json::object()
                                .with("cutset", v.cutset.clone())
                                .with("intersection_dim", v.intersection_dim)
                        })
                        .collect(),
                ),
            ),
    );
    let out = format::sheaf_to_document(&approx.sheaf);
    let sections = vec![
        ("complex", format::complex_json(&out.complex)),
        ("sheaf", format::sheaf_json(out.sheaf.as_ref().unwrap())),
    ];
    Ok(Outcome {
        report: wrap_report(body, sections),
        failed: false,
    })
}

/// `check --interlace`: deletion interlacing for an upward-closed cell set.
pub fn check_interlace_cmd(doc: &Document, cells: &[String], degree: usize) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let report = spectral::deletion_interlacing(&sheaf, &id_set(cells), degree)?;
    let body = Json::object()
        .with("command", "check")
        .with("check", "interlace")
        .with("degree", degree)
        .with("t", report.t)
        .with("interlaced", report.interlaced)
        .with("normalized_interlaced", report.normalized_interlaced)
        .with(
            "normalized_lower_interlaced",
            report.normalized_lower_interlaced,
        )
        .with("original_spectrum", spectrum_json(&report.original))
        .with("deleted_spectrum", spectrum_json(&report.padded_deleted));
    Ok(Outcome {
        failed: !report.interlaced,
        report: wrap_report(body, Vec::new()),
    })
}

/// `check --product`: product formula against a second document.
pub fn check_product_cmd(doc: &Document, other: &Document) -> CmdResult {
    let f = load_sheaf(doc)?;
    let g = load_sheaf(other)?;
    let report = spectral::product_spectrum_check(&f, &g)?;
    let body = Json::object()
        .with("command", "check")
        .with("check", "product")
        .with("degree0_residual", report.degree0_residual)
        .with(
            "degree0_spectrum_mismatch",
            report.degree0_spectrum_mismatch,
        )
        .with("degree1_residual", report.degree1_residual)
        .with("degree1_skipped", report.degree1_skipped)
        .with("holds", report.holds);
    Ok(Outcome {
        failed: !report.holds,
        report: wrap_report(body, Vec::new()),
    })
}

/// `check --hodge-relations`: the spectrum identities at one degree.
pub fn check_hodge_relations_cmd(doc: &Document, degree: usize, tol: Option<f64>) -> CmdResult {
    let sheaf = load_sheaf(doc)?;
    let report =
        spectral::check_hodge_spectral_relations(&sheaf, degree, tol.unwrap_or(1e-8))?;
    let body = Json::object()
        .with("command", "check")
        .with("check", "hodge-relations")
        .with("degree", degree)
        .with("full_vs_parts", report.full_vs_parts)
        .with("up_vs_next_down", report.up_vs_next_down)
        .with("holds", report.holds);
    Ok(Outcome {
        failed: !report.holds,
        report: wrap_report(body, Vec::new()),
    })
}
