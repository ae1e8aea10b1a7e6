//! Floating-point eigendecomposition of graph Laplacians and the numeric
//! perfect-controllability test (distinct eigenvalues, eigenvectors without
//! zero entries).

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, Laplacian, Node};

/// Relative threshold below which an eigenvector entry is flagged as zero.
pub const DEFAULT_TOL_ZERO: f64 = 1e-8;
/// Gap tolerance scale; the effective gap tolerance is this times `max(1, λ_max)`.
pub const DEFAULT_TOL_GAP_SCALE: f64 = 1e-8;
/// Width (as a factor) of the indeterminate band around each tolerance.
pub const INDETERMINATE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpectralError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector of `eigenvalues[k]`; its first
    /// non-negligible entry is positive.
    pub eigenvectors: DMatrix<f64>,
    /// Smallest consecutive eigenvalue difference (`+∞` for a single node).
    pub min_gap: f64,
    /// Smallest `|v_jk|` over all entries.
    pub min_abs_entry: f64,
    /// `zero_flags[k][j]`: entry `j` of eigenvector `k` is below
    /// `DEFAULT_TOL_ZERO · ‖v_k‖∞`.
    pub zero_flags: Vec<Vec<bool>>,
    /// `max_k ‖L v_k − λ_k v_k‖∞`.
    pub max_residual: f64,
    /// `64 · n · u · (1 + ρ(L))` with `u` the unit roundoff.
    pub residual_bound: f64,
}

impl SpectralReport {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// Smallest `|v_jk| / ‖v_k‖∞`, with the eigenvalue index and 1-based node
    /// where it occurs.
    pub fn min_relative_entry(&self) -> (f64, usize, Node) {
        let mut best = (f64::INFINITY, 0, 1);
        for k in 0..self.len() {
            let col = self.eigenvectors.column(k);
            let norm = col.amax();
            for (j, v) in col.iter().enumerate() {
                let rel = if norm > 0.0 { v.abs() / norm } else { 0.0 };
                if rel < best.0 {
                    best = (rel, k, j + 1);
                }
            }
        }
        best
    }

    /// Eigenvalues to four decimals, ascending, comma separated.
    pub fn render_eigenvalues(&self) -> String {
        format_spectrum(&self.eigenvalues)
    }
}

pub fn format_spectrum(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| {
            // avoid printing "-0.0000"
            let v = if v.abs() < 5e-5 { 0.0 } else { *v };
            format!("{v:.4}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Symmetric eigendecomposition of a Laplacian with eigenvalues sorted
/// ascending and a deterministic sign convention.
pub fn eigendecompose(laplacian: &Laplacian) -> Result<SpectralReport, SpectralError> {
    let m = laplacian.matrix();
    if !m.is_square() {
        return Err(SpectralError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    if !m.is_symmetric() {
        return Err(SpectralError::NotSymmetric);
    }
    let a = m.to_f64();
    Ok(decompose_symmetric(&a))
}

/// Sorted, sign-normalized decomposition of a symmetric `f64` matrix.
pub(crate) fn decompose_symmetric(a: &DMatrix<f64>) -> SpectralReport {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let norm = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > DEFAULT_TOL_ZERO * norm) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }

    let min_gap = eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let min_abs_entry = vectors.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let zero_flags = (0..n)
        .map(|k| {
            let col = vectors.column(k);
            let norm = col.amax();
            col.iter().map(|v| v.abs() <= DEFAULT_TOL_ZERO * norm).collect()
        })
        .collect();
    let mut max_residual: f64 = 0.0;
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        let v = vectors.column(k);
        let r = a * v - v * lambda;
        max_residual = max_residual.max(r.amax());
    }
    let rho = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let unit_roundoff = f64::EPSILON / 2.0;
    let residual_bound = 64.0 * n as f64 * unit_roundoff * (1.0 + rho);

    SpectralReport {
        eigenvalues,
        eigenvectors: vectors,
        min_gap,
        min_abs_entry,
        zero_flags,
        max_residual,
        residual_bound,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericTolerances {
    /// Absolute eigengap tolerance; `None` means `1e-8 · max(1, λ_max)`.
    pub gap: Option<f64>,
    /// Relative eigenvector-entry tolerance (against the vector's ∞-norm).
    pub zero: f64,
}

impl Default for NumericTolerances {
    fn default() -> Self {
        Self { gap: None, zero: DEFAULT_TOL_ZERO }
    }
}

impl NumericTolerances {
    pub fn gap_for(&self, lambda_max: f64) -> f64 {
        self.gap.unwrap_or(DEFAULT_TOL_GAP_SCALE * lambda_max.max(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Perfect,
    NotPerfect,
    IndeterminateNumeric,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Perfect => "perfect",
            Verdict::NotPerfect => "not-perfect",
            Verdict::IndeterminateNumeric => "indeterminate-numeric",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reason {
    RepeatedEigenvalue,
    ZeroEigenvectorEntry,
    Ok,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::RepeatedEigenvalue => "repeated-eigenvalue",
            Reason::ZeroEigenvectorEntry => "zero-eigenvector-entry",
            Reason::Ok => "ok",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Witness {
    /// Two consecutive eigenvalues that coincide.
    RepeatedEigenvalue(f64, f64),
    /// Eigenvalue whose eigenvector vanishes at `node`.
    ZeroEntry { eigenvalue: f64, node: Node },
}

/// Four decimals without trailing zeros: `1`, `2.4142`.
fn short(v: f64) -> String {
    let v = if v.abs() < 5e-5 { 0.0 } else { v };
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::RepeatedEigenvalue(a, b) => write!(f, "eigenvalues {} and {}", short(*a), short(*b)),
            Witness::ZeroEntry { eigenvalue, node } => write!(f, "eigenvalue {}, node {node}", short(*eigenvalue)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcVerdict {
    pub verdict: Verdict,
    pub reason: Reason,
    pub witness: Option<Witness>,
    /// `min(min_gap, min_abs_entry)`.
    pub margin: f64,
    pub min_gap: f64,
    pub min_relative_entry: f64,
    pub tol_gap: f64,
    pub tol_zero: f64,
}

impl PcVerdict {
    pub fn is_decided(&self) -> bool {
        self.verdict != Verdict::IndeterminateNumeric
    }
}

fn in_band(value: f64, tol: f64) -> bool {
    value > tol / INDETERMINATE_FACTOR && value < tol * INDETERMINATE_FACTOR
}

/// Numeric perfect-controllability verdict from an eigendecomposition.
///
/// Quantities within a factor of ten of their tolerance are reported as
/// indeterminate so that the float path never certifies a knife-edge case.
pub fn check_perfect_numeric(g: &Graph, tol: &NumericTolerances) -> PcVerdict {
    let report = eigendecompose(&g.laplacian()).expect("graph Laplacians are symmetric");
    verdict_from_report(&report, tol)
}

pub fn verdict_from_report(report: &SpectralReport, tol: &NumericTolerances) -> PcVerdict {
    let tol_gap = tol.gap_for(report.lambda_max());
    let tol_zero = tol.zero;
    let (min_rel, k_rel, node_rel) = report.min_relative_entry();
    let base = PcVerdict {
        verdict: Verdict::Perfect,
        reason: Reason::Ok,
        witness: None,
        margin: report.min_gap.min(report.min_abs_entry),
        min_gap: report.min_gap,
        min_relative_entry: min_rel,
        tol_gap,
        tol_zero,
    };

    if report.min_gap <= tol_gap / INDETERMINATE_FACTOR {
        let k = report
            .eigenvalues
            .windows(2)
            .position(|w| w[1] - w[0] == report.min_gap)
            .expect("minimum gap comes from some window");
        return PcVerdict {
            verdict: Verdict::NotPerfect,
            reason: Reason::RepeatedEigenvalue,
            witness: Some(Witness::RepeatedEigenvalue(report.eigenvalues[k], report.eigenvalues[k + 1])),
            ..base
        };
    }
    if in_band(report.min_gap, tol_gap) {
        return PcVerdict { verdict: Verdict::IndeterminateNumeric, ..base };
    }
    if min_rel <= tol_zero / INDETERMINATE_FACTOR {
        return PcVerdict {
            verdict: Verdict::NotPerfect,
            reason: Reason::ZeroEigenvectorEntry,
            witness: Some(Witness::ZeroEntry { eigenvalue: report.eigenvalues[k_rel], node: node_rel }),
            ..base
        };
    }
    if in_band(min_rel, tol_zero) {
        return PcVerdict { verdict: Verdict::IndeterminateNumeric, ..base };
    }
    base
}

/// Multi-line human-readable rendering used by `pcgraph check`.
pub fn render_numeric(report: &SpectralReport, verdict: &PcVerdict) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "numeric verdict: {} ({})", verdict.verdict, verdict.reason);
    if let Some(w) = verdict.witness {
        let _ = writeln!(s, "  witness: {w}");
    }
    let _ = writeln!(s, "  spectrum: {}", report.render_eigenvalues());
    let _ = writeln!(
        s,
        "  min_gap={:e} min_relative_entry={:e} margin={:e}",
        verdict.min_gap, verdict.min_relative_entry, verdict.margin
    );
    let _ = writeln!(s, "  tol_gap={:e} tol_zero={:e}", verdict.tol_gap, verdict.tol_zero);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::IntMatrix;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn k2_decomposition() {
        let r = eigendecompose(&Graph::complete(2).unwrap().laplacian()).unwrap();
        assert!(close(r.eigenvalues[0], 0.0, 1e-12) && close(r.eigenvalues[1], 2.0, 1e-12));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = r.eigenvector(0);
        let v1 = r.eigenvector(1);
        assert!(close(v0[0], s, 1e-12) && close(v0[1], s, 1e-12));
        assert!(close(v1[0], s, 1e-12) && close(v1[1], -s, 1e-12));
        assert!(r.max_residual <= r.residual_bound);
    }

    #[test]
    fn k3_and_p3_spectra() {
        let k3 = eigendecompose(&Graph::complete(3).unwrap().laplacian()).unwrap();
        for (got, want) in k3.eigenvalues.iter().zip([0.0, 3.0, 3.0]) {
            assert!(close(*got, want, 1e-12));
        }
        // L v = λ v check for P3, eigenvalue 1 with v ∝ (1, 0, -1)
        let p3 = eigendecompose(&Graph::path(3).unwrap().laplacian()).unwrap();
        for (got, want) in p3.eigenvalues.iter().zip([0.0, 1.0, 3.0]) {
            assert!(close(*got, want, 1e-12));
        }
        let v = p3.eigenvector(1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(v[0], s, 1e-12) && close(v[1], 0.0, 1e-12) && close(v[2], -s, 1e-12));
        assert!(p3.zero_flags[1][1]);
        assert!(!p3.zero_flags[1][0]);
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = IntMatrix::from_rows(&[vec![1, -1], vec![0, 0]]);
        assert_eq!(eigendecompose(&Laplacian::from_matrix_unchecked(m)).unwrap_err(), SpectralError::NotSymmetric);
    }

    #[test]
    fn numeric_verdicts() {
        let tol = NumericTolerances::default();
        let k2 = check_perfect_numeric(&Graph::complete(2).unwrap(), &tol);
        assert_eq!(k2.verdict, Verdict::Perfect);
        assert!(close(k2.min_gap, 2.0, 1e-12));
        assert!(k2.margin > k2.tol_gap);

        let k3 = check_perfect_numeric(&Graph::complete(3).unwrap(), &tol);
        assert_eq!((k3.verdict, k3.reason), (Verdict::NotPerfect, Reason::RepeatedEigenvalue));
        match k3.witness {
            Some(Witness::RepeatedEigenvalue(a, b)) => assert!(close(a, 3.0, 1e-9) && close(b, 3.0, 1e-9)),
            other => panic!("unexpected witness {other:?}"),
        }

        let p3 = check_perfect_numeric(&Graph::path(3).unwrap(), &tol);
        assert_eq!((p3.verdict, p3.reason), (Verdict::NotPerfect, Reason::ZeroEigenvectorEntry));
        match p3.witness {
            Some(Witness::ZeroEntry { eigenvalue, node }) => {
                assert!(close(eigenvalue, 1.0, 1e-9));
                assert_eq!(node, 2);
            }
            other => panic!("unexpected witness {other:?}"),
        }
        assert_eq!(p3.witness.unwrap().to_string(), "eigenvalue 1, node 2");
    }

    #[test]
    fn single_node_is_perfect() {
        let v = check_perfect_numeric(&Graph::new(1).unwrap(), &NumericTolerances::default());
        assert_eq!(v.verdict, Verdict::Perfect);
    }

    #[test]
    fn knife_edge_is_indeterminate() {
        // P4 has min |entry| ratio ≈ 0.414; a tolerance near it lands in the band.
        let g = Graph::path(4).unwrap();
        let tol = NumericTolerances { gap: None, zero: 0.1 };
        assert_eq!(check_perfect_numeric(&g, &tol).verdict, Verdict::IndeterminateNumeric);
        let tol = NumericTolerances { gap: Some(0.3), zero: 1e-8 };
        assert_eq!(check_perfect_numeric(&g, &tol).verdict, Verdict::IndeterminateNumeric);
    }

    #[test]
    fn rendering() {
        let r = eigendecompose(&Graph::path(3).unwrap().laplacian()).unwrap();
        assert_eq!(r.render_eigenvalues(), "0.0000, 1.0000, 3.0000");
    }
}
