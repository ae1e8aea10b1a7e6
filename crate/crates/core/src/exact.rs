//! Exact certification of perfect controllability with integer arithmetic.
//!
//! Condition (a): the characteristic polynomial `p(x) = det(xI − L)` is
//! squarefree, i.e. all eigenvalues are simple.
//!
//! Condition (b): for every node `j`, `gcd(p, p_j) = 1` where `p_j` is the
//! characteristic polynomial of `L` with row and column `j` deleted. For a
//! symmetric matrix with a simple eigenvalue `λ` and unit eigenvector `v`,
//! `v_j² = p_j(λ) / p′(λ)`, so `v_j = 0` exactly when `λ` is a common root.
//! Condition (b) is only meaningful once (a) holds, so it is skipped otherwise.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::graph::{Graph, Laplacian, Node};
use crate::matrix::IntMatrix;
use crate::poly::IntPolynomial;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("the zero polynomial has no squarefree decomposition")]
    ZeroPolynomial,
}

/// `det(xI − L)` by fraction-free elimination over `Z[x]`.
pub fn char_poly(l: &Laplacian) -> IntPolynomial {
    char_poly_matrix(l.matrix())
}

/// Characteristic polynomial of a square integer matrix.
///
/// Bareiss elimination on `xI − M`: the pivot after step `k` is the
/// characteristic polynomial of the leading `k+1` principal block, which is
/// monic, so no pivoting is needed and every division is exact.
pub fn char_poly_matrix(m: &IntMatrix) -> IntPolynomial {
    assert!(m.is_square(), "characteristic polynomial of a non-square matrix");
    let n = m.rows();
    if n == 0 {
        return IntPolynomial::one();
    }
    let mut a: Vec<Vec<IntPolynomial>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        IntPolynomial::linear(m[(i, i)])
                    } else {
                        IntPolynomial::constant(BigInt::from(-m[(i, j)]))
                    }
                })
                .collect()
        })
        .collect();
    let mut prev = IntPolynomial::one();
    for k in 0..n - 1 {
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        let pivot = &pivot_row[k];
        for row in tail.iter_mut() {
            let lead = row[k].clone();
            for j in k + 1..n {
                let num = &(pivot * &row[j]) - &(&lead * &pivot_row[j]);
                row[j] = num.div_exact(&prev);
            }
        }
        prev = a[k][k].clone();
    }
    a[n - 1][n - 1].clone()
}

/// `true` iff `gcd(p, p′)` is constant.
pub fn is_squarefree(p: &IntPolynomial) -> Result<bool, ExactError> {
    if p.is_zero() {
        return Err(ExactError::ZeroPolynomial);
    }
    Ok(p.gcd(&p.derivative()).degree() == Some(0))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCheck {
    pub node: Node,
    /// Characteristic polynomial of `L` with row/column `node` removed.
    pub minor_poly: IntPolynomial,
    /// Non-constant common factor with the full characteristic polynomial.
    pub shared_factor: Option<IntPolynomial>,
}

impl NodeCheck {
    pub fn passed(&self) -> bool {
        self.shared_factor.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactCertificate {
    pub char_poly: IntPolynomial,
    /// `gcd(p, p′)` when it is non-constant.
    pub repeated_factor: Option<IntPolynomial>,
    /// Empty when condition (a) failed (not evaluated).
    pub node_checks: Vec<NodeCheck>,
}

impl ExactCertificate {
    pub fn squarefree(&self) -> bool {
        self.repeated_factor.is_none()
    }

    pub fn is_perfect(&self) -> bool {
        self.squarefree() && self.node_checks.iter().all(NodeCheck::passed)
    }

    pub fn failing_node(&self) -> Option<&NodeCheck> {
        self.node_checks.iter().find(|c| !c.passed())
    }

    /// Human-readable failure witness, e.g. `eigenvalue 1, node 2`; an
    /// irrational eigenvalue is named by its minimal common factor.
    pub fn witness(&self) -> Option<String> {
        let n = self.char_poly.degree().unwrap_or(0);
        if let Some(g) = &self.repeated_factor {
            return Some(format!("repeated {}", describe_root(g, n)));
        }
        self.failing_node().map(|c| {
            let g = c.shared_factor.as_ref().expect("failing node has a shared factor");
            format!("{}, node {}", describe_root(g, n), c.node)
        })
    }
}

/// `eigenvalue r` for the smallest integer root of `g` (Laplacian
/// eigenvalues lie in `[0, n]`), otherwise `eigenvalue root of g`.
fn describe_root(g: &IntPolynomial, n: usize) -> String {
    (0..=n as i64)
        .find(|&r| g.eval(&BigInt::from(r)).is_zero())
        .map(|r| format!("eigenvalue {r}"))
        .unwrap_or_else(|| format!("eigenvalue root of {g}"))
}

impl fmt::Display for ExactCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(s, "exact verdict: {}", if self.is_perfect() { "perfect" } else { "not-perfect" });
        if let Some(w) = self.witness() {
            let _ = writeln!(s, "  witness: {w}");
        }
        let _ = writeln!(s, "  char_poly: {}", self.char_poly);
        match &self.repeated_factor {
            None => {
                let _ = writeln!(s, "  condition (a) distinct eigenvalues: ok");
            }
            Some(g) => {
                let _ = writeln!(s, "  condition (a) distinct eigenvalues: FAILED, repeated factor {g}");
                let _ = writeln!(s, "  condition (b) nonzero eigenvector entries: skipped");
            }
        }
        for c in &self.node_checks {
            match &c.shared_factor {
                None => {
                    let _ = writeln!(s, "  condition (b) node {}: ok", c.node);
                }
                Some(g) => {
                    let _ = writeln!(
                        s,
                        "  condition (b) node {}: FAILED, minor poly {} shares factor {g}",
                        c.node, c.minor_poly
                    );
                }
            }
        }
        f.write_str(&s)
    }
}

fn node_check(l: &IntMatrix, p: &IntPolynomial, node: Node) -> NodeCheck {
    let minor_poly = char_poly_matrix(&l.delete_row_col(node - 1));
    let g = p.gcd(&minor_poly);
    let shared_factor = (g.degree() != Some(0)).then_some(g);
    NodeCheck { node, minor_poly, shared_factor }
}

/// Full certificate for both conditions.
pub fn check_perfect_exact(g: &Graph) -> ExactCertificate {
    let lap = g.laplacian();
    let p = char_poly(&lap);
    let rep = p.gcd(&p.derivative());
    if rep.degree() != Some(0) {
        return ExactCertificate { char_poly: p, repeated_factor: Some(rep), node_checks: Vec::new() };
    }
    let node_checks = g.nodes().map(|j| node_check(lap.matrix(), &p, j)).collect();
    ExactCertificate { char_poly: p, repeated_factor: None, node_checks }
}

/// Same decision as [`check_perfect_exact`], stopping at the first failure.
pub fn is_perfect_exact(g: &Graph) -> bool {
    let lap = g.laplacian();
    let p = char_poly(&lap);
    if p.gcd(&p.derivative()).degree() != Some(0) {
        return false;
    }
    g.nodes().all(|j| node_check(lap.matrix(), &p, j).passed())
}
