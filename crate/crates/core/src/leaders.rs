//! Controllability of the follower subsystem for a given leader set.
//!
//! With leaders `S`, the Laplacian splits into follower/leader blocks and the
//! followers obey `ẋ_f = −L_f x_f − L_fl x_l`. Two independent deciders are
//! provided: the Kalman rank test on `(A, B) = (−L_f, −L_fl)` and the
//! eigenvector test (no Laplacian eigenvector, including combinations inside
//! a repeated eigenspace, vanishes on every leader coordinate).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{Graph, Laplacian, Node};
use crate::matrix::{bareiss_rank, IntMatrix};
use crate::spectral::eigendecompose;

/// Largest node count accepted by the all-subsets enumeration.
pub const MAX_ENUMERATION_NODES: usize = 20;
/// Largest follower count decided by exact integer rank under [`KalmanMethod::Auto`].
pub const EXACT_RANK_MAX_FOLLOWERS: usize = 16;
/// Default threshold for the eigenvector test.
pub const DEFAULT_PBH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LeaderError {
    #[error("leader set must be nonempty")]
    Empty,
    #[error("leader {node} out of range 1..={n}")]
    OutOfRange { node: Node, n: usize },
    #[error("leader {0} listed twice")]
    Duplicate(Node),
    #[error("all-subset enumeration limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },
    #[error("cannot parse leader list `{0}`")]
    Parse(String),
}

/// Nonempty, duplicate-free set of leader nodes, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeaderSet {
    members: Vec<Node>,
    n: usize,
}

impl LeaderSet {
    pub fn new(n: usize, members: impl IntoIterator<Item = Node>) -> Result<Self, LeaderError> {
        let mut members: Vec<Node> = members.into_iter().collect();
        if members.is_empty() {
            return Err(LeaderError::Empty);
        }
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(LeaderError::Duplicate(w[0]));
            }
        }
        if let Some(&node) = members.iter().find(|&&v| v == 0 || v > n) {
            return Err(LeaderError::OutOfRange { node, n });
        }
        Ok(Self { members, n })
    }

    /// Parses `"1,3,4"` (spaces allowed).
    pub fn parse(n: usize, text: &str) -> Result<Self, LeaderError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(LeaderError::Empty);
        }
        let members = trimmed
            .split(',')
            .map(|t| t.trim().parse::<Node>().map_err(|_| LeaderError::Parse(text.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, members)
    }

    /// Subset encoded by bit `i` ↔ node `i + 1`.
    pub fn from_mask(n: usize, mask: u64) -> Result<Self, LeaderError> {
        Self::new(n, (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1))
    }

    pub fn members(&self) -> &[Node] {
        &self.members
    }

    pub fn contains(&self, v: Node) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Followers in ascending order.
    pub fn complement(&self) -> Vec<Node> {
        (1..=self.n).filter(|v| !self.contains(*v)).collect()
    }

    pub fn is_subset(&self, other: &LeaderSet) -> bool {
        self.members.iter().all(|v| other.contains(*v))
    }

    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0, |m, v| m | 1 << (v - 1))
    }
}

impl fmt::Display for LeaderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Follower/leader block split of a Laplacian.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedLaplacian {
    pub l_f: IntMatrix,
    pub l_fl: IntMatrix,
    pub l_lf: IntMatrix,
    pub l_l: IntMatrix,
    /// Ascending follower nodes; row `i` of `l_f` is node `follower_order[i]`.
    pub follower_order: Vec<Node>,
    pub leader_order: Vec<Node>,
}

impl PartitionedLaplacian {
    pub fn follower_count(&self) -> usize {
        self.follower_order.len()
    }

    /// Puts the blocks back at their original node positions.
    pub fn reassemble(&self) -> IntMatrix {
        let n = self.follower_order.len() + self.leader_order.len();
        let mut m = IntMatrix::zeros(n, n);
        let place = |m: &mut IntMatrix, block: &IntMatrix, rows: &[Node], cols: &[Node]| {
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in cols.iter().enumerate() {
                    m[(i - 1, j - 1)] = block[(a, b)];
                }
            }
        };
        place(&mut m, &self.l_f, &self.follower_order, &self.follower_order);
        place(&mut m, &self.l_fl, &self.follower_order, &self.leader_order);
        place(&mut m, &self.l_lf, &self.leader_order, &self.follower_order);
        place(&mut m, &self.l_l, &self.leader_order, &self.leader_order);
        m
    }
}

pub fn partition_laplacian(l: &Laplacian, leaders: &LeaderSet) -> Result<PartitionedLaplacian, LeaderError> {
    let n = l.order();
    if let Some(&node) = leaders.members().iter().find(|&&v| v > n) {
        return Err(LeaderError::OutOfRange { node, n });
    }
    let follower_order: Vec<Node> = (1..=n).filter(|v| !leaders.contains(*v)).collect();
    let leader_order = leaders.members().to_vec();
    let f: Vec<usize> = follower_order.iter().map(|v| v - 1).collect();
    let s: Vec<usize> = leader_order.iter().map(|v| v - 1).collect();
    let m = l.matrix();
    Ok(PartitionedLaplacian {
        l_f: m.select(&f, &f),
        l_fl: m.select(&f, &s),
        l_lf: m.select(&s, &f),
        l_l: m.select(&s, &s),
        follower_order,
        leader_order,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KalmanMethod {
    /// Exact up to [`EXACT_RANK_MAX_FOLLOWERS`] followers, numeric beyond.
    #[default]
    Auto,
    Exact,
    Numeric,
}

/// `[B, AB, …, A^(n_f−1) B]` with `A = −L_f`, `B = −L_fl`, exact integers.
pub fn controllability_matrix(p: &PartitionedLaplacian) -> Vec<Vec<BigInt>> {
    let nf = p.follower_count();
    let l = p.leader_order.len();
    let a: Vec<Vec<BigInt>> = p.l_f.to_bigint_rows().into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect();
    let mut block: Vec<Vec<BigInt>> =
        p.l_fl.to_bigint_rows().into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect();
    let mut out: Vec<Vec<BigInt>> = vec![Vec::with_capacity(nf * l); nf];
    for power in 0..nf {
        if power > 0 {
            block = (0..nf).map(|i| (0..l).map(|c| (0..nf).map(|k| &a[i][k] * &block[k][c]).sum()).collect()).collect();
        }
        for (row, brow) in out.iter_mut().zip(&block) {
            row.extend(brow.iter().cloned());
        }
    }
    out
}

fn numeric_rank_full(p: &PartitionedLaplacian) -> bool {
    let nf = p.follower_count();
    let a = -p.l_f.to_f64();
    let mut block = -p.l_fl.to_f64();
    let l = block.ncols();
    let mut c = DMatrix::<f64>::zeros(nf, nf * l);
    for power in 0..nf {
        if power > 0 {
            block = &a * &block;
        }
        c.view_mut((0, power * l), (nf, l)).copy_from(&block);
    }
    let sv = c.singular_values();
    let smax = sv.max();
    let threshold = nf as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > threshold).count() == nf
}

/// Kalman rank test on `(−L_f, −L_fl)`; vacuously true without followers.
pub fn kalman_controllable(p: &PartitionedLaplacian) -> bool {
    kalman_controllable_with(p, KalmanMethod::Auto)
}

pub fn kalman_controllable_with(p: &PartitionedLaplacian, method: KalmanMethod) -> bool {
    let nf = p.follower_count();
    if nf == 0 {
        return true;
    }
    let exact = match method {
        KalmanMethod::Exact => true,
        KalmanMethod::Numeric => false,
        KalmanMethod::Auto => nf <= EXACT_RANK_MAX_FOLLOWERS,
    };
    if exact {
        bareiss_rank(controllability_matrix(p)) == nf
    } else {
        numeric_rank_full(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbhOutcome {
    pub controllable: bool,
    /// Eigenvalue whose eigenspace contains a vector vanishing on all leaders.
    pub witness: Option<f64>,
    /// Eigenvector from that eigenspace vanishing on the leaders (unit norm).
    pub witness_vector: Option<Vec<f64>>,
}

/// Eigenvector test: for each eigenvalue cluster the leader rows of its
/// eigenbasis must have full column rank (smallest singular value `> tol`).
/// Eigenvalues are clustered when consecutive values differ by at most
/// `tol · max(1, λ_max)`.
pub fn pbh_controllable(g: &Graph, leaders: &LeaderSet, tol: f64) -> PbhOutcome {
    let report = eigendecompose(&g.laplacian()).expect("graph Laplacians are symmetric");
    let n = report.len();
    let cluster_tol = tol * report.lambda_max().max(1.0);
    let rows: Vec<usize> = leaders.members().iter().map(|v| v - 1).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && report.eigenvalues[end] - report.eigenvalues[end - 1] <= cluster_tol {
            end += 1;
        }
        let basis = report.eigenvectors.columns(start, end - start);
        let sub = DMatrix::from_fn(rows.len(), end - start, |a, b| basis[(rows[a], b)]);
        // full column rank needs at least as many rows as columns
        let svd = sub.clone().svd(false, true);
        let m = end - start;
        let deficient = rows.len() < m || svd.singular_values.iter().any(|&s| s <= tol);
        if deficient {
            let v_t = svd.v_t.expect("requested right singular vectors");
            let coeffs = null_vector(&sub, &v_t);
            let vec = basis * coeffs;
            let norm = vec.norm();
            return PbhOutcome {
                controllable: false,
                witness: Some(report.eigenvalues[start]),
                witness_vector: Some(vec.iter().map(|x| x / norm).collect()),
            };
        }
        start = end;
    }
    PbhOutcome { controllable: true, witness: None, witness_vector: None }
}

fn null_vector(sub: &DMatrix<f64>, v_t: &DMatrix<f64>) -> DVector<f64> {
    let m = sub.ncols();
    if v_t.nrows() == m {
        // singular values are sorted descending, so the last right singular
        // vector spans the (numerical) null direction
        return v_t.row(m - 1).transpose();
    }
    // fewer leader rows than eigenspace dimension: any vector orthogonal to
    // the row space of `sub` works
    for k in 0..m {
        let mut e = DVector::<f64>::zeros(m);
        e[k] = 1.0;
        for r in 0..v_t.nrows() {
            let row = v_t.row(r).transpose();
            let d = row.dot(&e);
            e -= row * d;
        }
        if e.norm() > 1e-6 {
            return e.normalize();
        }
    }
    unreachable!("a proper subspace always has an orthogonal complement")
}

/// Kalman verdict for every nonempty leader subset.
pub fn classify_all_leader_sets(g: &Graph) -> Result<BTreeMap<LeaderSet, bool>, LeaderError> {
    let n = g.node_count();
    if n > MAX_ENUMERATION_NODES {
        return Err(LeaderError::TooLarge { n, max: MAX_ENUMERATION_NODES });
    }
    let lap = g.laplacian();
    let results: Vec<(LeaderSet, bool)> = (1..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let s = LeaderSet::from_mask(n, mask).expect("nonzero mask");
            let p = partition_laplacian(&lap, &s).expect("in-range subset");
            let ok = kalman_controllable(&p);
            (s, ok)
        })
        .collect();
    Ok(results.into_iter().collect())
}

/// Controllable for every nonempty leader subset (brute force over all of them).
pub fn perfect_by_definition(g: &Graph) -> Result<bool, LeaderError> {
    Ok(classify_all_leader_sets(g)?.values().all(|&ok| ok))
}

pub fn render_classification(map: &BTreeMap<LeaderSet, bool>) -> String {
    let mut entries: Vec<(&LeaderSet, &bool)> = map.iter().collect();
    entries.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.members().cmp(b.0.members())));
    let mut s = String::new();
    for (set, ok) in &entries {
        let _ = writeln!(s, "{set} {}", if **ok { "controllable" } else { "uncontrollable" });
    }
    let good = map.values().filter(|&&v| v).count();
    let _ = writeln!(s, "total={} controllable={} uncontrollable={}", map.len(), good, map.len() - good);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, m: &[Node]) -> LeaderSet {
        LeaderSet::new(n, m.iter().copied()).unwrap()
    }

    #[test]
    fn leader_set_validation() {
        assert_eq!(LeaderSet::new(3, []), Err(LeaderError::Empty));
        assert_eq!(LeaderSet::new(3, [4]), Err(LeaderError::OutOfRange { node: 4, n: 3 }));
        assert_eq!(LeaderSet::new(3, [2, 2]), Err(LeaderError::Duplicate(2)));
        assert_eq!(LeaderSet::parse(3, " 3, 1 ").unwrap().members(), &[1, 3]);
        assert_eq!(LeaderSet::parse(3, ""), Err(LeaderError::Empty));
        assert!(LeaderSet::parse(3, "1,a").is_err());
    }

    #[test]
    fn partition_examples() {
        let l = Graph::path(3).unwrap().laplacian();
        let p = partition_laplacian(&l, &set(3, &[3])).unwrap();
        assert_eq!(p.l_f.to_rows(), vec![vec![1, -1], vec![-1, 2]]);
        assert_eq!(p.l_fl.to_rows(), vec![vec![0], vec![-1]]);
        assert_eq!(p.reassemble(), *l.matrix());

        let k2 = Graph::complete(2).unwrap().laplacian();
        let p = partition_laplacian(&k2, &set(2, &[1, 2])).unwrap();
        assert_eq!((p.l_f.rows(), p.l_f.cols()), (0, 0));

        let p = partition_laplacian(&l, &set(3, &[2])).unwrap();
        assert_eq!(p.l_f.to_rows(), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(p.l_fl.to_rows(), vec![vec![-1], vec![-1]]);
        assert_eq!(p.follower_order, vec![1, 3]);
    }

    #[test]
    fn kalman_examples() {
        let g = Graph::path(3).unwrap();
        let l = g.laplacian();
        assert!(kalman_controllable(&partition_laplacian(&l, &set(3, &[1])).unwrap()));
        assert!(!kalman_controllable(&partition_laplacian(&l, &set(3, &[2])).unwrap()));
        assert!(kalman_controllable(&partition_laplacian(&l, &set(3, &[1, 2, 3])).unwrap()));
        for method in [KalmanMethod::Exact, KalmanMethod::Numeric] {
            assert!(kalman_controllable_with(&partition_laplacian(&l, &set(3, &[1])).unwrap(), method));
            assert!(!kalman_controllable_with(&partition_laplacian(&l, &set(3, &[2])).unwrap(), method));
        }
    }

    #[test]
    fn pbh_examples() {
        let p3 = Graph::path(3).unwrap();
        let out = pbh_controllable(&p3, &set(3, &[2]), DEFAULT_PBH_TOL);
        assert!(!out.controllable);
        assert!((out.witness.unwrap() - 1.0).abs() < 1e-9);
        let v = out.witness_vector.unwrap();
        assert!(v[1].abs() < 1e-9 && (v[0] + v[2]).abs() < 1e-9);
        assert!(pbh_controllable(&p3, &set(3, &[1]), DEFAULT_PBH_TOL).controllable);

        let k3 = Graph::complete(3).unwrap();
        let out = pbh_controllable(&k3, &set(3, &[1]), DEFAULT_PBH_TOL);
        assert!(!out.controllable);
        assert!((out.witness.unwrap() - 3.0).abs() < 1e-9);
        assert!(out.witness_vector.unwrap()[0].abs() < 1e-9);
        assert!(pbh_controllable(&k3, &set(3, &[1, 2]), DEFAULT_PBH_TOL).controllable);
    }

    #[test]
    fn classification_examples() {
        let k2 = classify_all_leader_sets(&Graph::complete(2).unwrap()).unwrap();
        assert_eq!(k2.len(), 3);
        assert!(k2.values().all(|&v| v));

        let p3 = classify_all_leader_sets(&Graph::path(3).unwrap()).unwrap();
        let bad: Vec<_> = p3.iter().filter(|(_, &ok)| !ok).map(|(s, _)| s.members().to_vec()).collect();
        assert_eq!(bad, vec![vec![2]]);

        let k3 = classify_all_leader_sets(&Graph::complete(3).unwrap()).unwrap();
        for (s, ok) in &k3 {
            assert_eq!(*ok, s.len() >= 2, "{s}");
        }
    }

    #[test]
    fn definition_examples() {
        assert_eq!(perfect_by_definition(&Graph::complete(2).unwrap()), Ok(true));
        assert_eq!(perfect_by_definition(&Graph::path(3).unwrap()), Ok(false));
        assert_eq!(perfect_by_definition(&Graph::path(4).unwrap()), Ok(true));
        assert_eq!(perfect_by_definition(&Graph::new(21).unwrap()), Err(LeaderError::TooLarge { n: 21, max: 20 }));
    }

    #[test]
    fn report_format() {
        let p3 = classify_all_leader_sets(&Graph::path(3).unwrap()).unwrap();
        let text = render_classification(&p3);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], "1 controllable");
        assert_eq!(lines[1], "2 uncontrollable");
        assert_eq!(lines[7], "total=7 controllable=6 uncontrollable=1");
    }
}
