//! Closed-loop consensus simulation and minimum-energy steering of the
//! follower subsystem `ẋ_f = A x_f + B x_l` with `A = −L_f`, `B = −L_fl`.
//!
//! The leader states are the (unconstrained) control input. Matrix
//! exponentials use the spectral decomposition of the symmetric `A`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::graph::{Graph, Node};
use crate::leaders::{partition_laplacian, LeaderSet, PartitionedLaplacian};

/// Gramians with a larger condition number are treated as uncontrollable.
pub const GRAMIAN_CONDITION_LIMIT: f64 = 1e10;
/// Relative change between successive quadrature refinements at convergence.
pub const GRAMIAN_REFINE_TOL: f64 = 1e-10;
const MAX_GRAMIAN_INTERVALS: usize = 1 << 16;
const MAX_RESIM_STEPS: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteeringError {
    #[error("expected a state of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("leader signal returned {got} values for {expected} leaders")]
    SignalDimension { expected: usize, got: usize },
    #[error("time step must be positive and no larger than the horizon (dt={dt}, T={horizon})")]
    BadStep { dt: f64, horizon: f64 },
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
}

/// `ẋ_f = A x_f + B u` for one leader selection.
#[derive(Clone, Debug)]
pub struct FollowerSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub follower_order: Vec<Node>,
    pub leader_order: Vec<Node>,
    /// `None` when every node is a leader (nalgebra rejects empty matrices).
    eig: Option<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl FollowerSystem {
    pub fn from_partition(p: &PartitionedLaplacian) -> Self {
        let a = -p.l_f.to_f64();
        let b = -p.l_fl.to_f64();
        let eig = (a.nrows() > 0).then(|| SymmetricEigen::new(a.clone()));
        Self { a, b, follower_order: p.follower_order.clone(), leader_order: p.leader_order.clone(), eig }
    }

    pub fn new(g: &Graph, leaders: &LeaderSet) -> Self {
        let p = partition_laplacian(&g.laplacian(), leaders).expect("leader set belongs to this graph");
        Self::from_partition(&p)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `e^{A t}` via `V diag(e^{λ t}) Vᵀ`.
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        let Some(eig) = &self.eig else {
            return DMatrix::zeros(0, 0);
        };
        let v = &eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l * t).exp()));
        v * d * v.transpose()
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

/// Uniformly sampled state trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Node label of each state coordinate.
    pub labels: Vec<Node>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// CSV with header `t,x_<node>,...`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for v in &self.labels {
            let _ = write!(s, ",x_{v}");
        }
        s.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(s, "{t}");
            for xi in x.iter() {
                let _ = write!(s, ",{xi}");
            }
            s.push('\n');
        }
        s
    }
}

fn step_count(horizon: f64, dt: f64) -> Result<usize, SteeringError> {
    if !(dt > 0.0 && horizon >= dt && horizon.is_finite()) {
        return Err(SteeringError::BadStep { dt, horizon });
    }
    Ok(((horizon / dt).round() as usize).max(1))
}

fn rk4<F>(x0: DVector<f64>, horizon: f64, steps: usize, f: F) -> (Vec<f64>, Vec<DVector<f64>>)
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = horizon / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0;
    times.push(0.0);
    states.push(x.clone());
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &(&x + &k1 * (h / 2.0)));
        let k3 = f(t + h / 2.0, &(&x + &k2 * (h / 2.0)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        times.push((k + 1) as f64 * h);
        states.push(x.clone());
    }
    (times, states)
}

/// Fixed-step RK4 integration.
///
/// With `leaders = None` the full leaderless system `ẋ = −L x` is integrated
/// and `x0` has length `n`. Otherwise the follower subsystem is driven by
/// `leader_signal(t)` (one value per leader, ascending node order) and `x0`
/// has one entry per follower. The step is adjusted to `T / round(T / dt)`.
pub fn simulate(
    g: &Graph,
    leaders: Option<&LeaderSet>,
    leader_signal: &dyn Fn(f64) -> Vec<f64>,
    x0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory, SteeringError> {
    let steps = step_count(horizon, dt)?;
    match leaders {
        None => {
            let n = g.node_count();
            if x0.len() != n {
                return Err(SteeringError::Dimension { expected: n, got: x0.len() });
            }
            let neg_l = -g.laplacian().matrix().to_f64();
            let (times, states) = rk4(DVector::from_column_slice(x0), horizon, steps, |_, x| &neg_l * x);
            Ok(Trajectory { times, states, labels: g.nodes().collect() })
        }
        Some(s) => {
            let sys = FollowerSystem::new(g, s);
            let nf = sys.state_dim();
            if x0.len() != nf {
                return Err(SteeringError::Dimension { expected: nf, got: x0.len() });
            }
            let probe = leader_signal(0.0);
            if probe.len() != sys.input_dim() {
                return Err(SteeringError::SignalDimension { expected: sys.input_dim(), got: probe.len() });
            }
            let (times, states) = rk4(DVector::from_column_slice(x0), horizon, steps, |t, x| {
                sys.rhs(x, &DVector::from_vec(leader_signal(t)))
            });
            Ok(Trajectory { times, states, labels: sys.follower_order.clone() })
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gramian {
    pub matrix: DMatrix<f64>,
    /// Simpson intervals used by the final refinement.
    pub intervals: usize,
    pub converged: bool,
}

impl Gramian {
    /// `λ_max / λ_min`; infinite when `λ_min <= 0`, one for the empty matrix.
    pub fn condition(&self) -> f64 {
        if self.matrix.nrows() == 0 {
            return 1.0;
        }
        let ev = SymmetricEigen::new(self.matrix.clone()).eigenvalues;
        let max = ev.max();
        let min = ev.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

fn simpson(sys: &FollowerSystem, horizon: f64, intervals: usize) -> DMatrix<f64> {
    let n = sys.state_dim();
    let bbt = &sys.b * sys.b.transpose();
    let h = horizon / intervals as f64;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for k in 0..=intervals {
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let e = sys.exp(k as f64 * h);
        acc += (&e * &bbt * e.transpose()) * w;
    }
    acc * (h / 3.0)
}

/// Finite-horizon controllability Gramian `∫₀ᵀ e^{At} B Bᵀ e^{Aᵀt} dt` by
/// composite Simpson quadrature, doubling the interval count from `steps`
/// until successive estimates agree to 1e-10 relative.
pub fn gramian(sys: &FollowerSystem, horizon: f64, steps: usize) -> Result<Gramian, SteeringError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SteeringError::BadHorizon(horizon));
    }
    let n = sys.state_dim();
    if n == 0 {
        return Ok(Gramian { matrix: DMatrix::zeros(0, 0), intervals: 0, converged: true });
    }
    let mut intervals = (steps.max(2) + 1) & !1;
    let mut current = simpson(sys, horizon, intervals);
    loop {
        let next_intervals = intervals * 2;
        let next = simpson(sys, horizon, next_intervals);
        let diff = (&next - &current).amax();
        let scale = next.amax();
        let converged = diff <= GRAMIAN_REFINE_TOL * scale || scale == 0.0;
        if converged || next_intervals >= MAX_GRAMIAN_INTERVALS {
            let sym = (&next + next.transpose()) * 0.5;
            return Ok(Gramian { matrix: sym, intervals: next_intervals, converged });
        }
        current = next;
        intervals = next_intervals;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteeringStatus {
    Steered,
    UncontrollableDetected,
    /// Gramian was invertible but re-simulation missed the residual bound
    /// even at the finest step.
    ResidualTooLarge,
}

#[derive(Clone, Debug)]
pub struct SteeringResult {
    pub status: SteeringStatus,
    /// Samples `(t, x_l(t))` on the uniform grid `t_k = k T / steps`;
    /// empty when uncontrollability was detected.
    pub input_trajectory: Vec<(f64, Vec<f64>)>,
    pub achieved_final: Vec<f64>,
    /// `‖x_f(T) − x_target‖∞` from re-simulating with the computed input.
    pub residual: f64,
    pub residual_tolerance: f64,
    pub gramian_condition: f64,
    /// `∫ ‖u‖² dt = ηᵀ W η`.
    pub energy: f64,
    /// Re-simulation with the computed input.
    pub trajectory: Option<Trajectory>,
}

impl SteeringResult {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let status = match self.status {
            SteeringStatus::Steered => "steered",
            SteeringStatus::UncontrollableDetected => "uncontrollable-detected",
            SteeringStatus::ResidualTooLarge => "residual-too-large",
        };
        let _ = writeln!(s, "status: {status}");
        let _ = writeln!(s, "gramian_condition: {:e}", self.gramian_condition);
        let _ = writeln!(s, "condition_limit: {GRAMIAN_CONDITION_LIMIT:e}");
        if self.status != SteeringStatus::UncontrollableDetected {
            let _ = writeln!(s, "residual: {:e}", self.residual);
            let _ = writeln!(s, "residual_tolerance: {:e}", self.residual_tolerance);
            let _ = writeln!(s, "energy: {:e}", self.energy);
            let fin: Vec<String> = self.achieved_final.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "achieved_final: {}", fin.join(","));
        }
        s
    }
}

/// Minimum-energy input `u(t) = Bᵀ e^{Aᵀ(T−t)} W(T)⁻¹ (x_target − e^{AT} x0)`
/// steering `x0` to `x_target` in time `T`, verified by RK4 re-simulation.
pub fn steer(
    sys: &FollowerSystem,
    x0: &[f64],
    x_target: &[f64],
    horizon: f64,
    steps: usize,
) -> Result<SteeringResult, SteeringError> {
    let n = sys.state_dim();
    for v in [x0, x_target] {
        if v.len() != n {
            return Err(SteeringError::Dimension { expected: n, got: v.len() });
        }
    }
    let steps = steps.max(1);
    let w = gramian(sys, horizon, steps)?;
    let cond = w.condition();
    let target = DVector::from_column_slice(x_target);
    let start = DVector::from_column_slice(x0);
    let tol = 1e-6 * (1.0 + target.amax());
    // NaN counts as ill-conditioned
    if cond.is_nan() || cond > GRAMIAN_CONDITION_LIMIT {
        return Ok(SteeringResult {
            status: SteeringStatus::UncontrollableDetected,
            input_trajectory: Vec::new(),
            achieved_final: Vec::new(),
            residual: f64::INFINITY,
            residual_tolerance: tol,
            gramian_condition: cond,
            energy: f64::NAN,
            trajectory: None,
        });
    }
    let drift = sys.exp(horizon) * &start;
    let rhs = &target - drift;
    let eta = if n == 0 {
        DVector::zeros(0)
    } else {
        w.matrix
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|| w.matrix.clone().lu().solve(&rhs).expect("well-conditioned Gramian is invertible"))
    };
    let energy = eta.dot(&(&w.matrix * &eta));
    let bt = sys.b.transpose();
    let input = |t: f64| -> DVector<f64> { &bt * (sys.exp(horizon - t) * &eta) };

    let dt = horizon / steps as f64;
    let input_trajectory: Vec<(f64, Vec<f64>)> = (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            (t, input(t).iter().copied().collect())
        })
        .collect();

    let mut sim_steps = steps;
    loop {
        let (times, states) = rk4(start.clone(), horizon, sim_steps, |t, x| sys.rhs(x, &input(t)));
        let fin = states.last().expect("nonempty").clone();
        let residual = if n == 0 { 0.0 } else { (&fin - &target).amax() };
        if residual <= tol || sim_steps >= MAX_RESIM_STEPS {
            let status = if residual <= tol { SteeringStatus::Steered } else { SteeringStatus::ResidualTooLarge };
            return Ok(SteeringResult {
                status,
                input_trajectory,
                achieved_final: fin.iter().copied().collect(),
                residual,
                residual_tolerance: tol,
                gramian_condition: cond,
                energy,
                trajectory: Some(Trajectory { times, states, labels: sys.follower_order.clone() }),
            });
        }
        sim_steps *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, m: &[Node]) -> LeaderSet {
        LeaderSet::new(n, m.iter().copied()).unwrap()
    }

    /// Scaling-and-squaring Taylor exponential, independent of the eigensolver.
    fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
        let norm = a.amax() * a.nrows() as f64;
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let scaled = a / 2f64.powi(s);
        let n = a.nrows();
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &scaled / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    /// Closed-form Gramian from the eigendecomposition of A.
    fn gramian_closed_form(sys: &FollowerSystem, horizon: f64) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(sys.a.clone());
        let v = &eig.eigenvectors;
        let m = v.transpose() * &sys.b * sys.b.transpose() * v;
        let n = m.nrows();
        let inner = DMatrix::from_fn(n, n, |i, j| {
            let s = eig.eigenvalues[i] + eig.eigenvalues[j];
            let factor = if s.abs() < 1e-14 { horizon } else { ((s * horizon).exp() - 1.0) / s };
            m[(i, j)] * factor
        });
        v * inner * v.transpose()
    }

    #[test]
    fn leaderless_k2_reaches_consensus() {
        let g = Graph::complete(2).unwrap();
        let traj = simulate(&g, None, &|_| Vec::new(), &[1.0, -1.0], 20.0, 0.01).unwrap();
        assert!(traj.final_state().amax() <= 1e-6);
    }

    #[test]
    fn consensus_state_is_constant() {
        let g = Graph::from_edges(4, [(1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let traj = simulate(&g, None, &|_| Vec::new(), &[2.5; 4], 3.0, 0.1).unwrap();
        for x in &traj.states {
            assert!((x - DVector::from_element(4, 2.5)).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_input_equilibrium() {
        let g = Graph::path(3).unwrap();
        let traj = simulate(&g, Some(&set(3, &[1])), &|_| vec![0.0], &[0.0, 0.0], 2.0, 0.1).unwrap();
        assert!(traj.states.iter().all(|x| x.amax() == 0.0));
        assert_eq!(traj.labels, vec![2, 3]);
    }

    #[test]
    fn simulate_rejects_bad_dimensions() {
        let g = Graph::path(3).unwrap();
        assert_eq!(
            simulate(&g, None, &|_| Vec::new(), &[1.0], 1.0, 0.1).unwrap_err(),
            SteeringError::Dimension { expected: 3, got: 1 }
        );
        assert!(matches!(
            simulate(&g, Some(&set(3, &[1])), &|_| vec![0.0, 1.0], &[0.0, 0.0], 1.0, 0.1),
            Err(SteeringError::SignalDimension { .. })
        ));
        assert!(matches!(simulate(&g, None, &|_| Vec::new(), &[0.0; 3], 1.0, 0.0), Err(SteeringError::BadStep { .. })));
    }

    #[test]
    fn spectral_exponential_matches_taylor() {
        let g = Graph::from_edges(5, [(1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]).unwrap();
        let sys = FollowerSystem::new(&g, &set(5, &[5]));
        for t in [0.0, 0.3, 1.7, 5.0] {
            let diff = (sys.exp(t) - expm_taylor(&(&sys.a * t))).amax();
            assert!(diff < 1e-10, "t={t} diff={diff}");
        }
    }

    #[test]
    fn gramian_quadrature_matches_closed_form() {
        let sys = FollowerSystem::new(&Graph::path(4).unwrap(), &set(4, &[1]));
        let w = gramian(&sys, 5.0, 16).unwrap();
        assert!(w.converged);
        let exact = gramian_closed_form(&sys, 5.0);
        assert!((&w.matrix - &exact).amax() <= 1e-9 * exact.amax());
        assert!((&w.matrix - w.matrix.transpose()).amax() <= 1e-12 * w.matrix.amax());
    }

    #[test]
    fn gramian_definiteness() {
        let p3 = Graph::path(3).unwrap();
        let empty = gramian(&FollowerSystem::new(&p3, &set(3, &[1, 2, 3])), 5.0, 10).unwrap();
        assert_eq!(empty.matrix.nrows(), 0);
        assert_eq!(empty.condition(), 1.0);
        let singular = gramian(&FollowerSystem::new(&p3, &set(3, &[2])), 5.0, 10).unwrap();
        assert!(singular.condition() > 1e12);
        let definite = gramian(&FollowerSystem::new(&p3, &set(3, &[1])), 5.0, 10).unwrap();
        assert!(definite.condition() < 1e6);
    }

    #[test]
    fn steer_p4_from_end() {
        let sys = FollowerSystem::new(&Graph::path(4).unwrap(), &set(4, &[1]));
        let r = steer(&sys, &[0.0; 3], &[1.0, 2.0, 3.0], 5.0, 500).unwrap();
        assert_eq!(r.status, SteeringStatus::Steered);
        assert!(r.residual <= 4e-6, "residual {}", r.residual);
        assert_eq!(r.input_trajectory.len(), 501);
    }

    #[test]
    fn steer_detects_uncontrollable() {
        let sys = FollowerSystem::new(&Graph::path(3).unwrap(), &set(3, &[2]));
        let r = steer(&sys, &[0.0, 0.0], &[1.0, 0.0], 5.0, 200).unwrap();
        assert_eq!(r.status, SteeringStatus::UncontrollableDetected);
        assert!(r.input_trajectory.is_empty());
    }

    #[test]
    fn steer_trivial_target() {
        let sys = FollowerSystem::new(&Graph::path(4).unwrap(), &set(4, &[1]));
        let r = steer(&sys, &[0.0; 3], &[0.0; 3], 5.0, 100).unwrap();
        assert_eq!(r.status, SteeringStatus::Steered);
        assert_eq!(r.residual, 0.0);
        assert!(r.input_trajectory.iter().all(|(_, u)| u.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn longer_horizon_needs_less_energy() {
        let sys = FollowerSystem::new(&Graph::path(4).unwrap(), &set(4, &[1]));
        let short = steer(&sys, &[0.0; 3], &[1.0, -1.0, 0.5], 2.0, 400).unwrap();
        let long = steer(&sys, &[0.0; 3], &[1.0, -1.0, 0.5], 4.0, 400).unwrap();
        assert!(long.energy <= short.energy * (1.0 + 1e-8));
    }

    #[test]
    fn trajectory_csv_header() {
        let g = Graph::complete(2).unwrap();
        let traj = simulate(&g, None, &|_| Vec::new(), &[1.0, 0.0], 0.2, 0.1).unwrap();
        let csv = traj.to_csv();
        assert!(csv.starts_with("t,x_1,x_2\n0,1,0\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
