//! Discrete-time systems, interconnections, measurement functions, input
//! signals, and trajectory generation.
//!
//! Systems are immutable wrappers around a total update map; trajectory
//! generation is pure double-precision iteration, deterministic given the
//! initial state and input. Falsification tolerances live in the checkers,
//! not here.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use serde::{Deserialize, Serialize};

/// Total state-update map `(state, input) → next state`.
pub type StateMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Scalar-valued function of a state vector.
pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
    /// The operation needs an autonomous system but the input dimension is
    /// positive.
    HasInputs,
    BadTopology(&'static str),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            SimError::HasInputs => write!(f, "system must be autonomous (input dimension 0)"),
            SimError::BadTopology(msg) => write!(f, "bad topology: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v * v).sum())
}

pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// A discrete-time system `x(k+1) = g(x(k), u(k))`.
#[derive(Clone)]
pub struct DiscreteSystem {
    state_dim: usize,
    input_dim: usize,
    update: StateMap,
}

impl fmt::Debug for DiscreteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteSystem")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .finish()
    }
}

impl DiscreteSystem {
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        update: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        DiscreteSystem {
            state_dim,
            input_dim,
            update: Arc::new(update),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// One application of the update map.
    pub fn step(&self, state: &[f64], input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.state_dim);
        let next = (self.update)(state, input);
        debug_assert_eq!(next.len(), self.state_dim);
        next
    }

    /// The solution `x(0..=k_steps)` from `xi` under the input signal `u`.
    pub fn trajectory(
        &self,
        xi: &[f64],
        u: &InputSignal,
        k_steps: usize,
    ) -> Result<Vec<Vec<f64>>, SimError> {
        if xi.len() != self.state_dim {
            return Err(SimError::DimensionMismatch {
                expected: self.state_dim,
                got: xi.len(),
            });
        }
        if u.dim() != self.input_dim {
            return Err(SimError::DimensionMismatch {
                expected: self.input_dim,
                got: u.dim(),
            });
        }
        let mut out = Vec::with_capacity(k_steps + 1);
        out.push(xi.to_vec());
        for k in 0..k_steps {
            let next = self.step(out.last().unwrap(), u.value_at(k));
            out.push(next);
        }
        Ok(out)
    }

    /// The `m`-step sampled system: same state space, input dimension
    /// `m · input_dim`, and update `g^m` fed with the stacked input block
    /// `(u(k), …, u(k+m−1))`.
    pub fn lift(&self, m: usize) -> DiscreteSystem {
        assert!(m >= 1, "lift needs m >= 1");
        let inner = Arc::clone(&self.update);
        let (n, mi) = (self.state_dim, self.input_dim);
        DiscreteSystem {
            state_dim: n,
            input_dim: m * mi,
            update: Arc::new(move |y: &[f64], w: &[f64]| {
                debug_assert_eq!(w.len(), m * mi);
                let mut x = y.to_vec();
                for j in 0..m {
                    x = inner(&x, &w[j * mi..(j + 1) * mi]);
                }
                x
            }),
        }
    }
}

/// A block decomposition of a system into `ℓ` interconnected subsystems.
///
/// Each block update receives the full state but, by construction of the
/// built-in scenarios, reads only the blocks in its neighbor set and
/// itself.
#[derive(Clone)]
pub struct NetworkTopology {
    block_dims: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    updates: Vec<StateMap>,
    input_dim: usize,
}

impl fmt::Debug for NetworkTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NetworkTopology")
            .field("block_dims", &self.block_dims)
            .field("neighbors", &self.neighbors)
            .field("input_dim", &self.input_dim)
            .finish()
    }
}

impl NetworkTopology {
    pub fn new(
        block_dims: Vec<usize>,
        neighbors: Vec<Vec<usize>>,
        updates: Vec<StateMap>,
        input_dim: usize,
    ) -> Result<Self, SimError> {
        let l = block_dims.len();
        if neighbors.len() != l || updates.len() != l {
            return Err(SimError::BadTopology(
                "block, neighbor, and update counts differ",
            ));
        }
        if neighbors.iter().flatten().any(|&j| j >= l) {
            return Err(SimError::BadTopology("neighbor index out of range"));
        }
        Ok(NetworkTopology {
            block_dims,
            neighbors,
            updates,
            input_dim,
        })
    }

    pub fn block_count(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn total_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Index range of block `i` inside the stacked state vector.
    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.block_dims[..i].iter().sum();
        start..start + self.block_dims[i]
    }

    /// The composite system obtained by stacking the block updates.
    pub fn composite(&self) -> DiscreteSystem {
        let updates = self.updates.clone();
        let dims = self.block_dims.clone();
        let n = self.total_dim();
        DiscreteSystem {
            state_dim: n,
            input_dim: self.input_dim,
            update: Arc::new(move |x: &[f64], u: &[f64]| {
                let mut out = Vec::with_capacity(n);
                for (i, upd) in updates.iter().enumerate() {
                    let block = upd(x, u);
                    debug_assert_eq!(block.len(), dims[i]);
                    out.extend_from_slice(&block);
                }
                out
            }),
        }
    }
}

/// Classification of a measurement function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementTag {
    Norm,
    SetDistance,
    BlockNorm(usize),
    Custom,
}

/// A continuous positive-semidefinite function of the state.
#[derive(Clone)]
pub struct MeasurementFunction {
    map: ScalarMap,
    tag: MeasurementTag,
}

impl fmt::Debug for MeasurementFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementFunction")
            .field("tag", &self.tag)
            .finish()
    }
}

impl MeasurementFunction {
    pub fn new(tag: MeasurementTag, map: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        MeasurementFunction {
            map: Arc::new(map),
            tag,
        }
    }

    /// Euclidean norm of the state.
    pub fn euclidean() -> Self {
        Self::new(MeasurementTag::Norm, norm2)
    }

    /// Maximum norm of the state.
    pub fn sup_norm() -> Self {
        Self::new(MeasurementTag::Norm, norm_inf)
    }

    /// Euclidean norm of one block of the state.
    pub fn block_euclidean(index: usize, range: Range<usize>) -> Self {
        Self::new(MeasurementTag::BlockNorm(index), move |x| {
            norm2(&x[range.clone()])
        })
    }

    pub fn tag(&self) -> MeasurementTag {
        self.tag
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.map)(x)
    }
}

/// A monotonic norm on `R^ℓ`: `0 ≤ x ≤ y` implies `µ(x) ≤ µ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicNorm {
    MaxNorm,
    WeightedMax(Vec<f64>),
    WeightedSum(Vec<f64>),
}

impl MonotonicNorm {
    /// Validates positive weights for the weighted kinds.
    pub fn validate(&self, l: usize) -> Result<(), SimError> {
        match self {
            MonotonicNorm::MaxNorm => Ok(()),
            MonotonicNorm::WeightedMax(w) | MonotonicNorm::WeightedSum(w) => {
                if w.len() != l {
                    return Err(SimError::DimensionMismatch {
                        expected: l,
                        got: w.len(),
                    });
                }
                if w.iter().any(|&c| !c.is_finite() || c <= 0.0) {
                    return Err(SimError::BadTopology("norm weights must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, z: &[f64]) -> f64 {
        match self {
            MonotonicNorm::MaxNorm => norm_inf(z),
            MonotonicNorm::WeightedMax(w) => {
                z.iter().zip(w).fold(0.0, |m, (v, c)| m.max(c * v.abs()))
            }
            MonotonicNorm::WeightedSum(w) => z.iter().zip(w).map(|(v, c)| c * v.abs()).sum(),
        }
    }

    /// `µ(e_i)`, the norm of the `i`th standard basis vector.
    pub fn basis_weight(&self, i: usize) -> f64 {
        match self {
            MonotonicNorm::MaxNorm => 1.0,
            MonotonicNorm::WeightedMax(w) | MonotonicNorm::WeightedSum(w) => w[i],
        }
    }

    /// The minimal `c` with `µ(z) ≤ c·|z|∞` for all `z`.
    pub fn infnorm_factor(&self) -> f64 {
        match self {
            MonotonicNorm::MaxNorm => 1.0,
            MonotonicNorm::WeightedMax(w) => w.iter().fold(0.0f64, |m, &c| m.max(c)),
            MonotonicNorm::WeightedSum(w) => w.iter().sum(),
        }
    }
}

/// Aggregates per-block measurements through a monotonic norm:
/// `ω(x) = µ(ω₁(x₁), …, ω_ℓ(x_ℓ))`.
pub fn composite_measurement(
    parts: &[MeasurementFunction],
    mu: &MonotonicNorm,
    block_dims: &[usize],
) -> MeasurementFunction {
    assert_eq!(parts.len(), block_dims.len(), "one measurement per block");
    let parts: Vec<MeasurementFunction> = parts.to_vec();
    let dims = block_dims.to_vec();
    let mu = mu.clone();
    MeasurementFunction::new(MeasurementTag::Custom, move |x| {
        let mut vals = Vec::with_capacity(parts.len());
        let mut start = 0;
        for (p, &d) in parts.iter().zip(&dims) {
            vals.push(p.eval(&x[start..start + d]));
            start += d;
        }
        mu.apply(&vals)
    })
}

/// Doubles an autonomous system into two independent copies and pairs it
/// with the increment measurement `ω(ξ, ζ) = |ξ − ζ|`.
pub fn augment_incremental(
    sys: &DiscreteSystem,
) -> Result<(DiscreteSystem, MeasurementFunction), SimError> {
    if sys.input_dim() != 0 {
        return Err(SimError::HasInputs);
    }
    let n = sys.state_dim();
    let inner = Arc::clone(&sys.update);
    let doubled = DiscreteSystem {
        state_dim: 2 * n,
        input_dim: 0,
        update: Arc::new(move |z: &[f64], u: &[f64]| {
            let mut out = inner(&z[..n], u);
            out.extend_from_slice(&inner(&z[n..], u));
            out
        }),
    };
    let omega = MeasurementFunction::new(MeasurementTag::SetDistance, move |z: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            let d = z[i] - z[n + i];
            acc += d * d;
        }
        libm::sqrt(acc)
    });
    Ok((doubled, omega))
}

/// Turns a time-varying update into an autonomous system by appending a
/// clock coordinate that increments by one each step. The intended
/// measurement ranges over the original state block only.
pub fn autonomize_timevarying(
    tv_update: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    n: usize,
    m: usize,
) -> DiscreteSystem {
    DiscreteSystem {
        state_dim: n + 1,
        input_dim: m,
        update: Arc::new(move |z: &[f64], u: &[f64]| {
            let clock = z[n];
            let mut out = tv_update(clock, &z[..n], u);
            debug_assert_eq!(out.len(), n);
            out.push(clock + 1.0);
            out
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SignalKind {
    Zero,
    Constant(Vec<f64>),
    Samples(Vec<Vec<f64>>),
}

/// An input signal in `ℓ∞` with a cached sup-norm.
///
/// Sampled signals hold their last value forever, which keeps the sup-norm
/// finite and exactly computable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    kind: SignalKind,
    dim: usize,
    sup_norm: f64,
    #[serde(skip)]
    zeros: Vec<f64>,
}

impl InputSignal {
    pub fn zero(dim: usize) -> Self {
        InputSignal {
            kind: SignalKind::Zero,
            dim,
            sup_norm: 0.0,
            zeros: vec![0.0; dim],
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let sup = norm2(&value);
        let dim = value.len();
        InputSignal {
            kind: SignalKind::Constant(value),
            dim,
            sup_norm: sup,
            zeros: vec![0.0; dim],
        }
    }

    /// Builds a sampled signal with hold-last semantics. An empty sample
    /// list degenerates to the zero signal.
    pub fn samples(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self, SimError> {
        if rows.is_empty() {
            return Ok(Self::zero(dim));
        }
        for r in &rows {
            if r.len() != dim {
                return Err(SimError::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        let sup = rows.iter().map(|r| norm2(r)).fold(0.0, f64::max);
        Ok(InputSignal {
            kind: SignalKind::Samples(rows),
            dim,
            sup_norm: sup,
            zeros: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exact sup-norm `‖u‖ = sup_k |u(k)|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn value_at(&self, k: usize) -> &[f64] {
        match &self.kind {
            SignalKind::Zero => &self.zeros,
            SignalKind::Constant(v) => v,
            SignalKind::Samples(rows) => &rows[k.min(rows.len() - 1)],
        }
    }

    /// The time-shifted signal `k ↦ u(k + j)`.
    pub fn shifted(&self, j: usize) -> InputSignal {
        match &self.kind {
            SignalKind::Zero | SignalKind::Constant(_) => self.clone(),
            SignalKind::Samples(rows) => {
                let tail: Vec<Vec<f64>> = if j >= rows.len() {
                    vec![rows.last().unwrap().clone()]
                } else {
                    rows[j..].to_vec()
                };
                InputSignal::samples(self.dim, tail).unwrap()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + u * (hi - lo)
    }

    fn halving() -> DiscreteSystem {
        DiscreteSystem::new(1, 0, |x, _| vec![0.5 * x[0]])
    }

    fn halving_with_input() -> DiscreteSystem {
        DiscreteSystem::new(1, 1, |x, u| vec![0.5 * x[0] + u[0]])
    }

    fn max_map(a: f64, u: f64) -> f64 {
        (a - a * a).max(0.5 * a).max(u)
    }

    fn coupled_max_system() -> DiscreteSystem {
        DiscreteSystem::new(2, 1, |x, u| vec![max_map(x[1], u[0]), max_map(x[0], u[0])])
    }

    #[test]
    fn trajectory_halving() {
        let sys = halving();
        let t = sys.trajectory(&[8.0], &InputSignal::zero(0), 3).unwrap();
        assert_eq!(t, vec![vec![8.0], vec![4.0], vec![2.0], vec![1.0]]);
    }

    #[test]
    fn trajectory_zero_steps() {
        let sys = halving();
        let t = sys.trajectory(&[3.0], &InputSignal::zero(0), 0).unwrap();
        assert_eq!(t, vec![vec![3.0]]);
    }

    #[test]
    fn trajectory_origin_fixed_point() {
        let sys = coupled_max_system();
        let t = sys
            .trajectory(&[0.0, 0.0], &InputSignal::zero(1), 2)
            .unwrap();
        assert_eq!(t, vec![vec![0.0, 0.0]; 3]);
    }

    #[test]
    fn trajectory_dimension_mismatch() {
        let sys = halving();
        assert!(matches!(
            sys.trajectory(&[1.0, 2.0], &InputSignal::zero(0), 1),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lift_two_steps_numeric() {
        let sys = halving_with_input();
        let lifted = sys.lift(2);
        assert_eq!(lifted.input_dim(), 2);
        let y = lifted.step(&[4.0], &[1.0, 0.0]);
        assert_eq!(y, vec![1.5]);
    }

    #[test]
    fn lift_one_step_coincides() {
        let sys = halving_with_input();
        let lifted = sys.lift(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = uniform(&mut rng, -2.0, 2.0);
            let u = uniform(&mut rng, -1.0, 1.0);
            assert_eq!(lifted.step(&[x], &[u]), sys.step(&[x], &[u]));
        }
    }

    #[test]
    fn lift_trajectory_consistency() {
        let sys = coupled_max_system();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [1usize, 2, 3, 5] {
            let lifted = sys.lift(m);
            for _ in 0..25 {
                let xi = [uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)];
                let rows: Vec<Vec<f64>> = (0..4 * m)
                    .map(|_| vec![uniform(&mut rng, -1.0, 1.0)])
                    .collect();
                let u = InputSignal::samples(1, rows.clone()).unwrap();
                let fine = sys.trajectory(&xi, &u, 4 * m).unwrap();
                let stacked: Vec<Vec<f64>> = (0..4)
                    .map(|j| (0..m).flat_map(|t| rows[j * m + t].clone()).collect())
                    .collect();
                let w = InputSignal::samples(m, stacked).unwrap();
                let coarse = lifted.trajectory(&xi, &w, 4).unwrap();
                for j in 0..=4 {
                    assert_eq!(coarse[j], fine[j * m], "m={m} j={j}");
                }
            }
        }
    }

    #[test]
    fn semigroup_property() {
        let sys = coupled_max_system();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let xi = [uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)];
            let rows: Vec<Vec<f64>> = (0..12)
                .map(|_| vec![uniform(&mut rng, -1.0, 1.0)])
                .collect();
            let u = InputSignal::samples(1, rows).unwrap();
            let full = sys.trajectory(&xi, &u, 10).unwrap();
            let j = 4;
            let tail = sys.trajectory(&full[j], &u.shifted(j), 10 - j).unwrap();
            for k in 0..=(10 - j) {
                assert_eq!(tail[k], full[j + k]);
            }
        }
    }

    #[test]
    fn interconnect_matches_monolithic() {
        let g1: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![max_map(x[1], u[0])]);
        let g2: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![max_map(x[0], u[0])]);
        let topo =
            NetworkTopology::new(vec![1, 1], vec![vec![1], vec![0]], vec![g1, g2], 1).unwrap();
        let comp = topo.composite();
        assert_eq!(comp.state_dim(), 2);
        let mono = coupled_max_system();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let xi = [uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)];
            let u = InputSignal::constant(vec![uniform(&mut rng, -1.0, 1.0)]);
            let a = comp.trajectory(&xi, &u, 6).unwrap();
            let b = mono.trajectory(&xi, &u, 6).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn interconnect_permutation_is_relabeling() {
        let g1: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![max_map(x[1], u[0])]);
        let g2: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![max_map(x[0], u[0])]);
        // Swapped block order with indices relabeled accordingly.
        let h1: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![max_map(x[1], u[0])]);
        let h2: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![max_map(x[0], u[0])]);
        let topo =
            NetworkTopology::new(vec![1, 1], vec![vec![1], vec![0]], vec![g1, g2], 1).unwrap();
        let swapped =
            NetworkTopology::new(vec![1, 1], vec![vec![1], vec![0]], vec![h1, h2], 1).unwrap();
        let u = InputSignal::constant(vec![0.3]);
        let a = topo.composite().trajectory(&[0.7, -0.2], &u, 5).unwrap();
        let b = swapped.composite().trajectory(&[-0.2, 0.7], &u, 5).unwrap();
        for k in 0..=5 {
            assert_eq!(a[k][0], b[k][1]);
            assert_eq!(a[k][1], b[k][0]);
        }
    }

    #[test]
    fn composite_measurement_max_norm_is_sup() {
        let parts = vec![
            MeasurementFunction::euclidean(),
            MeasurementFunction::euclidean(),
        ];
        let omega = composite_measurement(&parts, &MonotonicNorm::MaxNorm, &[1, 1]);
        assert_eq!(omega.eval(&[3.0, -4.0]), 4.0);
        assert_eq!(omega.eval(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn composite_measurement_weighted_sum() {
        let parts = vec![
            MeasurementFunction::euclidean(),
            MeasurementFunction::euclidean(),
        ];
        let mu = MonotonicNorm::WeightedSum(vec![1.0, 1.0]);
        let omega = composite_measurement(&parts, &mu, &[1, 1]);
        assert_eq!(omega.eval(&[3.0, -4.0]), 7.0);
    }

    #[test]
    fn monotonic_norm_factors() {
        assert_eq!(MonotonicNorm::MaxNorm.infnorm_factor(), 1.0);
        assert_eq!(
            MonotonicNorm::WeightedSum(vec![1.0, 1.0]).infnorm_factor(),
            2.0
        );
        assert_eq!(
            MonotonicNorm::WeightedMax(vec![0.5, 2.0]).infnorm_factor(),
            2.0
        );
        assert_eq!(MonotonicNorm::MaxNorm.basis_weight(1), 1.0);
    }

    #[test]
    fn augment_incremental_diagonal_invariant() {
        let (doubled, omega) = augment_incremental(&halving()).unwrap();
        let t = doubled
            .trajectory(&[1.5, 1.5], &InputSignal::zero(0), 10)
            .unwrap();
        for row in &t {
            assert_eq!(omega.eval(row), 0.0);
        }
    }

    #[test]
    fn augment_incremental_decay() {
        let (doubled, omega) = augment_incremental(&halving()).unwrap();
        let t = doubled
            .trajectory(&[2.0, 0.0], &InputSignal::zero(0), 6)
            .unwrap();
        for (k, row) in t.iter().enumerate() {
            let expect = 2.0 * libm::pow(0.5, k as f64);
            assert!((omega.eval(row) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_incremental_is_scaled_distance_to_diagonal() {
        let (_, omega) = augment_incremental(&halving()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = uniform(&mut rng, -5.0, 5.0);
            let b = uniform(&mut rng, -5.0, 5.0);
            // Euclidean distance from (a, b) to the diagonal {(x, x)}.
            let dist = (a - b).abs() / libm::sqrt(2.0);
            let w = omega.eval(&[a, b]);
            assert!((w - libm::sqrt(2.0) * dist).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_rejects_inputs() {
        assert!(matches!(
            augment_incremental(&halving_with_input()),
            Err(SimError::HasInputs)
        ));
    }

    #[test]
    fn autonomized_clock_counts_steps() {
        let sys = autonomize_timevarying(|_, x, _| vec![0.5 * x[0]], 1, 0);
        let t = sys
            .trajectory(&[1.0, 0.0], &InputSignal::zero(0), 7)
            .unwrap();
        assert_eq!(t[7][1], 7.0);
    }

    #[test]
    fn autonomized_matches_direct_recursion() {
        let tv = |k: f64, x: &[f64], _: &[f64]| vec![x[0] / (2.0 + (k as i64 % 3) as f64)];
        let sys = autonomize_timevarying(tv, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let x0 = uniform(&mut rng, -4.0, 4.0);
            let t = sys
                .trajectory(&[x0, 0.0], &InputSignal::zero(0), 9)
                .unwrap();
            let mut x = x0;
            for (k, row) in t.iter().enumerate() {
                assert_eq!(row[0], x, "k={k}");
                x /= 2.0 + (k as i64 % 3) as f64;
            }
        }
    }

    #[test]
    fn time_invariant_map_unchanged_by_autonomization() {
        let sys = autonomize_timevarying(|_, x, _| vec![0.5 * x[0]], 1, 0);
        let plain = halving();
        let a = sys
            .trajectory(&[3.0, 0.0], &InputSignal::zero(0), 5)
            .unwrap();
        let b = plain.trajectory(&[3.0], &InputSignal::zero(0), 5).unwrap();
        for k in 0..=5 {
            assert_eq!(a[k][0], b[k][0]);
        }
    }

    #[test]
    fn input_signal_sup_norms() {
        assert_eq!(InputSignal::zero(2).sup_norm(), 0.0);
        assert_eq!(InputSignal::constant(vec![3.0, 4.0]).sup_norm(), 5.0);
        let s = InputSignal::samples(1, vec![vec![1.0], vec![-2.0], vec![0.5]]).unwrap();
        assert_eq!(s.sup_norm(), 2.0);
        assert_eq!(s.value_at(10), &[0.5]);
    }
}
