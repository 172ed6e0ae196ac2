//! Gain digraph analysis: simple-cycle enumeration, the cyclic small-gain
//! test, and constructive per-node scalings.
//!
//! A [`GainNetwork`] is an `ℓ × ℓ` matrix of piecewise-linear gains (the
//! zero gain marks an absent edge) together with per-node input gains and a
//! finite-step horizon. The small-gain test composes the gains around every
//! simple cycle of the non-zero edge set and requires each composition to
//! stay strictly below the identity; checking the quantification over
//! arbitrary index sequences reduces to simple cycles, because any repeated
//! index factors a sequence through a cycle whose composition is already
//! sub-identity.

use crate::kfun::{geometric_grid, Kind, PLFunction};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum GainError {
    BadNetwork(&'static str),
    /// The inflated gains violate the cyclic small-gain condition; retry
    /// with a smaller inflation.
    MarginExhausted {
        epsilon: f64,
    },
    /// The constructed scaling failed its own soundness check.
    ScalingUnsound,
}

impl fmt::Display for GainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainError::BadNetwork(msg) => write!(f, "bad gain network: {msg}"),
            GainError::MarginExhausted { epsilon } => {
                write!(
                    f,
                    "inflated gains violate the small-gain condition at epsilon = {epsilon}"
                )
            }
            GainError::ScalingUnsound => write!(f, "constructed scaling failed verification"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GainError {}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainWire {
    l: usize,
    #[serde(rename = "M")]
    horizon: usize,
    gains: Vec<Vec<Option<PLFunction>>>,
    input_gains: Vec<Option<PLFunction>>,
}

/// A directed gain graph on `ℓ` nodes with finite-step horizon `M`.
///
/// `gains[i][j]` bounds the influence of node `j` on node `i`; diagonal
/// entries (self-gains) are permitted and enter the cycle check as
/// one-cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GainWire", into = "GainWire")]
pub struct GainNetwork {
    gains: Vec<Vec<PLFunction>>,
    input_gains: Vec<PLFunction>,
    horizon: usize,
}

impl TryFrom<GainWire> for GainNetwork {
    type Error = GainError;
    fn try_from(w: GainWire) -> Result<Self, GainError> {
        let unwrap = |g: Option<PLFunction>| g.unwrap_or_else(PLFunction::zero);
        if w.gains.len() != w.l || w.input_gains.len() != w.l {
            return Err(GainError::BadNetwork("gain matrix shape does not match l"));
        }
        let gains = w
            .gains
            .into_iter()
            .map(|row| row.into_iter().map(unwrap).collect())
            .collect();
        let input_gains = w.input_gains.into_iter().map(unwrap).collect();
        GainNetwork::new(gains, input_gains, w.horizon)
    }
}

impl From<GainNetwork> for GainWire {
    fn from(n: GainNetwork) -> Self {
        let wrap = |g: PLFunction| if g.is_zero() { None } else { Some(g) };
        GainWire {
            l: n.gains.len(),
            horizon: n.horizon,
            gains: n
                .gains
                .into_iter()
                .map(|row| row.into_iter().map(wrap).collect())
                .collect(),
            input_gains: n.input_gains.into_iter().map(wrap).collect(),
        }
    }
}

impl GainNetwork {
    /// Validates shape and kinds: interconnection gains must be class K∞ or
    /// zero, input gains class K or zero, and the horizon positive.
    pub fn new(
        gains: Vec<Vec<PLFunction>>,
        input_gains: Vec<PLFunction>,
        horizon: usize,
    ) -> Result<Self, GainError> {
        let l = gains.len();
        if l == 0 {
            return Err(GainError::BadNetwork("need at least one node"));
        }
        if gains.iter().any(|row| row.len() != l) {
            return Err(GainError::BadNetwork("gain matrix must be square"));
        }
        if input_gains.len() != l {
            return Err(GainError::BadNetwork("need one input gain per node"));
        }
        if horizon == 0 {
            return Err(GainError::BadNetwork("horizon must be positive"));
        }
        for row in &gains {
            for g in row {
                if !g.is_zero() && g.kind() != Kind::ClassKinf {
                    return Err(GainError::BadNetwork(
                        "interconnection gains must be class Kinf",
                    ));
                }
            }
        }
        Ok(GainNetwork {
            gains,
            input_gains,
            horizon,
        })
    }

    pub fn node_count(&self) -> usize {
        self.gains.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gain(&self, i: usize, j: usize) -> &PLFunction {
        &self.gains[i][j]
    }

    pub fn input_gain(&self, i: usize) -> &PLFunction {
        &self.input_gains[i]
    }

    fn successors(&self, a: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&b| !self.gains[a][b].is_zero())
            .collect()
    }

    /// All simple directed cycles of the non-zero edge set, each in
    /// canonical rotation (smallest node first); self-loops appear as
    /// one-cycles.
    ///
    /// Depth-first search rooted at each node in ascending order, restricted
    /// to nodes not smaller than the root, so every cycle is emitted exactly
    /// once.
    pub fn simple_cycles(&self) -> Vec<Vec<usize>> {
        let l = self.node_count();
        let mut out = Vec::new();
        for root in 0..l {
            let mut path = vec![root];
            let mut on_path = vec![false; l];
            on_path[root] = true;
            // (node, successors not yet tried)
            let mut stack = vec![(root, self.successors(root))];
            while !stack.is_empty() {
                let top = stack.len() - 1;
                match stack[top].1.pop() {
                    Some(b) if b == root => out.push(path.clone()),
                    Some(b) if b > root && !on_path[b] => {
                        on_path[b] = true;
                        path.push(b);
                        stack.push((b, self.successors(b)));
                    }
                    Some(_) => {}
                    None => {
                        stack.pop();
                        if let Some(b) = path.pop() {
                            on_path[b] = false;
                        }
                    }
                }
            }
        }
        for c in &mut out {
            debug_assert_eq!(c[0], *c.iter().min().unwrap());
        }
        out.sort();
        out
    }

    /// Composes the gains around a cycle `(v0, v1, …, v_{r−1})`:
    /// `γ_{v0 v1} ∘ γ_{v1 v2} ∘ ⋯ ∘ γ_{v_{r−1} v0}`.
    pub fn cycle_composition(&self, cycle: &[usize]) -> PLFunction {
        let r = cycle.len();
        let mut acc = self.gains[cycle[r - 1]][cycle[0]].clone();
        for k in (0..r - 1).rev() {
            acc = self.gains[cycle[k]][cycle[k + 1]].compose(&acc);
        }
        acc
    }

    /// The cyclic small-gain test: every simple-cycle composition must stay
    /// below the identity with relative margin `tol` on `(0, s_max]`.
    pub fn check_small_gain(&self, s_max: f64, grid: usize, tol: f64) -> SmallGainReport {
        let mut cycles = Vec::new();
        let mut verdict = true;
        let mut worst: Option<usize> = None;
        for nodes in self.simple_cycles() {
            let comp = self.cycle_composition(&nodes);
            let r = comp.below_identity(s_max, grid, tol);
            verdict &= r.verdict;
            cycles.push(CycleReport {
                nodes,
                verdict: r.verdict,
                margin: r.worst_margin,
                worst_s: r.worst_s,
            });
            let i = cycles.len() - 1;
            if worst.is_none_or(|w| cycles[i].margin < cycles[w].margin) {
                worst = Some(i);
            }
        }
        SmallGainReport {
            verdict,
            cycles,
            worst_cycle: worst,
        }
    }

    /// Replaces every non-zero interconnection gain by `(1+ε)·γ`; input
    /// gains are unchanged.
    pub fn inflate(&self, epsilon: f64) -> GainNetwork {
        assert!(epsilon >= 0.0);
        if epsilon == 0.0 {
            return self.clone();
        }
        let gains = self
            .gains
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| {
                        if g.is_zero() {
                            g.clone()
                        } else {
                            g.scale(1.0 + epsilon)
                        }
                    })
                    .collect()
            })
            .collect();
        GainNetwork {
            gains,
            input_gains: self.input_gains.clone(),
            horizon: self.horizon,
        }
    }

    /// Constructs class-K∞ node scalings `σ_i` such that
    /// `γ_ij(σ_j(s)) < σ_i(s)` for the original gains.
    ///
    /// Each `σ_i` is the pointwise maximum, over all simple paths starting
    /// at `i`, of the path composition of the `(1+ε)`-inflated gains (the
    /// empty path contributes the identity). Compositions containing a
    /// cycle are dominated because inflated cycles stay below the identity,
    /// so the finite max over simple paths bounds all sequences, and the
    /// inflation turns the bound into strict decrease for the original
    /// gains.
    pub fn construct_sigma(
        &self,
        epsilon: f64,
        s_max: f64,
        grid: usize,
    ) -> Result<SigmaScaling, GainError> {
        let inflated = self.inflate(epsilon);
        let gate = inflated.check_small_gain(s_max, grid, 1e-9);
        if !gate.verdict {
            return Err(GainError::MarginExhausted { epsilon });
        }
        let l = self.node_count();
        let mut sigma = Vec::with_capacity(l);
        for i in 0..l {
            let mut acc = PLFunction::identity();
            // DFS over simple paths from i carrying the running composition.
            let mut path_on = vec![false; l];
            path_on[i] = true;
            let mut stack = vec![(i, inflated.successors(i), PLFunction::identity())];
            while !stack.is_empty() {
                let top = stack.len() - 1;
                match stack[top].1.pop() {
                    Some(b) if !path_on[b] => {
                        let a = stack[top].0;
                        let ext = stack[top].2.compose(&inflated.gains[a][b]);
                        acc = acc.pointwise_max(&ext);
                        path_on[b] = true;
                        stack.push((b, inflated.successors(b), ext));
                    }
                    Some(_) => {}
                    None => {
                        let (b, _, _) = stack.pop().unwrap();
                        if b != i {
                            path_on[b] = false;
                        }
                    }
                }
            }
            sigma.push(acc);
        }
        // Verify the strict-decrease invariant for the original gains on a
        // geometric grid.
        let pts = geometric_grid(s_max, grid.max(2));
        let mut margin = f64::INFINITY;
        for i in 0..l {
            for j in 0..l {
                if self.gains[i][j].is_zero() {
                    continue;
                }
                for &s in &pts {
                    let lhs = self.gains[i][j].eval(sigma[j].eval(s));
                    let rhs = sigma[i].eval(s);
                    margin = margin.min((rhs - lhs) / rhs);
                }
            }
        }
        if margin <= 0.0 {
            return Err(GainError::ScalingUnsound);
        }
        Ok(SigmaScaling { sigma, margin })
    }

    /// [`construct_sigma`](Self::construct_sigma) with automatic back-off of
    /// the inflation: tries `0.1, 0.05, 0.01, 0.001`, then a candidate
    /// derived from the measured cycle margins for gains that hug the
    /// identity near the origin.
    pub fn construct_sigma_auto(
        &self,
        s_max: f64,
        grid: usize,
    ) -> Result<(SigmaScaling, f64), GainError> {
        let mut candidates = vec![0.1, 0.05, 0.01, 0.001];
        let base = self.check_small_gain(s_max, grid, 1e-9);
        if !base.verdict {
            return Err(GainError::MarginExhausted { epsilon: 0.0 });
        }
        if let Some(w) = base.worst_cycle {
            let delta = base.cycles[w].margin;
            let r = self.node_count() as f64;
            let derived = libm::pow((1.0 - 2e-9) / (1.0 - delta), 1.0 / r) - 1.0;
            if derived > 0.0 {
                candidates.push(derived * 0.5);
            }
        }
        let mut last = GainError::MarginExhausted { epsilon: 0.0 };
        for eps in candidates {
            match self.construct_sigma(eps, s_max, grid) {
                Ok(s) => return Ok((s, eps)),
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

/// Per-cycle outcome of the small-gain test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub nodes: Vec<usize>,
    pub verdict: bool,
    /// Worst relative margin `(s − T(s))/s` of the cycle composition `T`.
    pub margin: f64,
    pub worst_s: f64,
}

/// Outcome of [`GainNetwork::check_small_gain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallGainReport {
    pub verdict: bool,
    pub cycles: Vec<CycleReport>,
    /// Index into `cycles` of the worst margin, if any cycle exists.
    pub worst_cycle: Option<usize>,
}

/// Class-K∞ node scalings realizing uniform strict decrease of the scaled
/// gains, together with the verified relative margin.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaScaling {
    pub sigma: Vec<PLFunction>,
    pub margin: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn zero() -> PLFunction {
        PLFunction::zero()
    }

    fn net(gains: Vec<Vec<PLFunction>>, m: usize) -> GainNetwork {
        let l = gains.len();
        GainNetwork::new(gains, vec![PLFunction::identity(); l], m).unwrap()
    }

    fn example_pair_gain() -> PLFunction {
        PLFunction::sample_monotone(|s| (s - s * s).max(0.5 * s), 10.0).unwrap()
    }

    #[test]
    fn cycles_of_two_node_exchange() {
        let g = example_pair_gain();
        let n = net(vec![vec![zero(), g.clone()], vec![g, zero()]], 1);
        assert_eq!(n.simple_cycles(), vec![vec![0, 1]]);
    }

    #[test]
    fn cycles_of_empty_matrix() {
        let n = net(vec![vec![zero(), zero()], vec![zero(), zero()]], 1);
        assert!(n.simple_cycles().is_empty());
    }

    #[test]
    fn cycles_single_self_loop() {
        let n = net(vec![vec![PLFunction::linear(0.5)]], 1);
        assert_eq!(n.simple_cycles(), vec![vec![0]]);
    }

    /// Exhaustive oracle: enumerate all index sequences with distinct
    /// entries whose consecutive (cyclic) pairs are edges, deduplicated by
    /// rotation.
    fn exhaustive_cycles(n: &GainNetwork) -> BTreeSet<Vec<usize>> {
        let l = n.node_count();
        let mut found = BTreeSet::new();
        let mut seq: Vec<usize> = Vec::new();
        fn extend(
            n: &GainNetwork,
            seq: &mut Vec<usize>,
            found: &mut BTreeSet<Vec<usize>>,
            l: usize,
        ) {
            let r = seq.len();
            if r >= 1 {
                let last = seq[r - 1];
                if !n.gain(last, seq[0]).is_zero() {
                    let min = *seq.iter().min().unwrap();
                    let p = seq.iter().position(|&v| v == min).unwrap();
                    let mut rot = seq[p..].to_vec();
                    rot.extend_from_slice(&seq[..p]);
                    found.insert(rot);
                }
            }
            if r == l {
                return;
            }
            for b in 0..l {
                if seq.contains(&b) {
                    continue;
                }
                if r == 0 || !n.gain(seq[r - 1], b).is_zero() {
                    seq.push(b);
                    extend(n, seq, found, l);
                    seq.pop();
                }
            }
        }
        extend(n, &mut seq, &mut found, l);
        found
    }

    #[test]
    fn cycles_match_exhaustive_enumeration() {
        use rand_chacha::ChaCha8Rng;
        use rand_core::{RngCore, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..60 {
            let l = 2 + (rng.next_u64() % 4) as usize;
            let gains: Vec<Vec<PLFunction>> = (0..l)
                .map(|_| {
                    (0..l)
                        .map(|_| {
                            if rng.next_u64() % 3 == 0 {
                                PLFunction::linear(0.4)
                            } else {
                                zero()
                            }
                        })
                        .collect()
                })
                .collect();
            let n = net(gains, 1);
            let fast: BTreeSet<Vec<usize>> = n.simple_cycles().into_iter().collect();
            assert_eq!(fast, exhaustive_cycles(&n));
        }
    }

    #[test]
    fn small_gain_holds_for_example_pair() {
        let g = example_pair_gain();
        let n = net(vec![vec![zero(), g.clone()], vec![g, zero()]], 1);
        let rep = n.check_small_gain(10.0, 512, 1e-9);
        assert!(rep.verdict);
        assert_eq!(rep.cycles.len(), 1);
    }

    #[test]
    fn small_gain_rejects_identity_self_loop() {
        let n = net(vec![vec![PLFunction::identity()]], 1);
        assert!(!n.check_small_gain(10.0, 64, 1e-9).verdict);
    }

    #[test]
    fn small_gain_two_linear_gains() {
        let n = net(
            vec![
                vec![zero(), PLFunction::linear(2.0)],
                vec![PLFunction::linear(1.0 / 3.0), zero()],
            ],
            1,
        );
        let rep = n.check_small_gain(10.0, 64, 1e-9);
        assert!(rep.verdict);
        let m = rep.cycles[0].margin;
        assert!((m - (1.0 - 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rotation_invariance_of_cycle_verdicts() {
        use rand_chacha::ChaCha8Rng;
        use rand_core::{RngCore, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let l = 3;
            let gains: Vec<Vec<PLFunction>> = (0..l)
                .map(|_| {
                    (0..l)
                        .map(|_| {
                            let c = 0.2 + (rng.next_u64() % 60) as f64 / 100.0;
                            if rng.next_u64() % 2 == 0 {
                                PLFunction::linear(c)
                            } else {
                                zero()
                            }
                        })
                        .collect()
                })
                .collect();
            let n = net(gains, 1);
            for cycle in n.simple_cycles() {
                let base = n
                    .cycle_composition(&cycle)
                    .below_identity(10.0, 64, 1e-9)
                    .verdict;
                for r in 1..cycle.len() {
                    let mut rot = cycle[r..].to_vec();
                    rot.extend_from_slice(&cycle[..r]);
                    let v = n
                        .cycle_composition(&rot)
                        .below_identity(10.0, 64, 1e-9)
                        .verdict;
                    assert_eq!(v, base);
                }
            }
        }
    }

    #[test]
    fn inflate_scales_edges_only() {
        let n = net(
            vec![
                vec![zero(), PLFunction::linear(0.5)],
                vec![PLFunction::linear(0.5), zero()],
            ],
            1,
        );
        let same = n.inflate(0.0);
        assert_eq!(same.gain(0, 1).eval(2.0), 1.0);
        let doubled = n.inflate(1.0);
        assert_eq!(doubled.gain(0, 1).eval(2.0), 2.0);
        assert!(doubled.gain(0, 0).is_zero());
        assert_eq!(doubled.input_gain(0).eval(2.0), 2.0);
    }

    #[test]
    fn sigma_trivial_single_node() {
        let n = net(vec![vec![zero()]], 1);
        let s = n.construct_sigma(0.01, 10.0, 128).unwrap();
        assert_eq!(s.sigma.len(), 1);
        assert_eq!(s.sigma[0].eval(3.0), 3.0);
    }

    #[test]
    fn sigma_symmetric_half_gains() {
        let n = net(
            vec![
                vec![zero(), PLFunction::linear(0.5)],
                vec![PLFunction::linear(0.5), zero()],
            ],
            1,
        );
        let s = n.construct_sigma(0.0, 10.0, 128).unwrap();
        // max{id, (1+0)·s/2} = id on both nodes.
        assert_eq!(s.sigma[0].eval(4.0), 4.0);
        assert_eq!(s.sigma[1].eval(4.0), 4.0);
        assert!(s.margin > 0.4);
    }

    #[test]
    fn sigma_sound_on_random_linear_networks() {
        use rand_chacha::ChaCha8Rng;
        use rand_core::{RngCore, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut built = 0;
        while built < 20 {
            let l = 2 + (rng.next_u64() % 3) as usize;
            let gains: Vec<Vec<PLFunction>> = (0..l)
                .map(|_| {
                    (0..l)
                        .map(|_| {
                            if rng.next_u64() % 2 == 0 {
                                let c = 0.1 + (rng.next_u64() % 70) as f64 / 100.0;
                                PLFunction::linear(c)
                            } else {
                                zero()
                            }
                        })
                        .collect()
                })
                .collect();
            let n = net(gains, 1);
            if !n.check_small_gain(10.0, 64, 1e-9).verdict {
                continue;
            }
            built += 1;
            let (s, _eps) = n.construct_sigma_auto(10.0, 128).unwrap();
            assert!(s.margin > 0.0);
            for &p in &geometric_grid(10.0, 128) {
                for i in 0..l {
                    for j in 0..l {
                        if n.gain(i, j).is_zero() {
                            continue;
                        }
                        assert!(n.gain(i, j).eval(s.sigma[j].eval(p)) < s.sigma[i].eval(p));
                    }
                }
            }
        }
    }

    #[test]
    fn small_gain_monotone_in_inflation() {
        let g = example_pair_gain();
        let n = net(vec![vec![zero(), g.clone()], vec![g, zero()]], 1);
        // Once the check passes at some inflation it keeps passing for every
        // smaller one.
        let verdicts: Vec<bool> = [0.2, 0.1, 0.05, 0.01, 0.0]
            .iter()
            .map(|&eps| n.inflate(eps).check_small_gain(10.0, 128, 1e-9).verdict)
            .collect();
        for w in verdicts.windows(2) {
            assert!(!w[0] || w[1]);
        }
        assert!(*verdicts.last().unwrap());
    }

    #[test]
    fn serde_uses_null_for_absent_edges() {
        let n = net(
            vec![
                vec![zero(), PLFunction::linear(0.5)],
                vec![PLFunction::linear(0.5), zero()],
            ],
            2,
        );
        let js = serde_json::to_string(&n).unwrap();
        assert!(js.contains("null"));
        assert!(js.contains("\"M\":2"));
        let back: GainNetwork = serde_json::from_str(&js).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn network_construction_rejects_bad_shapes() {
        // Bounded class-K interconnection gain.
        let bounded = PLFunction::from_breakpoints(
            crate::kfun::Kind::ClassK,
            alloc::vec![(0.0, 0.0), (1.0, 1.0)],
            0.0,
        )
        .unwrap();
        assert!(matches!(
            GainNetwork::new(
                alloc::vec![alloc::vec![bounded]],
                alloc::vec![PLFunction::zero()],
                1
            ),
            Err(GainError::BadNetwork(_))
        ));
        // Non-square matrix.
        assert!(GainNetwork::new(
            alloc::vec![alloc::vec![zero(), zero()]],
            alloc::vec![PLFunction::zero()],
            1
        )
        .is_err());
        // Zero horizon.
        assert!(GainNetwork::new(
            alloc::vec![alloc::vec![zero()]],
            alloc::vec![PLFunction::zero()],
            0
        )
        .is_err());
    }
}
