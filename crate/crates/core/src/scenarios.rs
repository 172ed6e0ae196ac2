//! Ready-made application systems with their bundled certificates, gains,
//! and recommended sample spaces: a coupled pair of max-type scalar maps,
//! a polar system converging to a non-compact set, oscillator
//! synchronization through error coordinates, incremental stability of a
//! doubled system, and a distributed observer chain.

use crate::certify::{Certificate, KBound, RateForm, SampleSpace, Strategy};
use crate::composer::SubsystemEstimate;
use crate::dtsim::{
    augment_incremental, composite_measurement, DiscreteSystem, MeasurementFunction,
    MeasurementTag, MonotonicNorm, NetworkTopology, ScalarMap, StateMap,
};
use crate::gaingraph::GainNetwork;
use crate::kfun::{Kind, PLFunction};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// A named system bundled with whatever certificate material it ships:
/// block measurements, subsystem estimates, a gain network, a monolithic
/// certificate, a growth bound, and a recommended sample space.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub topology: Option<NetworkTopology>,
    pub system: DiscreteSystem,
    pub omega: MeasurementFunction,
    pub block_measurements: Vec<MeasurementFunction>,
    pub estimates: Vec<SubsystemEstimate>,
    pub gains: Option<GainNetwork>,
    pub certificate: Option<Certificate>,
    pub k_bound: Option<KBound>,
    pub mu: Option<MonotonicNorm>,
    pub space: SampleSpace,
}

pub const SCENARIO_NAMES: &[&str] = &["example1", "polar", "oscillator", "incremental", "observer"];

/// Builds a scenario by name with its default parameters.
pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "example1" => Some(example1()),
        "polar" => Some(polar_example()),
        "oscillator" => Some(oscillator_sync(&OscillatorSpec::diffusive_demo())),
        "incremental" => Some(incremental_demo()),
        "observer" => Some(observer_demo(3).1),
        _ => None,
    }
}

fn branch(a: f64, u: f64) -> f64 {
    (a - a * a).max(0.5 * a).max(u)
}

/// Piecewise-linear upper bound of `s ↦ max{s − s², s/2}`.
///
/// The concave branch is bounded by its tangent envelope on the 1/64
/// lattice (vertices at consecutive tangent intersections, touching the
/// curve at the lattice points), the initial slope is pulled to `1 − 1e-5`
/// so that cycle compositions keep a positive below-identity margin, and
/// the exact half-slope line takes over where it crosses the last kept
/// tangent. The result dominates the true gain everywhere except on the
/// first segment, where the shortfall is at most `2.5e-11` and disappears
/// inside the checker tolerances.
pub fn example1_gain() -> PLFunction {
    const CAP_DEFECT: f64 = 1e-5;
    let t = |i: usize| i as f64 / 64.0;
    let tangent_at = |i: usize, s: f64| (1.0 - 2.0 * t(i)) * s + t(i) * t(i);
    let mut bps: Vec<(f64, f64)> = Vec::with_capacity(34);
    bps.push((0.0, 0.0));
    // Capped initial line meets the first tangent.
    let s0 = t(1) * t(1) / (2.0 * t(1) - CAP_DEFECT);
    bps.push((s0, (1.0 - CAP_DEFECT) * s0));
    for i in 1..=30 {
        let mid = 0.5 * (t(i) + t(i + 1));
        bps.push((mid, tangent_at(i, mid)));
    }
    // The tangent at 31/64 meets the half-slope line just past 1/2.
    let t31 = t(31);
    let sx = t31 * t31 / (2.0 * t31 - 0.5);
    bps.push((sx, 0.5 * sx));
    PLFunction::from_breakpoints(Kind::ClassKinf, bps, 0.5).expect("tangent envelope is valid")
}

/// Two scalar subsystems, each driven by the other through
/// `max{a − a², a/2, u}` coupling. The decay rate of autonomous solutions
/// approaches one, so no exponential envelope exists.
pub fn example1() -> Scenario {
    let g1: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![branch(x[1], u[0])]);
    let g2: StateMap = Arc::new(|x: &[f64], u: &[f64]| vec![branch(x[0], u[0])]);
    let topology =
        NetworkTopology::new(vec![1, 1], vec![vec![1], vec![0]], vec![g1, g2], 1).unwrap();
    let system = topology.composite();
    let gain = example1_gain();
    let gains = GainNetwork::new(
        vec![
            vec![PLFunction::zero(), gain.clone()],
            vec![gain.clone(), PLFunction::zero()],
        ],
        vec![PLFunction::identity(), PLFunction::identity()],
        1,
    )
    .unwrap();
    let omega = MeasurementFunction::sup_norm();
    let v: ScalarMap = {
        let om = omega.clone();
        Arc::new(move |x: &[f64]| om.eval(x))
    };
    let certificate = Certificate {
        v,
        form: RateForm::Max {
            alpha: gain.clone(),
            gamma: PLFunction::identity(),
        },
        lower: PLFunction::identity(),
        upper: PLFunction::identity(),
        steps: 1,
        omega: omega.clone(),
    };
    let k_bound = KBound::new(gain, PLFunction::identity()).unwrap();
    Scenario {
        name: "example1",
        topology: Some(topology),
        system,
        omega,
        block_measurements: vec![
            MeasurementFunction::euclidean(),
            MeasurementFunction::euclidean(),
        ],
        estimates: vec![
            SubsystemEstimate::block_norm(1),
            SubsystemEstimate::block_norm(1),
        ],
        gains: Some(gains),
        certificate: Some(certificate),
        k_bound: Some(k_bound),
        mu: Some(MonotonicNorm::MaxNorm),
        space: SampleSpace::symmetric(2, 2.0, 1, 1.0, 10_000, 42),
    }
}

/// Autonomous system in polar coordinates whose radius grows without bound
/// while the angle settles where the measurement `ω(r, θ) = 1 + sin θ`
/// vanishes.
pub fn polar_example() -> Scenario {
    let system = DiscreteSystem::new(2, 0, |x: &[f64], _: &[f64]| {
        let s = libm::sin(x[1]);
        vec![x[0] + 1.0 + s, 0.25 * (1.0 + s) + x[1]]
    });
    let omega = MeasurementFunction::new(MeasurementTag::SetDistance, |x: &[f64]| {
        1.0 + libm::sin(x[1])
    });
    Scenario {
        name: "polar",
        topology: None,
        system,
        omega,
        block_measurements: Vec::new(),
        estimates: Vec::new(),
        gains: None,
        certificate: None,
        k_bound: None,
        mu: None,
        space: SampleSpace::new(
            vec![(0.0, 3.0), (0.0, 6.3)],
            Vec::new(),
            1000,
            7,
            Strategy::Mixed,
        ),
    }
}

/// Per-node dynamics of an uncoupled oscillator.
pub type NodeMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Pairwise interaction law; antisymmetric by contract:
/// `ψ(x, y) = −ψ(y, x)`.
pub type CouplingMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Parameters of a coupled oscillator network.
#[derive(Clone)]
pub struct OscillatorSpec {
    pub node_dim: usize,
    pub node_maps: Vec<NodeMap>,
    pub coupling_weight: f64,
    /// Interaction matrix applied to the coupling law output.
    pub interaction: Vec<Vec<f64>>,
    pub coupling_law: CouplingMap,
    pub neighbors: Vec<Vec<usize>>,
}

impl OscillatorSpec {
    /// Three identical scalar nodes `f(z) = z/2` on a complete graph with
    /// diffusive coupling `ψ(x, y) = y − x`, weight 0.1, unit interaction.
    pub fn diffusive_demo() -> Self {
        let f: NodeMap = Arc::new(|z: &[f64]| vec![0.5 * z[0]]);
        OscillatorSpec {
            node_dim: 1,
            node_maps: vec![f.clone(), f.clone(), f],
            coupling_weight: 0.1,
            interaction: vec![vec![1.0]],
            coupling_law: Arc::new(|x: &[f64], y: &[f64]| {
                x.iter().zip(y).map(|(a, b)| b - a).collect()
            }),
            neighbors: vec![vec![1, 2], vec![0, 2], vec![0, 1]],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_maps.len()
    }

    fn apply_interaction(&self, v: &[f64]) -> Vec<f64> {
        self.interaction
            .iter()
            .map(|row| row.iter().zip(v).map(|(c, x)| c * x).sum())
            .collect()
    }

    fn coupling_sum(&self, i: usize, nodes: &[Vec<f64>]) -> Vec<f64> {
        let p = self.node_dim;
        let mut acc = vec![0.0; p];
        for &j in &self.neighbors[i] {
            let psi = (self.coupling_law)(&nodes[i], &nodes[j]);
            let forced = self.apply_interaction(&psi);
            for (a, b) in acc.iter_mut().zip(&forced) {
                *a += self.coupling_weight * b;
            }
        }
        acc
    }
}

/// The network in node coordinates:
/// `z_i⁺ = f_i(z_i) + a·Σ_{j∈N_i} Υ ψ(z_i, z_j)`.
pub fn oscillator_nodes(spec: &OscillatorSpec) -> DiscreteSystem {
    let spec = spec.clone();
    let l = spec.node_count();
    let p = spec.node_dim;
    DiscreteSystem::new(l * p, 0, move |x: &[f64], _: &[f64]| {
        let nodes: Vec<Vec<f64>> = (0..l).map(|i| x[i * p..(i + 1) * p].to_vec()).collect();
        let mut out = Vec::with_capacity(l * p);
        for i in 0..l {
            let mut zi = (spec.node_maps[i])(&nodes[i]);
            let coup = spec.coupling_sum(i, &nodes);
            for (a, b) in zi.iter_mut().zip(&coup) {
                *a += b;
            }
            out.extend_from_slice(&zi);
        }
        out
    })
}

/// The same network in average-and-error coordinates
/// `(e_1, …, e_ℓ, z̄)` with `z_i = z̄ + e_i`: the average advances through
/// the mean of the node maps (pairwise couplings cancel by antisymmetry)
/// and each error block measures the distance to synchrony. The
/// measurement ranges over the error blocks only.
pub fn oscillator_sync(spec: &OscillatorSpec) -> Scenario {
    let l = spec.node_count();
    let p = spec.node_dim;
    let dim = (l + 1) * p;
    let spec_c = spec.clone();
    let system = DiscreteSystem::new(dim, 0, move |x: &[f64], _: &[f64]| {
        let zbar = &x[l * p..];
        let nodes: Vec<Vec<f64>> = (0..l)
            .map(|i| {
                x[i * p..(i + 1) * p]
                    .iter()
                    .zip(zbar)
                    .map(|(e, z)| e + z)
                    .collect()
            })
            .collect();
        let fvals: Vec<Vec<f64>> = (0..l).map(|i| (spec_c.node_maps[i])(&nodes[i])).collect();
        let mut avg = vec![0.0; p];
        for fv in &fvals {
            for (a, b) in avg.iter_mut().zip(fv) {
                *a += b / l as f64;
            }
        }
        let mut out = Vec::with_capacity(dim);
        for (i, fv) in fvals.iter().enumerate() {
            let coup = spec_c.coupling_sum(i, &nodes);
            for d in 0..p {
                out.push(fv[d] + coup[d] - avg[d]);
            }
        }
        out.extend_from_slice(&avg);
        out
    });
    let omega = MeasurementFunction::new(MeasurementTag::Custom, move |x: &[f64]| {
        (0..l)
            .map(|i| crate::dtsim::norm2(&x[i * p..(i + 1) * p]))
            .fold(0.0, f64::max)
    });
    Scenario {
        name: "oscillator",
        topology: None,
        system,
        omega,
        block_measurements: Vec::new(),
        estimates: Vec::new(),
        gains: None,
        certificate: None,
        k_bound: None,
        mu: None,
        space: SampleSpace::symmetric(dim, 2.0, 0, 0.0, 1000, 17),
    }
}

/// Incremental stability of the halving map: two copies with the increment
/// measurement and the certificate `V(ξ, ζ) = |ξ − ζ|` contracting at rate
/// one half every step.
pub fn incremental_demo() -> Scenario {
    let base = DiscreteSystem::new(1, 0, |x: &[f64], _: &[f64]| vec![0.5 * x[0]]);
    let (system, omega) = augment_incremental(&base).expect("autonomous base");
    let v: ScalarMap = {
        let om = omega.clone();
        Arc::new(move |x: &[f64]| om.eval(x))
    };
    let certificate = Certificate {
        v,
        form: RateForm::Max {
            alpha: PLFunction::linear(0.5),
            gamma: PLFunction::zero(),
        },
        lower: PLFunction::identity(),
        upper: PLFunction::identity(),
        steps: 1,
        omega: omega.clone(),
    };
    Scenario {
        name: "incremental",
        topology: None,
        system,
        omega,
        block_measurements: Vec::new(),
        estimates: Vec::new(),
        gains: None,
        certificate: Some(certificate),
        k_bound: None,
        mu: None,
        space: SampleSpace::symmetric(2, 2.0, 0, 0.0, 2000, 23),
    }
}

/// A chain of scalar plants, each locally unstable, observed by
/// Luenberger-style local observers that exchange output and estimate
/// messages with their neighbors once per step.
#[derive(Debug, Clone)]
pub struct ObserverNetwork {
    neighbors: Vec<Vec<usize>>,
    plant_self: f64,
    plant_coupling: f64,
    output_coupling: f64,
    injection: f64,
}

/// Message sent from node `j` to a neighbor: the local output sample and
/// the local state estimate.
#[derive(Debug, Clone, Copy)]
pub struct ObserverMessage {
    pub output: f64,
    pub estimate: f64,
}

impl ObserverNetwork {
    /// Chain topology on `l ≥ 2` nodes. The plant weight 1.05 makes every
    /// node unstable in isolation; the injection gain −0.9 contracts each
    /// tracking error at rate 0.15 plus a 0.005 leak per neighbor, inside
    /// the bundled gains `s/2` (self) and `s/4` (neighbor).
    pub fn chain(l: usize) -> Self {
        assert!(l >= 2);
        let neighbors = (0..l)
            .map(|i| {
                let mut n = Vec::new();
                if i > 0 {
                    n.push(i - 1);
                }
                if i + 1 < l {
                    n.push(i + 1);
                }
                n
            })
            .collect();
        ObserverNetwork {
            neighbors,
            plant_self: 1.05,
            plant_coupling: 0.05,
            output_coupling: 0.05,
            injection: -0.9,
        }
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// The locally measurable outputs `y_i = x_i + c·Σ_{j∈N_i} x_j`.
    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| {
                x[i] + self.output_coupling * self.neighbors[i].iter().map(|&j| x[j]).sum::<f64>()
            })
            .collect()
    }

    /// Observer update for node `i` from its own estimate, its own output,
    /// and the messages received from its neighbors. Locality is
    /// structural: nothing else reaches the node.
    fn observer_update(
        &self,
        own_estimate: f64,
        own_output: f64,
        inbox: &[ObserverMessage],
    ) -> f64 {
        let neighbor_estimates: f64 = inbox.iter().map(|m| m.estimate).sum();
        let predicted_output = own_estimate + self.output_coupling * neighbor_estimates;
        self.plant_self * own_estimate
            + self.plant_coupling * neighbor_estimates
            + self.injection * (predicted_output - own_output)
    }

    /// One synchronous round: every node measures, the exchange harness
    /// delivers `(y_j, x̂_j)` along the edges, and plant and observers
    /// advance together.
    pub fn step(&self, x: &[f64], xhat: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = self.node_count();
        let y = self.outputs(x);
        let x_next: Vec<f64> = (0..l)
            .map(|i| {
                self.plant_self * x[i]
                    + self.plant_coupling * self.neighbors[i].iter().map(|&j| x[j]).sum::<f64>()
            })
            .collect();
        let xhat_next: Vec<f64> = (0..l)
            .map(|i| {
                let inbox: Vec<ObserverMessage> = self.neighbors[i]
                    .iter()
                    .map(|&j| ObserverMessage {
                        output: y[j],
                        estimate: xhat[j],
                    })
                    .collect();
                self.observer_update(xhat[i], y[i], &inbox)
            })
            .collect();
        (x_next, xhat_next)
    }

    /// The composite plant-and-observer system as a block topology: block
    /// `i` is `(x_i, x̂_i)` and reads only neighboring blocks.
    pub fn composite_topology(&self) -> NetworkTopology {
        let l = self.node_count();
        let updates: Vec<StateMap> = (0..l)
            .map(|i| {
                let me = self.clone();
                Arc::new(move |state: &[f64], _: &[f64]| {
                    let read = |j: usize| (state[2 * j], state[2 * j + 1]);
                    let (xi, xhi) = read(i);
                    let mut xs = 0.0;
                    let mut xhs = 0.0;
                    for &j in &me.neighbors[i] {
                        let (xj, xhj) = read(j);
                        xs += xj;
                        xhs += xhj;
                    }
                    let y = xi + me.output_coupling * xs;
                    let yh = xhi + me.output_coupling * xhs;
                    let x_next = me.plant_self * xi + me.plant_coupling * xs;
                    let xh_next =
                        me.plant_self * xhi + me.plant_coupling * xhs + me.injection * (yh - y);
                    vec![x_next, xh_next]
                }) as StateMap
            })
            .collect();
        NetworkTopology::new(vec![2; l], self.neighbors.clone(), updates, 0).unwrap()
    }
}

/// Builds the observer network plus its scenario bundle: per-block
/// tracking-error measurements, estimates `W_i = |x̂_i − x_i|`, gains
/// `γ_ii = s/2` and `γ_ij = s/4` on the edges, horizon 1.
pub fn observer_demo(l: usize) -> (ObserverNetwork, Scenario) {
    let net = ObserverNetwork::chain(l);
    let topology = net.composite_topology();
    let system = topology.composite();
    let error_measure =
        || MeasurementFunction::new(MeasurementTag::SetDistance, |b: &[f64]| (b[1] - b[0]).abs());
    let block_measurements: Vec<MeasurementFunction> = (0..l).map(|_| error_measure()).collect();
    let estimates: Vec<SubsystemEstimate> = (0..l)
        .map(|_| SubsystemEstimate {
            w: Arc::new(|b: &[f64]| (b[1] - b[0]).abs()),
            lower: PLFunction::identity(),
            upper: PLFunction::identity(),
            omega: error_measure(),
            dim: 2,
        })
        .collect();
    let mut gain_rows = vec![vec![PLFunction::zero(); l]; l];
    for (i, row) in gain_rows.iter_mut().enumerate() {
        row[i] = PLFunction::linear(0.5);
        for &j in net.neighbors(i) {
            row[j] = PLFunction::linear(0.25);
        }
    }
    let gains = GainNetwork::new(gain_rows, vec![PLFunction::zero(); l], 1).unwrap();
    let omega = composite_measurement(&block_measurements, &MonotonicNorm::MaxNorm, &vec![2; l]);
    let scenario = Scenario {
        name: "observer",
        topology: Some(topology),
        system,
        omega,
        block_measurements,
        estimates,
        gains: Some(gains),
        certificate: None,
        k_bound: None,
        mu: Some(MonotonicNorm::MaxNorm),
        space: SampleSpace::symmetric(2 * l, 2.0, 0, 0.0, 10_000, 31),
    };
    (net, scenario)
}
