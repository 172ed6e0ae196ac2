//! Sampled falsification of Lyapunov-type inequalities and constructive
//! conversions between the three decrease forms.
//!
//! Every universally quantified inequality is checked on a deterministic
//! sample cloud: a seeded lattice/random mix over a state box and an input
//! box. A pass is evidence on the sampled region, not a proof; a failure
//! ships a witness that independently re-evaluates to a violation. Samples
//! are indexed, and the draw for index `i` depends only on `(seed, i)`, so
//! any partition of the index range reproduces the same report.

use crate::dtsim::{DiscreteSystem, InputSignal, MeasurementFunction, ScalarMap, SimError};
use crate::kfun::{geometric_grid, KLFunction, Kind, PLFunction, PlError};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Absolute slack applied to every `≤` comparison.
pub const ABS_TOL: f64 = 1e-9;
/// Relative slack applied to every `≤` comparison.
pub const REL_TOL: f64 = 1e-9;

pub(crate) fn slack(rhs: f64) -> f64 {
    ABS_TOL + REL_TOL * rhs.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyError {
    /// The certificate does not carry the decrease form the check expects.
    FormMismatch,
    /// `id − α` is not a class-K∞ function even after clamping.
    RateTooLarge,
    /// A constructive conversion could not be completed.
    ConstructionFailed(&'static str),
    /// A fitted growth bound failed its re-verification; the report carries
    /// the violations.
    FitFailed(CheckReport),
    Sim(SimError),
    Pl(PlError),
}

impl fmt::Display for CertifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertifyError::FormMismatch => write!(f, "certificate form mismatch"),
            CertifyError::RateTooLarge => {
                write!(f, "identity minus the rate is not strictly increasing")
            }
            CertifyError::ConstructionFailed(msg) => write!(f, "construction failed: {msg}"),
            CertifyError::FitFailed(_) => write!(f, "fitted bound failed re-verification"),
            CertifyError::Sim(e) => write!(f, "{e}"),
            CertifyError::Pl(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CertifyError {}

impl From<SimError> for CertifyError {
    fn from(e: SimError) -> Self {
        CertifyError::Sim(e)
    }
}

impl From<PlError> for CertifyError {
    fn from(e: PlError) -> Self {
        CertifyError::Pl(e)
    }
}

/// Sample generation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    UniformRandom,
    Mixed,
}

/// A deterministic cloud of `(state, input-sequence)` samples over a pair
/// of boxes.
///
/// Sample `i` is a pure function of `(seed, i)`: lattice indices decompose
/// positionally and random draws use a per-index stream, so slicing the
/// index range (for parallel drivers) cannot change any sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpace {
    pub state_box: Vec<(f64, f64)>,
    pub input_box: Vec<(f64, f64)>,
    total: usize,
    start: usize,
    len: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

impl SampleSpace {
    pub fn new(
        state_box: Vec<(f64, f64)>,
        input_box: Vec<(f64, f64)>,
        count: usize,
        seed: u64,
        strategy: Strategy,
    ) -> Self {
        SampleSpace {
            state_box,
            input_box,
            total: count,
            start: 0,
            len: count,
            seed,
            strategy,
        }
    }

    /// Symmetric boxes `[-a, a]^n × [-b, b]^m` with the mixed strategy.
    pub fn symmetric(n: usize, a: f64, m: usize, b: f64, count: usize, seed: u64) -> Self {
        Self::new(
            alloc::vec![(-a, a); n],
            alloc::vec![(-b, b); m],
            count,
            seed,
            Strategy::Mixed,
        )
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn state_dim(&self) -> usize {
        self.state_box.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.len()
    }

    /// A window onto indices `start..start+len` of this cloud; the samples
    /// themselves are unchanged.
    pub fn slice(&self, start: usize, len: usize) -> SampleSpace {
        let start = start.min(self.len);
        let len = len.min(self.len - start);
        SampleSpace {
            start: self.start + start,
            len,
            ..self.clone()
        }
    }

    /// The same boxes and count under a different seed and strategy.
    pub fn reseeded(&self, seed: u64, strategy: Strategy) -> SampleSpace {
        SampleSpace {
            seed,
            strategy,
            start: 0,
            len: self.total,
            ..self.clone()
        }
    }

    fn lattice_side(total: usize, dims: usize) -> usize {
        if total <= 1 || dims == 0 {
            return 1;
        }
        let mut q = libm::ceil(libm::pow(total as f64, 1.0 / dims as f64)) as usize;
        q = q.max(1);
        while q.checked_pow(dims as u32).is_some_and(|p| p < total) {
            q += 1;
        }
        q
    }

    fn lattice_point(&self, index: usize, total: usize, steps: usize) -> (Vec<f64>, InputSignal) {
        let n = self.state_dim();
        let m = self.input_dim();
        let q = Self::lattice_side(total, n + m);
        let coord = |digit: usize, (lo, hi): (f64, f64)| {
            if q == 1 {
                0.5 * (lo + hi)
            } else {
                lo + digit as f64 * (hi - lo) / (q - 1) as f64
            }
        };
        let mut rem = index;
        let mut state = Vec::with_capacity(n);
        for &b in &self.state_box {
            state.push(coord(rem % q, b));
            rem /= q;
        }
        let mut input = Vec::with_capacity(m);
        for &b in &self.input_box {
            input.push(coord(rem % q, b));
            rem /= q;
        }
        let signal = if m == 0 || steps == 0 {
            InputSignal::zero(m)
        } else {
            InputSignal::constant(input)
        };
        (state, signal)
    }

    fn random_point(&self, index: usize, steps: usize) -> (Vec<f64>, InputSignal) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        let mut draw = |(lo, hi): (f64, f64)| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            lo + u * (hi - lo)
        };
        let state: Vec<f64> = self.state_box.iter().map(|&b| draw(b)).collect();
        let m = self.input_dim();
        let signal = if m == 0 || steps == 0 {
            InputSignal::zero(m)
        } else {
            let rows: Vec<Vec<f64>> = (0..steps)
                .map(|_| self.input_box.iter().map(|&b| draw(b)).collect())
                .collect();
            InputSignal::samples(m, rows).expect("rows match input dim")
        };
        (state, signal)
    }

    /// Sample `i` of this window: a state and an input sequence of length
    /// `steps` (input-free systems get the zero signal).
    pub fn point(&self, i: usize, steps: usize) -> (Vec<f64>, InputSignal) {
        debug_assert!(i < self.len);
        let gi = self.start + i;
        match self.strategy {
            Strategy::Grid => self.lattice_point(gi, self.total, steps),
            Strategy::UniformRandom => self.random_point(gi, steps),
            Strategy::Mixed => {
                let half = self.total / 2;
                if gi < half {
                    self.lattice_point(gi, half.max(1), steps)
                } else {
                    self.random_point(gi, steps)
                }
            }
        }
    }

    pub fn state_at(&self, i: usize) -> Vec<f64> {
        self.point(i, 0).0
    }
}

/// A concrete counterexample: re-applying the checked inequality to this
/// sample reproduces the violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub state: Vec<f64>,
    pub input: Vec<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
    pub sample_index: usize,
}

/// Outcome of a sampled falsification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: bool,
    pub samples: usize,
    /// Minimum of `rhs − lhs` over the checked samples; `None` when no
    /// sample was applicable.
    pub worst_margin: Option<f64>,
    pub witness: Option<Witness>,
}

impl CheckReport {
    /// Combines two partial reports over disjoint index windows; the result
    /// is independent of the partition.
    pub fn merge(self, other: CheckReport) -> CheckReport {
        let worst_margin = match (self.worst_margin, other.worst_margin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let witness = match (self.witness, other.witness) {
            (Some(a), Some(b)) => {
                let key = |w: &Witness| (w.rhs - w.lhs, w.sample_index);
                if key(&a) <= key(&b) {
                    Some(a)
                } else {
                    Some(b)
                }
            }
            (a, b) => a.or(b),
        };
        CheckReport {
            verdict: self.verdict && other.verdict,
            samples: self.samples + other.samples,
            worst_margin,
            witness,
        }
    }
}

pub(crate) struct Acc {
    samples: usize,
    worst: Option<f64>,
    violation: Option<Witness>,
}

impl Acc {
    pub(crate) fn new() -> Self {
        Acc {
            samples: 0,
            worst: None,
            violation: None,
        }
    }

    pub(crate) fn push(&mut self, margin: f64, violated: bool, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        if self.worst.is_none_or(|w| margin < w) {
            self.worst = Some(margin);
        }
        if violated {
            let better = self
                .violation
                .as_ref()
                .is_none_or(|w| margin < w.rhs - w.lhs);
            if better {
                self.violation = Some(witness());
            }
        }
    }

    pub(crate) fn finish(self) -> CheckReport {
        CheckReport {
            verdict: self.violation.is_none(),
            samples: self.samples,
            worst_margin: self.worst,
            witness: self.violation,
        }
    }
}

fn materialize(u: &InputSignal, steps: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|k| u.value_at(k).to_vec()).collect()
}

pub(crate) fn evolve(sys: &DiscreteSystem, xi: &[f64], u: &InputSignal, steps: usize) -> Vec<f64> {
    let mut x = xi.to_vec();
    for k in 0..steps {
        x = sys.step(&x, u.value_at(k));
    }
    x
}

/// The decrease form of a certificate, with its rate and input gain.
#[derive(Debug, Clone)]
pub enum RateForm {
    Max {
        alpha: PLFunction,
        gamma: PLFunction,
    },
    Implication {
        alpha: PLFunction,
        gamma: PLFunction,
    },
    Dissipative {
        alpha: PLFunction,
        gamma: PLFunction,
    },
}

impl RateForm {
    pub fn name(&self) -> &'static str {
        match self {
            RateForm::Max { .. } => "max",
            RateForm::Implication { .. } => "implication",
            RateForm::Dissipative { .. } => "dissipative",
        }
    }
}

/// A candidate finite-step Lyapunov certificate: a scalar function `V`, a
/// decrease form over horizon `steps`, and sandwich bounds tying `V` to
/// the measurement.
#[derive(Clone)]
pub struct Certificate {
    pub v: ScalarMap,
    pub form: RateForm,
    pub lower: PLFunction,
    pub upper: PLFunction,
    pub steps: usize,
    pub omega: MeasurementFunction,
}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Certificate")
            .field("form", &self.form.name())
            .field("steps", &self.steps)
            .finish()
    }
}

impl Certificate {
    /// The decay envelope `β(s, k) = lower⁻¹(αᵏ(upper(s)))` induced by a
    /// max-form certificate.
    pub fn kl_envelope(&self) -> Result<KLFunction, CertifyError> {
        match &self.form {
            RateForm::Max { alpha, .. } => Ok(KLFunction::new(
                alpha.clone(),
                self.lower.clone(),
                self.upper.clone(),
            )?),
            _ => Err(CertifyError::FormMismatch),
        }
    }
}

/// Checks the sandwich `lower(ω(ξ)) ≤ V(ξ) ≤ upper(ω(ξ))` on sampled
/// states.
pub fn check_sandwich(cert: &Certificate, space: &SampleSpace) -> CheckReport {
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let xi = space.state_at(i);
        let w = cert.omega.eval(&xi);
        let v = (cert.v)(&xi);
        let lo = cert.lower.eval(w);
        let hi = cert.upper.eval(w);
        let m_lower = v - lo;
        let m_upper = hi - v;
        let margin = m_lower.min(m_upper);
        let violated = m_lower < -slack(lo) || m_upper < -slack(hi);
        acc.push(margin, violated, || {
            let (lhs, rhs) = if m_lower < m_upper { (lo, v) } else { (v, hi) };
            Witness {
                state: xi.clone(),
                input: Vec::new(),
                lhs,
                rhs,
                sample_index: i,
            }
        });
    }
    acc.finish()
}

fn expect_dims(sys: &DiscreteSystem, space: &SampleSpace) -> Result<(), CertifyError> {
    if sys.state_dim() != space.state_dim() {
        return Err(SimError::DimensionMismatch {
            expected: sys.state_dim(),
            got: space.state_dim(),
        }
        .into());
    }
    if sys.input_dim() != space.input_dim() {
        return Err(SimError::DimensionMismatch {
            expected: sys.input_dim(),
            got: space.input_dim(),
        }
        .into());
    }
    Ok(())
}

/// Checks `V(x(M, ξ, u)) ≤ max{α(V(ξ)), γ(‖u‖)}` on sampled `(ξ, u)`.
pub fn check_max_form(
    cert: &Certificate,
    sys: &DiscreteSystem,
    space: &SampleSpace,
) -> Result<CheckReport, CertifyError> {
    let RateForm::Max { alpha, gamma } = &cert.form else {
        return Err(CertifyError::FormMismatch);
    };
    expect_dims(sys, space)?;
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let (xi, u) = space.point(i, cert.steps);
        let v0 = (cert.v)(&xi);
        let xm = evolve(sys, &xi, &u, cert.steps);
        let lhs = (cert.v)(&xm);
        let rhs = alpha.eval(v0).max(gamma.eval(u.sup_norm()));
        let margin = rhs - lhs;
        acc.push(margin, margin < -slack(rhs), || Witness {
            state: xi.clone(),
            input: materialize(&u, cert.steps),
            lhs,
            rhs,
            sample_index: i,
        });
    }
    Ok(acc.finish())
}

/// Checks `V(ξ) ≥ γ(‖u‖) ⟹ V(x(M, ξ, u)) − V(ξ) ≤ −α(V(ξ))` on the
/// samples where the antecedent holds.
pub fn check_implication_form(
    cert: &Certificate,
    sys: &DiscreteSystem,
    space: &SampleSpace,
) -> Result<CheckReport, CertifyError> {
    let RateForm::Implication { alpha, gamma } = &cert.form else {
        return Err(CertifyError::FormMismatch);
    };
    expect_dims(sys, space)?;
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let (xi, u) = space.point(i, cert.steps);
        let v0 = (cert.v)(&xi);
        if v0 < gamma.eval(u.sup_norm()) {
            continue;
        }
        let xm = evolve(sys, &xi, &u, cert.steps);
        let lhs = (cert.v)(&xm) - v0;
        let rhs = -alpha.eval(v0);
        let margin = rhs - lhs;
        acc.push(margin, margin < -slack(rhs), || Witness {
            state: xi.clone(),
            input: materialize(&u, cert.steps),
            lhs,
            rhs,
            sample_index: i,
        });
    }
    Ok(acc.finish())
}

/// Checks `V(x(M, ξ, u)) − V(ξ) ≤ −α(V(ξ)) + γ(‖u‖)` on sampled `(ξ, u)`.
pub fn check_dissipative_form(
    cert: &Certificate,
    sys: &DiscreteSystem,
    space: &SampleSpace,
) -> Result<CheckReport, CertifyError> {
    let RateForm::Dissipative { alpha, gamma } = &cert.form else {
        return Err(CertifyError::FormMismatch);
    };
    expect_dims(sys, space)?;
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let (xi, u) = space.point(i, cert.steps);
        let v0 = (cert.v)(&xi);
        let xm = evolve(sys, &xi, &u, cert.steps);
        let lhs = (cert.v)(&xm) - v0;
        let rhs = -alpha.eval(v0) + gamma.eval(u.sup_norm());
        let margin = rhs - lhs;
        acc.push(margin, margin < -slack(rhs), || Witness {
            state: xi.clone(),
            input: materialize(&u, cert.steps),
            lhs,
            rhs,
            sample_index: i,
        });
    }
    Ok(acc.finish())
}

/// Checks the trajectory estimate
/// `ω(x(k, ξ, u)) ≤ max{β(ω(ξ), k), γ(‖u‖)}` for all `k ≤ k_max`.
pub fn check_iss_estimate(
    sys: &DiscreteSystem,
    omega: &MeasurementFunction,
    beta: &KLFunction,
    gamma: &PLFunction,
    space: &SampleSpace,
    k_max: usize,
) -> Result<CheckReport, CertifyError> {
    expect_dims(sys, space)?;
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let (xi, u) = space.point(i, k_max);
        let w0 = omega.eval(&xi);
        let input_term = gamma.eval(u.sup_norm());
        let mut x = xi.clone();
        // Track the decay envelope incrementally instead of re-iterating
        // the contraction for every k.
        let mut env = beta.upper().eval(w0);
        let mut margin = f64::INFINITY;
        let mut viol: Option<(f64, f64)> = None;
        for k in 0..=k_max {
            if k > 0 {
                x = sys.step(&x, u.value_at(k - 1));
                env = beta.contraction().eval(env);
            }
            let lhs = omega.eval(&x);
            let rhs = beta.lower_inverse().eval(env).max(input_term);
            let m = rhs - lhs;
            if m < margin {
                margin = m;
            }
            if m < -slack(rhs) && viol.is_none_or(|(l, r)| m < r - l) {
                viol = Some((lhs, rhs));
            }
        }
        acc.push(margin, viol.is_some(), || {
            let (lhs, rhs) = viol.unwrap();
            Witness {
                state: xi.clone(),
                input: materialize(&u, k_max),
                lhs,
                rhs,
                sample_index: i,
            }
        });
    }
    Ok(acc.finish())
}

/// Where a growth bound came from; an estimated bound is only as sound as
/// its envelope fit, so reports carry the distinction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KBoundProvenance {
    Supplied,
    Estimated,
}

/// A one-step worst-case growth bound
/// `ω(g(ξ, µ)) ≤ κ₁(ω(ξ)) + κ₂(|µ|)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KBound {
    pub kappa1: PLFunction,
    pub kappa2: PLFunction,
    pub provenance: KBoundProvenance,
}

impl KBound {
    pub fn new(kappa1: PLFunction, kappa2: PLFunction) -> Result<Self, CertifyError> {
        if kappa1.kind() != Kind::ClassKinf || kappa2.kind() != Kind::ClassKinf {
            return Err(CertifyError::ConstructionFailed(
                "growth bounds must be class Kinf",
            ));
        }
        Ok(KBound {
            kappa1,
            kappa2,
            provenance: KBoundProvenance::Supplied,
        })
    }
}

/// Checks a growth bound on sampled `(ξ, µ)` pairs.
pub fn verify_k_bound(
    sys: &DiscreteSystem,
    omega: &MeasurementFunction,
    kb: &KBound,
    space: &SampleSpace,
) -> Result<CheckReport, CertifyError> {
    expect_dims(sys, space)?;
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let (xi, u) = space.point(i, 1);
        let mu = u.value_at(0);
        let lhs = omega.eval(&sys.step(&xi, mu));
        let rhs = kb.kappa1.eval(omega.eval(&xi)) + kb.kappa2.eval(crate::dtsim::norm2(mu));
        let margin = rhs - lhs;
        acc.push(margin, margin < -slack(rhs), || Witness {
            state: xi.clone(),
            input: alloc::vec![mu.to_vec()],
            lhs,
            rhs,
            sample_index: i,
        });
    }
    Ok(acc.finish())
}

/// Strictly increasing piecewise-linear upper envelope of a point cloud,
/// anchored at the origin.
fn fit_upper_envelope(points: &[(f64, f64)]) -> Result<PLFunction, CertifyError> {
    for &(a, b) in points {
        if a <= 1e-12 && b > 1e-9 {
            return Err(CertifyError::ConstructionFailed(
                "positive growth at measurement-zero states cannot be bounded",
            ));
        }
    }
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(a, _)| a > 1e-12).collect();
    if pts.is_empty() || pts.iter().all(|&(_, b)| b <= 1e-12) {
        // Degenerate data (e.g. the zero map): any small linear bound works.
        return Ok(PLFunction::linear(1e-6));
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let buckets = pts.len().min(128);
    let chunk = pts.len().div_ceil(buckets);
    let mut edges: Vec<f64> = Vec::new();
    let mut tops: Vec<f64> = Vec::new();
    for c in pts.chunks(chunk) {
        edges.push(c.last().unwrap().0);
        tops.push(c.iter().map(|&(_, b)| b).fold(0.0, f64::max));
    }
    let n = edges.len();
    // Within the first bucket the envelope is the chord from the origin, so
    // its slope must dominate every b/a ratio there.
    let slope1 = pts[..chunk.min(pts.len())]
        .iter()
        .map(|&(a, b)| b / a)
        .fold(0.0, f64::max);
    let mut vals = Vec::with_capacity(n);
    let mut w = 0.0_f64;
    for j in 0..n {
        // Points of bucket j+1 are dominated through the value at edge j.
        let req = if j + 1 < n { tops[j + 1] } else { 0.0 };
        let base = if j == 0 {
            slope1 * edges[0]
        } else {
            w + 1e-9 * (edges[j] - edges[j - 1])
        };
        w = req.max(base).max(w + 1e-12);
        vals.push(w);
    }
    let last_slope = if n >= 2 {
        (vals[n - 1] - vals[n - 2]) / (edges[n - 1] - edges[n - 2])
    } else {
        vals[0] / edges[0]
    };
    let tail = last_slope.max(vals[n - 1] / edges[n - 1]).max(1e-9);
    let bps: Vec<(f64, f64)> = edges.into_iter().zip(vals).collect();
    Ok(PLFunction::normalized_points(Kind::ClassKinf, bps, tail))
}

/// Fits a growth bound from samples: an upper envelope over the zero-input
/// slice for `κ₁`, over a measurement-zero state for `κ₂`, joint inflation
/// by 1.05, and re-verification on a fresh sample.
pub fn estimate_k_bound(
    sys: &DiscreteSystem,
    omega: &MeasurementFunction,
    space: &SampleSpace,
) -> Result<KBound, CertifyError> {
    expect_dims(sys, space)?;
    let m = sys.input_dim();
    let zeros = alloc::vec![0.0; m];
    let mut pairs = Vec::with_capacity(space.len());
    let mut anchor: Option<(f64, Vec<f64>)> = None;
    for i in 0..space.len() {
        let xi = space.state_at(i);
        let w = omega.eval(&xi);
        pairs.push((w, omega.eval(&sys.step(&xi, &zeros))));
        if anchor.as_ref().is_none_or(|(bw, _)| w < *bw) {
            anchor = Some((w, xi));
        }
    }
    let kappa1 = fit_upper_envelope(&pairs)?.scale(1.05);

    let kappa2 = if m == 0 {
        PLFunction::linear(1e-6)
    } else {
        let origin = alloc::vec![0.0; sys.state_dim()];
        let base = if omega.eval(&origin) <= 1e-12 {
            origin
        } else {
            anchor.expect("nonempty sample space").1
        };
        let mut pairs = Vec::with_capacity(space.len());
        for i in 0..space.len() {
            let (_, u) = space.point(i, 1);
            let mu = u.value_at(0);
            pairs.push((crate::dtsim::norm2(mu), omega.eval(&sys.step(&base, mu))));
        }
        fit_upper_envelope(&pairs)?.scale(1.05)
    };

    let mut kb = KBound::new(kappa1, kappa2)?;
    kb.provenance = KBoundProvenance::Estimated;
    let fresh = space.reseeded(space.seed ^ 0x9e37_79b9_7f4a_7c15, Strategy::UniformRandom);
    let report = verify_k_bound(sys, omega, &kb, &fresh)?;
    if !report.verdict {
        return Err(CertifyError::FitFailed(report));
    }
    Ok(kb)
}

/// Worst-case `j`-step growth functions `(ϑ_j, ζ_j)` with
/// `ω(x(j, ξ, u)) ≤ ϑ_j(ω(ξ)) + ζ_j(‖u‖)`.
///
/// Base case `(κ₁, κ₂)`; the induction step is
/// `ϑ_{j+1}(s) = κ₁(2 ϑ_j(s))` and `ζ_{j+1}(s) = κ₁(2 ζ_j(s)) + κ₂(s)`.
pub fn propagate_k_bound(kb: &KBound, j: usize) -> (PLFunction, PLFunction) {
    assert!(j >= 1, "propagation needs j >= 1");
    let mut theta = kb.kappa1.clone();
    let mut zeta = kb.kappa2.clone();
    for _ in 1..j {
        theta = kb.kappa1.compose(&theta.scale(2.0));
        zeta = kb
            .kappa1
            .compose(&zeta.scale(2.0))
            .pointwise_add(&kb.kappa2);
    }
    (theta, zeta)
}

/// Turns an implication-form certificate plus a growth bound into a
/// max-form certificate: the rate becomes `id − α` (with `α` clamped below
/// `s/2` so the residual stays class K∞) and the input gain becomes
/// `upper(ϑ_M(lower⁻¹(γ(s))) + ζ_M(s))`.
pub fn implication_to_max(cert: &Certificate, kb: &KBound) -> Result<Certificate, CertifyError> {
    let RateForm::Implication { alpha, gamma } = &cert.form else {
        return Err(CertifyError::FormMismatch);
    };
    let clamped = alpha.pointwise_min(&PLFunction::linear(0.5));
    let alpha_max = clamped.id_minus().map_err(|_| CertifyError::RateTooLarge)?;
    let (theta, zeta) = propagate_k_bound(kb, cert.steps);
    let lower_inv = cert.lower.inverse()?;
    let routed = theta.compose(&lower_inv.compose(gamma));
    let gamma_max = cert.upper.compose(&routed.pointwise_add(&zeta));
    Ok(Certificate {
        v: cert.v.clone(),
        form: RateForm::Max {
            alpha: alpha_max,
            gamma: gamma_max,
        },
        lower: cert.lower.clone(),
        upper: cert.upper.clone(),
        steps: cert.steps,
        omega: cert.omega.clone(),
    })
}

/// Grid parameters for the rescaling construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionGrid {
    pub s_max: f64,
    pub points: usize,
}

impl Default for ConversionGrid {
    fn default() -> Self {
        ConversionGrid {
            s_max: 10.0,
            points: 512,
        }
    }
}

/// A class-K∞ decay floor: below `id − α` on `(0, 1]` and below `s/2`
/// beyond, realized on the exact breakpoint lattice of `id − α`.
fn lower_decay_envelope(alpha: &PLFunction) -> Result<PLFunction, CertifyError> {
    let mut xs: Vec<f64> = alpha
        .breakpoints()
        .iter()
        .map(|&(s, _)| s)
        .filter(|&s| s > 0.0 && s < 1.0)
        .collect();
    xs.push(1.0);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let residual: Vec<f64> = xs.iter().map(|&s| s - alpha.eval(s)).collect();
    let n = xs.len();
    // Largest nondecreasing minorant, capped at 1/2 by the tail branch.
    let mut vals = alloc::vec![0.0; n];
    let mut run = 0.5_f64;
    for i in (0..n).rev() {
        run = run.min(residual[i]);
        vals[i] = run;
    }
    // Strict-increase repair, working backward so values only move down.
    const SLOPE_FLOOR: f64 = 1e-6;
    for i in (0..n.saturating_sub(1)).rev() {
        let cap = vals[i + 1] - SLOPE_FLOOR * (xs[i + 1] - xs[i]);
        if vals[i] > cap {
            vals[i] = cap;
        }
    }
    if vals[0] <= 0.0 {
        return Err(CertifyError::ConstructionFailed(
            "decay envelope collapsed near the origin",
        ));
    }
    let pts: Vec<(f64, f64)> = xs.into_iter().zip(vals).collect();
    Ok(PLFunction::normalized_points(Kind::ClassKinf, pts, 0.5))
}

/// Builds the rescaling `ρ` on a geometric grid so that
/// `ρ(v) − ρ(α(v)) ≥ (1+δ)·h(v)` at every grid point.
fn build_rescaling(
    alpha: &PLFunction,
    h: &PLFunction,
    s_max: f64,
    points: usize,
    delta: f64,
) -> Result<PLFunction, CertifyError> {
    const SLOPE_FLOOR: f64 = 1e-6;
    let grid = geometric_grid(s_max, points.max(8));
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    let interp = |pts: &[(f64, f64)], a: f64| -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        let i = pts.partition_point(|&(x, _)| x <= a);
        let (x0, y0) = if i == 0 { (0.0, 0.0) } else { pts[i - 1] };
        if i == pts.len() {
            return y0;
        }
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (a - x0) / (x1 - x0)
    };
    for &gk in &grid {
        let (ps, pv) = pts.last().copied().unwrap_or((0.0, 0.0));
        let need = h.eval(gk) * (1.0 + delta);
        let a = alpha.eval(gk);
        if a >= gk {
            return Err(CertifyError::ConstructionFailed(
                "rate reaches the identity",
            ));
        }
        let cand = if a <= ps {
            interp(&pts, a) + need
        } else {
            let t = (a - ps) / (gk - ps);
            if t >= 1.0 - 1e-12 {
                return Err(CertifyError::ConstructionFailed(
                    "contraction too weak inside a grid cell; refine the grid",
                ));
            }
            pv + need / (1.0 - t)
        };
        let v = cand.max(pv + SLOPE_FLOOR * (gk - ps));
        if !v.is_finite() {
            return Err(CertifyError::ConstructionFailed("rescaling overflowed"));
        }
        pts.push((gk, v));
    }
    let t_alpha = alpha.tail_slope();
    if t_alpha >= 1.0 {
        return Err(CertifyError::ConstructionFailed(
            "rate tail reaches slope one",
        ));
    }
    let n = pts.len();
    let natural = (pts[n - 1].1 - pts[n - 2].1) / (pts[n - 1].0 - pts[n - 2].0);
    let tail = natural.max(0.5 * (1.0 + delta) / (1.0 - t_alpha));
    Ok(PLFunction::normalized_points(Kind::ClassKinf, pts, tail))
}

/// Worst normalized value of `F(v) = ρ(v) − ρ(α(v)) − h(v)` over the full
/// breakpoint lattice of `F`; all three functions are piecewise linear, so
/// the lattice decides the inequality everywhere, with the far tail probed
/// at twice the largest abscissa.
fn rescaling_deficit(rho: &PLFunction, alpha: &PLFunction, h: &PLFunction) -> f64 {
    let mut xs: Vec<f64> = Vec::new();
    for f in [rho, alpha, h] {
        xs.extend(f.breakpoints().iter().map(|&(s, _)| s));
    }
    if let Ok(alpha_inv) = alpha.inverse() {
        for &(s, _) in rho.breakpoints() {
            xs.push(alpha_inv.eval(s));
        }
    }
    let far = 2.0 * xs.iter().cloned().fold(1.0, f64::max);
    xs.push(far);
    let mut worst = f64::INFINITY;
    for &v in xs.iter().filter(|&&v| v > 0.0) {
        let f = rho.eval(v) - rho.eval(alpha.eval(v)) - h.eval(v);
        worst = worst.min(f / (1.0 + rho.eval(v)));
    }
    worst
}

/// Turns a max-form certificate into a dissipative-form one by rescaling:
/// `W = ρ ∘ V` with `α_diss = ½·min{h ∘ ρ⁻¹, id}` and `γ_diss = ρ ∘ γ`.
pub fn max_to_dissipative(
    cert: &Certificate,
    grid: &ConversionGrid,
) -> Result<Certificate, CertifyError> {
    let RateForm::Max { alpha, gamma } = &cert.form else {
        return Err(CertifyError::FormMismatch);
    };
    if alpha.kind() != Kind::ClassKinf || !alpha.strictly_below(&PLFunction::identity(), grid.s_max)
    {
        return Err(CertifyError::ConstructionFailed(
            "max rate must be class Kinf strictly below the identity",
        ));
    }
    let h = lower_decay_envelope(alpha)?;
    for delta in [0.05, 0.1, 0.25] {
        let rho = build_rescaling(alpha, &h, grid.s_max, grid.points, delta)?;
        if rescaling_deficit(&rho, alpha, &h) < -1e-12 {
            continue;
        }
        let rho_inv = rho.inverse()?;
        let alpha_diss = h
            .compose(&rho_inv)
            .pointwise_min(&PLFunction::identity())
            .scale(0.5);
        let gamma_diss = rho.compose(gamma);
        let v = cert.v.clone();
        let rho_for_v = rho.clone();
        let w: ScalarMap = Arc::new(move |x: &[f64]| rho_for_v.eval(v(x)));
        return Ok(Certificate {
            v: w,
            form: RateForm::Dissipative {
                alpha: alpha_diss,
                gamma: gamma_diss,
            },
            lower: rho.compose(&cert.lower),
            upper: rho.compose(&cert.upper),
            steps: cert.steps,
            omega: cert.omega.clone(),
        });
    }
    Err(CertifyError::ConstructionFailed(
        "rescaling failed verification; refine the construction grid",
    ))
}
