//! Composition of subsystem estimates into a network certificate and the
//! reverse decomposition of a certificate into subsystem gains.
//!
//! The forward direction builds node scalings from a feasible gain network
//! and aggregates the subsystem functions into a max-composite certificate.
//! The reverse direction splits a classic max-form certificate into scaled
//! block measurements with one uniform sub-identity gain, exhibiting the
//! subsystem estimates that the forward direction consumes.

use crate::certify::{
    evolve, slack, Acc, Certificate, CheckReport, RateForm, SampleSpace, Witness,
};
use crate::dtsim::{
    composite_measurement, MeasurementFunction, MonotonicNorm, NetworkTopology, ScalarMap, SimError,
};
use crate::gaingraph::{GainError, GainNetwork, SigmaScaling};
use crate::kfun::{PLFunction, PlError};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum ComposeError {
    /// The gain network violates the cyclic small-gain condition.
    SmallGainViolated(GainError),
    /// No horizon up to the cap satisfies the contraction-versus-sandwich
    /// inequality.
    NoValidMhat,
    /// The decomposition needs a classic (one-step) max-form certificate.
    NeedsClassicMaxForm,
    Mismatch(SimError),
    Pl(PlError),
}

impl fmt::Display for ComposeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComposeError::SmallGainViolated(e) => write!(f, "small-gain condition violated: {e}"),
            ComposeError::NoValidMhat => write!(f, "no valid finite-step horizon below the cap"),
            ComposeError::NeedsClassicMaxForm => {
                write!(
                    f,
                    "decomposition needs a max-form certificate with one-step horizon"
                )
            }
            ComposeError::Mismatch(e) => write!(f, "{e}"),
            ComposeError::Pl(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ComposeError {}

impl From<SimError> for ComposeError {
    fn from(e: SimError) -> Self {
        ComposeError::Mismatch(e)
    }
}

impl From<PlError> for ComposeError {
    fn from(e: PlError) -> Self {
        ComposeError::Pl(e)
    }
}

/// Per-subsystem data: a continuous function of the block state with class
/// K∞ sandwich bounds around the block measurement.
#[derive(Clone)]
pub struct SubsystemEstimate {
    pub w: ScalarMap,
    pub lower: PLFunction,
    pub upper: PLFunction,
    pub omega: MeasurementFunction,
    pub dim: usize,
}

impl fmt::Debug for SubsystemEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubsystemEstimate")
            .field("dim", &self.dim)
            .finish()
    }
}

impl SubsystemEstimate {
    /// The block norm `W_i(ξ_i) = |ξ_i|` with identity sandwich.
    pub fn block_norm(dim: usize) -> Self {
        SubsystemEstimate {
            w: Arc::new(|x: &[f64]| crate::dtsim::norm2(x)),
            lower: PLFunction::identity(),
            upper: PLFunction::identity(),
            omega: MeasurementFunction::euclidean(),
            dim,
        }
    }
}

fn block_ranges(estimates: &[SubsystemEstimate]) -> Vec<core::ops::Range<usize>> {
    let mut out = Vec::with_capacity(estimates.len());
    let mut start = 0;
    for e in estimates {
        out.push(start..start + e.dim);
        start += e.dim;
    }
    out
}

/// Checks the finite-step subsystem estimate
/// `W_i(x_i(M, ξ, u)) ≤ max{max_j γ_ij(W_j(ξ_j)), γ_iu(‖u‖)}` along
/// trajectories of the composite system, for every subsystem.
pub fn check_assumption(
    net: &GainNetwork,
    estimates: &[SubsystemEstimate],
    topology: &NetworkTopology,
    space: &SampleSpace,
) -> Result<CheckReport, ComposeError> {
    let l = net.node_count();
    if estimates.len() != l || topology.block_count() != l {
        return Err(SimError::DimensionMismatch {
            expected: l,
            got: estimates.len().min(topology.block_count()),
        }
        .into());
    }
    let sys = topology.composite();
    if sys.state_dim() != space.state_dim() || sys.input_dim() != space.input_dim() {
        return Err(SimError::DimensionMismatch {
            expected: sys.state_dim(),
            got: space.state_dim(),
        }
        .into());
    }
    let ranges = block_ranges(estimates);
    let steps = net.horizon();
    let mut acc = Acc::new();
    for i in 0..space.len() {
        let (xi, u) = space.point(i, steps);
        let xm = evolve(&sys, &xi, &u, steps);
        let w0: Vec<f64> = estimates
            .iter()
            .zip(&ranges)
            .map(|(e, r)| (e.w)(&xi[r.clone()]))
            .collect();
        let unorm = u.sup_norm();
        for (bi, (e, r)) in estimates.iter().zip(&ranges).enumerate() {
            let lhs = (e.w)(&xm[r.clone()]);
            let mut rhs = net.input_gain(bi).eval(unorm);
            for (bj, &wj) in w0.iter().enumerate() {
                rhs = rhs.max(net.gain(bi, bj).eval(wj));
            }
            let margin = rhs - lhs;
            acc.push(margin, margin < -slack(rhs), || Witness {
                state: xi.clone(),
                input: (0..steps).map(|k| u.value_at(k).to_vec()).collect(),
                lhs,
                rhs,
                sample_index: i,
            });
        }
    }
    Ok(acc.finish())
}

/// Builds the max-composite certificate `V(ξ) = max_i σ_i⁻¹(W_i(ξ_i))`
/// from a feasible gain network and subsystem estimates.
///
/// The rate is the pointwise max of `σ_i⁻¹ ∘ γ_ij ∘ σ_j` over all pairs,
/// the input gain the max of `σ_i⁻¹ ∘ γ_iu`, and the sandwich follows from
/// the block sandwiches, the basis weights of `µ`, and its comparison with
/// the max norm.
pub fn compose_certificate(
    net: &GainNetwork,
    estimates: &[SubsystemEstimate],
    mu: &MonotonicNorm,
    epsilon: Option<f64>,
    s_max: f64,
    grid: usize,
) -> Result<Certificate, ComposeError> {
    let l = net.node_count();
    if estimates.len() != l {
        return Err(SimError::DimensionMismatch {
            expected: l,
            got: estimates.len(),
        }
        .into());
    }
    mu.validate(l)?;
    let scaling: SigmaScaling = match epsilon {
        Some(eps) => net
            .construct_sigma(eps, s_max, grid)
            .map_err(ComposeError::SmallGainViolated)?,
        None => {
            net.construct_sigma_auto(s_max, grid)
                .map_err(ComposeError::SmallGainViolated)?
                .0
        }
    };
    let sigma_inv: Vec<PLFunction> = scaling
        .sigma
        .iter()
        .map(|s| s.inverse())
        .collect::<Result<_, _>>()?;

    // Rate and input gain.
    let mut alpha = PLFunction::zero();
    for (i, inv) in sigma_inv.iter().enumerate() {
        for (j, sig) in scaling.sigma.iter().enumerate() {
            if net.gain(i, j).is_zero() {
                continue;
            }
            let term = inv.compose(&net.gain(i, j).compose(sig));
            alpha = alpha.pointwise_max(&term);
        }
    }
    if alpha.is_zero() {
        // Fully decoupled network: any sub-identity rate certifies the
        // decrease that the input gains already bound.
        alpha = PLFunction::linear(0.5);
    }
    let mut gamma = PLFunction::zero();
    for (i, inv) in sigma_inv.iter().enumerate() {
        if net.input_gain(i).is_zero() {
            continue;
        }
        gamma = gamma.pointwise_max(&inv.compose(net.input_gain(i)));
    }

    // Sandwich: ω_i ≤ ω/µ_i gives the upper bound; max_i ω_i ≥ ω/c the
    // lower one.
    let c = mu.infnorm_factor();
    let mut upper = PLFunction::zero();
    let mut lower: Option<PLFunction> = None;
    for (i, e) in estimates.iter().enumerate() {
        let up_i = sigma_inv[i]
            .compose(&e.upper)
            .compose(&PLFunction::linear(1.0 / mu.basis_weight(i)));
        upper = upper.pointwise_max(&up_i);
        let lo_i = sigma_inv[i]
            .compose(&e.lower)
            .compose(&PLFunction::linear(1.0 / c));
        lower = Some(match lower {
            None => lo_i,
            Some(acc) => acc.pointwise_min(&lo_i),
        });
    }
    let lower = lower.expect("at least one block");

    let ranges = block_ranges(estimates);
    let ws: Vec<ScalarMap> = estimates.iter().map(|e| e.w.clone()).collect();
    let inv_for_v = sigma_inv.clone();
    let v: ScalarMap = Arc::new(move |x: &[f64]| {
        let mut best = 0.0_f64;
        for ((w, r), inv) in ws.iter().zip(&ranges).zip(&inv_for_v) {
            best = best.max(inv.eval(w(&x[r.clone()])));
        }
        best
    });

    let omegas: Vec<MeasurementFunction> = estimates.iter().map(|e| e.omega.clone()).collect();
    let dims: Vec<usize> = estimates.iter().map(|e| e.dim).collect();
    let omega = composite_measurement(&omegas, mu, &dims);

    Ok(Certificate {
        v,
        form: RateForm::Max { alpha, gamma },
        lower,
        upper,
        steps: net.horizon(),
        omega,
    })
}

/// Smallest horizon `M̂ ≤ cap` with
/// `α^M̂(s) < lower((1/c)·upper⁻¹(s))` strictly for all `s > 0`, decided
/// exactly on the piecewise-linear lattice.
pub fn find_mhat(
    alpha: &PLFunction,
    lower: &PLFunction,
    upper: &PLFunction,
    c: f64,
    s_max: f64,
    cap: usize,
) -> Result<Option<usize>, ComposeError> {
    assert!(c >= 1.0, "the norm comparison constant is at least one");
    let target = lower.compose(&PLFunction::linear(1.0 / c).compose(&upper.inverse()?));
    let mut power = alpha.clone();
    for m in 1..=cap {
        if m > 1 {
            power = power.compose(alpha);
        }
        if power.strictly_below(&target, s_max) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Outcome of [`reverse_decompose`]: scaled block measurements, one uniform
/// sub-identity gain `χ`, and the input gain `γ̃`, packaged as a gain
/// network over horizon `M̂`.
#[derive(Clone)]
pub struct DecompositionResult {
    pub m_hat: usize,
    pub chi: PLFunction,
    pub gamma_tilde: PLFunction,
    pub mu_weights: Vec<f64>,
    pub gains: GainNetwork,
    pub estimates: Vec<SubsystemEstimate>,
}

impl fmt::Debug for DecompositionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecompositionResult")
            .field("m_hat", &self.m_hat)
            .field("blocks", &self.estimates.len())
            .finish()
    }
}

/// Serializable view of a decomposition, with full piecewise-linear
/// payloads for downstream re-checking.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionPayload {
    pub m_hat: usize,
    pub chi: PLFunction,
    pub gamma_tilde: PLFunction,
    pub mu_weights: Vec<f64>,
    pub gains: GainNetwork,
}

impl DecompositionResult {
    pub fn payload(&self) -> DecompositionPayload {
        DecompositionPayload {
            m_hat: self.m_hat,
            chi: self.chi.clone(),
            gamma_tilde: self.gamma_tilde.clone(),
            mu_weights: self.mu_weights.clone(),
            gains: self.gains.clone(),
        }
    }
}

/// Splits a classic max-form certificate into subsystem estimates
/// `W_i = µ(e_i)·ω_i` with the uniform gain
/// `χ = lower⁻¹ ∘ α^M̂ ∘ upper ∘ (c·id)` and input gain
/// `γ̃ = lower⁻¹ ∘ γ`.
///
/// `χ` is strictly below the identity by the choice of `M̂`, so the
/// resulting network always satisfies the cyclic small-gain condition.
pub fn reverse_decompose(
    cert: &Certificate,
    omegas: &[MeasurementFunction],
    block_dims: &[usize],
    mu: &MonotonicNorm,
    s_max: f64,
    m_cap: usize,
) -> Result<DecompositionResult, ComposeError> {
    let RateForm::Max { alpha, gamma } = &cert.form else {
        return Err(ComposeError::NeedsClassicMaxForm);
    };
    if cert.steps != 1 {
        return Err(ComposeError::NeedsClassicMaxForm);
    }
    let l = omegas.len();
    if block_dims.len() != l {
        return Err(SimError::DimensionMismatch {
            expected: l,
            got: block_dims.len(),
        }
        .into());
    }
    mu.validate(l)?;
    let c = mu.infnorm_factor();
    let m_hat = find_mhat(alpha, &cert.lower, &cert.upper, c, s_max, m_cap)?
        .ok_or(ComposeError::NoValidMhat)?;
    let lower_inv = cert.lower.inverse()?;
    let chained = cert.upper.compose(&PLFunction::linear(c));
    let chi = lower_inv.compose(&alpha.iterate(m_hat).compose(&chained));
    let gamma_tilde = if gamma.is_zero() {
        PLFunction::zero()
    } else {
        lower_inv.compose(gamma)
    };

    let gains = GainNetwork::new(
        alloc::vec![alloc::vec![chi.clone(); l]; l],
        alloc::vec![gamma_tilde.clone(); l],
        m_hat,
    )
    .map_err(ComposeError::SmallGainViolated)?;

    let mu_weights: Vec<f64> = (0..l).map(|i| mu.basis_weight(i)).collect();
    let estimates: Vec<SubsystemEstimate> = omegas
        .iter()
        .zip(block_dims)
        .zip(&mu_weights)
        .map(|((om, &dim), &wi)| {
            let om_c = om.clone();
            SubsystemEstimate {
                w: Arc::new(move |x: &[f64]| wi * om_c.eval(x)),
                lower: PLFunction::linear(wi),
                upper: PLFunction::linear(wi),
                omega: om.clone(),
                dim,
            }
        })
        .collect();

    Ok(DecompositionResult {
        m_hat,
        chi,
        gamma_tilde,
        mu_weights,
        gains,
        estimates,
    })
}
