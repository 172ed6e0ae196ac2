//! Command implementations: each returns the JSON report plus the verdict
//! that drives the process exit code.

use crate::parallel::run_check;
use crate::specfile::SpecFile;
use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use sgk_core::certify::{
    check_dissipative_form, check_max_form, check_sandwich, max_to_dissipative, Certificate,
    ConversionGrid, RateForm,
};
use sgk_core::composer::{check_assumption, compose_certificate, reverse_decompose, ComposeError};
use sgk_core::dtsim::{InputSignal, MonotonicNorm};
use sgk_core::gaingraph::GainNetwork;
use sgk_core::kfun::PLFunction;

pub struct Outcome {
    pub report: Value,
    pub verdict: bool,
}

fn gains_of(spec: &SpecFile) -> Result<GainNetwork> {
    if let Some(net) = &spec.network {
        return Ok(net.clone());
    }
    let sc = spec.scenario()?;
    sc.gains
        .clone()
        .with_context(|| format!("scenario {:?} does not bundle a gain network", sc.name))
}

pub fn check_smallgain(spec: &SpecFile) -> Result<Outcome> {
    let net = gains_of(spec)?;
    let p = &spec.params;
    let report = net.check_small_gain(p.s_max, p.grid, p.tol);
    Ok(Outcome {
        verdict: report.verdict,
        report: json!({
            "command": "check-smallgain",
            "verdict": report.verdict,
            "cycles": report.cycles,
            "worst_cycle": report.worst_cycle,
            "spec": spec.resolved(),
        }),
    })
}

fn scaled_certificate(cert: &Certificate, alpha_scale: f64) -> Certificate {
    if alpha_scale == 1.0 {
        return cert.clone();
    }
    let form = match &cert.form {
        RateForm::Max { alpha, gamma } => RateForm::Max {
            alpha: alpha.scale(alpha_scale),
            gamma: gamma.clone(),
        },
        RateForm::Implication { alpha, gamma } => RateForm::Implication {
            alpha: alpha.scale(alpha_scale),
            gamma: gamma.clone(),
        },
        RateForm::Dissipative { alpha, gamma } => RateForm::Dissipative {
            alpha: alpha.scale(alpha_scale),
            gamma: gamma.clone(),
        },
    };
    Certificate {
        form,
        ..cert.clone()
    }
}

pub fn certify(spec: &SpecFile, workers: usize) -> Result<Outcome> {
    let sc = spec.scenario()?;
    let cert = sc
        .certificate
        .as_ref()
        .with_context(|| format!("scenario {:?} does not bundle a certificate", sc.name))?;
    let cert = scaled_certificate(cert, spec.params.alpha_scale);
    let space = spec.sample_space(&sc.space);
    let (kind, report) = match spec.params.form.as_str() {
        "sandwich" => (
            "sandwich",
            run_check(&space, workers, |s| {
                Ok::<_, sgk_core::certify::CertifyError>(check_sandwich(&cert, s))
            })?,
        ),
        "max" => (
            "max",
            run_check(&space, workers, |s| check_max_form(&cert, &sc.system, s))?,
        ),
        "dissipative" => {
            let grid = ConversionGrid {
                s_max: spec.params.s_max,
                points: spec.params.grid,
            };
            let diss = max_to_dissipative(&cert, &grid)
                .context("conversion to the dissipative form failed")?;
            (
                "dissipative",
                run_check(&space, workers, |s| check_dissipative_form(&diss, &sc.system, s))?,
            )
        }
        other => bail!(
            "unknown certificate form {other:?} (expected \"sandwich\", \"max\", or \"dissipative\")"
        ),
    };
    Ok(Outcome {
        verdict: report.verdict,
        report: json!({
            "command": "certify",
            "form": kind,
            "verdict": report.verdict,
            "samples": report.samples,
            "worst_margin": report.worst_margin,
            "witness": report.witness,
            "spec": spec.resolved(),
        }),
    })
}

fn pl_json(f: &PLFunction) -> Value {
    serde_json::to_value(f).expect("piecewise-linear functions serialize")
}

pub fn compose(spec: &SpecFile, workers: usize) -> Result<Outcome> {
    let sc = spec.scenario()?;
    let gains = sc
        .gains
        .as_ref()
        .with_context(|| format!("scenario {:?} does not bundle a gain network", sc.name))?;
    if sc.estimates.is_empty() {
        bail!("scenario {:?} does not bundle subsystem estimates", sc.name);
    }
    let mu = sc.mu.clone().unwrap_or(MonotonicNorm::MaxNorm);
    let p = &spec.params;
    let cert = compose_certificate(gains, &sc.estimates, &mu, p.epsilon, p.s_max, p.grid)
        .context("composition failed")?;
    let space = spec.sample_space(&sc.space);
    let max_report = run_check(&space, workers, |s| check_max_form(&cert, &sc.system, s))?;
    let sandwich_report = run_check(&space, workers, |s| {
        Ok::<_, sgk_core::certify::CertifyError>(check_sandwich(&cert, s))
    })?;
    let verdict = max_report.verdict && sandwich_report.verdict;
    let RateForm::Max { alpha, gamma } = &cert.form else {
        unreachable!("composition yields the max form");
    };
    Ok(Outcome {
        verdict,
        report: json!({
            "command": "compose",
            "verdict": verdict,
            "certificate": {
                "form": "max",
                "M": cert.steps,
                "alpha": pl_json(alpha),
                "gamma": pl_json(gamma),
                "lower": pl_json(&cert.lower),
                "upper": pl_json(&cert.upper),
            },
            "self_check": {
                "max_form": max_report,
                "sandwich": sandwich_report,
            },
            "spec": spec.resolved(),
        }),
    })
}

pub fn decompose(spec: &SpecFile, workers: usize) -> Result<Outcome> {
    let sc = spec.scenario()?;
    let cert = sc
        .certificate
        .as_ref()
        .with_context(|| format!("scenario {:?} does not bundle a certificate", sc.name))?;
    if sc.block_measurements.is_empty() || sc.topology.is_none() {
        bail!(
            "scenario {:?} does not define a block decomposition",
            sc.name
        );
    }
    let topology = sc.topology.as_ref().unwrap();
    let dims: Vec<usize> = topology.block_dims().to_vec();
    let mu = sc.mu.clone().unwrap_or(MonotonicNorm::MaxNorm);
    let p = &spec.params;
    let dec = match reverse_decompose(cert, &sc.block_measurements, &dims, &mu, p.s_max, p.m_cap) {
        Ok(dec) => dec,
        Err(ComposeError::NoValidMhat) => {
            // A definitive negative result, not an input error.
            return Ok(Outcome {
                verdict: false,
                report: json!({
                    "command": "decompose",
                    "verdict": false,
                    "error": "no_valid_mhat",
                    "m_cap": p.m_cap,
                    "spec": spec.resolved(),
                }),
            });
        }
        Err(e) => return Err(e).context("decomposition failed"),
    };
    let small_gain = dec.gains.check_small_gain(p.s_max, p.grid, p.tol);
    let space = spec.sample_space(&sc.space);
    let assumption = run_check(&space, workers, |s| {
        check_assumption(&dec.gains, &dec.estimates, topology, s)
    })?;
    let verdict = small_gain.verdict && assumption.verdict;
    Ok(Outcome {
        verdict,
        report: json!({
            "command": "decompose",
            "verdict": verdict,
            "decomposition": dec.payload(),
            "self_check": {
                "small_gain": small_gain,
                "assumption": assumption,
            },
            "spec": spec.resolved(),
        }),
    })
}

pub struct SimulationFiles {
    pub csv: String,
    pub plot_hint: String,
}

pub fn simulate(spec: &SpecFile) -> Result<(Outcome, SimulationFiles)> {
    let sc = spec.scenario()?;
    let p = &spec.params;
    let n = sc.system.state_dim();
    let m = sc.system.input_dim();
    let xi = match &p.initial_state {
        Some(x) => {
            if x.len() != n {
                bail!(
                    "initial state has {} entries, the system needs {n}",
                    x.len()
                );
            }
            x.clone()
        }
        None => sc.space.state_at(0),
    };
    let u = match &p.constant_input {
        Some(v) => {
            if v.len() != m {
                bail!(
                    "constant input has {} entries, the system needs {m}",
                    v.len()
                );
            }
            InputSignal::constant(v.clone())
        }
        None => InputSignal::zero(m),
    };
    let traj = sc
        .system
        .trajectory(&xi, &u, p.horizon)
        .context("simulation failed")?;
    let omegas: Vec<f64> = traj.iter().map(|x| sc.omega.eval(x)).collect();

    let mut csv = String::from("k");
    for i in 1..=n {
        csv.push_str(&format!(",x_{i}"));
    }
    for i in 1..=m {
        csv.push_str(&format!(",u_{i}"));
    }
    csv.push_str(",omega\n");
    for (k, x) in traj.iter().enumerate() {
        csv.push_str(&k.to_string());
        for v in x {
            csv.push_str(&format!(",{v}"));
        }
        for v in u.value_at(k) {
            csv.push_str(&format!(",{v}"));
        }
        csv.push_str(&format!(",{}\n", omegas[k]));
    }

    let mut ratios = omegas
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0]);
    let first = ratios.next();
    let (min_ratio, max_ratio) = match first {
        None => (None, None),
        Some(r0) => {
            let (mut lo, mut hi) = (r0, r0);
            for r in ratios {
                lo = lo.min(r);
                hi = hi.max(r);
            }
            (Some(lo), Some(hi))
        }
    };

    // Trajectory-estimate violations when the scenario carries a
    // certificate-induced decay envelope.
    let iss_violations: Option<usize> = match sc.certificate.as_ref() {
        Some(cert) => match (&cert.form, cert.kl_envelope()) {
            (RateForm::Max { gamma, .. }, Ok(beta)) => {
                let w0 = omegas[0];
                let input_term = gamma.eval(u.sup_norm());
                let mut env = beta.upper().eval(w0);
                let mut count = 0usize;
                for (k, &w) in omegas.iter().enumerate() {
                    if k > 0 {
                        env = beta.contraction().eval(env);
                    }
                    let bound = beta.lower_inverse().eval(env).max(input_term);
                    if w > bound + 1e-9 + 1e-9 * bound {
                        count += 1;
                    }
                }
                Some(count)
            }
            _ => None,
        },
        None => None,
    };

    let plot_hint = format!(
        "# gnuplot layout hint\nset datafile separator ','\nset key autotitle columnhead\nplot 'trajectory.csv' using 1:{} with lines title 'omega'\n",
        n + m + 2
    );

    let outcome = Outcome {
        verdict: true,
        report: json!({
            "command": "simulate",
            "scenario": sc.name,
            "steps": p.horizon,
            "initial_state": xi,
            "omega_start": omegas.first(),
            "omega_end": omegas.last(),
            "min_step_ratio": min_ratio,
            "max_step_ratio": max_ratio,
            "iss_violations": iss_violations,
            "spec": spec.resolved(),
        }),
    };
    Ok((outcome, SimulationFiles { csv, plot_hint }))
}
