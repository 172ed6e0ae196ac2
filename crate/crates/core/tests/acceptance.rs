//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line (visible with `cargo test --test acceptance
//! -- --nocapture`).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sgk_core::certify::{
    check_dissipative_form, check_implication_form, check_max_form, Certificate, ConversionGrid,
    KBound, RateForm, SampleSpace,
};
use sgk_core::composer::{check_assumption, compose_certificate, reverse_decompose};
use sgk_core::dtsim::{
    DiscreteSystem, InputSignal, MeasurementFunction, MonotonicNorm, NetworkTopology, StateMap,
};
use sgk_core::gaingraph::GainNetwork;
use sgk_core::kfun::{geometric_grid, Kind, PLFunction};
use sgk_core::scenarios;
use std::sync::Arc;
use std::time::Instant;

fn report(criterion: usize, what: &str, pass: bool) {
    println!(
        "criterion {criterion}: {} - {what}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {what}");
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[test]
fn criterion_1_example_pipeline() {
    let start = Instant::now();
    let sc = scenarios::example1();
    let gains = sc.gains.as_ref().unwrap();

    let sg = gains.check_small_gain(10.0, 512, 1e-9);
    report(1, "small-gain condition on the coupled pair", sg.verdict);

    let assumption = check_assumption(
        gains,
        &sc.estimates,
        sc.topology.as_ref().unwrap(),
        &sc.space,
    )
    .unwrap();
    report(
        1,
        "subsystem estimates hold on 10^4 samples in [-2,2]^2 x [-1,1]",
        assumption.verdict,
    );

    let cert = sc.certificate.as_ref().unwrap();
    let max_form = check_max_form(cert, &sc.system, &sc.space).unwrap();
    report(
        1,
        "monolithic sup-norm certificate passes the max-form check",
        max_form.verdict,
    );

    let elapsed = start.elapsed().as_secs_f64();
    report(1, "pipeline under 30 s", elapsed < 30.0);
}

#[test]
fn criterion_2_non_exponential_decay() {
    let start = Instant::now();
    let sc = scenarios::example1();
    let mut x = vec![0.5, 0.5];
    let zero = InputSignal::zero(1);
    let mut hit = false;
    for _ in 0..100_000 {
        let next = sc.system.step(&x, zero.value_at(0));
        if sc.omega.eval(&next) / sc.omega.eval(&x) > 0.999 {
            hit = true;
            break;
        }
        x = next;
    }
    report(
        2,
        "one-step decay ratio exceeds 0.999 within 10^5 steps",
        hit,
    );
    report(
        2,
        "decay scan under 10 s",
        start.elapsed().as_secs_f64() < 10.0,
    );
}

struct LinearNetwork {
    l: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    row_max: f64,
    b_max: f64,
}

impl LinearNetwork {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let l = 2 + (rng.next_u64() % 3) as usize;
        let target = 0.3 + 0.5 * unit(rng);
        let mut a = vec![vec![0.0; l]; l];
        let mut row_max: f64 = 0.0;
        for row in a.iter_mut() {
            let raw: Vec<f64> = (0..l).map(|_| unit(rng)).collect();
            let total: f64 = raw.iter().sum();
            let scale = target * (0.5 + 0.5 * unit(rng)) / total.max(1e-9);
            let mut sum = 0.0;
            for (entry, w) in row.iter_mut().zip(raw) {
                let signed = if rng.next_u64().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                *entry = signed * w * scale;
                sum += entry.abs();
            }
            row_max = row_max.max(sum);
        }
        let b: Vec<f64> = (0..l).map(|_| 0.1 + 0.9 * unit(rng)).collect();
        let b_max = b.iter().cloned().fold(0.0, f64::max);
        LinearNetwork {
            l,
            a,
            b,
            row_max,
            b_max,
        }
    }

    fn system(&self) -> DiscreteSystem {
        let a = self.a.clone();
        let b = self.b.clone();
        let l = self.l;
        DiscreteSystem::new(l, 1, move |x: &[f64], u: &[f64]| {
            (0..l)
                .map(|i| a[i].iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + b[i] * u[0])
                .collect()
        })
    }

    fn topology(&self) -> NetworkTopology {
        let l = self.l;
        let updates: Vec<StateMap> = (0..l)
            .map(|i| {
                let row = self.a[i].clone();
                let bi = self.b[i];
                Arc::new(move |x: &[f64], u: &[f64]| {
                    vec![row.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + bi * u[0]]
                }) as StateMap
            })
            .collect();
        let neighbors: Vec<Vec<usize>> = (0..l)
            .map(|i| (0..l).filter(|&j| j != i && self.a[i][j] != 0.0).collect())
            .collect();
        NetworkTopology::new(vec![1; l], neighbors, updates, 1).unwrap()
    }

    fn sup_cert(&self, form: RateForm) -> Certificate {
        Certificate {
            v: Arc::new(|x: &[f64]| x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))),
            form,
            lower: PLFunction::identity(),
            upper: PLFunction::identity(),
            steps: 1,
            omega: MeasurementFunction::sup_norm(),
        }
    }

    fn space(&self, seed: u64) -> SampleSpace {
        SampleSpace::symmetric(self.l, 2.0, 1, 1.0, 10_000, seed)
    }
}

#[test]
fn criterion_3_form_conversions() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut failures = 0usize;
    for trial in 0..20 {
        let net = LinearNetwork::random(&mut rng);
        let sys = net.system();
        let space = net.space(1000 + trial);
        let (r, b) = (net.row_max, net.b_max);
        // Alternate between a linear decrease rate and a piecewise-linear
        // one that flattens past s = 1 (still a valid, weaker rate).
        let alpha_imp = if trial % 2 == 0 {
            PLFunction::linear(0.5 * (1.0 - r))
        } else {
            PLFunction::from_breakpoints(
                Kind::ClassKinf,
                vec![(0.0, 0.0), (1.0, 0.5 * (1.0 - r))],
                0.25 * (1.0 - r),
            )
            .unwrap()
        };
        let imp = net.sup_cert(RateForm::Implication {
            alpha: alpha_imp,
            gamma: PLFunction::linear(2.0 * b / (1.0 - r)),
        });
        let kb = KBound::new(
            PLFunction::linear(net.row_max.max(0.05)),
            PLFunction::linear(b),
        )
        .unwrap();
        let imp_ok = check_implication_form(&imp, &sys, &space).unwrap().verdict;
        let maxed = sgk_core::certify::implication_to_max(&imp, &kb).unwrap();
        let max_ok = check_max_form(&maxed, &sys, &space).unwrap().verdict;
        let diss =
            sgk_core::certify::max_to_dissipative(&maxed, &ConversionGrid::default()).unwrap();
        let diss_ok = check_dissipative_form(&diss, &sys, &space).unwrap().verdict;
        if !(imp_ok && max_ok && diss_ok) {
            failures += 1;
            println!(
                "criterion 3: trial {trial} imp={imp_ok} max={max_ok} diss={diss_ok} (l={}, r={r:.3})",
                net.l
            );
        }
    }
    report(
        3,
        "20 randomized networks convert with zero failures",
        failures == 0,
    );
}

#[test]
fn criterion_4_round_trip() {
    // The coupled-pair scenario first: decompose the bundled certificate.
    let sc = scenarios::example1();
    let cert = sc.certificate.as_ref().unwrap();
    let omegas = vec![
        MeasurementFunction::euclidean(),
        MeasurementFunction::euclidean(),
    ];
    let dec = reverse_decompose(cert, &omegas, &[1, 1], &MonotonicNorm::MaxNorm, 10.0, 64).unwrap();
    report(
        4,
        "decomposition horizon is one for the coupled pair",
        dec.m_hat == 1,
    );
    report(
        4,
        "decomposed gains satisfy the small-gain condition (coupled pair)",
        dec.gains.check_small_gain(10.0, 512, 1e-9).verdict,
    );
    let assumption = check_assumption(
        &dec.gains,
        &dec.estimates,
        sc.topology.as_ref().unwrap(),
        &sc.space,
    )
    .unwrap();
    report(
        4,
        "decomposed estimates hold on the coupled pair",
        assumption.verdict,
    );
    let recomposed = compose_certificate(
        &dec.gains,
        &dec.estimates,
        &MonotonicNorm::MaxNorm,
        None,
        10.0,
        512,
    )
    .unwrap();
    let recheck = check_max_form(&recomposed, &sc.system, &sc.space).unwrap();
    report(
        4,
        "re-composed certificate passes the max-form check (coupled pair)",
        recheck.verdict,
    );

    // Ten randomized feasible networks.
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut failures = 0usize;
    for trial in 0..10 {
        let net = LinearNetwork::random(&mut rng);
        let sys = net.system();
        let space = net.space(2000 + trial);
        let (r, b) = (net.row_max, net.b_max);
        let cert = net.sup_cert(RateForm::Max {
            alpha: PLFunction::linear(0.5 * (1.0 + r)),
            gamma: PLFunction::linear(b * (1.0 + r) / (1.0 - r)),
        });
        let omegas: Vec<MeasurementFunction> = (0..net.l)
            .map(|_| MeasurementFunction::euclidean())
            .collect();
        let dims = vec![1usize; net.l];
        let dec =
            reverse_decompose(&cert, &omegas, &dims, &MonotonicNorm::MaxNorm, 10.0, 64).unwrap();
        let sg = dec.gains.check_small_gain(10.0, 256, 1e-9).verdict;
        let assumption = check_assumption(&dec.gains, &dec.estimates, &net.topology(), &space)
            .unwrap()
            .verdict;
        let recomposed = compose_certificate(
            &dec.gains,
            &dec.estimates,
            &MonotonicNorm::MaxNorm,
            None,
            10.0,
            256,
        )
        .unwrap();
        let recheck = check_max_form(&recomposed, &sys, &space).unwrap().verdict;
        if !(sg && assumption && recheck) {
            failures += 1;
            println!(
                "criterion 4: trial {trial} sg={sg} assumption={assumption} recheck={recheck}"
            );
        }
    }
    report(
        4,
        "10 randomized networks round-trip with zero failures",
        failures == 0,
    );
}

#[test]
fn criterion_5_sigma_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let grid = geometric_grid(10.0, 512);
    let mut built = 0usize;
    let mut violations = 0usize;
    while built < 100 {
        let l = 2 + (rng.next_u64() % 3) as usize;
        let gains: Vec<Vec<PLFunction>> = (0..l)
            .map(|_| {
                (0..l)
                    .map(|_| {
                        if rng.next_u64() % 2 == 0 {
                            PLFunction::linear(0.1 + 0.8 * unit(&mut rng))
                        } else {
                            PLFunction::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        let net = GainNetwork::new(gains, vec![PLFunction::identity(); l], 1).unwrap();
        if !net.check_small_gain(10.0, 128, 1e-9).verdict {
            continue;
        }
        built += 1;
        let (scaling, _eps) = net.construct_sigma_auto(10.0, 512).unwrap();
        for i in 0..l {
            for j in 0..l {
                if net.gain(i, j).is_zero() {
                    continue;
                }
                for &s in &grid {
                    let lhs = net.gain(i, j).eval(scaling.sigma[j].eval(s));
                    if lhs >= scaling.sigma[i].eval(s) {
                        violations += 1;
                    }
                }
            }
        }
    }
    report(
        5,
        "scaled gains decrease strictly on the 512-point grid for 100 networks",
        violations == 0,
    );
}

#[test]
fn criterion_6_growth_propagation() {
    // Exact recursion values for identity growth bounds.
    let kb_id = KBound::new(PLFunction::identity(), PLFunction::identity()).unwrap();
    let (theta2, zeta2) = sgk_core::certify::propagate_k_bound(&kb_id, 2);
    let exact = [0.25, 1.0, 3.0, 7.5]
        .iter()
        .all(|&s| theta2.eval(s) == 2.0 * s && zeta2.eval(s) == 3.0 * s);
    report(6, "two-step recursion gives exactly 2s and 3s", exact);

    // Domination of simulated growth for the coupled pair.
    let sc = scenarios::example1();
    let kb = sc.k_bound.as_ref().unwrap();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for j in 1..=5 {
        let (theta, zeta) = sgk_core::certify::propagate_k_bound(kb, j);
        for i in 0..sc.space.len() {
            let (xi, u) = sc.space.point(i, j);
            let mut x = xi.clone();
            for k in 0..j {
                x = sc.system.step(&x, u.value_at(k));
            }
            let lhs = sc.omega.eval(&x);
            let rhs = theta.eval(sc.omega.eval(&xi)) + zeta.eval(u.sup_norm());
            let margin = rhs - lhs;
            worst = worst.min(margin);
            if margin < -(1e-9 + 1e-9 * rhs.abs()) {
                ok = false;
            }
        }
    }
    println!("criterion 6: worst margin over 5 horizons {worst:.3e}");
    report(
        6,
        "propagated bounds dominate 10^4 simulated samples per horizon",
        ok,
    );
}

#[test]
fn criterion_7_applications() {
    // Polar convergence.
    let polar = scenarios::polar_example();
    let mut polar_ok = true;
    for theta0 in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
        let mut x = vec![1.0, theta0];
        let mut hit = false;
        for _ in 0..100_000 {
            if polar.omega.eval(&x) <= 1e-3 {
                hit = true;
                break;
            }
            x = polar.system.step(&x, &[]);
        }
        polar_ok &= hit;
    }
    report(
        7,
        "polar measurement reaches 1e-3 within 10^5 steps from three starts",
        polar_ok,
    );

    // Oscillator synchronization.
    let osc = scenarios::oscillator_sync(&scenarios::OscillatorSpec::diffusive_demo());
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let mut osc_ok = true;
    for _ in 0..20 {
        let mut x: Vec<f64> = (0..4).map(|_| -2.0 + 4.0 * unit(&mut rng)).collect();
        for _ in 0..100 {
            x = osc.system.step(&x, &[]);
        }
        osc_ok &= osc.omega.eval(&x) < 1e-6;
    }
    report(7, "oscillator sync error below 1e-6 by step 100", osc_ok);

    // Observer tracking bound from the composed decay envelope.
    let (_, obs) = scenarios::observer_demo(3);
    let cert = compose_certificate(
        obs.gains.as_ref().unwrap(),
        &obs.estimates,
        &MonotonicNorm::MaxNorm,
        None,
        10.0,
        256,
    )
    .unwrap();
    let beta = cert.kl_envelope().unwrap();
    let mut violations = 0usize;
    for i in 0..1000 {
        let xi = obs.space.state_at(i);
        let w0 = obs.omega.eval(&xi);
        let mut x = xi;
        let mut env = beta.upper().eval(w0);
        for k in 0..=100 {
            if k > 0 {
                x = obs.system.step(&x, &[]);
                env = beta.contraction().eval(env);
            }
            let bound = beta.lower_inverse().eval(env);
            if obs.omega.eval(&x) > bound + 1e-9 {
                violations += 1;
            }
        }
    }
    report(
        7,
        "observer tracking bound holds on 10^3 initializations for 100 steps",
        violations == 0,
    );
}

fn random_pl(rng: &mut ChaCha8Rng) -> PLFunction {
    let n = 1 + (rng.next_u64() % 6) as usize;
    let mut pts = Vec::with_capacity(n + 1);
    pts.push((0.0, 0.0));
    let (mut s, mut v) = (0.0, 0.0);
    for _ in 0..n {
        s += 0.05 + 2.0 * unit(rng);
        v += 0.05 + 2.0 * unit(rng);
        pts.push((s, v));
    }
    let tail = 0.05 + 3.0 * unit(rng);
    PLFunction::from_breakpoints(Kind::ClassKinf, pts, tail).unwrap()
}

#[test]
fn criterion_8_algebra_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut ok = true;
    for _ in 0..1000 {
        let f = random_pl(&mut rng);
        let g = random_pl(&mut rng);
        let comp = f.compose(&g);
        let mx = f.pointwise_max(&g);
        let sum = f.pointwise_add(&g);
        let inv = f.inverse().unwrap();
        for _ in 0..5 {
            let s = 20.0 * unit(&mut rng);
            let close = |got: f64, want: f64| (got - want).abs() <= 1e-12 * want.abs().max(1.0);
            ok &= close(comp.eval(s), f.eval(g.eval(s)));
            ok &= close(mx.eval(s), f.eval(s).max(g.eval(s)));
            ok &= close(sum.eval(s), f.eval(s) + g.eval(s));
            ok &= close(inv.eval(f.eval(s)), s);
        }
        let round = inv.compose(&f);
        for &(s, _) in f.breakpoints() {
            ok &= (round.eval(s) - s).abs() <= 1e-12 * s.max(1.0);
        }
    }
    report(
        8,
        "algebra agrees with pointwise oracles at 1e-12 on 10^3 pairs",
        ok,
    );
}
