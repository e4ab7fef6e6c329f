//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; exits nonzero if any criterion fails.
//!
//! `cargo test -p vslq --test acceptance -- 1 2 11` runs a subset.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use vslq::bench::{
    bare_single_qubit_error, bare_two_qubit_error, baseline_table, benchmark_point, fit_exponential, measurement_pointer_study,
    sweep_and_fit, BenchmarkConfig, GateKind, MeasurementConfig,
};
use vslq::dynamics::{evolve_sampled, perturbative_phase_check, DensityState, IntegratorConfig, LindbladModel};
use vslq::model::{
    build_hp, build_logical_ops, decompose_shift_table, transparency_residuals, ShiftDecomposition, VslqParams,
};
use vslq::noise::{lifetime_under_1f, LifetimeConfig};
use vslq::pulse::{
    assemble_model, build_continuous_ec_schedule, build_xcx_schedule, calibrate_ec_amplitude, coherent_error, ec_recovery_fidelity,
    tune_czz, Envelope, PulseConfig,
};
use vslq::qalg::{annihilation, embed, logical_basis, xtilde, Copy, Operator, PureState, SystemLayout};
use vslq::units::angular;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn c1_transparency() -> Outcome {
    let (transparent, bare) = transparency_residuals().map_err(|e| e.to_string())?;
    check(transparent <= 1e-12 && bare >= 0.5, format!("max ‖[a_q, O_L]ψ‖ = {transparent:.2e}, min bare = {bare:.3}"))
}

fn c2_ground_space() -> Outcome {
    let p = VslqParams::default();
    let pair = SystemLayout::bare_pair();
    let hp = build_hp(&p, &pair, Copy::Solo).map_err(|e| e.to_string())?;
    let m = DMatrix::from_row_slice(9, 9, &hp.to_dense());
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let e: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i] / angular(1.0)).collect();
    let x = xtilde(3).map_err(|e| e.to_string())?;
    let xx = embed(&x.kron(&x), &["l", "r"], &pair).map_err(|e| e.to_string())?;
    let mut stabilizer_defect: f64 = 0.0;
    for &k in &order[..2] {
        let v: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
        let xv = xx.apply(&v);
        stabilizer_defect = stabilizer_defect.max(xv.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt());
    }
    let degenerate = (e[0] + p.w).abs() <= 1e-10 && (e[1] + p.w).abs() <= 1e-10;
    check(
        degenerate && e[2] > -p.w + 1.0 && stabilizer_defect <= 1e-10,
        format!("E0 = {:.12}, E1 = {:.12}, E2 = {:.3} MHz, ‖X̃X̃v − v‖ = {stabilizer_defect:.1e}", e[0], e[1], e[2]),
    )
}

fn c3_integrators() -> Outcome {
    let configs = [IntegratorConfig::rk4(0.05), IntegratorConfig::interaction(0.05), IntegratorConfig::adaptive(1e-10, 1e-12)];
    let a = annihilation(2).map_err(|e| e.to_string())?;
    let p1 = Operator::real_diagonal(&[0.0, 1.0]);
    let excited = DensityState::from_pure(&PureState::basis(2, 1));
    let ground = DensityState::from_pure(&PureState::basis(2, 0));
    let sx = &a + &a.adjoint();
    let decay = LindbladModel::new(Operator::zeros(2)).with_channel("a", a.clone(), Envelope::constant(200.0));
    let rabi = LindbladModel::new(Operator::zeros(2)).with_drive(sx, Envelope::constant(10.0));
    let mut worst: f64 = 0.0;
    for cfg in &configs {
        let cfg = IntegratorConfig { sample_every: 2.5, ..cfg.clone() };
        let (_, traj) = evolve_sampled(&excited, &decay, 0.0, 25.0, &cfg, &[("p1".into(), p1.clone())]).map_err(|e| e.to_string())?;
        for (t, row) in traj.times.iter().zip(&traj.values) {
            worst = worst.max((row[0] - (-0.2 * t).exp()).abs());
        }
        let (_, traj) = evolve_sampled(&ground, &rabi, 0.0, 50.0, &cfg, &[("p1".into(), p1.clone())]).map_err(|e| e.to_string())?;
        for (t, row) in traj.times.iter().zip(&traj.values) {
            worst = worst.max((row[0] - (angular(10.0) * t).sin().powi(2)).abs());
        }
    }
    // dt halving on a production-size problem: one EC cycle of a VSLQ.
    let p = VslqParams::default();
    let ec = PulseConfig::default().ec;
    let coarse = IntegratorConfig::default();
    let fine = IntegratorConfig { dt: coarse.dt / 2.0, ..coarse.clone() };
    let f_coarse = ec_recovery_fidelity(&p, &ec, 7.25, &coarse).map_err(|e| e.to_string())?;
    let f_fine = ec_recovery_fidelity(&p, &ec, 7.25, &fine).map_err(|e| e.to_string())?;
    let halving = (f_coarse - f_fine).abs();
    check(worst <= 1e-8 && halving < 1e-6, format!("max oracle deviation {worst:.2e}; dt-halving change {halving:.2e}"))
}

fn c4_perturbative() -> Outcome {
    let p = VslqParams::default();
    let g = p.w / 10.0;
    let cfg = IntegratorConfig::interaction(0.05);
    let plain = perturbative_phase_check(&p, g, 400.0, None, &cfg).map_err(|e| e.to_string())?;
    let lossy = perturbative_phase_check(&p, g, 400.0, Some(200.0), &cfg).map_err(|e| e.to_string())?;
    let rel = plain.rate / plain.expected_rate - 1.0;
    let after = lossy.rate_after_loss.unwrap_or(f64::NAN);
    let loss_rel = after / lossy.rate - 1.0;
    let tol = 2.0 * (g / p.w).powi(2);
    check(
        rel.abs() <= 0.02 && loss_rel.abs() <= tol,
        format!("rate/(g²/W) − 1 = {rel:+.4}; rate after loss/before − 1 = {loss_rel:+.4} (tol {tol:.3})"),
    )
}

struct Calibrated {
    params: VslqParams,
    pulse: PulseConfig,
    icfg: IntegratorConfig,
}

fn calibrate() -> Result<Calibrated, String> {
    let params = VslqParams::default();
    let icfg = IntegratorConfig::default();
    let mut pulse = PulseConfig::default();
    let ec = calibrate_ec_amplitude(&params, &pulse.ec, &icfg).map_err(|e| e.to_string())?;
    pulse.ec.amplitude = Some(ec.amplitude);
    println!("  EC amplitude {:.6} MHz, recovery fidelity {:.4}", ec.amplitude, ec.fidelity);
    Ok(Calibrated { params, pulse, icfg })
}

fn c5_coherent(cal: &mut Calibrated) -> Outcome {
    let czz = tune_czz(&cal.params, &mut cal.pulse, 2, &cal.icfg).map_err(|e| e.to_string())?;
    let xcx = [2, 4]
        .iter()
        .map(|&n| build_xcx_schedule(&cal.params, &cal.pulse, n).and_then(|s| coherent_error(&cal.params, &s, &cal.icfg)))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    let worst_xcx = xcx.iter().copied().fold(0.0, f64::max);
    check(
        czz.error <= 1e-6 && worst_xcx <= 1e-5,
        format!(
            "CZZ {:.2e} (untuned {:.2e}, scales {:?}); XCX 200 ns {:.2e}, 400 ns {:.2e}",
            czz.error, czz.initial_error, czz.scales, xcx[0], xcx[1]
        ),
    )
}

struct TwoQubit {
    czz: Vec<(f64, f64)>,
    fit_a: f64,
    fit_b: f64,
    xcx200: f64,
    xcx400: f64,
}

fn run_two_qubit(cal: &Calibrated) -> Result<TwoQubit, String> {
    let bench = BenchmarkConfig { gate: GateKind::Czz, ..Default::default() };
    let (reports, fit) = sweep_and_fit(&cal.params, &cal.pulse, &bench, &cal.icfg).map_err(|e| e.to_string())?;
    let czz: Vec<(f64, f64)> = reports.iter().map(|r| (r.t1p, r.p)).collect();
    for (t, p) in &czz {
        println!("  CZZ 200 ns  T1P = {t:>2} µs  p = {p:.4e}");
    }
    println!("  fit a = {:.4e}, b = {:.4e}", fit.a, fit.b);
    let xcx = |n: usize| -> Result<f64, String> {
        let b = BenchmarkConfig { gate: GateKind::Xcx, n_cycles: n, t1p_grid: vec![64.0], ..Default::default() };
        let p = benchmark_point(&cal.params.with_t1p(64.0), &cal.pulse, &b, &cal.icfg).map_err(|e| e.to_string())?.p;
        println!("  XCX {} ns  T1P = 64 µs  p = {p:.4e}", 100 * n);
        Ok(p)
    };
    Ok(TwoQubit { czz, fit_a: fit.a, fit_b: fit.b, xcx200: xcx(2)?, xcx400: xcx(4)? })
}

fn p_at(tq: &TwoQubit, t1p: f64) -> f64 {
    tq.czz.iter().find(|(t, _)| *t == t1p).map(|r| r.1).unwrap_or(f64::NAN)
}

fn c6_reproduction(tq: &TwoQubit) -> Outcome {
    let czz = p_at(tq, 64.0);
    let ok = within(czz, 0.7 * 1.48e-4, 3.0 * 1.48e-4)
        && within(tq.xcx400, 0.7 * 5.3e-4, 3.0 * 5.3e-4)
        && within(tq.fit_a, 0.0057 / 3.0, 0.0057 * 3.0)
        && within(tq.fit_b, 0.253 / 3.0, 0.253 * 3.0);
    check(
        ok,
        format!(
            "CZZ p(64) = {czz:.3e} ({:.2}× ref); XCX 400 ns p(64) = {:.3e} ({:.2}× ref); a = {:.4} ({:.2}×), b = {:.3} ({:.2}×)",
            czz / 1.48e-4,
            tq.xcx400,
            tq.xcx400 / 5.3e-4,
            tq.fit_a,
            tq.fit_a / 0.0057,
            tq.fit_b,
            tq.fit_b / 0.253
        ),
    )
}

fn c7_scaling(tq: &TwoQubit) -> Outcome {
    let monotone = tq.czz.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1);
    let ratio = p_at(tq, 8.0) / p_at(tq, 64.0);
    let (lin, quad) = (tq.fit_a / 8.0, tq.fit_b / 64.0);
    check(
        monotone && ratio > 8.0 && quad > lin && tq.xcx400 <= tq.xcx200,
        format!(
            "monotone {monotone}; p(8)/p(64) = {ratio:.2}; at 8 µs b/T² = {quad:.2e} vs a/T = {lin:.2e}; XCX p(400) = {:.3e} ≤ p(200) = {:.3e}",
            tq.xcx400, tq.xcx200
        ),
    )
}

fn c8_baselines(tq: &TwoQubit) -> Outcome {
    let grid = [8.0, 16.0, 32.0, 64.0];
    let close = |e: f64, want: f64| (e - want).abs() <= 1e-12 * want;
    let exact = baseline_table(&grid, &[40.0, 200.0, 400.0], true).iter().all(|&(t, tg, e)| close(e, 1.0 - (-tg / (t * 1e3)).exp()))
        && baseline_table(&grid, &[20.0, 40.0], false).iter().all(|&(t, tg, e)| close(e, 1.0 - (-tg / (2.0 * t * 1e3)).exp()));
    let bare40 = bare_two_qubit_error(40.0, 64.0);
    let czz = p_at(tq, 64.0);
    check(
        exact && czz < bare40 && tq.xcx400 < bare40 && bare_single_qubit_error(20.0, 64.0) < bare40,
        format!(
            "bare 40 ns at 64 µs = {bare40:.3e}; CZZ/bare = {:.2}, XCX 400 ns/bare = {:.2}",
            czz / bare40,
            tq.xcx400 / bare40
        ),
    )
}

fn c9_one_over_f() -> Outcome {
    let params = VslqParams { t1p: 8.0, ..VslqParams::default() };
    let icfg = IntegratorConfig::default();
    let cfg = LifetimeConfig { t2r_ratio: Some(1.0), n_traces: 100, omega: 2.63, gamma_s: 23.3, ..LifetimeConfig::default() };
    let noisy = lifetime_under_1f(&params, &cfg, &icfg).map_err(|e| e.to_string())?;
    let off = lifetime_under_1f(&params, &LifetimeConfig { t2r_ratio: None, ..cfg.clone() }, &icfg).map_err(|e| e.to_string())?;

    // Dissipation-only reference assembled directly from the continuous-EC model.
    let single = VslqParams { copies: 1, ..params.clone() };
    let layout = single.layout().map_err(|e| e.to_string())?;
    let total = cfg.duration * 1e3;
    let schedule = build_continuous_ec_schedule(&single, cfg.omega, cfg.gamma_s, total).map_err(|e| e.to_string())?;
    let model = assemble_model(&single, &layout, &schedule).map_err(|e| e.to_string())?;
    let x_l = build_logical_ops(&layout, Copy::Solo).map_err(|e| e.to_string())?.x;
    let (zero, _) = logical_basis(&layout, Copy::Solo).map_err(|e| e.to_string())?;
    let (_, traj) = evolve_sampled(
        &DensityState::from_pure(&zero),
        &model,
        0.0,
        total,
        &IntegratorConfig { sample_every: cfg.sample_every, ..icfg.clone() },
        &[("x".into(), x_l)],
    )
    .map_err(|e| e.to_string())?;
    let (t, y): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .map(|t| t / 1e3)
        .zip(traj.column("x").unwrap_or_default())
        .filter(|(t, _)| *t >= cfg.skip)
        .unzip();
    let reference = fit_exponential(&t, &y).map_err(|e| e.to_string())?.tau;
    let stderr = noisy.t_l_stderr;
    check(
        noisy.ratio >= 5.0 && (off.t_l - reference).abs() <= stderr.max(1e-9 * reference),
        format!(
            "T_L/T1P = {:.2} (T_L = {:.2} ± {:.2} µs, noise {:.4} MHz rms); noise off {:.3} µs vs dissipation-only {:.3} µs",
            noisy.ratio, noisy.t_l, stderr, noisy.amplitude, off.t_l, reference
        ),
    )
}

fn c10_pointer() -> Outcome {
    let r = measurement_pointer_study(&VslqParams::default(), &MeasurementConfig::default(), &IntegratorConfig::default())
        .map_err(|e| e.to_string())?;
    check((r.ratio - 0.5).abs() <= 0.1, format!("lost/intact displacement rate = {:.4}", r.ratio))
}

fn c11_decomposition() -> Outcome {
    let coeffs = [0.3, -1.2, 0.45, 2.5, 0.8];
    let table = ShiftDecomposition::synthesize(coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]);
    let d = decompose_shift_table(&table, coeffs[3]).map_err(|e| e.to_string())?;
    let got = [d.c0, d.c1, d.cz, d.czz, d.c11];
    let round_trip = got.iter().zip(&coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // An entry no coefficient reaches: C10 is outside the symmetric span the fit uses.
    let mut off_span = table.clone();
    let eps = 0.01;
    off_span.c[1][0] += eps;
    let d2 = decompose_shift_table(&off_span, coeffs[3]).map_err(|e| e.to_string())?;
    let moved = [d2.c0, d2.c1, d2.cz, d2.czz, d2.c11].iter().zip(&coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let isolated = (d2.residual - eps / 8f64.sqrt()).abs() < 1e-12 && moved < 1e-12;
    check(
        round_trip < 1e-12 && d.residual < 1e-12 && isolated,
        format!("round trip {round_trip:.1e}, residual {:.1e}; off-span residual {:.4e} with coefficients fixed to {moved:.1e}", d.residual, d2.residual),
    )
}

fn report(n: usize, name: &str, start: Instant, outcome: &Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(d) => println!("PASS {n:>2} {name}: {d} [{secs:.1} s]"),
        Err(d) => println!("FAIL {n:>2} {name}: {d} [{secs:.1} s]"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut all = true;
    let cheap: [(usize, &str, fn() -> Outcome); 5] = [
        (1, "error transparency", c1_transparency),
        (2, "H_P ground space", c2_ground_space),
        (3, "integrator oracles", c3_integrators),
        (4, "CZZ perturbative equivalence", c4_perturbative),
        (11, "coefficient decomposition", c11_decomposition),
    ];
    for (n, name, f) in cheap {
        if wants(n) {
            let t = Instant::now();
            all &= report(n, name, t, &f());
        }
    }
    if (5..=8).any(wants) {
        let t = Instant::now();
        match calibrate() {
            Err(e) => {
                for (n, name) in [(5, "no-noise calibration"), (6, "quantitative reproduction"), (7, "scaling"), (8, "baselines")] {
                    if wants(n) {
                        all &= report(n, name, t, &Err(format!("EC calibration failed: {e}")));
                    }
                }
            }
            Ok(mut cal) => {
                let c5 = c5_coherent(&mut cal);
                if wants(5) {
                    all &= report(5, "no-noise calibration", t, &c5);
                }
                if (6..=8).any(wants) {
                    let t = Instant::now();
                    match run_two_qubit(&cal) {
                        Err(e) => {
                            for (n, name) in [(6, "quantitative reproduction"), (7, "scaling"), (8, "baselines")] {
                                if wants(n) {
                                    all &= report(n, name, t, &Err(e.clone()));
                                }
                            }
                        }
                        Ok(tq) => {
                            let checks: [(usize, &str, fn(&TwoQubit) -> Outcome); 3] = [
                                (6, "quantitative reproduction", c6_reproduction),
                                (7, "scaling", c7_scaling),
                                (8, "baselines", c8_baselines),
                            ];
                            for (n, name, f) in checks {
                                if wants(n) {
                                    all &= report(n, name, t, &f(&tq));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let slow: [(usize, &str, fn() -> Outcome); 2] = [(9, "1/f lifetime", c9_one_over_f), (10, "measurement pointer", c10_pointer)];
    for (n, name, f) in slow {
        if wants(n) {
            let t = Instant::now();
            all &= report(n, name, t, &f());
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
