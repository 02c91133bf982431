//! Acceptance gate: every primary claim of the library, checked end to end
//! at its stated tolerance. Each test prints one `criterion N (...): PASS`
//! line with the measured values; a failure carries the same identification
//! in its panic message.

use hyplat::analysis::{
    self, bump, choose_corrector_constants, convergence_order, decay_grid, decay_rate_fit,
    decay_sample_times, decay_trajectory, geomspace, lyapunov, make_initial_data, relax_grid,
    relax_sample_times, relaxation_errors, InitialDataSet, TransformTable, RELAX_WINDOW,
};
use hyplat::grid::{self, Grid, GridFunction};
use hyplat::lp::{bernstein_check, localize, PartitionOfUnity};
use hyplat::solver::{spectral_propagate, stability_report, Scheme, VectorGridFunction};
use hyplat::system::{kalman_rank_holds, validate_system, SystemSpec};
use hyplat::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const SQRT_TAU: f64 = 2.506628274631000502415765284811;

fn random_function(grid: Grid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..grid.n_points()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::from_real(grid, &vals)
}

fn random_state(grid: Grid, n: usize, seed: u64) -> VectorGridFunction {
    let comps: Vec<GridFunction> =
        (0..n).map(|i| random_function(grid, seed * 97 + i as u64)).collect();
    VectorGridFunction::new(comps).unwrap()
}

/// Random symmetric transport matrix with entries in [-1, 1].
fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Random damping matrix: zeros outside a trailing `n2 x n2` SPD block.
fn random_damping(n: usize, n2: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n2, n2);
    for i in 0..n2 {
        for j in 0..n2 {
            m[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    let spd = m.transpose() * &m + 0.1 * DMatrix::<f64>::identity(n2, n2);
    let mut b = DMatrix::<f64>::zeros(n, n);
    let n1 = n - n2;
    for i in 0..n2 {
        for j in 0..n2 {
            b[(n1 + i, n1 + j)] = spd[(i, j)];
        }
    }
    b
}

#[test]
fn criterion_1_decay_rate_and_h_uniform_constant() {
    let start = Instant::now();
    let spec = SystemSpec::euler();
    let consts = choose_corrector_constants(&spec).unwrap();
    let times = decay_sample_times(200.0);

    let mut slope_h16 = f64::NAN;
    let mut r2_h16 = f64::NAN;
    let mut sup_constants = Vec::new();
    for (idx, &h) in [0.0625, 0.03125, 0.015625].iter().enumerate() {
        let grid = decay_grid(h).unwrap();
        let (rho0, u0) = make_initial_data(InitialDataSet::Decay, grid).unwrap();
        let state0 = VectorGridFunction::new(vec![rho0, u0]).unwrap();
        let record = decay_trajectory(&spec, &state0, &times, &consts).unwrap();
        if idx == 0 {
            let (slope, r2) = decay_rate_fit(&record, 10.0, 200.0).unwrap();
            slope_h16 = slope;
            r2_h16 = r2;
        }
        let sup = record
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                (1.0 + t).sqrt() * (record.norm_u2[i] + record.norm_dhu[i])
                    / record.h1_norm_initial
            })
            .fold(0.0f64, f64::max);
        sup_constants.push(sup);
    }
    let sup_min = sup_constants.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let sup_max = sup_constants.iter().fold(0.0f64, |a, &b| a.max(b));
    let spread = sup_max / sup_min - 1.0;
    let elapsed = start.elapsed().as_secs_f64();

    assert!(
        (-0.55..=-0.45).contains(&slope_h16),
        "criterion 1 (decay rate): FAIL — slope {slope_h16:.4} outside [-0.55, -0.45]"
    );
    assert!(
        spread < 0.20,
        "criterion 1 (decay rate): FAIL — sup-constant spread {:.2}% >= 20% ({:?})",
        100.0 * spread,
        sup_constants
    );
    assert!(
        elapsed < 60.0,
        "criterion 1 (decay rate): FAIL — runtime {elapsed:.1}s exceeds 60s"
    );
    println!(
        "criterion 1 (decay rate): PASS — slope={slope_h16:.4} (r2={r2_h16:.6}), \
         sup-constant spread={:.2}% over h in {{2^-4,2^-5,2^-6}}, runtime={elapsed:.1}s",
        100.0 * spread
    );
}

#[test]
fn criterion_2_relaxation_order_two() {
    let start = Instant::now();
    let h = 0.0625;
    let t_end = 5.0;
    let records: Vec<_> = (2..=6)
        .map(|k| {
            let eps = 0.5f64.powi(k);
            let times = relax_sample_times(eps, t_end);
            relaxation_errors(eps, h, t_end, 2.25, 0.5, &times).unwrap()
        })
        .collect();
    let orders = convergence_order(&records).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let checks = [
        ("sup_error_linf", orders.sup_error_linf),
        ("darcy_l1t_linf", orders.darcy_l1t_linf),
    ];
    let violations: Vec<String> = checks
        .iter()
        .filter(|(_, slope)| !(1.9..=2.1).contains(slope))
        .map(|(name, slope)| format!("{name} slope {slope:.4} outside [1.9, 2.1]"))
        .collect();
    let detail = format!(
        "sup_linf slope={:.4}, darcy_linf slope={:.4}, runtime={elapsed:.1}s",
        orders.sup_error_linf, orders.darcy_l1t_linf
    );
    if violations.is_empty() {
        println!("criterion 2 (relaxation order): PASS — {detail}");
    } else {
        println!("criterion 2 (relaxation order): FAIL — {detail}");
    }
    assert!(
        violations.is_empty(),
        "criterion 2 (relaxation order): FAIL — {}",
        violations.join("; ")
    );
    assert!(
        elapsed < 120.0,
        "criterion 2 (relaxation order): FAIL — runtime {elapsed:.1}s exceeds 120s"
    );
}

#[test]
fn criterion_3_reference_table_reproduction() {
    let eps = 0.03125; // 2^-5
    let t_end = 5.0;
    let reference_sup = [1.375812666e-05, 1.376071039e-05, 1.376255148e-05];
    let reference_darcy = [1.468560202e-03, 1.525401187e-03, 1.537860425e-03];
    let mut sup = Vec::new();
    let mut darcy = Vec::new();
    for &h in &[0.0625, 0.03125, 0.015625] {
        let times = relax_sample_times(eps, t_end);
        let rec = relaxation_errors(eps, h, t_end, 2.25, 0.5, &times).unwrap();
        sup.push(rec.sup_error_linf);
        darcy.push(rec.darcy_l1t_linf);
    }
    for i in 0..3 {
        let dev_sup = (sup[i] / reference_sup[i] - 1.0).abs();
        let dev_darcy = (darcy[i] / reference_darcy[i] - 1.0).abs();
        assert!(
            dev_sup < 0.10,
            "criterion 3 (reference table): FAIL — sup row {i}: {:.9e} vs {:.9e} ({:.2}% off)",
            sup[i],
            reference_sup[i],
            100.0 * dev_sup
        );
        assert!(
            dev_darcy < 0.10,
            "criterion 3 (reference table): FAIL — darcy row {i}: {:.9e} vs {:.9e} ({:.2}% off)",
            darcy[i],
            reference_darcy[i],
            100.0 * dev_darcy
        );
    }
    let spread = |v: &[f64]| {
        let lo = v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = v.iter().fold(0.0f64, |a, &b| a.max(b));
        hi / lo - 1.0
    };
    let sup_spread = spread(&sup);
    let darcy_spread = spread(&darcy);
    assert!(
        sup_spread < 0.02,
        "criterion 3 (reference table): FAIL — sup column h-spread {:.3}% >= 2%",
        100.0 * sup_spread
    );
    assert!(
        darcy_spread < 0.10,
        "criterion 3 (reference table): FAIL — darcy column h-spread {:.3}% >= 10%",
        100.0 * darcy_spread
    );
    println!(
        "criterion 3 (reference table): PASS — sup row0={:.9e} (ref {:.9e}), \
         darcy row0={:.9e} (ref {:.9e}), h-spreads sup={:.3}% darcy={:.3}%",
        sup[0],
        reference_sup[0],
        darcy[0],
        reference_darcy[0],
        100.0 * sup_spread,
        100.0 * darcy_spread
    );
}

#[test]
fn criterion_4_bernstein_zero_violations() {
    let start = Instant::now();
    let grid = Grid::new(0.0625, 512).unwrap();
    let pou = PartitionOfUnity::new(grid);
    let bands = pou.geometry().active_bands();
    assert!(!bands.is_empty());
    let mut checks = 0usize;
    for seed in 0..1000u64 {
        let v = random_function(grid, 40_000 + seed);
        for &j in &bands {
            let (lower_ok, upper_ok, ratio) = bernstein_check(&v, j, &pou).unwrap();
            assert!(
                lower_ok && upper_ok,
                "criterion 4 (Bernstein bounds): FAIL — seed {seed}, band {j}: ratio {ratio:.6e} \
                 outside [{:.6e}, {:.6e}]",
                0.75 * 2.0f64.powi(j),
                (8.0 / 3.0) * 2.0f64.powi(j)
            );
            checks += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 10.0,
        "criterion 4 (Bernstein bounds): FAIL — runtime {elapsed:.1}s exceeds 10s"
    );
    println!(
        "criterion 4 (Bernstein bounds): PASS — {checks} ratio checks \
         (1000 functions x {} active bands), zero violations, runtime={elapsed:.1}s",
        bands.len()
    );
}

#[test]
fn criterion_5_framework_identities() {
    let mut worst: (f64, &'static str) = (0.0, "none");
    let mut track = |defect: f64, label: &'static str, tol: f64| {
        if defect / tol > worst.0 / 1.0 {
            // keep the defect with the least margin relative to its tolerance
        }
        if defect > worst.0 {
            worst = (defect, label);
        }
        assert!(
            defect <= tol,
            "criterion 5 (framework identities): FAIL — {label} defect {defect:.3e} > {tol:.0e}"
        );
    };

    for m in 3..=8 {
        let h = 0.5f64.powi(m);
        let n = 256usize;
        let grid = Grid::new(h, n).unwrap();
        let v = random_function(grid, 500 + m as u64);
        let w = random_function(grid, 600 + m as u64);

        // Parseval.
        let parseval = (v.l2_norm() - grid::dft(&v).l2_norm()).abs() / v.l2_norm();
        track(parseval, "Parseval", 1e-13);

        // Inversion round trip.
        let round = grid::idft(&grid::dft(&v)).sub(&v).l2_norm() / v.l2_norm();
        track(round, "inversion", 1e-13);

        // Convolution theorem: dft(v*w) = sqrt(2 pi) dft(v) dft(w).
        let conv_spectrum = grid::dft(&grid::convolve(&v, &w).unwrap());
        let vw: Vec<Complex64> = grid::dft(&v)
            .coeffs()
            .iter()
            .zip(grid::dft(&w).coeffs())
            .map(|(a, b)| a * b * SQRT_TAU)
            .collect();
        let conv_defect = conv_spectrum
            .coeffs()
            .iter()
            .zip(&vw)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        track(conv_defect, "convolution theorem", 1e-12);

        // Integration by parts for the central difference.
        let ibp = (grid::inner_l2(&grid::d_central(&v), &w)
            + grid::inner_l2(&v, &grid::d_central(&w)))
        .abs()
            / v.l2_norm()
            / w.l2_norm();
        track(ibp, "IBP antisymmetry", 1e-12);

        // Partition of unity sums to one on every nonzero-symbol mode.
        let pou = PartitionOfUnity::new(grid);
        let geo = pou.geometry();
        let mut pou_defect = 0.0f64;
        for slot in 0..n {
            let zeta = grid.zeta(slot);
            if zeta == 0.0 {
                continue;
            }
            let total: f64 =
                (geo.j_min()..=geo.j_max()).map(|j| pou.phi(j, zeta)).sum();
            pou_defect = pou_defect.max((total - 1.0).abs());
        }
        track(pou_defect, "partition-of-unity sum", 1e-14);

        // Almost orthogonality: bands separated by >= 2 have disjoint support.
        let bands = geo.active_bands();
        for (ai, &ja) in bands.iter().enumerate() {
            for &jb in bands.iter().skip(ai + 2) {
                if jb - ja < 2 {
                    continue;
                }
                let da = localize(&v, ja, &pou);
                let db = localize(&v, jb, &pou);
                let cross =
                    grid::inner_l2(&da, &db).abs() / v.l2_norm().powi(2).max(1e-300);
                track(cross, "almost orthogonality", 1e-13);
            }
        }

        // Fast transform against the direct-sum oracle.
        let fast = grid::dft(&v);
        let scale = fast.coeffs().iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let mut oracle_defect = 0.0f64;
        for slot in 0..n {
            let xi = grid.xi(slot);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &val) in v.values().iter().enumerate() {
                acc += Complex64::new(0.0, -xi * grid.x(i)).exp() * val;
            }
            acc *= grid.h() / SQRT_TAU;
            oracle_defect = oracle_defect.max((fast.coeffs()[slot] - acc).norm() / scale);
        }
        track(oracle_defect, "direct-sum oracle", 1e-12);
    }
    println!(
        "criterion 5 (framework identities): PASS — all identities within tolerance over \
         h in {{2^-3..2^-8}}; largest defect {:.3e} ({})",
        worst.0, worst.1
    );
}

#[test]
fn criterion_6_stability_trichotomy() {
    let grid = Grid::new(0.0625, 256).unwrap();
    let t_end = 1.0;

    // Central scheme: neutrally stable for every symmetric dissipative pair.
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA5E);
    let mut max_central = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=4);
        let n2 = rng.gen_range(1..n);
        let a = random_symmetric(n, &mut rng);
        let b = random_damping(n, n2, &mut rng);
        let report = stability_report(Scheme::Central, &a, &b, grid, t_end).unwrap();
        max_central = max_central.max(report.max_amplification);
        assert!(
            report.max_amplification <= 1.0 + 1e-10,
            "criterion 6 (stability trichotomy): FAIL — central amplification {:.3e}",
            report.max_amplification
        );
    }

    // One-sided schemes on pure transport: the wrong-sided difference blows up.
    let a_pos = DMatrix::<f64>::from_element(1, 1, 1.0);
    let a_neg = DMatrix::<f64>::from_element(1, 1, -1.0);
    let b_zero = DMatrix::<f64>::zeros(1, 1);
    let threshold = (t_end / grid.h()).exp() / 2.0;

    let forward_pos = stability_report(Scheme::Plus, &a_pos, &b_zero, grid, t_end).unwrap();
    assert!(
        forward_pos.max_amplification >= threshold,
        "criterion 6 (stability trichotomy): FAIL — forward difference with A=[[1]] amplified \
         only {:.3e} < {threshold:.3e}",
        forward_pos.max_amplification
    );
    let backward_neg = stability_report(Scheme::Minus, &a_neg, &b_zero, grid, t_end).unwrap();
    assert!(
        backward_neg.max_amplification >= threshold,
        "criterion 6 (stability trichotomy): FAIL — mirrored backward difference amplified \
         only {:.3e} < {threshold:.3e}",
        backward_neg.max_amplification
    );

    // The correctly sided one-sided schemes remain stable.
    let backward_pos = stability_report(Scheme::Minus, &a_pos, &b_zero, grid, t_end).unwrap();
    let forward_neg = stability_report(Scheme::Plus, &a_neg, &b_zero, grid, t_end).unwrap();
    assert!(backward_pos.max_amplification <= 1.0 + 1e-10);
    assert!(forward_neg.max_amplification <= 1.0 + 1e-10);

    println!(
        "criterion 6 (stability trichotomy): PASS — central max={:.12} over 20 random pairs, \
         wrong-sided amplification {:.3e} >= e^(T/h)/2 = {:.3e} both directions",
        max_central, forward_pos.max_amplification, threshold
    );
}

#[test]
fn criterion_7_hypocoercivity_certificates() {
    // Euler pair.
    let euler = SystemSpec::euler();
    let euler_consts = choose_corrector_constants(&euler).unwrap();
    assert!(euler_consts.certificate_absorption && euler_consts.certificate_closure);

    // Five random Kalman-valid systems with N <= 4.
    let mut rng = ChaCha8Rng::seed_from_u64(0x51AB1E);
    let mut specs = vec![euler];
    let mut tried = 0;
    while specs.len() < 6 {
        tried += 1;
        assert!(tried < 500, "criterion 7: could not find 5 random controllable systems");
        let n = rng.gen_range(2..=4usize);
        let n2 = rng.gen_range(1..n);
        let a = random_symmetric(n, &mut rng);
        let b = random_damping(n, n2, &mut rng);
        let Ok(spec) = validate_system(&a, &b, n2) else { continue };
        let Ok(cert) = kalman_rank_holds(&spec, None) else { continue };
        if !cert.holds {
            continue;
        }
        specs.push(spec);
    }

    // Certified constants exist and the Lyapunov functional is monotone along
    // a solved trajectory for every system.
    let grid = Grid::new(0.25, 128).unwrap();
    let mut times = vec![0.0];
    times.extend(geomspace(1e-2, 20.0, 120));
    for (si, spec) in specs.iter().enumerate() {
        let consts = choose_corrector_constants(spec).unwrap_or_else(|e| {
            panic!("criterion 7 (hypocoercivity certificates): FAIL — system {si}: {e}")
        });
        assert!(
            consts.certificate_absorption && consts.certificate_ladder
                && consts.certificate_closure,
            "criterion 7 (hypocoercivity certificates): FAIL — system {si} certificates"
        );
        let u0 = random_state(grid, spec.n(), 7_700 + si as u64);
        let states = spectral_propagate(spec, &u0, &times).unwrap();
        let values: Vec<f64> = states
            .iter()
            .zip(&times)
            .map(|(state, &t)| lyapunov(spec, state, t, &consts))
            .collect();
        let tol = 1e-9 * values[0].max(1.0);
        for (i, w) in values.windows(2).enumerate() {
            assert!(
                w[1] <= w[0] + tol,
                "criterion 7 (hypocoercivity certificates): FAIL — system {si} Lyapunov rose \
                 {:.6e} -> {:.6e} at step {i}",
                w[0],
                w[1]
            );
        }
    }

    // Uncontrollable pair is rejected with the documented message.
    let a = DMatrix::<f64>::identity(2, 2);
    let mut b = DMatrix::<f64>::zeros(2, 2);
    b[(1, 1)] = 1.0;
    let bad = validate_system(&a, &b, 1).unwrap();
    match choose_corrector_constants(&bad) {
        Err(e @ Error::KalmanFails { .. }) => {
            let msg = e.to_string();
            assert!(
                msg.contains("Kalman rank 1 < 2"),
                "criterion 7 (hypocoercivity certificates): FAIL — message `{msg}`"
            );
        }
        other => panic!(
            "criterion 7 (hypocoercivity certificates): FAIL — expected KalmanFails, got {other:?}"
        ),
    }

    println!(
        "criterion 7 (hypocoercivity certificates): PASS — Euler + 5 random systems certified, \
         Lyapunov monotone to 1e-9, uncontrollable pair rejected"
    );
}

#[test]
fn criterion_8_uniform_besov_ratios() {
    let grids: Vec<Grid> = (3..=8)
        .map(|m| {
            let h = 0.5f64.powi(m);
            Grid::new(h, (RELAX_WINDOW / h) as usize).unwrap()
        })
        .collect();

    let gaussian = |xi: f64| Complex64::new((-0.5 * xi * xi).exp(), 0.0);
    let rho_table = TransformTable::new(&|x| bump(x, 1.0, 1.0), RELAX_WINDOW, 1 << 18).unwrap();
    let u_table = TransformTable::new(&|x| bump(x, 1.5, 1.0), RELAX_WINDOW, 1 << 18).unwrap();
    let rho_hat = move |xi: f64| rho_table.f_hat(xi);
    let u_hat = move |xi: f64| u_table.f_hat(xi);

    let mut summary = Vec::new();
    let cases: [(&'static str, &dyn Fn(f64) -> Complex64); 3] =
        [("gaussian", &gaussian), ("density bump", &rho_hat), ("velocity bump", &u_hat)];
    for (name, f_hat) in cases {
        let ratios = hyplat::lp::uniform_besov_check(f_hat, 1.0, 2.0, &grids).unwrap();
        let lo = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
        let spread = hi / lo - 1.0;
        assert!(
            spread < 0.20,
            "criterion 8 (uniform Besov ratios): FAIL — {name} ratio spread {:.2}% over \
             h in {{2^-3..2^-8}} (ratios {ratios:?})",
            100.0 * spread
        );
        summary.push(format!("{name} {:.2}%", 100.0 * spread));
    }
    println!(
        "criterion 8 (uniform Besov ratios): PASS — ratio spreads: {}",
        summary.join(", ")
    );
}

// Keep a compile-time reference to the analysis module path used by the CLI
// so the gate fails loudly if the public surface shifts.
#[allow(dead_code)]
fn _surface() {
    let _ = analysis::decay_sample_times;
}
