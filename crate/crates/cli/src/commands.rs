//! Subcommand implementations.
//!
//! Every command returns the process exit code. The code space is:
//!
//! - `0`: success, and (where a band applies) the fitted result is inside it
//! - `1`: the run completed but a fitted slope fell outside its acceptance
//!   band, or a self-test suite failed
//! - `2`: configuration error (bad key, bad value, unusable parameters)
//! - `3`: the supplied pair fails the Kalman rank condition
//! - `4`: numerical failure while running the pipeline

use std::fs;
use std::path::{Path, PathBuf};

use hyplat::analysis::{
    self, convergence_order, decay_grid, decay_rate_fit, decay_sample_times, decay_trajectory,
    fit_line, geomspace, make_initial_data, relax_sample_times, relaxation_errors,
};
use hyplat::grid::{self, inner_l2, GridFunction};
use hyplat::lp::{bernstein_check, besov_norm, linf_embedding_check, localize};
use hyplat::solver::{stability_report, VectorGridFunction};
use hyplat::system::validate_system;
use hyplat::{Error as CoreError, Grid, InitialDataSet, PartitionOfUnity, Scheme, SystemSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Spacing, SystemConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUT_OF_BAND: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_KALMAN: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// A command failure carrying its process exit code and diagnostic.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

/// Classifies a core error: rank failures are their own exit code, parameter
/// and sample-count problems trace back to the configuration, everything
/// else is a numerical failure.
fn classify(err: CoreError) -> Failure {
    let code = match &err {
        CoreError::KalmanFails { .. } => EXIT_KALMAN,
        CoreError::NonPositiveParameter { .. }
        | CoreError::ParameterOrder { .. }
        | CoreError::InsufficientSamples { .. }
        | CoreError::SupportOverflow { .. }
        | CoreError::UnknownDataSet { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    };
    Failure { code, message: err.to_string() }
}

fn io_failure(path: &Path, err: std::io::Error) -> Failure {
    Failure { code: EXIT_NUMERICAL, message: format!("cannot write {}: {err}", path.display()) }
}

type CmdResult = Result<i32, Failure>;

/// Builds the hyperbolic pair from the configuration: a builtin name when
/// given, explicit matrices otherwise.
fn build_system(cfg: &SystemConfig) -> Result<SystemSpec, Failure> {
    if !cfg.builtin.is_empty() {
        return match cfg.builtin.as_str() {
            "euler" => Ok(SystemSpec::euler()),
            other => Err(Failure::config(format!(
                "config key 'system.builtin': unknown system '{other}' (available: euler)"
            ))),
        };
    }
    let to_matrix = |key: &str, rows: &[Vec<f64>]| -> Result<DMatrix<f64>, Failure> {
        if rows.is_empty() {
            return Err(Failure::config(format!(
                "config key '{key}': matrix required when system.builtin is empty"
            )));
        }
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Failure::config(format!("config key '{key}': matrix must be square")));
        }
        Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
    };
    let a = to_matrix("system.a", &cfg.a)?;
    let b = to_matrix("system.b", &cfg.b)?;
    validate_system(&a, &b, cfg.n2).map_err(|e| Failure::config(e.to_string()))
}

/// Grid from the configuration; `n_points = 0` defers to the per-experiment
/// default window builder.
fn build_grid(
    cfg: &ExperimentConfig,
    default: impl Fn(f64) -> hyplat::Result<Grid>,
) -> Result<Grid, Failure> {
    if cfg.grid.n_points == 0 {
        default(cfg.grid.h).map_err(classify)
    } else {
        Grid::with_offset(cfg.grid.h, cfg.grid.n_points, cfg.grid.offset).map_err(classify)
    }
}

fn out_path(cfg: &ExperimentConfig, out_override: Option<&Path>, file: &str) -> PathBuf {
    let dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    dir.join(format!("{}{file}", cfg.output.prefix))
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_failure(path, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

/// Decay experiment: spectral solve of the full pair from the power-law
/// data, CSV of the tracked norms, and the large-time rate fit.
pub fn cmd_decay(cfg: &ExperimentConfig, out_override: Option<&Path>) -> CmdResult {
    let spec = build_system(&cfg.system)?;
    let grid = build_grid(cfg, decay_grid)?;
    let t_end = cfg.times.t_end;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Failure::config(format!(
            "config key 'times.t_end': horizon must be positive, got {t_end}"
        )));
    }
    // Fitted window: the large-time regime of the acceptance band starts at
    // t = 10, so the horizon must extend beyond it.
    if t_end <= 10.0 {
        return Err(Failure::config(format!(
            "config key 'times.t_end': the decay fit needs t_end > 10, got {t_end}"
        )));
    }
    let consts = analysis::choose_corrector_constants(&spec).map_err(classify)?;
    let times = match (cfg.times.samples, cfg.times.spacing) {
        (0, _) => decay_sample_times(t_end),
        (samples, Spacing::Log) => {
            if samples < 2 {
                return Err(Failure::config(
                    "config key 'times.samples': need at least 2 samples",
                ));
            }
            let mut ts = vec![0.0];
            ts.extend(geomspace(0.01, t_end, samples));
            ts
        }
        (samples, Spacing::Linear) => {
            if samples < 2 {
                return Err(Failure::config(
                    "config key 'times.samples': need at least 2 samples",
                ));
            }
            (0..samples)
                .map(|i| t_end * i as f64 / (samples - 1) as f64)
                .collect()
        }
    };
    let (rho0, u0) = make_initial_data(InitialDataSet::Decay, grid).map_err(classify)?;
    // First block rides undamped, trailing block is damped; both blocks start
    // from the same truncated profile, matching the reference experiment.
    let components: Vec<GridFunction> = (0..spec.n())
        .map(|i| if i < spec.n() - spec.n2() { rho0.clone() } else { u0.clone() })
        .collect();
    let state0 = VectorGridFunction::new(components).map_err(classify)?;
    let record = decay_trajectory(&spec, &state0, &times, &consts).map_err(classify)?;

    let csv_path = out_path(cfg, out_override, "decay.csv");
    write_output(&csv_path, &record.to_csv())?;

    let (slope, r_squared) = decay_rate_fit(&record, 10.0, t_end).map_err(classify)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = record
        .times
        .iter()
        .zip(record.norm_u2.iter().zip(&record.norm_dhu))
        .filter(|(&t, _)| (10.0..=t_end).contains(&t))
        .map(|(&t, (&u2, &dhu))| ((1.0 + t).ln(), (u2 + dhu).ln()))
        .unzip();
    let fit = fit_line(&xs, &ys);
    let report = format!("decay_rate={:.6}±{:.6}\n", fit.slope, fit.slope_stderr);
    let fit_path = out_path(cfg, out_override, "decay_fit.txt");
    write_output(&fit_path, &report)?;

    println!(
        "decay_rate={:.6}±{:.6} (r_squared={:.6}, window t in [10, {t_end}])",
        fit.slope, fit.slope_stderr, r_squared
    );
    println!("wrote {} and {}", csv_path.display(), fit_path.display());
    if (-0.55..=-0.45).contains(&slope) {
        Ok(EXIT_OK)
    } else {
        println!("decay rate {slope:.6} outside the acceptance band [-0.55, -0.45]");
        Ok(EXIT_OUT_OF_BAND)
    }
}

fn validate_relax_params(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let r = &cfg.relaxation;
    if !(r.t_end > 0.0) || !r.t_end.is_finite() {
        return Err(Failure::config(format!(
            "config key 'relaxation.t_end': horizon must be positive, got {}",
            r.t_end
        )));
    }
    if !(r.s > 2.0) {
        return Err(Failure::config(format!(
            "config key 'relaxation.s': the error norms need s > 2, got {}",
            r.s
        )));
    }
    if !(r.s_prime > r.s) {
        return Err(Failure::config(format!(
            "config key 'relaxation.s_prime': need s_prime > s, got {} <= {}",
            r.s_prime, r.s
        )));
    }
    if !(r.kappa > 0.0) {
        return Err(Failure::config(format!(
            "config key 'relaxation.kappa': threshold must be positive, got {}",
            r.kappa
        )));
    }
    Ok(())
}

fn check_eps(key: &str, eps: f64) -> Result<(), Failure> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Failure::config(format!(
            "config key '{key}': relaxation parameter must lie in (0, 1), got {eps}"
        )));
    }
    Ok(())
}

/// Relaxation sweep over `eps` at fixed mesh: error records per value, the
/// five fitted orders, and the acceptance band on the sup/Darcy columns.
pub fn cmd_relax_sweep(cfg: &ExperimentConfig, out_override: Option<&Path>) -> CmdResult {
    validate_relax_params(cfg)?;
    let r = &cfg.relaxation;
    let mut eps_sorted = r.eps.clone();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    eps_sorted.dedup();
    if eps_sorted.len() < 4 {
        return Err(Failure::config(format!(
            "config key 'relaxation.eps': the order fit needs at least 4 distinct values, got {}",
            eps_sorted.len()
        )));
    }
    for &eps in &eps_sorted {
        check_eps("relaxation.eps", eps)?;
    }
    let (h, t_end, s, kappa) = (cfg.grid.h, r.t_end, r.s, r.kappa);
    let records = eps_sorted
        .par_iter()
        .map(|&eps| {
            let times = relax_sample_times(eps, t_end);
            relaxation_errors(eps, h, t_end, s, kappa, &times)
        })
        .collect::<hyplat::Result<Vec<_>>>()
        .map_err(classify)?;

    let mut csv = String::from(hyplat::RelaxationErrorRecord::csv_header());
    csv.push('\n');
    for rec in &records {
        csv.push_str(&rec.csv_row());
        csv.push('\n');
    }
    let csv_path = out_path(cfg, out_override, "relax_sweep.csv");
    write_output(&csv_path, &csv)?;

    let orders = convergence_order(&records).map_err(classify)?;
    let xs: Vec<f64> = records.iter().map(|rec| rec.eps.ln()).collect();
    let columns: [(&str, Vec<f64>); 5] = [
        ("sup_besov", records.iter().map(|rec| rec.sup_error_besov).collect()),
        ("l1t_besov", records.iter().map(|rec| rec.l1t_error_besov).collect()),
        ("darcy_besov", records.iter().map(|rec| rec.darcy_l1t).collect()),
        ("sup_linf", records.iter().map(|rec| rec.sup_error_linf).collect()),
        ("darcy_linf", records.iter().map(|rec| rec.darcy_l1t_linf).collect()),
    ];
    let mut report = String::new();
    for (name, values) in &columns {
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let fit = fit_line(&xs, &ys);
        report.push_str(&format!("{name}={:.6}±{:.6}\n", fit.slope, fit.slope_stderr));
    }
    let report_path = out_path(cfg, out_override, "relax_orders.txt");
    write_output(&report_path, &report)?;
    print!("{report}");
    println!("wrote {} and {}", csv_path.display(), report_path.display());

    let in_band = |slope: f64| (1.9..=2.1).contains(&slope);
    if in_band(orders.sup_error_linf) && in_band(orders.darcy_l1t_linf) {
        Ok(EXIT_OK)
    } else {
        println!(
            "order fit outside the acceptance band [1.9, 2.1]: sup_linf={:.4}, darcy_linf={:.4}",
            orders.sup_error_linf, orders.darcy_l1t_linf
        );
        Ok(EXIT_OUT_OF_BAND)
    }
}

/// Mesh-uniformity table: the error record at a fixed `eps` across a list of
/// mesh sizes.
pub fn cmd_relax_table(cfg: &ExperimentConfig, out_override: Option<&Path>) -> CmdResult {
    validate_relax_params(cfg)?;
    let r = &cfg.relaxation;
    check_eps("relaxation.table_eps", r.table_eps)?;
    if r.h_list.is_empty() {
        return Err(Failure::config("config key 'relaxation.h_list': need at least one mesh size"));
    }
    for &h in &r.h_list {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Failure::config(format!(
                "config key 'relaxation.h_list': mesh sizes must be positive, got {h}"
            )));
        }
    }
    let (eps, t_end, s, kappa) = (r.table_eps, r.t_end, r.s, r.kappa);
    let times = relax_sample_times(eps, t_end);
    let records = r
        .h_list
        .par_iter()
        .map(|&h| relaxation_errors(eps, h, t_end, s, kappa, &times))
        .collect::<hyplat::Result<Vec<_>>>()
        .map_err(classify)?;

    let mut csv = String::from(hyplat::RelaxationErrorRecord::csv_header());
    csv.push('\n');
    for rec in &records {
        csv.push_str(&rec.csv_row());
        csv.push('\n');
    }
    let csv_path = out_path(cfg, out_override, "relax_table.csv");
    write_output(&csv_path, &csv)?;

    println!("{:>12}  {:>16}  {:>16}", "h", "sup_linf", "darcy_linf");
    for rec in &records {
        println!("{:>12.6}  {:>16.9e}  {:>16.9e}", rec.h, rec.sup_error_linf, rec.darcy_l1t_linf);
    }
    println!("wrote {}", csv_path.display());
    Ok(EXIT_OK)
}

/// Scheme comparison: largest per-mode amplification of the central and the
/// two one-sided discretizations of the configured pair at `t = 1`.
pub fn cmd_stability(cfg: &ExperimentConfig, out_override: Option<&Path>) -> CmdResult {
    let spec = build_system(&cfg.system)?;
    let grid = build_grid(cfg, |h| Grid::new(h, 256))?;
    let t_end = 1.0;
    let mut report = String::new();
    let mut central_ok = true;
    for (name, scheme) in
        [("central", Scheme::Central), ("forward", Scheme::Plus), ("backward", Scheme::Minus)]
    {
        let rep = stability_report(scheme, spec.a(), spec.b(), grid, t_end).map_err(classify)?;
        report.push_str(&format!(
            "{name}: max_amplification={:.6e} at xi={:.6} (t={t_end})\n",
            rep.max_amplification, rep.worst_xi
        ));
        if matches!(scheme, Scheme::Central) && rep.max_amplification > 1.0 + 1e-10 {
            central_ok = false;
        }
    }
    let path = out_path(cfg, out_override, "stability.txt");
    write_output(&path, &report)?;
    print!("{report}");
    println!("wrote {}", path.display());
    if central_ok {
        Ok(EXIT_OK)
    } else {
        println!("central scheme amplification exceeds the neutral bound 1 + 1e-10");
        Ok(EXIT_OUT_OF_BAND)
    }
}

struct SuiteOutcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn random_function(grid: Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    let values: Vec<Complex64> = (0..grid.n_points())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    GridFunction::from_complex(grid, values)
}

/// Self-test: runs the framework invariant suites on the configured grid and
/// reports per-suite worst residuals. `inject_fault` deliberately corrupts
/// the named suite to exercise the failure path.
pub fn cmd_selftest(
    cfg: &ExperimentConfig,
    seed: u64,
    inject_fault: Option<&str>,
) -> CmdResult {
    if let Some(fault) = inject_fault {
        if fault != "partition-of-unity" {
            return Err(Failure::config(format!(
                "--inject-fault: no fault available for suite '{fault}' \
                 (supported: partition-of-unity)"
            )));
        }
    }
    let grid = build_grid(cfg, |h| Grid::new(h, 256))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = PartitionOfUnity::new(grid);
    let mut outcomes: Vec<SuiteOutcome> = Vec::new();

    // Parseval and inversion over a batch of random functions.
    let mut worst_parseval = 0.0f64;
    let mut worst_inversion = 0.0f64;
    let mut worst_ibp = 0.0f64;
    let mut worst_convolution = 0.0f64;
    for _ in 0..16 {
        let v = random_function(grid, &mut rng);
        let w = random_function(grid, &mut rng);
        let vhat = grid::dft(&v);
        let parseval = (v.l2_norm() - vhat.l2_norm()).abs() / v.l2_norm();
        worst_parseval = worst_parseval.max(parseval);
        let back = grid::idft(&vhat);
        let inversion = back.sub(&v).linf_norm() / v.linf_norm();
        worst_inversion = worst_inversion.max(inversion);
        let ibp = (inner_l2(&grid::d_central(&v), &w) + inner_l2(&v, &grid::d_central(&w))).abs()
            / (v.l2_norm() * w.l2_norm());
        worst_ibp = worst_ibp.max(ibp);
        let conv = grid::convolve(&v, &w).map_err(classify)?;
        let lhs = grid::dft(&conv);
        let vh = grid::dft(&v);
        let wh = grid::dft(&w);
        let scale = (2.0 * std::f64::consts::PI).sqrt();
        let defect = (0..grid.n_points())
            .map(|i| (lhs.coeffs()[i] - scale * vh.coeffs()[i] * wh.coeffs()[i]).norm())
            .fold(0.0f64, f64::max)
            / (v.l2_norm() * w.l2_norm());
        worst_convolution = worst_convolution.max(defect);
    }
    for (name, worst, tol) in [
        ("parseval", worst_parseval, 1e-12),
        ("inversion", worst_inversion, 1e-12),
        ("ibp-antisymmetry", worst_ibp, 1e-12),
        ("convolution", worst_convolution, 1e-11),
    ] {
        outcomes.push(SuiteOutcome {
            name,
            pass: worst <= tol,
            detail: format!("worst residual {worst:.3e}, tolerance {tol:.0e}"),
        });
    }

    // Partition of unity: band evaluators must sum to one at every nonzero
    // symbol value. The injected fault mismatches the two cutoff endpoints
    // inside each band evaluator, so neighboring bands no longer telescope.
    let fault_scale = if inject_fault == Some("partition-of-unity") { 1.01 } else { 1.0 };
    let geom = p.geometry();
    let mut worst_partition = 0.0f64;
    for i in 0..grid.n_points() {
        let zeta = grid.zeta(i);
        if zeta <= 0.0 {
            continue;
        }
        let sum: f64 = (geom.j_min() - 1..=geom.j_max() + 1)
            .map(|j| {
                p.chi(zeta * fault_scale / 2.0f64.powi(j + 1)) - p.chi(zeta / 2.0f64.powi(j))
            })
            .sum();
        worst_partition = worst_partition.max((sum - 1.0).abs());
    }
    outcomes.push(SuiteOutcome {
        name: "partition-of-unity",
        pass: worst_partition <= 1e-14,
        detail: format!("worst residual {worst_partition:.3e}, tolerance 1e-14"),
    });

    // Bernstein: the derivative-to-norm ratio of every localized piece must
    // stay inside its band, with zero violations.
    let mut violations = 0usize;
    let mut checked = 0usize;
    for _ in 0..50 {
        let v = random_function(grid, &mut rng);
        for &j in &geom.active_bands() {
            match bernstein_check(&v, j, &p) {
                Ok((lower_ok, upper_ok, _)) => {
                    checked += 1;
                    if !(lower_ok && upper_ok) {
                        violations += 1;
                    }
                }
                Err(CoreError::ZeroLocalization { .. }) => {}
                Err(e) => return Err(classify(e)),
            }
        }
    }
    outcomes.push(SuiteOutcome {
        name: "bernstein",
        pass: violations == 0 && checked > 0,
        detail: format!("{checked} band ratios checked, {violations} violations"),
    });

    // Sup-norm embedding: the banded part of a function is controlled by its
    // Besov 1/2 norm with a modest constant.
    let mut worst_embedding = 0.0f64;
    for _ in 0..16 {
        let v = random_function(grid, &mut rng);
        if besov_norm(&v, 0.5, &p) == 0.0 {
            continue;
        }
        let ratio = linf_embedding_check(&v, &p).map_err(classify)?;
        worst_embedding = worst_embedding.max(ratio);
    }
    outcomes.push(SuiteOutcome {
        name: "linf-embedding",
        pass: worst_embedding <= 3.0,
        detail: format!("worst ratio {worst_embedding:.3}, bound 3.0"),
    });

    // Band localization annihilates far-separated bands (almost
    // orthogonality in its exact discrete form).
    let mut worst_ortho = 0.0f64;
    for _ in 0..8 {
        let v = random_function(grid, &mut rng);
        let bands = geom.active_bands();
        for &j in &bands {
            let vj = localize(&v, j, &p);
            for &jp in &bands {
                if (j - jp).abs() < 2 {
                    continue;
                }
                let cross = localize(&vj, jp, &p).l2_norm() / v.l2_norm();
                worst_ortho = worst_ortho.max(cross);
            }
        }
    }
    outcomes.push(SuiteOutcome {
        name: "almost-orthogonality",
        pass: worst_ortho <= 1e-13,
        detail: format!("worst cross-band norm {worst_ortho:.3e}, tolerance 1e-13"),
    });

    // Stability trichotomy on the canonical transport pair: the centered
    // scheme is neutral, the wrong-sided scheme amplifies.
    let a = DMatrix::from_row_slice(1, 1, &[1.0]);
    let b = DMatrix::from_row_slice(1, 1, &[0.0]);
    let small = Grid::new(0.0625, 128).map_err(classify)?;
    let central =
        stability_report(Scheme::Central, &a, &b, small, 1.0).map_err(classify)?;
    let upwind = stability_report(Scheme::Plus, &a, &b, small, 1.0).map_err(classify)?;
    let growth_floor = (1.0f64 / 0.0625).exp() / 2.0;
    let tri_pass =
        central.max_amplification <= 1.0 + 1e-10 && upwind.max_amplification >= growth_floor;
    outcomes.push(SuiteOutcome {
        name: "stability-trichotomy",
        pass: tri_pass,
        detail: format!(
            "central {:.12}, forward {:.3e} (floor {:.3e})",
            central.max_amplification, upwind.max_amplification, growth_floor
        ),
    });

    let mut all_pass = true;
    for o in &outcomes {
        println!("{}: {} ({})", o.name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all_pass &= o.pass;
    }
    if all_pass {
        println!("selftest: PASS ({} suites)", outcomes.len());
        Ok(EXIT_OK)
    } else {
        let failing: Vec<&str> =
            outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
        println!("selftest: FAIL ({})", failing.join(", "));
        Ok(EXIT_OUT_OF_BAND)
    }
}
