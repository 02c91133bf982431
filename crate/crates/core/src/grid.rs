//! Finite periodic-window realization of bilateral grid sequences.
//!
//! A [`Grid`] is a uniform lattice of `n_points` sites with spacing `h`,
//! covering the window `[-L - offset, L - offset)` with `L = n_points*h/2`.
//! Grid functions carry the weighted norm `||v||^2 = h * sum |v_n|^2`; their
//! discrete Fourier transform
//!
//! ```text
//! vhat(xi_k) = h/sqrt(2*pi) * sum_n e^{-i xi_k x_n} v_n,
//! xi_k = 2*pi*k/(n_points*h),  k = -n_points/2 .. n_points/2 - 1,
//! ```
//!
//! satisfies Parseval's equality `||v||^2 = sum_k |vhat(xi_k)|^2 * dxi` with
//! `dxi = 2*pi/(n_points*h)`. All transforms run through an FFT; the
//! direct-sum formulas above define correctness and are kept as oracles in
//! the test suite.

use std::fmt::Write as _;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const SQRT_TAU: f64 = 2.506628274631000502415765284811; // sqrt(2*pi)

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn run_fft(buf: &mut [Complex64], forward: bool) {
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    let fft = {
        let mut guard = planner.lock().expect("FFT planner lock poisoned");
        if forward {
            guard.plan_fft_forward(buf.len())
        } else {
            guard.plan_fft_inverse(buf.len())
        }
    };
    fft.process(buf);
}

/// Uniform periodic lattice: spacing, site count, and window offset.
///
/// Site `n` sits at `x_n = (n - n_points/2)*h - offset`; the discrete
/// frequencies are `xi_k = 2*pi*k/(n_points*h)` for
/// `k = -n_points/2 .. n_points/2 - 1`, all inside `[-pi/h, pi/h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    h: f64,
    n_points: usize,
    offset: f64,
}

impl Grid {
    /// Window centered at zero. `n_points` must be even and at least 8.
    pub fn new(h: f64, n_points: usize) -> Result<Self> {
        Self::with_offset(h, n_points, 0.0)
    }

    /// Window `[-L - offset, L - offset)`, `L = n_points*h/2`.
    pub fn with_offset(h: f64, n_points: usize, offset: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::NonPositiveParameter { name: "h", value: h });
        }
        if n_points < 8 || n_points % 2 != 0 {
            return Err(Error::NonPositiveParameter {
                name: "n_points (even, >= 8)",
                value: n_points as f64,
            });
        }
        if !offset.is_finite() {
            return Err(Error::NonPositiveParameter { name: "offset", value: offset });
        }
        Ok(Self { h, n_points, offset })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Half-length `L = n_points*h/2` of the periodic window.
    pub fn window_half_length(&self) -> f64 {
        0.5 * self.n_points as f64 * self.h
    }

    /// Physical position of site `i`, `0 <= i < n_points`, ascending in `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.n_points / 2) as f64) * self.h - self.offset
    }

    /// All site positions in ascending order.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Signed frequency index `k = i - n_points/2` of storage slot `i`.
    pub fn freq_index(&self, i: usize) -> i64 {
        i as i64 - (self.n_points / 2) as i64
    }

    /// Discrete frequency `xi_k` of storage slot `i` (ascending in `i`).
    pub fn xi(&self, i: usize) -> f64 {
        core::f64::consts::TAU * self.freq_index(i) as f64 / (self.n_points as f64 * self.h)
    }

    /// Frequency quadrature weight `dxi = 2*pi/(n_points*h)`.
    pub fn delta_xi(&self) -> f64 {
        core::f64::consts::TAU / (self.n_points as f64 * self.h)
    }

    /// Nyquist frequency `pi/h`.
    pub fn nyquist(&self) -> f64 {
        core::f64::consts::PI / self.h
    }

    /// Central-difference symbol magnitude `zeta(xi_k) = |sin(xi_k h)|/h`.
    ///
    /// Exactly zero at `k = 0` and at the Nyquist slot, where the stencil
    /// annihilates the mode in exact arithmetic.
    pub fn zeta(&self, i: usize) -> f64 {
        self.sigma(i).abs()
    }

    /// Central-difference symbol factor `sigma(xi_k) = sin(xi_k h)/h`.
    pub fn sigma(&self, i: usize) -> f64 {
        let k = self.freq_index(i);
        if k == 0 || k == -((self.n_points / 2) as i64) {
            return 0.0;
        }
        (core::f64::consts::TAU * k as f64 / self.n_points as f64).sin() / self.h
    }

    /// Largest attainable symbol value `max_k zeta(xi_k)`.
    ///
    /// Equals `1/h` exactly when `n_points` is divisible by 4.
    pub fn zeta_max(&self) -> f64 {
        (0..self.n_points).map(|i| self.zeta(i)).fold(0.0, f64::max)
    }

    /// Smallest nonzero symbol value, attained at `k = 1`.
    pub fn zeta_min_positive(&self) -> f64 {
        (core::f64::consts::TAU / self.n_points as f64).sin() / self.h
    }
}

/// Complex-valued function on the sites of a [`Grid`].
///
/// Real data is stored with zero imaginary parts; operations preserve
/// conjugate symmetry of the spectrum up to rounding.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn from_complex(grid: Grid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.n_points(), "value count must match grid");
        Self { grid, values }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.n_points(), "value count must match grid");
        Self {
            grid,
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn from_fn_real(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_points())
            .map(|i| Complex64::new(f(grid.x(i)), 0.0))
            .collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            grid,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value with periodic indexing: site `n` means `n mod n_points`.
    pub fn value(&self, n: isize) -> Complex64 {
        let len = self.grid.n_points() as isize;
        self.values[n.rem_euclid(len) as usize]
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Largest imaginary magnitude; a realness diagnostic.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Weighted norm `sqrt(h * sum |v_n|^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.h() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Sup norm `max_n |v_n|`.
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch in add");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        GridFunction { grid: self.grid, values }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch in sub");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        GridFunction { grid: self.grid, values }
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Mass fraction `h*sum |v_n|^2` carried by sites within 5% of the window
    /// ends, relative to the total. Large values mean the window is too small
    /// for the data or the solution has reached the artificial boundary.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let n = self.grid.n_points();
        let edge = (n as f64 * 0.05).ceil() as usize / 2;
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let lo: f64 = self.values[..edge].iter().map(|v| v.norm_sqr()).sum();
        let hi: f64 = self.values[n - edge..].iter().map(|v| v.norm_sqr()).sum();
        (lo + hi) / total
    }

    /// CSV serialization: header `x,value` for real data, `x,re,im` when the
    /// imaginary part is non-negligible; ascending positions, 17 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let scale = self.linf_norm();
        let real = self.max_imag() <= 1e-12 * scale.max(1.0);
        let mut out = String::new();
        if real {
            out.push_str("x,value\n");
            for i in 0..self.grid.n_points() {
                let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.x(i), self.values[i].re);
            }
        } else {
            out.push_str("x,re,im\n");
            for i in 0..self.grid.n_points() {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    self.grid.x(i),
                    self.values[i].re,
                    self.values[i].im
                );
            }
        }
        out
    }
}

/// Real `l^2_h` pairing `<u, v> = h * sum Re(u_n conj(v_n))`.
pub fn inner_l2(u: &GridFunction, v: &GridFunction) -> f64 {
    assert_eq!(u.grid, v.grid, "grid mismatch in inner product");
    u.grid.h()
        * u.values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
}

/// Fourier coefficients of a grid function, stored in ascending frequency
/// order: slot `i` holds the coefficient at `xi_k`, `k = i - n_points/2`.
#[derive(Clone, Debug)]
pub struct SpectralFunction {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.n_points(), "coefficient count must match grid");
        Self { grid, coeffs }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            grid,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Spectral-side norm `sqrt(sum_k |coeff_k|^2 * dxi)`; equals the grid
    /// side `l2_norm` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.delta_xi() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Discrete Fourier transform with the measure-weighted normalization
/// `vhat(xi_k) = h/sqrt(2*pi) * sum_n e^{-i xi_k x_n} v_n`.
pub fn dft(v: &GridFunction) -> SpectralFunction {
    let grid = v.grid;
    let n = grid.n_points();
    let half = n / 2;
    let mut buf = v.values.clone();
    run_fft(&mut buf, true);
    let amp = grid.h() / SQRT_TAU;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let k = i as i64 - half as i64;
        // e^{-i xi_k x_n} = e^{-2 pi i k n / n_points} * (-1)^k * e^{i xi_k offset}
        let m = (i + half) % n;
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let mut val = buf[m] * (amp * sign);
        if grid.offset() != 0.0 {
            val *= Complex64::from_polar(1.0, grid.xi(i) * grid.offset());
        }
        *c = val;
    }
    SpectralFunction::from_coeffs(grid, coeffs)
}

/// Inverse transform `v_n = 1/sqrt(2*pi) * sum_k e^{i xi_k x_n} coeff_k * dxi`.
pub fn idft(g: &SpectralFunction) -> GridFunction {
    let grid = g.grid;
    let n = grid.n_points();
    let half = n / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in g.coeffs.iter().enumerate() {
        let k = i as i64 - half as i64;
        let m = (i + half) % n;
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let mut val = c * sign;
        if grid.offset() != 0.0 {
            val *= Complex64::from_polar(1.0, -grid.xi(i) * grid.offset());
        }
        buf[m] = val;
    }
    run_fft(&mut buf, false);
    let amp = grid.delta_xi() / SQRT_TAU;
    GridFunction {
        grid,
        values: buf.into_iter().map(|v| v * amp).collect(),
    }
}

/// Central difference `(v_{n+1} - v_{n-1})/(2h)`, periodic indexing.
/// Fourier symbol: `i * sin(xi h)/h`.
pub fn d_central(v: &GridFunction) -> GridFunction {
    let n = v.grid.n_points() as isize;
    let inv = 1.0 / (2.0 * v.grid.h());
    let values = (0..n)
        .map(|i| (v.value(i + 1) - v.value(i - 1)) * inv)
        .collect();
    GridFunction { grid: v.grid, values }
}

/// Forward difference `(v_{n+1} - v_n)/h`. Fourier symbol: `(e^{i xi h} - 1)/h`.
pub fn d_plus(v: &GridFunction) -> GridFunction {
    let n = v.grid.n_points() as isize;
    let inv = 1.0 / v.grid.h();
    let values = (0..n)
        .map(|i| (v.value(i + 1) - v.value(i)) * inv)
        .collect();
    GridFunction { grid: v.grid, values }
}

/// Backward difference `(v_n - v_{n-1})/h`. Fourier symbol: `(1 - e^{-i xi h})/h`.
pub fn d_minus(v: &GridFunction) -> GridFunction {
    let n = v.grid.n_points() as isize;
    let inv = 1.0 / v.grid.h();
    let values = (0..n)
        .map(|i| (v.value(i) - v.value(i - 1)) * inv)
        .collect();
    GridFunction { grid: v.grid, values }
}

/// Applies a Fourier multiplier: the transform of the result is
/// `m(xi_k) * vhat(xi_k)`.
pub fn multiplier(v: &GridFunction, m: impl Fn(f64) -> Complex64) -> Result<GridFunction> {
    let mut g = dft(v);
    for i in 0..g.coeffs.len() {
        let xi = g.grid.xi(i);
        let factor = m(xi);
        if !factor.re.is_finite() || !factor.im.is_finite() {
            return Err(Error::NonFiniteSymbol { xi });
        }
        g.coeffs[i] *= factor;
    }
    Ok(idft(&g))
}

/// Discrete Sobolev norm with the central-difference symbol.
///
/// Homogeneous: quadrature of `(|sin(xi_k h)|/h)^{2s} |vhat_k|^2`, where the
/// two modes with vanishing symbol (`xi = 0` and Nyquist) contribute zero for
/// every `s`; they belong to no frequency band and homogeneous norms ignore
/// them. Inhomogeneous: `sqrt(l2_norm^2 + homogeneous^2)`.
pub fn sobolev_norm(v: &GridFunction, s: f64, homogeneous: bool) -> f64 {
    let g = dft(v);
    let dxi = g.grid.delta_xi();
    let mut hom_sq = 0.0;
    for (i, c) in g.coeffs.iter().enumerate() {
        let z = g.grid.zeta(i);
        if z > 0.0 {
            hom_sq += z.powf(2.0 * s) * c.norm_sqr();
        }
    }
    hom_sq *= dxi;
    if homogeneous {
        hom_sq.sqrt()
    } else {
        (v.l2_norm().powi(2) + hom_sq).sqrt()
    }
}

/// Band-limiting truncation: builds the grid function whose discrete
/// transform equals the supplied continuous Fourier transform on the discrete
/// frequency set.
///
/// The defining frequency integral runs over `[-pi/h, pi/h]`, whose two
/// endpoints alias to the same lattice character; the Nyquist coefficient is
/// their average `(f_hat(-pi/h) + f_hat(pi/h))/2`, which keeps real-valued
/// targets real.
pub fn truncate(f_hat: impl Fn(f64) -> Complex64, grid: Grid) -> Result<GridFunction> {
    let n = grid.n_points();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let xi = grid.xi(i);
        let val = if i == 0 {
            let left = f_hat(-grid.nyquist());
            let right = f_hat(grid.nyquist());
            0.5 * (left + right)
        } else {
            f_hat(xi)
        };
        if !val.re.is_finite() || !val.im.is_finite() {
            return Err(Error::NonFiniteSymbol { xi });
        }
        *c = val;
    }
    Ok(idft(&SpectralFunction::from_coeffs(grid, coeffs)))
}

/// Measure-weighted periodic convolution
/// `(v*w)_n = h * sum_m v_m w_{n-m}`, displacements taken from the window
/// center so that `(1/h) * 1{n = center}` is the unit.
///
/// Transform identity: `dft(v*w) = sqrt(2*pi) * e^{-i xi offset} * dft(v) * dft(w)`
/// (the phase is 1 for centered windows).
pub fn convolve(v: &GridFunction, w: &GridFunction) -> Result<GridFunction> {
    if v.grid != w.grid {
        return Err(Error::GridMismatch { context: "convolve requires a shared grid" });
    }
    let grid = v.grid;
    let n = grid.n_points();
    let mut fv = v.values.clone();
    let mut fw = w.values.clone();
    run_fft(&mut fv, true);
    run_fft(&mut fw, true);
    // Index origin at the window center: multiply mode m by (-1)^m.
    let scale = grid.h() / n as f64;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            fv[m] * fw[m] * (sign * scale)
        })
        .collect();
    run_fft(&mut buf, false);
    Ok(GridFunction { grid, values: buf })
}
