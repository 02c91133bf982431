//! Time evolution of semi-discrete systems `dU/dt = -A D_h U - B U`.
//!
//! The central stencil diagonalizes over the discrete Fourier basis, so the
//! exact semigroup factors into independent `N x N` mode problems with
//! generator `M(xi) = -i sigma(xi) A - B`. The spectral path evaluates
//! `exp(t M)` per mode (closed form for `N = 2`, scaled Pade approximation
//! otherwise) and is the reference integrator; a classical RK4 loop over the
//! physical stencil is provided for cross-validation and for one-sided
//! schemes that the analysis deliberately destabilizes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridFunction, SpectralFunction};
use crate::system::SystemSpec;

/// A vector-valued grid function: `N` components sharing one grid.
#[derive(Clone, Debug)]
pub struct VectorGridFunction {
    components: Vec<GridFunction>,
}

impl VectorGridFunction {
    pub fn new(components: Vec<GridFunction>) -> Result<Self> {
        let first = components
            .first()
            .ok_or(Error::GridMismatch { context: "vector function needs at least one component" })?
            .grid();
        if components.iter().any(|c| c.grid() != first) {
            return Err(Error::GridMismatch { context: "vector components live on different grids" });
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: Grid, n: usize) -> Self {
        Self { components: (0..n).map(|_| GridFunction::zeros(grid)).collect() }
    }

    pub fn grid(&self) -> Grid {
        self.components[0].grid()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &GridFunction {
        &self.components[i]
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n_components(), other.n_components());
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n_components(), other.n_components());
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { components: self.components.iter().map(|c| c.scale(factor)).collect() }
    }

    /// Euclidean-in-components `l2_h` norm.
    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.components.iter().map(|c| c.linf_norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.components.iter().map(|c| c.max_imag()).fold(0.0, f64::max)
    }

    /// Componentwise central difference.
    pub fn d_central(&self) -> Self {
        Self { components: self.components.iter().map(grid::d_central).collect() }
    }
}

const PADE13_B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
/// Largest 1-norm for which the order-13 Pade approximant meets double
/// precision without argument scaling.
const PADE13_THETA: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Matrix exponential of a complex square matrix by order-13 Pade
/// approximation with scaling and squaring.
pub(crate) fn mat_exp(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let a = m.map(|c| c * 0.5f64.powi(squarings as i32));
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = PADE13_B;
    let u_poly = &a6 * (&a6 * re(b[13]) + &a4 * re(b[11]) + &a2 * re(b[9]))
        + &a6 * re(b[7])
        + &a4 * re(b[5])
        + &a2 * re(b[3])
        + &id * re(b[1]);
    let u = &a * u_poly;
    let v = &a6 * (&a6 * re(b[12]) + &a4 * re(b[10]) + &a2 * re(b[8]))
        + &a6 * re(b[6])
        + &a4 * re(b[4])
        + &a2 * re(b[2])
        + &id * re(b[0]);
    let mut result = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is invertible for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Closed-form `exp(t M)` for a 2x2 complex matrix, written as
/// `e^{mu t} (cosh(q t) I + t sinhc(q t) (M - mu I))` with `q^2 = mu^2 - det`.
/// The `sinhc` series branch keeps the formula stable when `q t` is small.
fn exp_2x2(m: [Complex64; 4], t: f64) -> [Complex64; 4] {
    let [m11, m12, m21, m22] = m;
    let mu = (m11 + m22) * 0.5;
    let det = m11 * m22 - m12 * m21;
    let q = (mu * mu - det).sqrt();
    let z = q * t;
    // exp(mu t) cosh(z) and exp(mu t) sinh(z)/q: in the stiff regime both
    // factors overflow/underflow separately while the products stay O(1), so
    // the large-z branch exponentiates the eigenvalue combinations
    // (mu +- q) t jointly.
    let (sc_cosh, sc_sinhc_t) = if z.norm() < 0.25 {
        let scale = (mu * t).exp();
        let z2 = z * z;
        let cosh = 1.0 + z2 * (0.5 + z2 * (1.0 / 24.0 + z2 * (1.0 / 720.0 + z2 / 40320.0)));
        let sinhc =
            1.0 + z2 * (1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (1.0 / 5040.0 + z2 / 362880.0)));
        (scale * cosh, scale * sinhc * t)
    } else {
        let ep = (mu * t + z).exp();
        let em = (mu * t - z).exp();
        ((ep + em) * 0.5, (ep - em) / (q * 2.0))
    };
    let q11 = m11 - mu;
    let q22 = m22 - mu;
    [
        sc_cosh + sc_sinhc_t * q11,
        sc_sinhc_t * m12,
        sc_sinhc_t * m21,
        sc_cosh + sc_sinhc_t * q22,
    ]
}

/// Per-mode generators `M(xi_k) = -i sigma(xi_k) A - B` of a system over one
/// grid; evaluates the exact semigroup at arbitrary times.
pub struct PropagatorCache {
    grid: Grid,
    dim: usize,
    generators: Vec<DMatrix<Complex64>>,
}

impl PropagatorCache {
    /// Builds the cache from raw matrices (no structural validation beyond
    /// shape), so deliberately non-dissipative systems can be propagated too.
    pub fn from_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>, grid: Grid) -> Result<Self> {
        if a.nrows() != a.ncols() || a.shape() != b.shape() || a.nrows() == 0 {
            return Err(Error::GridMismatch {
                context: "propagator needs square A and B of equal dimension",
            });
        }
        let dim = a.nrows();
        let generators = (0..grid.n_points())
            .map(|i| {
                let sigma = grid.sigma(i);
                DMatrix::from_fn(dim, dim, |r, c| {
                    Complex64::new(-b[(r, c)], -sigma * a[(r, c)])
                })
            })
            .collect();
        Ok(Self { grid, dim, generators })
    }

    pub fn new(spec: &SystemSpec, grid: Grid) -> Self {
        Self::from_matrices(spec.a(), spec.b(), grid)
            .expect("validated system matrices are square")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Applies `exp(t M(xi_k))` mode by mode to the initial state.
    pub fn propagate(&self, u0: &VectorGridFunction, t: f64) -> Result<VectorGridFunction> {
        if u0.grid() != self.grid {
            return Err(Error::GridMismatch { context: "initial data grid differs from propagator grid" });
        }
        if u0.n_components() != self.dim {
            return Err(Error::GridMismatch { context: "component count differs from system dimension" });
        }
        if !t.is_finite() {
            return Err(Error::NonFinite { t });
        }
        let spectra: Vec<SpectralFunction> = u0.components().iter().map(grid::dft).collect();
        let n_points = self.grid.n_points();
        let mut out: Vec<SpectralFunction> =
            (0..self.dim).map(|_| SpectralFunction::zeros(self.grid)).collect();
        if self.dim == 2 {
            for k in 0..n_points {
                let g = &self.generators[k];
                let e = exp_2x2([g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]], t);
                let v0 = spectra[0].coeffs()[k];
                let v1 = spectra[1].coeffs()[k];
                out[0].coeffs_mut()[k] = e[0] * v0 + e[1] * v1;
                out[1].coeffs_mut()[k] = e[2] * v0 + e[3] * v1;
            }
        } else {
            for k in 0..n_points {
                let e = mat_exp(&self.generators[k].map(|c| c * t));
                let v = DVector::from_fn(self.dim, |r, _| spectra[r].coeffs()[k]);
                let w = &e * &v;
                for r in 0..self.dim {
                    out[r].coeffs_mut()[k] = w[r];
                }
            }
        }
        VectorGridFunction::new(out.iter().map(grid::idft).collect())
    }
}

/// Exact mode-by-mode solution of `dU/dt = -A D_h U - B U` at the requested
/// times (each time is computed from the initial data, not by stepping).
pub fn spectral_propagate(
    spec: &SystemSpec,
    u0: &VectorGridFunction,
    times: &[f64],
) -> Result<Vec<VectorGridFunction>> {
    let cache = PropagatorCache::new(spec, u0.grid());
    times.iter().map(|&t| cache.propagate(u0, t)).collect()
}

/// Right-hand side `-A D_h U - B U` over the physical stencil.
pub fn hyperbolic_rhs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    u: &VectorGridFunction,
) -> VectorGridFunction {
    let n = u.n_components();
    let derivatives: Vec<GridFunction> = u.components().iter().map(grid::d_central).collect();
    let components = (0..n)
        .map(|r| {
            let mut acc = GridFunction::zeros(u.grid());
            for c in 0..n {
                if a[(r, c)] != 0.0 {
                    acc = acc.add(&derivatives[c].scale(-a[(r, c)]));
                }
                if b[(r, c)] != 0.0 {
                    acc = acc.add(&u.component(c).scale(-b[(r, c)]));
                }
            }
            acc
        })
        .collect();
    VectorGridFunction { components }
}

/// Classical RK4 over `[0, t_end]` with continuous output: solution values at
/// `sample_times` (ascending, within the interval) are produced by cubic
/// Hermite interpolation on the enclosing step, preserving fourth-order
/// accuracy. Fails with `NonFinite` as soon as the state leaves `f64` range.
pub fn rk4_evolve(
    rhs: &dyn Fn(&VectorGridFunction) -> VectorGridFunction,
    u0: &VectorGridFunction,
    dt: f64,
    t_end: f64,
    sample_times: &[f64],
) -> Result<Vec<VectorGridFunction>> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveParameter { name: "dt", value: dt });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::NonPositiveParameter { name: "t_end", value: t_end });
    }
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut idx = 0;
    // Samples at (or numerically before) t = 0 read the initial state.
    while idx < sample_times.len() && sample_times[idx] <= 0.0 {
        samples.push(u0.clone());
        idx += 1;
    }
    let mut t = 0.0;
    let mut y = u0.clone();
    let mut f = rhs(&y);
    while t < t_end {
        let step = dt.min(t_end - t);
        let half = 0.5 * step;
        let k1 = f.clone();
        let k2 = rhs(&y.add(&k1.scale(half)));
        let k3 = rhs(&y.add(&k2.scale(half)));
        let k4 = rhs(&y.add(&k3.scale(step)));
        let y_next = y.add(
            &k1.add(&k2.scale(2.0))
                .add(&k3.scale(2.0))
                .add(&k4)
                .scale(step / 6.0),
        );
        let t_next = t + step;
        if !y_next.l2_norm().is_finite() {
            return Err(Error::NonFinite { t: t_next });
        }
        let f_next = rhs(&y_next);
        while idx < sample_times.len() && sample_times[idx] <= t_next + 1e-12 * t_end.max(1.0) {
            let theta = ((sample_times[idx] - t) / step).clamp(0.0, 1.0);
            let t2 = theta * theta;
            let t3 = t2 * theta;
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + theta;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            samples.push(
                y.scale(h00)
                    .add(&f.scale(h10 * step))
                    .add(&y_next.scale(h01))
                    .add(&f_next.scale(h11 * step)),
            );
            idx += 1;
        }
        y = y_next;
        f = f_next;
        t = t_next;
    }
    // Any remaining samples sit at t_end up to round-off.
    while idx < sample_times.len() {
        samples.push(y.clone());
        idx += 1;
    }
    Ok(samples)
}

/// Exact per-mode solution of the relaxed isothermal Euler pair
/// `d rho/dt = -D_h u`, `du/dt = -(D_h rho)/eps^2 - u/eps^2`
/// at the requested times. Being an exact exponential, the evaluation is
/// uniformly stable in the stiff limit `eps -> 0`.
pub fn solve_relaxed_euler(
    eps: f64,
    rho0: &GridFunction,
    u0: &GridFunction,
    times: &[f64],
) -> Result<Vec<VectorGridFunction>> {
    if !(eps > 0.0) {
        return Err(Error::NonPositiveParameter { name: "eps", value: eps });
    }
    if rho0.grid() != u0.grid() {
        return Err(Error::GridMismatch { context: "relaxed Euler components on different grids" });
    }
    let grid = rho0.grid();
    let inv_eps2 = 1.0 / (eps * eps);
    let rho_hat = grid::dft(rho0);
    let u_hat = grid::dft(u0);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() {
            return Err(Error::NonFinite { t });
        }
        let mut rho_t = SpectralFunction::zeros(grid);
        let mut u_t = SpectralFunction::zeros(grid);
        for k in 0..grid.n_points() {
            let sigma = grid.sigma(k);
            let m = [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -sigma),
                Complex64::new(0.0, -sigma * inv_eps2),
                Complex64::new(-inv_eps2, 0.0),
            ];
            let e = exp_2x2(m, t);
            let r = rho_hat.coeffs()[k];
            let u = u_hat.coeffs()[k];
            rho_t.coeffs_mut()[k] = e[0] * r + e[1] * u;
            u_t.coeffs_mut()[k] = e[2] * r + e[3] * u;
        }
        out.push(VectorGridFunction::new(vec![grid::idft(&rho_t), grid::idft(&u_t)])?);
    }
    Ok(out)
}

/// RK4 integration of the relaxed Euler pair. The explicit scheme must
/// resolve the `1/eps^2` damping, so steps above `eps^2/4` are refused.
pub fn rk4_relaxed_euler(
    eps: f64,
    rho0: &GridFunction,
    u0: &GridFunction,
    dt: f64,
    t_end: f64,
    sample_times: &[f64],
) -> Result<Vec<VectorGridFunction>> {
    if !(eps > 0.0) {
        return Err(Error::NonPositiveParameter { name: "eps", value: eps });
    }
    let limit = eps * eps / 4.0;
    if dt > limit {
        return Err(Error::StiffnessGuard { dt, limit });
    }
    if rho0.grid() != u0.grid() {
        return Err(Error::GridMismatch { context: "relaxed Euler components on different grids" });
    }
    let inv_eps2 = 1.0 / (eps * eps);
    let rhs = move |state: &VectorGridFunction| {
        let d_rho = grid::d_central(state.component(0));
        let d_u = grid::d_central(state.component(1));
        VectorGridFunction {
            components: vec![
                d_u.scale(-1.0),
                d_rho.scale(-inv_eps2).add(&state.component(1).scale(-inv_eps2)),
            ],
        }
    };
    let state0 = VectorGridFunction::new(vec![rho0.clone(), u0.clone()])?;
    rk4_evolve(&rhs, &state0, dt, t_end, sample_times)
}

/// Exact solution of the semi-discrete heat equation
/// `d rho/dt = D_h^2 rho` (mode factor `exp(-sigma^2 t)`).
pub fn solve_discrete_heat(rho0: &GridFunction, times: &[f64]) -> Vec<GridFunction> {
    let grid = rho0.grid();
    let rho_hat = grid::dft(rho0);
    times
        .iter()
        .map(|&t| {
            let mut g = SpectralFunction::zeros(grid);
            for k in 0..grid.n_points() {
                let sigma = grid.sigma(k);
                g.coeffs_mut()[k] = rho_hat.coeffs()[k] * (-sigma * sigma * t).exp();
            }
            grid::idft(&g)
        })
        .collect()
}

/// Darcy velocity of a density profile: `u = -D_h rho`.
pub fn darcy_velocity(rho: &GridFunction) -> GridFunction {
    grid::d_central(rho).scale(-1.0)
}

/// The damped mode `D_h rho + u` whose decay measures relaxation quality.
pub fn damped_mode(rho: &GridFunction, u: &GridFunction) -> Result<GridFunction> {
    if rho.grid() != u.grid() {
        return Err(Error::GridMismatch { context: "damped mode components on different grids" });
    }
    Ok(grid::d_central(rho).add(u))
}

/// Spatial discretization of the transport term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Central difference `(v_{n+1} - v_{n-1})/(2h)`.
    Central,
    /// Forward difference `(v_{n+1} - v_n)/h`.
    Plus,
    /// Backward difference `(v_n - v_{n-1})/h`.
    Minus,
}

/// Worst-mode amplification of `exp(T M_scheme(xi))` over the grid.
#[derive(Clone, Copy, Debug)]
pub struct StabilityReport {
    pub scheme: Scheme,
    pub t_end: f64,
    /// `max_k || exp(t_end M(xi_k)) ||_2`.
    pub max_amplification: f64,
    /// Frequency attaining the maximum.
    pub worst_xi: f64,
}

fn scheme_symbol(scheme: Scheme, grid: Grid, slot: usize) -> Complex64 {
    match scheme {
        Scheme::Central => Complex64::new(0.0, grid.sigma(slot)),
        Scheme::Plus => {
            let phase = Complex64::new(0.0, grid.xi(slot) * grid.h()).exp();
            (phase - 1.0) / grid.h()
        }
        Scheme::Minus => {
            let phase = Complex64::new(0.0, -grid.xi(slot) * grid.h()).exp();
            (Complex64::new(1.0, 0.0) - phase) / grid.h()
        }
    }
}

/// Scans every discrete frequency of the grid and reports the largest
/// `l2 -> l2` amplification of the scheme's mode propagator at time `t_end`.
/// The matrices are taken as given (no dissipativity requirements): the point
/// is to compare stable and unstable discretizations of the same system.
pub fn stability_report(
    scheme: Scheme,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    grid: Grid,
    t_end: f64,
) -> Result<StabilityReport> {
    if a.nrows() != a.ncols() || a.shape() != b.shape() || a.nrows() == 0 {
        return Err(Error::GridMismatch {
            context: "stability report needs square A and B of equal dimension",
        });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::NonPositiveParameter { name: "t_end", value: t_end });
    }
    let dim = a.nrows();
    let mut max_amplification = f64::NEG_INFINITY;
    let mut worst_xi = 0.0;
    for k in 0..grid.n_points() {
        let symbol = scheme_symbol(scheme, grid, k);
        let m = DMatrix::from_fn(dim, dim, |r, c| {
            -symbol * a[(r, c)] - Complex64::new(b[(r, c)], 0.0)
        });
        let e = mat_exp(&m.map(|c| c * t_end));
        let amplification = e.svd(false, false).singular_values[0];
        if amplification > max_amplification {
            max_amplification = amplification;
            worst_xi = grid.xi(k);
        }
    }
    Ok(StabilityReport { scheme, t_end, max_amplification, worst_xi })
}
