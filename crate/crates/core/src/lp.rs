//! Littlewood-Paley decomposition adapted to the central-difference symbol.
//!
//! Frequencies are graded by `zeta(xi) = |sin(xi h)|/h` rather than `|xi|`:
//! band `j` collects the frequencies with `zeta` in the annulus
//! `C_j = [3/4 * 2^j, 4/3 * 2^(j+1)]`. The partition of unity is built by
//! telescoping a quintic smoothstep cutoff, which makes the band sum exactly
//! one at every discrete mode with `zeta > 0`; the two modes with vanishing
//! symbol (`xi = 0` and Nyquist) belong to no band and are ignored by all
//! homogeneous norms. Near `|xi| = pi/h` the symbol is small although the
//! frequency is large: that pseudo-low-frequency regime is what distinguishes
//! this decomposition from the continuous one.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridFunction, SpectralFunction};
use crate::quad;

/// Lower edge factor of the annulus `C_j`.
const BAND_LO: f64 = 0.75;
/// Upper edge factor of the annulus `C_j` relative to `2^(j+1)`.
const BAND_HI: f64 = 4.0 / 3.0;

/// Active band range of a grid: the dyadic indices whose band supports
/// contain at least one discrete frequency.
#[derive(Clone, Copy, Debug)]
pub struct BandGeometry {
    grid: Grid,
    j_min: i32,
    j_max: i32,
}

impl BandGeometry {
    pub fn new(grid: Grid) -> Self {
        // Largest band: 3/4 * 2^j <= max zeta = O(1/h).
        let j_max = (4.0 / (3.0 * grid.h())).log2().floor() as i32;
        // Smallest band whose support [2^j, 8/3 * 2^j] reaches the smallest
        // positive symbol value.
        let zeta_min = grid.zeta_min_positive();
        let j_min = (3.0 * zeta_min / 8.0).log2().ceil() as i32;
        Self { grid, j_min, j_max }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// The symbol magnitude `zeta(xi) = |sin(xi h)|/h` at an arbitrary
    /// frequency (not index-snapped; discrete modes use [`Grid::zeta`]).
    pub fn zeta(&self, xi: f64) -> f64 {
        (xi * self.grid.h()).sin().abs() / self.grid.h()
    }

    /// Annulus lower edge `3/4 * 2^j`.
    pub fn band_lo(j: i32) -> f64 {
        BAND_LO * pow2(j)
    }

    /// Annulus upper edge `4/3 * 2^(j+1)`.
    pub fn band_hi(j: i32) -> f64 {
        BAND_HI * pow2(j + 1)
    }

    /// Bands in `[j_min, j_max]` whose evaluator support `(2^j, 8/3 * 2^j)`
    /// contains at least one discrete mode. The top index can be empty when
    /// the largest symbol value `1/h` lands exactly on a dyadic edge (the
    /// support interval is open at its lower endpoint), so band loops that
    /// localize data should iterate over this list.
    pub fn active_bands(&self) -> Vec<i32> {
        (self.j_min..=self.j_max)
            .filter(|&j| {
                (0..self.grid.n_points()).any(|i| {
                    let z = self.grid.zeta(i);
                    z > pow2(j) && z < (8.0 / 3.0) * pow2(j)
                })
            })
            .collect()
    }
}

fn pow2(j: i32) -> f64 {
    2.0f64.powi(j)
}

/// Telescoping partition of unity over the band geometry.
///
/// `chi` is 1 on `[0, 1]`, 0 on `[4/3, inf)`, and descends through a quintic
/// smoothstep in between; `phi_j(zeta) = chi(zeta/2^(j+1)) - chi(zeta/2^j)`
/// is supported in `[2^j, 8/3 * 2^j]`, inside the annulus `C_j`. Both factors
/// of neighboring bands evaluate `chi` at identical arguments, so the band
/// sum telescopes with no numerical normalization.
#[derive(Clone, Copy, Debug)]
pub struct PartitionOfUnity {
    geometry: BandGeometry,
}

impl PartitionOfUnity {
    pub fn new(grid: Grid) -> Self {
        Self { geometry: BandGeometry::new(grid) }
    }

    pub fn geometry(&self) -> &BandGeometry {
        &self.geometry
    }

    /// Quintic smoothstep cutoff: nonincreasing, 1 on `[0,1]`, 0 on `[4/3, inf)`.
    pub fn chi(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= BAND_HI {
            0.0
        } else {
            let s = (r - 1.0) * 3.0;
            1.0 - ((6.0 * s - 15.0) * s + 10.0) * s * s * s
        }
    }

    /// Band evaluator at a symbol value `zeta >= 0`.
    pub fn phi(&self, j: i32, zeta: f64) -> f64 {
        self.chi(zeta / pow2(j + 1)) - self.chi(zeta / pow2(j))
    }
}

/// Per-band spectral weights `phi_j(zeta(xi_k))` for every slot of the grid.
fn band_weights(p: &PartitionOfUnity, j: i32) -> Vec<f64> {
    let grid = p.geometry.grid();
    (0..grid.n_points()).map(|i| p.phi(j, grid.zeta(i))).collect()
}

/// Frequency localization `delta_h^j v`: the inverse transform of
/// `phi_j(zeta) * vhat`. Bands outside the active range return zero.
pub fn localize(v: &GridFunction, j: i32, p: &PartitionOfUnity) -> GridFunction {
    let geom = p.geometry();
    if j < geom.j_min() - 1 || j > geom.j_max() + 1 {
        return GridFunction::zeros(v.grid());
    }
    let mut g = grid::dft(v);
    let weights = band_weights(p, j);
    for (c, w) in g.coeffs_mut().iter_mut().zip(&weights) {
        *c *= *w;
    }
    grid::idft(&g)
}

/// `l^2_h` norm of the band-`j` piece, computed spectrally.
fn band_norm(g: &SpectralFunction, p: &PartitionOfUnity, j: i32) -> f64 {
    let grid = g.grid();
    let mut sum = 0.0;
    for (i, c) in g.coeffs().iter().enumerate() {
        let w = p.phi(j, grid.zeta(i));
        if w > 0.0 {
            sum += (w * w) * c.norm_sqr();
        }
    }
    (sum * grid.delta_xi()).sqrt()
}

/// Discrete homogeneous Besov norm `sum_j 2^{js} ||delta_h^j v||_{l2_h}`
/// over the active bands.
pub fn besov_norm(v: &GridFunction, s: f64, p: &PartitionOfUnity) -> f64 {
    let g = grid::dft(v);
    let geom = p.geometry();
    let mut total = 0.0;
    for j in geom.j_min()..=geom.j_max() {
        total += pow2(j).powf(s) * band_norm(&g, p, j);
    }
    total
}

/// Low/high Besov splitting at the threshold band `J = log2(kappa/eps)`:
/// `low` sums bands `j <= J`, `high` sums bands `j >= J`. When `J` is an
/// integer the boundary band is counted in both sums, so `low + high` can
/// exceed the plain norm by that one term.
pub fn besov_norm_split(
    v: &GridFunction,
    s: f64,
    kappa: f64,
    eps: f64,
) -> Result<(f64, f64)> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositiveParameter { name: "kappa", value: kappa });
    }
    if !(eps > 0.0) {
        return Err(Error::NonPositiveParameter { name: "eps", value: eps });
    }
    let p = PartitionOfUnity::new(v.grid());
    let threshold = (kappa / eps).log2();
    let g = grid::dft(v);
    let geom = p.geometry();
    let mut low = 0.0;
    let mut high = 0.0;
    for j in geom.j_min()..=geom.j_max() {
        let term = pow2(j).powf(s) * band_norm(&g, &p, j);
        if (j as f64) <= threshold {
            low += term;
        }
        if (j as f64) >= threshold {
            high += term;
        }
    }
    Ok((low, high))
}

/// Two-sided Bernstein bound on one band: the ratio
/// `||D_h delta_h^j v|| / ||delta_h^j v||` must fall in
/// `[3/4 * 2^j, 8/3 * 2^j]`. The band support makes this a mode-by-mode
/// statement, so the endpoints are exact, not asymptotic.
pub fn bernstein_check(
    v: &GridFunction,
    j: i32,
    p: &PartitionOfUnity,
) -> Result<(bool, bool, f64)> {
    let localized = localize(v, j, p);
    let denom = localized.l2_norm();
    if denom == 0.0 {
        return Err(Error::ZeroLocalization { j });
    }
    let ratio = grid::d_central(&localized).l2_norm() / denom;
    let lower_ok = ratio >= BAND_LO * pow2(j);
    let upper_ok = ratio <= (8.0 / 3.0) * pow2(j);
    Ok((lower_ok, upper_ok, ratio))
}

/// Numeric Lebesgue measure of the band `F_h(j) = {xi : zeta(xi) in C_j}`
/// inside `[-pi/h, pi/h]`, by midpoint sampling with `quad_points` nodes.
pub fn band_measure(j: i32, grid: Grid, quad_points: usize) -> f64 {
    let geom = BandGeometry::new(grid);
    let lo = BandGeometry::band_lo(j);
    let hi = BandGeometry::band_hi(j);
    let width = 2.0 * grid.nyquist();
    let dx = width / quad_points as f64;
    let mut count = 0usize;
    for i in 0..quad_points {
        let xi = -grid.nyquist() + (i as f64 + 0.5) * dx;
        let z = geom.zeta(xi);
        if z >= lo && z <= hi {
            count += 1;
        }
    }
    count as f64 * dx
}

/// Sup-norm embedding ratio `||v - kernel part||_{linf} / ||v||_{B^{1/2}}`,
/// where the kernel part carries the two zero-symbol modes (`xi = 0`,
/// Nyquist) that no band sees.
pub fn linf_embedding_check(v: &GridFunction, p: &PartitionOfUnity) -> Result<f64> {
    let denom = besov_norm(v, 0.5, p);
    if denom == 0.0 {
        return Err(Error::ZeroNorm { context: "besov_norm(v, 1/2) in embedding check" });
    }
    let mut g = grid::dft(v);
    let n = v.grid().n_points();
    g.coeffs_mut()[0] = Complex64::new(0.0, 0.0); // Nyquist slot
    g.coeffs_mut()[n / 2] = Complex64::new(0.0, 0.0); // xi = 0 slot
    let banded = grid::idft(&g);
    Ok(banded.linf_norm() / denom)
}

/// Grid-uniformity check for the band-limiting operator: returns, per grid,
/// the ratio `||T_h f||_{B^s_h} / ||f||_{H^{s'}}` with the continuous Sobolev
/// norm evaluated by fixed quadrature. A bounded, nearly h-independent ratio
/// is the uniformity statement.
pub fn uniform_besov_check(
    f_hat: &dyn Fn(f64) -> Complex64,
    s: f64,
    s_prime: f64,
    grids: &[Grid],
) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveParameter { name: "s", value: s });
    }
    if s >= s_prime {
        return Err(Error::ParameterOrder { s, s_prime });
    }
    let xi_max = grids
        .iter()
        .map(|g| g.nyquist())
        .fold(0.0f64, f64::max)
        * 2.0;
    let continuous = quad::continuous_sobolev_norm(f_hat, s_prime, xi_max, 1 << 17);
    let mut ratios = Vec::with_capacity(grids.len());
    for &g in grids {
        let truncated = grid::truncate(|xi| f_hat(xi), g)?;
        let besov = besov_norm(&truncated, s, &PartitionOfUnity::new(g));
        ratios.push(if continuous == 0.0 { 0.0 } else { besov / continuous });
    }
    Ok(ratios)
}

/// Band diagnostics CSV: `j,band_lo,band_hi,measure,norm_contribution` with
/// the weighted contribution `2^{js} ||delta_h^j v||` of each active band.
pub fn band_diagnostics_csv(v: &GridFunction, s: f64, p: &PartitionOfUnity, quad_points: usize) -> String {
    let g = grid::dft(v);
    let geom = p.geometry();
    let mut out = String::from("j,band_lo,band_hi,measure,norm_contribution\n");
    for j in geom.j_min()..=geom.j_max() {
        let contribution = pow2(j).powf(s) * band_norm(&g, p, j);
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            j,
            BandGeometry::band_lo(j),
            BandGeometry::band_hi(j),
            band_measure(j, geom.grid(), quad_points),
            contribution
        );
    }
    out
}
