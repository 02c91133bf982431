//! Deterministic 1-D quadrature: Gauss-Kronrod 7/15 panels with adaptive
//! bisection, composite Simpson, and the continuous Sobolev-norm quadrature
//! used by the uniform-estimate checkers.

use num_complex::Complex64;

/// Kronrod abscissae on [0, 1] side of the symmetric 15-point rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights paired with `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Embedded 7-point Gauss weights (odd-indexed Kronrod nodes).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7/15 panel: returns the Kronrod value and the
/// |Kronrod - Gauss| error estimate.
pub fn gk15_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half.abs())
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    /// False when the panel budget ran out before the tolerance was met.
    pub resolved: bool,
}

/// Adaptive bisection on Gauss-Kronrod panels with an absolute tolerance.
///
/// Deterministic: panels are processed depth-first in a fixed order. The
/// value is accumulated even when unresolved so the caller can report it.
pub fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> QuadResult {
    const MAX_PANELS: usize = 1 << 16;
    let mut stack = vec![(a, b, abs_tol)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0usize;
    let mut resolved = true;
    while let Some((lo, hi, tol)) = stack.pop() {
        panels += 1;
        let (v, e) = gk15_panel(f, lo, hi);
        if e <= tol || panels >= MAX_PANELS {
            value += v;
            error += e;
            if e > tol {
                resolved = false;
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, 0.5 * tol));
            stack.push((lo, mid, 0.5 * tol));
        }
    }
    QuadResult { value, error_estimate: error, resolved }
}

/// Composite Simpson rule with `panels` (even count enforced) subintervals.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = if panels % 2 == 0 { panels } else { panels + 1 };
    let dx = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + j as f64 * dx);
    }
    sum * dx / 3.0
}

/// Inhomogeneous continuous Sobolev norm
/// `||f||_{H^{s'}} = sqrt( integral (1 + |xi|^{2s'}) |f_hat(xi)|^2 dxi )`
/// truncated to `[-xi_max, xi_max]` and evaluated with composite Simpson.
pub fn continuous_sobolev_norm(
    f_hat: &dyn Fn(f64) -> Complex64,
    s_prime: f64,
    xi_max: f64,
    panels: usize,
) -> f64 {
    let integrand = |xi: f64| (1.0 + xi.abs().powf(2.0 * s_prime)) * f_hat(xi).norm_sqr();
    simpson(&integrand, -xi_max, xi_max, panels).max(0.0).sqrt()
}
