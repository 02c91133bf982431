//! Partially dissipative system pairs `(A, B)` and the Kalman rank
//! condition.
//!
//! The systems treated by this crate have the form `d/dt U + A D_h U = -B U`
//! with `A`, `B` symmetric `N x N`, and `B` acting only through its trailing
//! `N2 x N2` block `B_tilde`, which must be positive definite:
//! `<B x, x> >= lambda |x_2|^2` with `lambda` the smallest eigenvalue of
//! `B_tilde`. Decay of the undamped components requires the Kalman rank
//! condition: `(B | AB | ... | A^{N-1} B)` has full rank `N`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Hard cap on the system dimension; the certificate ladders are designed
/// for small systems and matrix powers stay well-conditioned.
pub const MAX_DIMENSION: usize = 16;

/// Symmetry and block-structure tolerance relative to the largest entry.
const STRUCTURE_TOL: f64 = 1e-12;

/// A validated partially dissipative pair.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    n: usize,
    n2: usize,
    lambda: f64,
}

impl SystemSpec {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Full dimension N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Damped-block dimension N2; components `N - N2 .. N` are damped.
    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Smallest eigenvalue of the trailing block: `<B x, x> >= lambda |x_2|^2`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The trailing `N2 x N2` block of B.
    pub fn b_tilde(&self) -> DMatrix<f64> {
        let n1 = self.n - self.n2;
        self.b.view((n1, n1), (self.n2, self.n2)).into_owned()
    }

    /// The linearized isothermal Euler pair: `A = [[0,1],[1,0]]`,
    /// `B = diag(0, 1)`, damping on the velocity component only.
    pub fn euler() -> SystemSpec {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        validate_system(&a, &b, 1).expect("Euler pair is a valid system")
    }
}

/// Rank certificate for the controllability-style matrix
/// `K = (B | AB | ... | A^{N-1} B)`.
#[derive(Clone, Debug)]
pub struct KalmanCertificate {
    pub k_matrix: DMatrix<f64>,
    pub numerical_rank: usize,
    pub singular_values: Vec<f64>,
    pub holds: bool,
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let mut defect: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    defect
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Validates a pair `(A, B)` and computes the dissipation constant.
///
/// Checks: equal square dimensions with `2 <= N <= 16`, `1 <= N2 < N`,
/// symmetry of both matrices, vanishing of B outside the trailing block, and
/// positive definiteness of the trailing block.
pub fn validate_system(a: &DMatrix<f64>, b: &DMatrix<f64>, n2: usize) -> Result<SystemSpec> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::NonPositiveParameter {
            name: "matrix dimensions (square, equal)",
            value: b.nrows() as f64,
        });
    }
    if n < 2 || n > MAX_DIMENSION {
        return Err(Error::NonPositiveParameter { name: "N (2..=16)", value: n as f64 });
    }
    if n2 < 1 || n2 >= n {
        return Err(Error::NonPositiveParameter { name: "N2 (1..N)", value: n2 as f64 });
    }

    let tol_a = STRUCTURE_TOL * max_abs(a).max(1.0);
    let defect_a = symmetry_defect(a);
    if defect_a > tol_a {
        return Err(Error::NonSymmetric { name: "A", defect: defect_a, tol: tol_a });
    }
    let tol_b = STRUCTURE_TOL * max_abs(b).max(1.0);
    let defect_b = symmetry_defect(b);
    if defect_b > tol_b {
        return Err(Error::NonSymmetric { name: "B", defect: defect_b, tol: tol_b });
    }

    let n1 = n - n2;
    let mut outside: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i < n1 || j < n1 {
                outside = outside.max(b[(i, j)].abs());
            }
        }
    }
    if outside > tol_b {
        return Err(Error::BadBlockStructure { n2, defect: outside });
    }

    let b_tilde = b.view((n1, n1), (n2, n2)).into_owned();
    let eigs = b_tilde.symmetric_eigenvalues();
    let lambda = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if lambda <= 0.0 {
        return Err(Error::NotDissipative { min_eigenvalue: lambda });
    }

    Ok(SystemSpec { a: a.clone(), b: b.clone(), n, n2, lambda })
}

/// The `N x (N*N)` concatenation `(B | AB | ... | A^{N-1} B)`.
pub fn kalman_matrix(spec: &SystemSpec) -> Result<DMatrix<f64>> {
    let n = spec.n;
    let mut k = DMatrix::zeros(n, n * n);
    let mut power_b = spec.b.clone();
    for block in 0..n {
        let magnitude = max_abs(&power_b);
        if !magnitude.is_finite() || magnitude > 1e150 {
            return Err(Error::NumericOverflow { magnitude });
        }
        k.view_mut((0, block * n), (n, n)).copy_from(&power_b);
        if block + 1 < n {
            power_b = &spec.a * &power_b;
        }
    }
    Ok(k)
}

/// Numerical Kalman rank via singular values.
///
/// `tol` is relative to the largest singular value; the default is
/// `N * machine-epsilon`. The certificate carries the singular values so
/// near-degenerate pairs can be judged by the caller.
pub fn kalman_rank_holds(spec: &SystemSpec, tol: Option<f64>) -> Result<KalmanCertificate> {
    let k = kalman_matrix(spec)?;
    let tol = tol.unwrap_or(spec.n as f64 * f64::EPSILON);
    let mut singular_values: Vec<f64> = k.clone().svd(false, false).singular_values.iter().cloned().collect();
    singular_values.sort_by(|x, y| y.partial_cmp(x).expect("singular values are finite"));
    let sigma_max = singular_values.first().cloned().unwrap_or(0.0);
    let numerical_rank = singular_values.iter().filter(|&&s| s > tol * sigma_max).count();
    let holds = numerical_rank == spec.n;
    Ok(KalmanCertificate { k_matrix: k, numerical_rank, singular_values, holds })
}

/// Coefficients `c_0 .. c_{N-1}` with `A^N = sum_j c_j A^j`, from the
/// characteristic polynomial of the symmetric matrix A (real eigenvalues,
/// expanded by Vieta in sorted order for determinism).
pub fn cayley_hamilton_coeffs(spec: &SystemSpec) -> Vec<f64> {
    let mut eigs: Vec<f64> = spec.a.symmetric_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    // monic[j] tracks the coefficient of lambda^j in prod (lambda - eig_i).
    let n = spec.n;
    let mut monic = vec![0.0; n + 1];
    monic[0] = 1.0;
    for (count, &root) in eigs.iter().enumerate() {
        let mut next = vec![0.0; n + 1];
        for j in 0..=count {
            next[j + 1] += monic[j];
            next[j] -= root * monic[j];
        }
        monic = next;
    }
    // A^N + sum_{j<N} monic[j] A^j = 0, so c_j = -monic[j].
    (0..n).map(|j| -monic[j]).collect()
}

/// The graph norm `N(y) = (sum_{k=0}^{N-1} |B A^k y|^2)^{1/2}`; positive
/// definite exactly when the Kalman condition holds.
pub fn kalman_graph_norm(spec: &SystemSpec, y: &nalgebra::DVector<f64>) -> f64 {
    let mut power_y = y.clone();
    let mut sum = 0.0;
    for _ in 0..spec.n {
        sum += (&spec.b * &power_y).norm_squared();
        power_y = &spec.a * &power_y;
    }
    sum.sqrt()
}
