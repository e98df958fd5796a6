//! Exact minimization of `uᵀAu + bᵀu` over the ball `‖u‖ ≤ r` for symmetric,
//! possibly indefinite `A`, by the secular equation in the eigenbasis of `A`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionSolution {
    pub u: DVector<f64>,
    /// `uᵀAu + bᵀu` at the minimizer.
    pub value: f64,
    /// Lagrange multiplier of the ball constraint.
    pub multiplier: f64,
    pub boundary: bool,
    /// The minimizer needed a component along the leading eigenspace that the
    /// secular equation cannot produce.
    pub hard_case: bool,
}

/// Dense entry point; eigen-decomposes `a`.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>, radius: f64) -> Result<TrustRegionSolution> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::InvalidInput("trust-region shapes differ".into()));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(b.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = DMatrix::zeros(b.len(), b.len());
    for (c, &k) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    solve_spectral(&vals, &vecs, b, radius)
}

/// Spectral entry point. `eigenvalues` must be ascending and `eigenvectors`
/// orthonormal with matching columns.
pub fn solve_spectral(
    eigenvalues: &DVector<f64>,
    eigenvectors: &DMatrix<f64>,
    b: &DVector<f64>,
    radius: f64,
) -> Result<TrustRegionSolution> {
    let n = b.len();
    if eigenvalues.len() != n || eigenvectors.nrows() != n || eigenvectors.ncols() != n {
        return Err(Error::InvalidInput("trust-region shapes differ".into()));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "ball radius {radius} must be nonnegative"
        )));
    }
    if n == 0 || radius == 0.0 {
        return Ok(TrustRegionSolution {
            u: DVector::zeros(n),
            value: 0.0,
            multiplier: 0.0,
            boundary: radius == 0.0 && n > 0,
            hard_case: false,
        });
    }
    let beta = eigenvectors.transpose() * b;
    let (x, multiplier, boundary, hard_case) =
        solve_diagonal(eigenvalues.as_slice(), beta.as_slice(), radius);
    let xv = DVector::from_vec(x);
    let value = xv
        .iter()
        .zip(eigenvalues.iter())
        .zip(beta.iter())
        .map(|((xi, li), bi)| li * xi * xi + bi * xi)
        .sum();
    Ok(TrustRegionSolution {
        u: eigenvectors * xv,
        value,
        multiplier,
        boundary,
        hard_case,
    })
}

fn step_norm(lam: &[f64], beta: &[f64], mu: f64) -> f64 {
    lam.iter()
        .zip(beta)
        .map(|(l, b)| {
            let x = b / (2.0 * (l + mu));
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Returns `(x, μ, boundary, hard_case)` for `min Σ λ_k x_k² + β_k x_k, ‖x‖ ≤ r`
/// with `λ` ascending.
fn solve_diagonal(lam: &[f64], beta: &[f64], r: f64) -> (Vec<f64>, f64, bool, bool) {
    let n = lam.len();
    let lam_min = lam[0];
    let lam_scale = lam
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let beta_norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();

    // Interior minimizer of a convex quadratic.
    if lam_min >= 0.0 {
        let mut x = vec![0.0; n];
        let mut fits = true;
        let mut sq = 0.0;
        for k in 0..n {
            if lam[k] > 0.0 {
                x[k] = -beta[k] / (2.0 * lam[k]);
                sq += x[k] * x[k];
            } else if beta[k] != 0.0 {
                fits = false;
                break;
            }
        }
        if fits && sq.sqrt() <= r {
            return (x, 0.0, false, false);
        }
    }

    let mu_lo = (-lam_min).max(0.0);
    if lam_min < 0.0 {
        let tol = 1e-10 * lam_scale;
        let leading: Vec<usize> = (0..n).filter(|&k| lam[k] - lam_min <= tol).collect();
        let lead_beta = leading
            .iter()
            .map(|&k| beta[k] * beta[k])
            .sum::<f64>()
            .sqrt();
        if lead_beta <= 1e-12 * beta_norm.max(f64::MIN_POSITIVE) || beta_norm == 0.0 {
            let mut x = vec![0.0; n];
            let mut sq = 0.0;
            for k in 0..n {
                if !leading.contains(&k) {
                    x[k] = -beta[k] / (2.0 * (lam[k] + mu_lo));
                    sq += x[k] * x[k];
                }
            }
            if sq.sqrt() <= r {
                x[leading[0]] = (r * r - sq).max(0.0).sqrt();
                return (x, mu_lo, true, true);
            }
        }
    }

    // Boundary: ‖x(μ)‖ = r on (μ_lo, μ_hi]; ‖x(μ_hi)‖ ≤ ‖β‖ / (2(λ_min + μ_hi)) = r.
    let mu_hi_start = (beta_norm / (2.0 * r) - lam_min).max(mu_lo);
    let (mut lo, mut hi) = (mu_lo, mu_hi_start.max(mu_lo + f64::MIN_POSITIVE));
    let mut mu = hi;
    for _ in 0..500 {
        let phi = step_norm(lam, beta, mu);
        if !phi.is_finite() || phi > r {
            lo = mu;
        } else {
            hi = mu;
        }
        if (phi - r).abs() <= 1e-15 * r
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE)
        {
            break;
        }
        // Newton on ψ(μ) = 1/‖x(μ)‖ − 1/r.
        let mut next = f64::NAN;
        if phi.is_finite() && phi > 0.0 {
            let dphi2: f64 = lam
                .iter()
                .zip(beta)
                .map(|(l, b)| -b * b / (2.0 * (l + mu).powi(3)))
                .sum();
            let dphi = dphi2 / (2.0 * phi);
            let psi = 1.0 / phi - 1.0 / r;
            let dpsi = -dphi / (phi * phi);
            if dpsi != 0.0 {
                next = mu - psi / dpsi;
            }
        }
        mu = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    // Use the feasible side of the bracket.
    let mu = if step_norm(lam, beta, mu) <= r * (1.0 + 1e-12) {
        mu
    } else {
        hi
    };
    let x: Vec<f64> = lam
        .iter()
        .zip(beta)
        .map(|(l, b)| -b / (2.0 * (l + mu)))
        .collect();
    (x, mu, true, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn convex_without_linear_term() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let s = solve_dense(&a, &DVector::zeros(3), 1.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.u.norm(), 0.0);
        assert!(!s.boundary);
    }

    #[test]
    fn indefinite_hard_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let s = solve_dense(&a, &DVector::zeros(2), 1.0).unwrap();
        assert!(s.hard_case && s.boundary);
        assert_relative_eq!(s.value, -1.0, epsilon = 1e-14);
        assert_relative_eq!(s.u[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(s.u[1].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_radius() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        let s = solve_dense(&a, &DVector::from_vec(vec![1.0, 1.0]), 0.0).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn boundary_case_one_dimension() {
        // min x² − 4x over |x| ≤ 1 → x = 1, value −3.
        let a = DMatrix::from_element(1, 1, 1.0);
        let s = solve_dense(&a, &DVector::from_element(1, -4.0), 1.0).unwrap();
        assert!(s.boundary);
        assert_relative_eq!(s.u[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.value, -3.0, epsilon = 1e-12);
        assert_relative_eq!(s.multiplier, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn near_singular_psd_is_boundary() {
        let vals = DVector::from_vec(vec![1e-18, 1e-3, 4e17]);
        let vecs = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![1e-3, 1.0, 1.0]);
        let s = solve_spectral(&vals, &vecs, &b, 2.0).unwrap();
        assert!(s.boundary);
        assert_relative_eq!(s.u.norm(), 2.0, max_relative = 1e-12);
        // Optimality: (A + μI)u = −b/2 componentwise.
        for k in 0..3 {
            assert_relative_eq!(
                (vals[k] + s.multiplier) * s.u[k],
                -0.5 * b[k],
                max_relative = 1e-9
            );
        }
    }
}
