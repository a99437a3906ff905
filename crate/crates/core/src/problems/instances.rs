//! Canonical separable test instances. All generators are deterministic in
//! their seed.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{LocalObjective, LocalProblem, SeparableProblem};
use crate::linalg::{dot, norm, Cholesky, DenseMatrix};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::{Error, Result};

/// Measurements per robot in [`localization_instance`] unless overridden.
pub const DEFAULT_ROWS_PER_ROBOT: usize = 4;

const LOCALIZATION_RETRIES: usize = 32;

fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Random orthogonal matrix by Gram–Schmidt on Gaussian columns.
fn random_orthogonal(rng: &mut Rng, n: usize) -> DenseMatrix {
    loop {
        let g = gaussian_matrix(rng, n, n);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut v: Vec<f64> = (0..n).map(|i| g[(i, j)]).collect();
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let nv = norm(&v);
            if nv < 1e-8 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
        if basis.len() == n {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| basis.iter().map(|b| b[i]).collect())
                .collect();
            return DenseMatrix::from_rows(&rows).expect("square");
        }
    }
}

/// Strongly convex quadratics `f_i(x) = ½ xᵀ P_i x + q_iᵀ x`.
///
/// `sum_i P_i` has eigenvalues spaced geometrically in
/// `[N, N · condition_target]` (so its condition number equals the target up
/// to rounding, and is 1 when `n = 1`). Each `P_i` is `sum/N` plus a
/// zero-sum symmetric perturbation small enough to keep every `P_i`
/// positive definite with smallest eigenvalue at least ½.
pub fn quadratic_instance(
    n: usize,
    num_robots: usize,
    seed: u64,
    condition_target: f64,
) -> Result<SeparableProblem> {
    if n == 0 || num_robots == 0 {
        return Err(Error::InvalidParameter(
            "quadratic instance needs n, N >= 1".into(),
        ));
    }
    if !(condition_target >= 1.0) || !condition_target.is_finite() {
        return Err(Error::InvalidParameter(
            "condition target must be >= 1".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let nf = num_robots as f64;
    let eigen: Vec<f64> = (0..n)
        .map(|k| {
            let frac = if n == 1 {
                0.0
            } else {
                k as f64 / (n - 1) as f64
            };
            nf * libm::pow(condition_target, frac)
        })
        .collect();
    let basis = random_orthogonal(&mut rng, n);
    let total = basis
        .matmul(&DenseMatrix::diagonal(&eigen))
        .matmul(&basis.transpose());

    let mut perturbations: Vec<DenseMatrix> = (0..num_robots)
        .map(|_| {
            let g = gaussian_matrix(&mut rng, n, n);
            let mut sym = g.clone();
            sym.add_scaled(1.0, &g.transpose());
            sym.scale(0.5);
            sym
        })
        .collect();
    let mut mean = DenseMatrix::zeros(n, n);
    for e in &perturbations {
        mean.add_scaled(1.0 / nf, e);
    }
    for e in &mut perturbations {
        e.add_scaled(-1.0, &mean);
    }
    let largest = perturbations
        .iter()
        .map(DenseMatrix::frobenius_norm)
        .fold(0.0, f64::max);
    // smallest eigenvalue of total / N is 1
    let scale = if largest > 0.0 { 0.5 / largest } else { 0.0 };

    let robots = perturbations
        .into_iter()
        .map(|e| {
            let mut p = total.clone();
            p.scale(1.0 / nf);
            p.add_scaled(scale, &e);
            let q: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
            LocalProblem::unconstrained(LocalObjective::quadratic(p, q, 0.0))
        })
        .collect();
    SeparableProblem::new(robots)
}

/// Least-squares target localization: robot `i` holds `rows_per_robot`
/// linear measurements `b_i = A_i x_true + noise` of a hidden target and
/// `f_i(x) = ½ ‖A_i x − b_i‖²`. Resamples (seed offsets) until
/// `sum_i A_iᵀ A_i` is nonsingular.
pub fn localization_instance(
    n: usize,
    num_robots: usize,
    seed: u64,
    noise_std: f64,
    rows_per_robot: usize,
) -> Result<SeparableProblem> {
    if n == 0 || num_robots == 0 || rows_per_robot == 0 {
        return Err(Error::InvalidParameter(
            "localization instance needs n, N, rows >= 1".into(),
        ));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    let mut rng = rng_from_seed(seed);
    let truth: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
    for attempt in 0..LOCALIZATION_RETRIES {
        let mut rng = rng_from_seed(derive_seed(seed, attempt as u64));
        let mut gram = DenseMatrix::zeros(n, n);
        let mut robots = Vec::with_capacity(num_robots);
        for _ in 0..num_robots {
            let a = gaussian_matrix(&mut rng, rows_per_robot, n);
            let b: Vec<f64> = a
                .matvec(&truth)
                .into_iter()
                .map(|v| v + noise_std * gaussian(&mut rng))
                .collect();
            gram.add_scaled(1.0, &a.gram());
            robots.push(LocalProblem::unconstrained(LocalObjective::least_squares(
                a, b,
            )));
        }
        let mut scaled = gram.clone();
        scaled.scale(1.0 / gram.frobenius_norm());
        if Cholesky::factor(&scaled).is_ok() {
            return Ok(SeparableProblem::new(robots)?.with_truth(truth));
        }
    }
    Err(Error::RetryBudget {
        budget: LOCALIZATION_RETRIES,
    })
}

/// Scalar family `f_i(x) = ½ (x − a_i)² + c_i sin(x)` with
/// `a_i ~ U(−2, 2)` and `c_i ~ U(−0.9, 0.9)`.
pub fn nonconvex_instance(num_robots: usize, seed: u64) -> Result<SeparableProblem> {
    if num_robots == 0 {
        return Err(Error::InvalidParameter("instance needs N >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let centers = Uniform::new(-2.0, 2.0).expect("valid range");
    let amplitudes = Uniform::new(-0.9, 0.9).expect("valid range");
    let robots = (0..num_robots)
        .map(|_| {
            let center = centers.sample(&mut rng);
            let amplitude = amplitudes.sample(&mut rng);
            LocalProblem::unconstrained(LocalObjective::SinePerturbed { center, amplitude })
        })
        .collect();
    SeparableProblem::new(robots)
}
