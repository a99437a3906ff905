//! Local argmin shared by NEXT, C-ADMM and SOVA:
//!
//! `min_{x in X}  f(x) + ½ sum_c μ_c x_c² − pullᵀ x`

use alloc::vec::Vec;

use crate::linalg::{axpy, distance, norm, Cholesky};
use crate::problems::{FeasibleSet, LocalObjective};
use crate::{Error, Result};

/// Stationarity target of the iterative solvers (gradient norm, or
/// gradient-mapping norm under constraints).
pub const SUBPROBLEM_TOLERANCE: f64 = 1e-10;

const NEWTON_MAX_ITERATIONS: usize = 100;
const PROJECTED_MAX_ITERATIONS: usize = 200_000;

fn prox_gradient(f: &LocalObjective, mu: &[f64], pull: &[f64], x: &[f64]) -> Vec<f64> {
    let mut g = f.gradient(x);
    for c in 0..g.len() {
        g[c] += mu[c] * x[c] - pull[c];
    }
    g
}

fn prox_value(f: &LocalObjective, mu: &[f64], pull: &[f64], x: &[f64]) -> f64 {
    let mut v = f.value(x);
    for c in 0..x.len() {
        v += 0.5 * mu[c] * x[c] * x[c] - pull[c] * x[c];
    }
    v
}

/// Solves the regularized local subproblem. Quadratic objectives without
/// constraints use one Cholesky solve; other unconstrained objectives use
/// damped Newton from `warm`; constrained problems use projected gradient
/// from the projection of `warm`.
pub fn solve_prox(
    f: &LocalObjective,
    set: &FeasibleSet,
    mu: &[f64],
    pull: &[f64],
    warm: &[f64],
) -> Result<Vec<f64>> {
    let n = f.dim();
    for v in [mu, pull, warm] {
        super::check_len(v, n)?;
    }
    if set.is_unconstrained() {
        if let Some((mut p, q)) = f.quadratic_form() {
            p.add_to_diagonal(mu);
            let rhs: Vec<f64> = pull.iter().zip(&q).map(|(a, b)| a - b).collect();
            return Ok(Cholesky::factor(&p)?.solve(&rhs));
        }
        return newton(f, mu, pull, warm);
    }
    projected_gradient(f, set, mu, pull, warm)
}

fn newton(f: &LocalObjective, mu: &[f64], pull: &[f64], warm: &[f64]) -> Result<Vec<f64>> {
    let mut x = warm.to_vec();
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let g = prox_gradient(f, mu, pull, &x);
        if norm(&g) <= SUBPROBLEM_TOLERANCE {
            return Ok(x);
        }
        let mut h = f
            .hessian(&x)
            .ok_or_else(|| Error::Capability("subproblem needs a Hessian".into()))?;
        h.add_to_diagonal(mu);
        let step = Cholesky::factor(&h)?.solve(&g);
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let v0 = prox_value(f, mu, pull, &x);
        let mut t = 1.0;
        loop {
            let mut trial = x.clone();
            axpy(-t, &step, &mut trial);
            // Armijo on the value; near the solution rounding hides the
            // decrease, so a smaller gradient also accepts the step.
            if prox_value(f, mu, pull, &trial) <= v0 - 1e-4 * t * slope
                || norm(&prox_gradient(f, mu, pull, &trial)) < norm(&g)
            {
                x = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::Numerical("Newton line search stalled".into()));
            }
        }
    }
    let g = prox_gradient(f, mu, pull, &x);
    if norm(&g) <= SUBPROBLEM_TOLERANCE {
        return Ok(x);
    }
    Err(Error::Numerical(alloc::format!(
        "Newton solver stopped at gradient norm {:e}",
        norm(&g)
    )))
}

fn projected_gradient(
    f: &LocalObjective,
    set: &FeasibleSet,
    mu: &[f64],
    pull: &[f64],
    warm: &[f64],
) -> Result<Vec<f64>> {
    let lipschitz = f.lipschitz_bound() + mu.iter().fold(0.0_f64, |a, &b| a.max(b));
    if !(lipschitz > 0.0) {
        return Err(Error::Numerical("degenerate subproblem curvature".into()));
    }
    let step = 1.0 / lipschitz;
    let mut x = set.project(warm);
    for _ in 0..PROJECTED_MAX_ITERATIONS {
        let g = prox_gradient(f, mu, pull, &x);
        let mut trial = x.clone();
        axpy(-step, &g, &mut trial);
        let next = set.project(&trial);
        let residual = distance(&x, &next) / step;
        x = next;
        if residual <= SUBPROBLEM_TOLERANCE {
            return Ok(x);
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(Error::Numerical(
        "projected-gradient subproblem solver did not converge".into(),
    ))
}

/// Gradient-mapping norm of the subproblem at `x` with unit step.
pub fn prox_residual(
    f: &LocalObjective,
    set: &FeasibleSet,
    mu: &[f64],
    pull: &[f64],
    x: &[f64],
) -> f64 {
    let g = prox_gradient(f, mu, pull, x);
    let mut trial = x.to_vec();
    axpy(-1.0, &g, &mut trial);
    distance(x, &set.project(&trial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use alloc::vec;

    #[test]
    fn quadratic_closed_form() {
        // ½x² + ½·2x² − 3x  →  x = 1
        let f = LocalObjective::quadratic(DenseMatrix::identity(1), vec![0.0], 0.0);
        let x = solve_prox(&f, &FeasibleSet::Unconstrained, &[2.0], &[3.0], &[0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_objective_by_newton() {
        let f = LocalObjective::SinePerturbed {
            center: 0.7,
            amplitude: 0.8,
        };
        let mu = [1.0];
        let pull = [0.3];
        let x = solve_prox(&f, &FeasibleSet::Unconstrained, &mu, &pull, &[5.0]).unwrap();
        assert!(norm(&prox_gradient(&f, &mu, &pull, &x)) <= SUBPROBLEM_TOLERANCE);
    }

    #[test]
    fn box_constrained_residual() {
        let f = LocalObjective::quadratic(
            DenseMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            vec![-4.0, 1.0],
            0.0,
        );
        let set = FeasibleSet::new_box(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        let mu = [1.0, 1.0];
        let pull = [0.0, 0.0];
        let x = solve_prox(&f, &set, &mu, &pull, &[0.0, 0.0]).unwrap();
        assert!(set.contains(&x, 0.0));
        assert!(prox_residual(&f, &set, &mu, &pull, &x) <= 1e-8);
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_system_is_numerical_error() {
        let f = LocalObjective::quadratic(DenseMatrix::zeros(1, 1), vec![0.0], 0.0);
        let err = solve_prox(&f, &FeasibleSet::Unconstrained, &[0.0], &[1.0], &[0.0]).unwrap_err();
        assert!(err.is_numerical());
    }
}
