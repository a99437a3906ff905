//! Ground-truth oracle with access to every robot's data.

use alloc::vec;
use alloc::vec::Vec;

use super::{FeasibleSet, SeparableProblem};
use crate::linalg::{axpy, distance, solve_spd, DenseMatrix};
use crate::{Error, Result};

/// Gradient-mapping norm at which the iterative oracle stops.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

const ORACLE_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

impl SeparableProblem {
    /// Intersection of all local sets in joint coordinates. Supports any
    /// mix of boxes, or a single ball shared by every constrained robot.
    pub fn joint_set(&self) -> Result<FeasibleSet> {
        let n = self.dim();
        let mut lower = vec![f64::NEG_INFINITY; n];
        let mut upper = vec![f64::INFINITY; n];
        let mut any_box = false;
        let mut ball: Option<(&[f64], f64)> = None;
        for (i, r) in self.robots().iter().enumerate() {
            let coords: Vec<usize> = match self.partition() {
                Some(l) => l.owned(i).to_vec(),
                None => (0..n).collect(),
            };
            match &r.set {
                FeasibleSet::Unconstrained => {}
                FeasibleSet::Box { lower: l, upper: u } => {
                    any_box = true;
                    for (k, &c) in coords.iter().enumerate() {
                        lower[c] = lower[c].max(l[k]);
                        upper[c] = upper[c].min(u[k]);
                    }
                }
                FeasibleSet::Ball { center, radius } => {
                    if coords.len() != n {
                        return Err(Error::Oracle(
                            "ball constraints on partitioned variables are unsupported".into(),
                        ));
                    }
                    match ball {
                        Some((c, rad)) if c != center.as_slice() || rad != *radius => {
                            return Err(Error::Oracle(
                                "intersection of distinct balls is unsupported".into(),
                            ))
                        }
                        _ => ball = Some((center, *radius)),
                    }
                }
            }
        }
        match (any_box, ball) {
            (true, Some(_)) => Err(Error::Oracle(
                "intersection of a box and a ball is unsupported".into(),
            )),
            (true, None) => {
                if lower.iter().zip(&upper).any(|(l, u)| l > u) {
                    return Err(Error::Oracle("feasible sets do not intersect".into()));
                }
                Ok(FeasibleSet::Box { lower, upper })
            }
            (false, Some((c, r))) => Ok(FeasibleSet::Ball {
                center: c.to_vec(),
                radius: r,
            }),
            (false, None) => Ok(FeasibleSet::Unconstrained),
        }
    }

    /// `(sum_i P_i, sum_i q_i)` in joint coordinates when every local
    /// objective is quadratic.
    pub fn joint_quadratic_form(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        let n = self.dim();
        let mut p = DenseMatrix::zeros(n, n);
        let mut q = vec![0.0; n];
        for (i, r) in self.robots().iter().enumerate() {
            let (pi, qi) = r.objective.quadratic_form()?;
            match self.partition() {
                Some(l) => {
                    let idx = l.owned(i);
                    for (a, &ca) in idx.iter().enumerate() {
                        q[ca] += qi[a];
                        for (b, &cb) in idx.iter().enumerate() {
                            p[(ca, cb)] += pi[(a, b)];
                        }
                    }
                }
                None => {
                    p.add_scaled(1.0, &pi);
                    axpy(1.0, &qi, &mut q);
                }
            }
        }
        Some((p, q))
    }
}

/// Global minimizer `x*` and value `f*`.
///
/// Unconstrained quadratic problems are solved from the joint normal
/// equations. Everything else runs projected gradient descent with step
/// `1 / sum_i L_i` until the gradient-mapping norm is at most
/// [`ORACLE_TOLERANCE`]; for non-convex instances that yields a stationary
/// point.
pub fn centralized_solve(p: &SeparableProblem) -> Result<Solution> {
    let set = p.joint_set()?;
    let closed_form = p
        .joint_quadratic_form()
        .map(|(hessian, linear)| {
            let rhs: Vec<f64> = linear.iter().map(|v| -v).collect();
            solve_spd(&hessian, &rhs)
        })
        .transpose()
        .map_err(|e| Error::Oracle(alloc::format!("normal equations: {e}")))?;

    if let (Some(x), FeasibleSet::Unconstrained) = (&closed_form, &set) {
        return Ok(Solution {
            value: p.value(x)?,
            x: x.clone(),
            iterations: 0,
        });
    }

    let lipschitz: f64 = p
        .robots()
        .iter()
        .map(|r| r.objective.lipschitz_bound())
        .sum();
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::Oracle("degenerate Lipschitz bound".into()));
    }
    let step = 1.0 / lipschitz;
    let start = closed_form.unwrap_or_else(|| vec![0.0; p.dim()]);
    let mut x = set.project(&start);
    for it in 0..ORACLE_MAX_ITERATIONS {
        let g = p.global_gradient(&x)?;
        let mut trial = x.clone();
        axpy(-step, &g, &mut trial);
        let next = set.project(&trial);
        let residual = distance(&x, &next) / step;
        x = next;
        if !residual.is_finite() {
            return Err(Error::Oracle("projected gradient diverged".into()));
        }
        if residual <= ORACLE_TOLERANCE {
            return Ok(Solution {
                value: p.value(&x)?,
                x,
                iterations: it + 1,
            });
        }
    }
    Err(Error::Oracle(alloc::format!(
        "no convergence within {ORACLE_MAX_ITERATIONS} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{LocalObjective, LocalProblem};

    fn scalar(center: f64) -> LocalProblem {
        LocalProblem::unconstrained(LocalObjective::quadratic(
            DenseMatrix::identity(1),
            vec![-center],
            0.0,
        ))
    }

    #[test]
    fn single_scalar_quadratic() {
        let p = SeparableProblem::new(vec![scalar(1.0)]).unwrap();
        let s = centralized_solve(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_quadratics_average() {
        let mut a = scalar(0.0);
        let mut b = scalar(2.0);
        // ½(x − a)² carries offset ½a²
        if let LocalObjective::Quadratic { offset, .. } = &mut a.objective {
            *offset = 0.0;
        }
        if let LocalObjective::Quadratic { offset, .. } = &mut b.objective {
            *offset = 2.0;
        }
        let p = SeparableProblem::new(vec![a, b]).unwrap();
        let s = centralized_solve(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-15);
        assert!((s.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn box_clamps_to_active_bound() {
        let p = SeparableProblem::new(vec![scalar(1.0)])
            .unwrap()
            .with_constraint(FeasibleSet::new_box(vec![0.0], vec![0.5]).unwrap())
            .unwrap();
        let s = centralized_solve(&p).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_boxes_fail_loudly() {
        let mut a = scalar(0.0);
        a.set = FeasibleSet::new_box(vec![0.0], vec![1.0]).unwrap();
        let mut b = scalar(0.0);
        b.set = FeasibleSet::new_box(vec![2.0], vec![3.0]).unwrap();
        let p = SeparableProblem::new(vec![a, b]).unwrap();
        assert!(matches!(centralized_solve(&p), Err(Error::Oracle(_))));
    }

    #[test]
    fn singular_normal_equations_fail_loudly() {
        let flat = LocalProblem::unconstrained(LocalObjective::quadratic(
            DenseMatrix::zeros(1, 1),
            vec![1.0],
            0.0,
        ));
        let p = SeparableProblem::new(vec![flat]).unwrap();
        assert!(matches!(centralized_solve(&p), Err(Error::Oracle(_))));
    }
}
