use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, dot, symmetric_spectral_norm, DenseMatrix};
use crate::{Error, Result};

/// A robot's private objective `f_i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LocalObjective {
    /// `½ xᵀ P x + qᵀ x + c` with `P` symmetric positive (semi)definite.
    Quadratic {
        hessian: DenseMatrix,
        linear: Vec<f64>,
        offset: f64,
    },
    /// `½ ‖A x − b‖²`, one measurement per row of `A`.
    LeastSquares {
        design: DenseMatrix,
        targets: Vec<f64>,
    },
    /// Scalar `½ (x − center)² + amplitude · sin(x)`.
    SinePerturbed { center: f64, amplitude: f64 },
}

impl LocalObjective {
    pub fn quadratic(hessian: DenseMatrix, linear: Vec<f64>, offset: f64) -> Self {
        debug_assert!(hessian.is_square() && hessian.nrows() == linear.len());
        Self::Quadratic {
            hessian,
            linear,
            offset,
        }
    }

    pub fn least_squares(design: DenseMatrix, targets: Vec<f64>) -> Self {
        debug_assert_eq!(design.nrows(), targets.len());
        Self::LeastSquares { design, targets }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { linear, .. } => linear.len(),
            Self::LeastSquares { design, .. } => design.ncols(),
            Self::SinePerturbed { .. } => 1,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Quadratic {
                hessian,
                linear,
                offset,
            } => 0.5 * dot(x, &hessian.matvec(x)) + dot(linear, x) + offset,
            Self::LeastSquares { design, targets } => {
                let r = residuals(design, targets, x);
                0.5 * dot(&r, &r)
            }
            Self::SinePerturbed { center, amplitude } => {
                let d = x[0] - center;
                0.5 * d * d + amplitude * libm::sin(x[0])
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Quadratic {
                hessian, linear, ..
            } => {
                let mut g = hessian.matvec(x);
                axpy(1.0, linear, &mut g);
                g
            }
            Self::LeastSquares { design, targets } => {
                let r = residuals(design, targets, x);
                design.tr_matvec(&r)
            }
            Self::SinePerturbed { center, amplitude } => {
                vec![x[0] - center + amplitude * libm::cos(x[0])]
            }
        }
    }

    pub fn has_hessian(&self) -> bool {
        true
    }

    pub fn hessian(&self, x: &[f64]) -> Option<DenseMatrix> {
        Some(match self {
            Self::Quadratic { hessian, .. } => hessian.clone(),
            Self::LeastSquares { design, .. } => design.gram(),
            Self::SinePerturbed { amplitude, .. } => {
                DenseMatrix::diagonal(&[1.0 - amplitude * libm::sin(x[0])])
            }
        })
    }

    /// `(P, q)` with `f(x) = ½ xᵀ P x + qᵀ x + const`, when `f` is quadratic.
    pub fn quadratic_form(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        match self {
            Self::Quadratic {
                hessian, linear, ..
            } => Some((hessian.clone(), linear.clone())),
            Self::LeastSquares { design, targets } => {
                let q = design.tr_matvec(targets).iter().map(|v| -v).collect();
                Some((design.gram(), q))
            }
            Self::SinePerturbed { .. } => None,
        }
    }

    /// Whether argmin subproblems over this objective have closed forms.
    pub fn has_closed_form_argmin(&self) -> bool {
        !matches!(self, Self::SinePerturbed { .. })
    }

    /// Upper bound on the Lipschitz constant of the gradient.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Self::Quadratic { hessian, .. } => symmetric_spectral_norm(hessian),
            Self::LeastSquares { design, .. } => symmetric_spectral_norm(&design.gram()),
            Self::SinePerturbed { amplitude, .. } => 1.0 + libm::fabs(*amplitude),
        }
    }

    /// Number of locally stored measurements a stochastic gradient can
    /// sample from.
    pub fn sample_count(&self) -> Option<usize> {
        match self {
            Self::LeastSquares { targets, .. } => Some(targets.len()),
            _ => None,
        }
    }

    /// Minibatch gradient `(M / |B|) sum_{r in B} a_r (a_rᵀ x − b_r)`, an
    /// unbiased estimate of the full gradient under uniform sampling.
    pub fn sampled_gradient(&self, x: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        let Self::LeastSquares { design, targets } = self else {
            return Err(Error::Capability(
                "stochastic gradients need a least-squares objective".into(),
            ));
        };
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty minibatch".into()));
        }
        let mut g = vec![0.0; design.ncols()];
        for &r in batch {
            let row = design.row(r);
            axpy(dot(row, x) - targets[r], row, &mut g);
        }
        if batch.len() != targets.len() {
            let scale = targets.len() as f64 / batch.len() as f64;
            g.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(g)
    }

    /// The objective as a function of the coordinates `idx` only.
    pub(crate) fn restrict(&self, idx: &[usize]) -> Result<Self> {
        Ok(match self {
            Self::Quadratic {
                hessian,
                linear,
                offset,
            } => Self::Quadratic {
                hessian: hessian.principal(idx),
                linear: idx.iter().map(|&c| linear[c]).collect(),
                offset: *offset,
            },
            Self::LeastSquares { design, targets } => {
                let rows: Vec<Vec<f64>> = (0..design.nrows())
                    .map(|r| idx.iter().map(|&c| design[(r, c)]).collect())
                    .collect();
                Self::LeastSquares {
                    design: DenseMatrix::from_rows(&rows)?,
                    targets: targets.clone(),
                }
            }
            Self::SinePerturbed { .. } if idx == [0] => self.clone(),
            Self::SinePerturbed { .. } => {
                return Err(Error::Config(
                    "scalar objectives cannot be partitioned".into(),
                ))
            }
        })
    }
}

fn residuals(design: &DenseMatrix, targets: &[f64], x: &[f64]) -> Vec<f64> {
    (0..design.nrows())
        .map(|r| dot(design.row(r), x) - targets[r])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ls() -> LocalObjective {
        LocalObjective::least_squares(
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]]).unwrap(),
            vec![1.0, 0.0, -2.0],
        )
    }

    #[test]
    fn scalar_quadratic_value_and_gradient() {
        let f = LocalObjective::quadratic(DenseMatrix::identity(1), vec![-1.0], 0.0);
        assert_eq!(f.value(&[1.0]), -0.5);
        assert_eq!(f.gradient(&[1.0]), vec![0.0]);
    }

    #[test]
    fn full_minibatch_equals_full_gradient_bitwise() {
        let f = ls();
        let x = [0.3, -0.7];
        assert_eq!(f.sampled_gradient(&x, &[0, 1, 2]).unwrap(), f.gradient(&x));
    }

    #[test]
    fn singleton_minibatches_average_to_full_gradient() {
        let f = ls();
        let x = [0.3, -0.7];
        let mut avg = [0.0; 2];
        for r in 0..3 {
            axpy(1.0 / 3.0, &f.sampled_gradient(&x, &[r]).unwrap(), &mut avg);
        }
        let full = f.gradient(&x);
        for (a, b) in avg.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_gradient_needs_measurements() {
        let f = LocalObjective::SinePerturbed {
            center: 0.0,
            amplitude: 0.5,
        };
        assert!(matches!(
            f.sampled_gradient(&[0.0], &[0]),
            Err(Error::Capability(_))
        ));
        assert!(!f.has_closed_form_argmin());
    }

    #[test]
    fn least_squares_quadratic_form_matches_gradient() {
        let f = ls();
        let (p, q) = f.quadratic_form().unwrap();
        let x = [1.5, 0.25];
        let mut g = p.matvec(&x);
        axpy(1.0, &q, &mut g);
        for (a, b) in g.iter().zip(f.gradient(&x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
