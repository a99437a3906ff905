use alloc::vec::Vec;

use crate::linalg::distance;
use crate::{Error, Result};

/// Local feasible set `X_i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeasibleSet {
    Unconstrained,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("box needs lower <= upper".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(
                "ball radius must be finite and >= 0".into(),
            ));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, Self::Unconstrained)
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        let found = match self {
            Self::Unconstrained => return Ok(()),
            Self::Box { lower, .. } => lower.len(),
            Self::Ball { center, .. } => center.len(),
        };
        if found != n {
            return Err(Error::Dimension { expected: n, found });
        }
        Ok(())
    }

    /// Euclidean projection.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Unconstrained => x.to_vec(),
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect(),
            Self::Ball { center, radius } => {
                let d = distance(x, center);
                // Rescaled points land within a few ulps of the sphere;
                // accept them as inside so projection is idempotent.
                let scale = center.iter().fold(*radius, |m, c| m.max(libm::fabs(*c)));
                if d <= radius + 8.0 * f64::EPSILON * scale {
                    x.to_vec()
                } else {
                    let s = radius / d;
                    x.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect()
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Self::Unconstrained => true,
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            Self::Ball { center, radius } => distance(x, center) <= radius + tol,
        }
    }

    pub(crate) fn restrict(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&c| v[c]).collect::<Vec<_>>();
        match self {
            Self::Unconstrained => Self::Unconstrained,
            Self::Box { lower, upper } => Self::Box {
                lower: pick(lower),
                upper: pick(upper),
            },
            Self::Ball { center, radius } => Self::Ball {
                center: pick(center),
                radius: *radius,
            },
        }
    }
}
