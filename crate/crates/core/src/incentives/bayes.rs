use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CDF of the withholding-proof threshold `B*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorCdf {
    /// `B*` known to equal `at`.
    PointMass {
        at: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Linear between `(bounty, cdf)` knots, 0 before the first and 1 after
    /// the last.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl PriorCdf {
    fn validate(&self) -> Result<()> {
        match self {
            PriorCdf::PointMass { at } if !(at.is_finite() && *at >= 0.0) => Err(Error::param(
                "prior",
                "point mass must be finite and nonnegative",
            )),
            PriorCdf::Uniform { low, high } if !(0.0 <= *low && low < high && high.is_finite()) => {
                Err(Error::param("prior", "uniform prior needs 0 <= low < high"))
            }
            PriorCdf::PiecewiseLinear { knots } => {
                if knots.len() < 2 || knots[0].1 != 0.0 || knots[knots.len() - 1].1 != 1.0 {
                    return Err(Error::param("prior", "knots must run from cdf 0 to cdf 1"));
                }
                if knots
                    .windows(2)
                    .any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1)
                    || knots[0].0 < 0.0
                {
                    return Err(Error::param(
                        "prior",
                        "knots must be increasing and nondecreasing",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Right-continuous `F(b) = P[B* <= b]`.
    pub fn cdf(&self, b: f64) -> f64 {
        match self {
            PriorCdf::PointMass { at } => (b >= *at) as u8 as f64,
            PriorCdf::Uniform { low, high } => ((b - low) / (high - low)).clamp(0.0, 1.0),
            PriorCdf::PiecewiseLinear { knots } => {
                if b < knots[0].0 {
                    return 0.0;
                }
                for w in knots.windows(2) {
                    let ((b0, f0), (b1, f1)) = (w[0], w[1]);
                    if b <= b1 {
                        return f0 + (f1 - f0) * (b - b0) / (b1 - b0);
                    }
                }
                1.0
            }
        }
    }

    fn has_density(&self) -> bool {
        !matches!(self, PriorCdf::PointMass { .. })
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            PriorCdf::PointMass { at } => vec![*at],
            PriorCdf::Uniform { low, high } => vec![*low, *high],
            PriorCdf::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BountyPrior {
    pub cdf: PriorCdf,
    pub u_inc: f64,
    pub u_wh: f64,
}

impl BountyPrior {
    pub fn new(cdf: PriorCdf, u_inc: f64, u_wh: f64) -> Result<Self> {
        cdf.validate()?;
        Ok(BountyPrior { cdf, u_inc, u_wh })
    }

    /// `U(B) = F(B)(U_inc - B) + (1 - F(B)) U_wh`.
    pub fn utility(&self, b: f64) -> f64 {
        let f = self.cdf.cdf(b);
        f * (self.u_inc - b) + (1.0 - f) * self.u_wh
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesOptimum {
    pub bounty: f64,
    pub expected_utility: f64,
    pub grid_resolution: f64,
    /// `f(B)(U_inc - U_wh - B) - F(B)` with `f` by central differences;
    /// absent for priors without a density.
    pub foc_residual: Option<f64>,
}

/// Maximises `U(B)` over `[0, U_inc - U_wh]` on a grid plus the prior's
/// breakpoints, then refines by golden-section search around the best
/// point.
pub fn bayesian_optimal_bounty(prior: &BountyPrior, grid_resolution: f64) -> Result<BayesOptimum> {
    if !(grid_resolution > 0.0) {
        return Err(Error::param("grid_resolution", "must be positive"));
    }
    let span = prior.u_inc - prior.u_wh;
    if span <= 0.0 {
        return Ok(BayesOptimum {
            bounty: 0.0,
            expected_utility: prior.utility(0.0),
            grid_resolution,
            foc_residual: None,
        });
    }
    let steps = (span / grid_resolution).ceil() as usize;
    if steps > 50_000_000 {
        return Err(Error::param(
            "grid_resolution",
            "grid too fine for the bounty range",
        ));
    }
    let mut candidates: Vec<f64> = (0..=steps)
        .map(|i| (i as f64 * grid_resolution).min(span))
        .collect();
    candidates.extend(
        prior
            .cdf
            .breakpoints()
            .into_iter()
            .filter(|b| (0.0..=span).contains(b)),
    );

    let mut best = (0.0, prior.utility(0.0));
    for &b in &candidates {
        let u = prior.utility(b);
        if u > best.1 {
            best = (b, u);
        }
    }

    if prior.cdf.has_density() {
        let (lo, hi) = (
            (best.0 - grid_resolution).max(0.0),
            (best.0 + grid_resolution).min(span),
        );
        let refined = golden_section_max(|b| prior.utility(b), lo, hi, 1e-12);
        let u = prior.utility(refined);
        if u > best.1 {
            best = (refined, u);
        }
    }

    let foc_residual = prior.cdf.has_density().then(|| {
        let h = (grid_resolution * 1e-3).max(1e-9);
        let b = best.0;
        let density =
            (prior.cdf.cdf(b + h) - prior.cdf.cdf((b - h).max(0.0))) / (b + h - (b - h).max(0.0));
        density * (span - b) - prior.cdf.cdf(b)
    });

    Ok(BayesOptimum {
        bounty: best.0,
        expected_utility: best.1,
        grid_resolution,
        foc_residual,
    })
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
