//! Analytic gradient versus central differences at random points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinerError};
use crate::objective::Objective;
use crate::point::{DomainBox, Point};

/// Pass threshold on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub samples: usize,
    /// Finite-difference step relative to the domain box diagonal.
    pub h: f64,
    pub seed: u64,
    pub domain_box: Option<DomainBox>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            samples: 1000,
            h: 1e-5,
            seed: 0,
            domain_box: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub samples: usize,
    pub h: f64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub worst_point: Point,
    pub passed: bool,
}

pub fn gradient_check(obj: &Objective, cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    gradient_check_with(obj, cfg, |x| obj.gradient(x))
}

/// Checks `gradient` (normally [`Objective::gradient`]) against central
/// differences of `obj`. Sample points are drawn uniformly from the domain
/// box, rejecting any within `10 * epsilon` of an anchor.
///
/// The step at `x` is `min(h * diag, 1e-3 * r(x))` with `r` the smoothness
/// radius, and the error is `|g - fd| / max(|g|, |fd|, |U(x)| / diag)`; the
/// last term keeps the ratio meaningful where the gradient nearly cancels.
pub fn gradient_check_with<F>(obj: &Objective, cfg: &GradcheckConfig, gradient: F) -> Result<GradcheckReport>
where
    F: Fn(&Point) -> Result<Point>,
{
    if cfg.samples == 0 {
        return Err(SteinerError::config("samples", "must be at least 1"));
    }
    if !(cfg.h > 0.0 && cfg.h.is_finite()) {
        return Err(SteinerError::config(
            "h",
            format!("must be a finite positive number (got {})", cfg.h),
        ));
    }
    let dbox = cfg
        .domain_box
        .clone()
        .unwrap_or_else(|| DomainBox::around(obj.anchors()));
    let diag = dbox.diagonal();
    let exclusion = 10.0 * obj.potential().epsilon();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut max_err = 0.0f64;
    let mut sum_err = 0.0;
    let mut worst = None;
    for _ in 0..cfg.samples {
        let x = loop {
            let c: Vec<f64> = dbox
                .lo()
                .iter()
                .zip(dbox.hi())
                .map(|(l, h)| l + rng.gen::<f64>() * (h - l))
                .collect();
            if obj.nearest_anchor_distance(&c) >= exclusion.max(f64::MIN_POSITIVE) {
                break Point::new(c)?;
            }
        };
        let step = (cfg.h * diag).min(1e-3 * obj.smoothness_radius(&x));
        let fd = obj.finite_difference_gradient(&x, step)?;
        let g = gradient(&x)?;
        if g.dim() != x.dim() {
            return Err(SteinerError::DimensionMismatch {
                expected: x.dim(),
                found: g.dim(),
            });
        }
        let diff = g.distance(&fd);
        let scale = g.norm().max(fd.norm()).max(obj.objective_value(&x)?.abs() / diag);
        let err = if diff == 0.0 { 0.0 } else { diff / scale };
        let err = if err.is_nan() { f64::INFINITY } else { err };
        sum_err += err;
        if worst.is_none() || err > max_err {
            max_err = err;
            worst = Some(x);
        }
    }
    Ok(GradcheckReport {
        samples: cfg.samples,
        h: cfg.h,
        tolerance: GRADCHECK_TOLERANCE,
        max_rel_error: max_err,
        mean_rel_error: sum_err / cfg.samples as f64,
        worst_point: worst.expect("at least one sample"),
        passed: max_err <= GRADCHECK_TOLERANCE,
    })
}
