//! Distance potentials `dis(v)` for a single anchor term, with analytic gradients.
//!
//! Norm-type potentials are hyperbolically smoothed, `sqrt(|v|^2 + eps^2) - eps`,
//! so the total potential is differentiable at the anchors while still taking
//! the value 0 there. With `eps = 0` the raw norm is used and the gradient at
//! `v = 0` is the zero subgradient, reported through a non-smoothness flag.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinerError};
use crate::point::Point;

/// Relative factor applied to the anchor bounding diagonal when `epsilon` is
/// not given explicitly.
pub const DEFAULT_EPSILON_FACTOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Euclidean,
    PNorm,
    Squared,
    WeightedEuclidean,
    GaussianWell,
}

impl PotentialKind {
    pub const ALL: [PotentialKind; 5] = [
        PotentialKind::Euclidean,
        PotentialKind::PNorm,
        PotentialKind::Squared,
        PotentialKind::WeightedEuclidean,
        PotentialKind::GaussianWell,
    ];
}

/// Declarative choice of potential as it appears in instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PotentialSpec {
    fn of(kind: PotentialKind) -> Self {
        PotentialSpec {
            kind,
            p: None,
            epsilon: None,
            sigma: None,
            weights: None,
        }
    }

    pub fn euclidean() -> Self {
        Self::of(PotentialKind::Euclidean)
    }

    pub fn p_norm(p: f64) -> Self {
        PotentialSpec {
            p: Some(p),
            ..Self::of(PotentialKind::PNorm)
        }
    }

    pub fn squared() -> Self {
        Self::of(PotentialKind::Squared)
    }

    pub fn weighted_euclidean(weights: Vec<f64>) -> Self {
        PotentialSpec {
            weights: Some(weights),
            ..Self::of(PotentialKind::WeightedEuclidean)
        }
    }

    pub fn gaussian_well(sigma: f64) -> Self {
        PotentialSpec {
            sigma: Some(sigma),
            ..Self::of(PotentialKind::GaussianWell)
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }
}

/// A validated potential with every parameter resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Euclidean {
        epsilon: f64,
    },
    PNorm {
        p: f64,
        epsilon: f64,
        dim: usize,
        offset: f64,
    },
    Squared,
    WeightedEuclidean {
        epsilon: f64,
        weights: Vec<f64>,
    },
    GaussianWell {
        sigma: f64,
    },
}

fn require_positive_finite(field: &str, value: f64) -> Result<f64> {
    if !value.is_finite() || value <= 0.0 {
        return Err(SteinerError::config(
            field,
            format!("must be a finite positive number (got {value})"),
        ));
    }
    Ok(value)
}

impl Potential {
    /// Validates `spec` for `n_anchors` anchors in `dim` dimensions. A missing
    /// `epsilon` resolves to `default_epsilon`.
    pub fn resolve(spec: &PotentialSpec, n_anchors: usize, dim: usize, default_epsilon: f64) -> Result<Self> {
        use PotentialKind::*;

        if spec.p.is_some() && spec.kind != PNorm {
            return Err(SteinerError::config("potential.p", "only valid for kind p_norm"));
        }
        if spec.sigma.is_some() && spec.kind != GaussianWell {
            return Err(SteinerError::config(
                "potential.sigma",
                "only valid for kind gaussian_well",
            ));
        }
        if spec.weights.is_some() && spec.kind != WeightedEuclidean {
            return Err(SteinerError::config(
                "potential.weights",
                "only valid for kind weighted_euclidean",
            ));
        }

        let epsilon = match spec.epsilon {
            Some(e) if !e.is_finite() || e < 0.0 => {
                return Err(SteinerError::config(
                    "potential.epsilon",
                    format!("must be finite and >= 0 (got {e})"),
                ))
            }
            Some(e) => e,
            None => default_epsilon,
        };

        Ok(match spec.kind {
            Euclidean => Potential::Euclidean { epsilon },
            Squared => Potential::Squared,
            PNorm => {
                let p = spec
                    .p
                    .ok_or_else(|| SteinerError::config("potential.p", "required for p_norm"))?;
                if !p.is_finite() || p < 1.0 {
                    return Err(SteinerError::config(
                        "potential.p",
                        format!("must be finite and >= 1 (got {p})"),
                    ));
                }
                let offset = (dim as f64).powf(1.0 / p) * epsilon;
                Potential::PNorm {
                    p,
                    epsilon,
                    dim,
                    offset,
                }
            }
            WeightedEuclidean => {
                let weights = spec
                    .weights
                    .clone()
                    .ok_or_else(|| SteinerError::config("potential.weights", "required for weighted_euclidean"))?;
                if weights.len() != n_anchors {
                    return Err(SteinerError::config(
                        "potential.weights",
                        format!("has {} entries but there are {n_anchors} anchors", weights.len()),
                    ));
                }
                for (i, w) in weights.iter().enumerate() {
                    require_positive_finite(&format!("potential.weights[{i}]"), *w)?;
                }
                Potential::WeightedEuclidean { epsilon, weights }
            }
            GaussianWell => {
                let sigma = spec
                    .sigma
                    .ok_or_else(|| SteinerError::config("potential.sigma", "required for gaussian_well"))?;
                Potential::GaussianWell {
                    sigma: require_positive_finite("potential.sigma", sigma)?,
                }
            }
        })
    }

    pub fn kind(&self) -> PotentialKind {
        match self {
            Potential::Euclidean { .. } => PotentialKind::Euclidean,
            Potential::PNorm { .. } => PotentialKind::PNorm,
            Potential::Squared => PotentialKind::Squared,
            Potential::WeightedEuclidean { .. } => PotentialKind::WeightedEuclidean,
            Potential::GaussianWell { .. } => PotentialKind::GaussianWell,
        }
    }

    /// The fully resolved spec, suitable for echoing back into output files.
    pub fn spec(&self) -> PotentialSpec {
        match self {
            Potential::Euclidean { epsilon } => PotentialSpec::euclidean().with_epsilon(*epsilon),
            Potential::PNorm { p, epsilon, .. } => PotentialSpec::p_norm(*p).with_epsilon(*epsilon),
            Potential::Squared => PotentialSpec::squared(),
            Potential::WeightedEuclidean { epsilon, weights } => {
                PotentialSpec::weighted_euclidean(weights.clone()).with_epsilon(*epsilon)
            }
            Potential::GaussianWell { sigma } => PotentialSpec::gaussian_well(*sigma),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Potential::Euclidean { epsilon }
            | Potential::PNorm { epsilon, .. }
            | Potential::WeightedEuclidean { epsilon, .. } => *epsilon,
            Potential::Squared | Potential::GaussianWell { .. } => 0.0,
        }
    }

    /// Invariant under every orthogonal map of the displacement. The p-norm
    /// family is only invariant under signed coordinate permutations unless p = 2.
    pub fn is_rotation_invariant(&self) -> bool {
        match self {
            Potential::PNorm { p, .. } => *p == 2.0,
            _ => true,
        }
    }

    /// `Some(w_i)` for the Euclidean family, the per-anchor weight of the term.
    pub fn weight(&self, anchor_index: usize) -> Option<f64> {
        match self {
            Potential::Euclidean { .. } => Some(1.0),
            Potential::WeightedEuclidean { weights, .. } => Some(weights[anchor_index]),
            _ => None,
        }
    }

    /// Upper bound on `|grad dis_i|` over all displacements, if one exists.
    pub fn term_lipschitz(&self, anchor_index: usize, dim: usize) -> Option<f64> {
        match self {
            Potential::Euclidean { .. } => Some(1.0),
            Potential::WeightedEuclidean { weights, .. } => Some(weights[anchor_index]),
            Potential::PNorm { p, .. } => {
                // |grad|_2 <= |grad|_q = 1 for q <= 2, else D^(1/2 - 1/p).
                Some((dim as f64).powf((0.5 - 1.0 / p).max(0.0)))
            }
            Potential::GaussianWell { sigma } => Some(std::f64::consts::SQRT_2 * (-0.5f64).exp() / sigma),
            Potential::Squared => None,
        }
    }

    /// Length scale below which the term is no longer well approximated by a
    /// quadratic around `v` (distance to the nearest kink of the unsmoothed form).
    pub fn smoothness_radius(&self, v: &[f64]) -> f64 {
        match self {
            Potential::Euclidean { epsilon } | Potential::WeightedEuclidean { epsilon, .. } => {
                (sq_norm(v) + epsilon * epsilon).sqrt()
            }
            Potential::PNorm { p, epsilon, .. } => {
                if *p == 2.0 {
                    (sq_norm(v) + v.len() as f64 * epsilon * epsilon).sqrt()
                } else {
                    v.iter()
                        .map(|x| (x * x + epsilon * epsilon).sqrt())
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Potential::GaussianWell { sigma } => *sigma,
            Potential::Squared => f64::INFINITY,
        }
    }

    /// `dis(v)` for the term belonging to anchor `anchor_index`.
    pub fn value(&self, v: &[f64], anchor_index: usize) -> f64 {
        match self {
            Potential::Euclidean { epsilon } => smoothed_norm(sq_norm(v), *epsilon),
            Potential::WeightedEuclidean { epsilon, weights } => {
                weights[anchor_index] * smoothed_norm(sq_norm(v), *epsilon)
            }
            Potential::Squared => sq_norm(v),
            Potential::GaussianWell { sigma } => -(-sq_norm(v) / (sigma * sigma)).exp_m1(),
            Potential::PNorm { p, epsilon, offset, .. } => p_norm_value(v, *p, *epsilon) - offset,
        }
    }

    /// Adds `scale * grad dis(v)` into `out` and returns the term value.
    /// The flag is true when the zero subgradient was used at a kink.
    pub fn accumulate(&self, v: &[f64], anchor_index: usize, out: &mut [f64]) -> (f64, bool) {
        match self {
            Potential::Euclidean { epsilon } => euclidean_accumulate(v, *epsilon, 1.0, out),
            Potential::WeightedEuclidean { epsilon, weights } => {
                euclidean_accumulate(v, *epsilon, weights[anchor_index], out)
            }
            Potential::Squared => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += 2.0 * x;
                }
                (sq_norm(v), false)
            }
            Potential::GaussianWell { sigma } => {
                let s2 = sigma * sigma;
                let q = sq_norm(v) / s2;
                let e = (-q).exp();
                let c = 2.0 * e / s2;
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
                (-(-q).exp_m1(), false)
            }
            Potential::PNorm { p, epsilon, offset, .. } => {
                let (n, kink) = p_norm_accumulate(v, *p, *epsilon, out);
                (n - offset, kink)
            }
        }
    }

    /// `dis(v + s) - dis(v)` for a small step `s`, computed from
    /// `|v + s|^2 - |v|^2 = s.(2v + s)` so the result stays accurate long after
    /// the two values agree to every printed digit. Passing the step rather
    /// than the second displacement keeps the rounding of `v` common to both ends.
    pub fn change(&self, v: &[f64], s: &[f64], anchor_index: usize) -> f64 {
        let dr2: f64 = v.iter().zip(s).map(|(a, d)| d * (2.0 * a + d)).sum();
        let r2 = sq_norm(v);
        let exact = match self {
            Potential::Squared => dr2,
            Potential::Euclidean { epsilon } => euclidean_change(r2, dr2, *epsilon),
            Potential::WeightedEuclidean { epsilon, weights } => {
                weights[anchor_index] * euclidean_change(r2, dr2, *epsilon)
            }
            Potential::GaussianWell { sigma } => {
                let s2 = sigma * sigma;
                (-r2 / s2).exp() * -(-dr2 / s2).exp_m1()
            }
            Potential::PNorm { p, epsilon, .. } => p_norm_change(v, s, *p, *epsilon),
        };
        if exact.is_finite() {
            exact
        } else {
            let moved: Vec<f64> = v.iter().zip(s).map(|(a, d)| a + d).collect();
            self.value(&moved, anchor_index) - self.value(v, anchor_index)
        }
    }
}

fn euclidean_change(r2: f64, dr2: f64, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    let den = (r2 + e2).sqrt() + ((r2 + dr2).max(0.0) + e2).sqrt();
    if den == 0.0 {
        0.0
    } else {
        dr2 / den
    }
}

/// Same scaling as [`p_norm_value`]; each power and the outer root are
/// differenced through `expm1(ln_1p(.))`. Returns NaN, making the caller fall
/// back to subtracting values, when the change is too large for that to pay.
fn p_norm_change(v: &[f64], s: &[f64], p: f64, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    let m = v.iter().map(|x| (x * x + e2).sqrt()).fold(0.0_f64, f64::max);
    if m == 0.0 {
        return f64::NAN;
    }
    let m2 = m * m;
    let (mut s0, mut ds) = (0.0, 0.0);
    for (a, d) in v.iter().zip(s) {
        let u0 = (a * a + e2) / m2;
        let du = d * (2.0 * a + d) / m2;
        let a0 = u0.powf(0.5 * p);
        s0 += a0;
        ds += if u0 == 0.0 {
            (u0 + du).powf(0.5 * p)
        } else {
            a0 * (0.5 * p * (du / u0).ln_1p()).exp_m1()
        };
    }
    if ds.abs() > 0.5 * s0 {
        return f64::NAN;
    }
    m * s0.powf(1.0 / p) * ((ds / s0).ln_1p() / p).exp_m1()
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `sqrt(r2 + eps^2) - eps`, evaluated without cancellation as `r2 / (s + eps)`.
fn smoothed_norm(r2: f64, epsilon: f64) -> f64 {
    let s = (r2 + epsilon * epsilon).sqrt();
    if s == 0.0 {
        0.0
    } else {
        r2 / (s + epsilon)
    }
}

fn euclidean_accumulate(v: &[f64], epsilon: f64, weight: f64, out: &mut [f64]) -> (f64, bool) {
    let r2 = sq_norm(v);
    let s = (r2 + epsilon * epsilon).sqrt();
    if s == 0.0 {
        return (0.0, true);
    }
    let c = weight / s;
    for (o, x) in out.iter_mut().zip(v) {
        *o += c * x;
    }
    (weight * r2 / (s + epsilon), false)
}

/// `(sum_k s_k^p)^(1/p)` with `s_k = sqrt(v_k^2 + eps^2)`, scaled by the largest
/// `s_k` to stay finite for large p.
fn p_norm_value(v: &[f64], p: f64, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    let m = v.iter().map(|x| (x * x + e2).sqrt()).fold(0.0_f64, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = v.iter().map(|x| ((x * x + e2).sqrt() / m).powf(p)).sum();
    m * sum.powf(1.0 / p)
}

fn p_norm_accumulate(v: &[f64], p: f64, epsilon: f64, out: &mut [f64]) -> (f64, bool) {
    let n = p_norm_value(v, p, epsilon);
    if n == 0.0 {
        return (0.0, true);
    }
    let e2 = epsilon * epsilon;
    let mut kink = false;
    for (o, x) in out.iter_mut().zip(v) {
        let s = (x * x + e2).sqrt();
        if s == 0.0 {
            // p = 1 has a kink here; for p > 1 the partial derivative is 0 anyway.
            kink |= p == 1.0;
            continue;
        }
        *o += (s / n).powf(p - 1.0) * (x / s);
    }
    (n, kink)
}

fn check_term_args(potential: &Potential, displacement: &Point, anchor_index: usize) -> Result<()> {
    if let Potential::WeightedEuclidean { weights, .. } = potential {
        if anchor_index >= weights.len() {
            return Err(SteinerError::InvalidInput(format!(
                "anchor index {anchor_index} out of range for {} weights",
                weights.len()
            )));
        }
    }
    if let Potential::PNorm { dim, .. } = potential {
        if displacement.dim() != *dim {
            return Err(SteinerError::DimensionMismatch {
                expected: *dim,
                found: displacement.dim(),
            });
        }
    }
    Ok(())
}

/// Value of a single potential term at `displacement = x - anchor`.
pub fn potential_value(potential: &Potential, displacement: &Point, anchor_index: usize) -> Result<f64> {
    check_term_args(potential, displacement, anchor_index)?;
    Ok(potential.value(displacement.coords(), anchor_index))
}

/// Gradient of a single potential term with respect to the displacement, and
/// whether the zero subgradient was substituted at a kink.
pub fn potential_gradient(potential: &Potential, displacement: &Point, anchor_index: usize) -> Result<(Point, bool)> {
    check_term_args(potential, displacement, anchor_index)?;
    let mut g = vec![0.0; displacement.dim()];
    let (_, kink) = potential.accumulate(displacement.coords(), anchor_index, &mut g);
    Ok((Point::from_vec_unchecked(g), kink))
}
