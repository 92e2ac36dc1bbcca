//! The total potential `U(x) = sum_i dis(x - a_i)` and its gradient.

use crate::error::{Result, SteinerError};
use crate::point::{AnchorSet, Point};
use crate::potentials::{Potential, PotentialSpec, DEFAULT_EPSILON_FACTOR};

/// Gradient together with the count of anchor terms that fell back to the
/// zero subgradient (only possible with `epsilon = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEval {
    pub gradient: Point,
    pub kinks: usize,
}

/// An anchor set paired with a resolved potential. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Objective {
    anchors: AnchorSet,
    potential: Potential,
}

impl Objective {
    /// Validates `spec` against `anchors`. An unset `epsilon` becomes
    /// `1e-9 * (anchor bounding diagonal)`, or `1e-9` if all anchors coincide.
    pub fn new(anchors: AnchorSet, spec: &PotentialSpec) -> Result<Self> {
        let diag = anchors.bounding_diagonal();
        let default_epsilon = DEFAULT_EPSILON_FACTOR * if diag > 0.0 { diag } else { 1.0 };
        let potential = Potential::resolve(spec, anchors.len(), anchors.dim(), default_epsilon)?;
        Ok(Objective { anchors, potential })
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.anchors.dim()
    }

    /// Lipschitz constant of `U`, when every term has a bounded gradient.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        (0..self.anchors.len())
            .map(|i| self.potential.term_lipschitz(i, self.dim()))
            .sum()
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(SteinerError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &Point) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value_at(x.coords()))
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        Ok(self.gradient_eval(x)?.gradient)
    }

    pub fn gradient_eval(&self, x: &Point) -> Result<GradientEval> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim()];
        let (_, kinks) = self.value_and_gradient_at(x.coords(), &mut g);
        if g.iter().any(|c| !c.is_finite()) {
            return Err(SteinerError::NonFinite {
                what: "gradient".into(),
            });
        }
        Ok(GradientEval {
            gradient: Point::from_vec_unchecked(g),
            kinks,
        })
    }

    /// Central differences `(U(x + h e_k) - U(x - h e_k)) / 2h` per coordinate.
    pub fn finite_difference_gradient(&self, x: &Point, h: f64) -> Result<Point> {
        self.check_dim(x)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(SteinerError::InvalidInput(format!(
                "finite-difference step must be positive (got {h})"
            )));
        }
        let mut probe = x.coords().to_vec();
        let mut fd = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let orig = probe[k];
            probe[k] = orig + h;
            let up = self.value_at(&probe);
            probe[k] = orig - h;
            let down = self.value_at(&probe);
            probe[k] = orig;
            fd.push((up - down) / (2.0 * h));
        }
        Point::new(fd)
    }

    /// Smallest smoothness radius over all anchor terms at `x`.
    pub fn smoothness_radius(&self, x: &Point) -> f64 {
        let mut v = vec![0.0; self.dim()];
        self.anchors
            .iter()
            .map(|a| {
                displacement(x.coords(), a, &mut v);
                self.potential.smoothness_radius(&v)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nearest_anchor_distance(&self, x: &[f64]) -> f64 {
        self.anchors
            .iter()
            .map(|a| crate::point::distance(x, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// `U(y) - U(x)`, summed term by term from cancellation-free differences.
    /// Accurate for nearby points where subtracting the two values is not.
    pub fn value_change(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.change_between(x.coords(), y.coords()))
    }

    /// The step `y - x` is formed once and shared by every term, so rounding
    /// in the individual displacements `x - a_i` cannot masquerade as change.
    pub(crate) fn change_between(&self, x: &[f64], y: &[f64]) -> f64 {
        let step: Vec<f64> = y.iter().zip(x).map(|(b, a)| b - a).collect();
        let mut v = vec![0.0; x.len()];
        self.anchors
            .iter()
            .enumerate()
            .map(|(i, a)| {
                displacement(x, a, &mut v);
                self.potential.change(&v, &step, i)
            })
            .sum()
    }

    pub(crate) fn value_at(&self, x: &[f64]) -> f64 {
        let mut v = vec![0.0; x.len()];
        self.anchors
            .iter()
            .enumerate()
            .map(|(i, a)| {
                displacement(x, a, &mut v);
                self.potential.value(&v, i)
            })
            .sum()
    }

    /// Writes `grad U(x)` into `grad` and returns `(U(x), kink count)`.
    pub(crate) fn value_and_gradient_at(&self, x: &[f64], grad: &mut [f64]) -> (f64, usize) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut v = vec![0.0; x.len()];
        let mut total = 0.0;
        let mut kinks = 0;
        for (i, a) in self.anchors.iter().enumerate() {
            displacement(x, a, &mut v);
            let (val, kink) = self.potential.accumulate(&v, i, grad);
            total += val;
            kinks += kink as usize;
        }
        (total, kinks)
    }
}

fn displacement(x: &[f64], a: &[f64], out: &mut [f64]) {
    for ((o, xi), ai) in out.iter_mut().zip(x).zip(a) {
        *o = xi - ai;
    }
}
