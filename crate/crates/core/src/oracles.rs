//! Independent reference solvers. Nothing here touches the flow code; the
//! only shared piece is objective evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinerError};
use crate::objective::Objective;
use crate::point::{distance, AnchorSet, DomainBox, Point};
use crate::potentials::PotentialSpec;

/// Guard on the number of lattice nodes `grid_search` will visit.
pub const MAX_GRID_CELLS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Weiszfeld,
    Centroid,
    GridSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub method: OracleMethod,
    pub location: Point,
    /// Objective re-evaluated at `location`.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_scanned: Option<u64>,
    pub converged: bool,
    /// Objective change `U(x_k+1) - U(x_k)` of each Weiszfeld iterate,
    /// computed term by term so rounding in `U` itself does not mask it.
    #[serde(skip)]
    pub changes: Vec<f64>,
}

/// Weiszfeld iteration for the (weighted) geometric median, started from the
/// weighted centroid. Values are those of the unsmoothed Euclidean objective.
///
/// Anchors are handled with the classical vertex test: an anchor is optimal
/// iff the pull of the other anchors does not exceed its own weight. The test
/// runs for every anchor before iterating (the iteration only creeps toward
/// an optimal anchor), and again whenever an iterate lands within `tol` of
/// one, in which case a failed test pushes the iterate off along the descent
/// direction.
pub fn weiszfeld(anchors: &AnchorSet, weights: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<OracleReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SteinerError::config(
            "tol",
            format!("must be a finite positive number (got {tol})"),
        ));
    }
    let spec = match weights {
        Some(w) => PotentialSpec::weighted_euclidean(w.to_vec()),
        None => PotentialSpec::euclidean(),
    }
    .with_epsilon(0.0);
    let obj = Objective::new(anchors.clone(), &spec)?;
    let n = anchors.len();
    let dim = anchors.dim();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total_weight: f64 = (0..n).map(w).sum();

    let mut x = vec![0.0; dim];
    for (i, a) in anchors.iter().enumerate() {
        for (xk, ak) in x.iter_mut().zip(a) {
            *xk += w(i) * ak;
        }
    }
    x.iter_mut().for_each(|c| *c /= total_weight);

    let mut changes = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    if let Some(i) = (0..n).find(|&i| vertex_escape(anchors, &w, i).is_none()) {
        let location = anchors.point(i);
        return Ok(OracleReport {
            method: OracleMethod::Weiszfeld,
            value: obj.objective_value(&location)?,
            location,
            iterations: Some(0),
            cells_scanned: None,
            converged: true,
            changes,
        });
    }

    while iterations < max_iter {
        iterations += 1;
        let next = match anchors.iter().position(|a| distance(&x, a) <= tol) {
            Some(i) => match vertex_escape(anchors, &w, i) {
                None => {
                    let a = anchors.get(i);
                    changes.push(obj.change_between(&x, a));
                    x = a.to_vec();
                    converged = true;
                    break;
                }
                Some(p) => p,
            },
            None => {
                let mut num = vec![0.0; dim];
                let mut den = 0.0;
                for (i, a) in anchors.iter().enumerate() {
                    let c = w(i) / distance(&x, a);
                    den += c;
                    for (nk, ak) in num.iter_mut().zip(a) {
                        *nk += c * ak;
                    }
                }
                num.iter_mut().for_each(|c| *c /= den);
                num
            }
        };
        let step = distance(&x, &next);
        let change = obj.change_between(&x, &next);
        // The iteration is monotone in exact arithmetic; an increase means
        // rounding has taken over, so keep the better iterate and stop.
        if change > 0.0 {
            break;
        }
        x = next;
        changes.push(change);
        if step <= tol {
            converged = true;
            break;
        }
    }

    let location = Point::new(x)?;
    Ok(OracleReport {
        method: OracleMethod::Weiszfeld,
        value: obj.objective_value(&location)?,
        location,
        iterations: Some(iterations),
        cells_scanned: None,
        converged,
        changes,
    })
}

/// `None` if anchor `i` is optimal, otherwise the point reached by the
/// standard escape step away from it.
fn vertex_escape(anchors: &AnchorSet, w: &dyn Fn(usize) -> f64, i: usize) -> Option<Vec<f64>> {
    let ai = anchors.get(i);
    let dim = anchors.dim();
    let mut pull = vec![0.0; dim];
    let mut own = 0.0;
    let mut inv_sum = 0.0;
    for (j, aj) in anchors.iter().enumerate() {
        let d = distance(ai, aj);
        if d == 0.0 {
            // coincident copies share the vertex weight
            own += w(j);
            continue;
        }
        inv_sum += w(j) / d;
        for k in 0..dim {
            pull[k] += w(j) * (ai[k] - aj[k]) / d;
        }
    }
    let r = crate::point::norm(&pull);
    if r <= own {
        return None;
    }
    let t = (r - own) / inv_sum;
    Some((0..dim).map(|k| ai[k] - t * pull[k] / r).collect())
}

/// Arithmetic mean of the anchors, valued under the squared potential.
pub fn centroid(anchors: &AnchorSet) -> Result<OracleReport> {
    let n = anchors.len() as f64;
    let mut c = vec![0.0; anchors.dim()];
    for a in anchors.iter() {
        for (ck, ak) in c.iter_mut().zip(a) {
            *ck += ak;
        }
    }
    c.iter_mut().for_each(|x| *x /= n);
    let location = Point::new(c)?;
    let obj = Objective::new(anchors.clone(), &PotentialSpec::squared())?;
    Ok(OracleReport {
        method: OracleMethod::Centroid,
        value: obj.objective_value(&location)?,
        location,
        iterations: None,
        cells_scanned: None,
        converged: true,
        changes: Vec::new(),
    })
}

/// Evaluates `obj` on the nodes `lo + k * spacing` inside `domain_box` and
/// returns the best one. Ties go to the lexicographically smallest node.
pub fn grid_search(obj: &Objective, domain_box: &DomainBox, spacing: f64) -> Result<OracleReport> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(SteinerError::config(
            "spacing",
            format!("must be a finite positive number (got {spacing})"),
        ));
    }
    if domain_box.dim() != obj.dim() {
        return Err(SteinerError::DimensionMismatch {
            expected: obj.dim(),
            found: domain_box.dim(),
        });
    }
    let (lo, hi) = (domain_box.lo(), domain_box.hi());
    let counts: Vec<u64> = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| ((h - l) / spacing + 1e-9).floor() as u64 + 1)
        .collect();
    let total = counts
        .iter()
        .try_fold(1u64, |acc, &c| acc.checked_mul(c).filter(|&t| t <= MAX_GRID_CELLS))
        .ok_or_else(|| {
            SteinerError::config(
                "spacing",
                format!("lattice would exceed {MAX_GRID_CELLS} cells; use a coarser spacing"),
            )
        })?;

    let node = |mut idx: u64, out: &mut [f64]| {
        // first axis varies slowest, so index order is lexicographic order
        for k in (0..out.len()).rev() {
            out[k] = lo[k] + (idx % counts[k]) as f64 * spacing;
            idx /= counts[k];
        }
    };
    let (best_value, best_idx) = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; obj.dim()],
            |buf, idx| {
                node(idx, buf);
                (obj.value_at(buf), idx)
            },
        )
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    debug_assert!(best_value.is_finite());

    let mut c = vec![0.0; obj.dim()];
    node(best_idx, &mut c);
    let location = Point::new(c)?;
    Ok(OracleReport {
        method: OracleMethod::GridSearch,
        value: obj.objective_value(&location)?,
        location,
        iterations: None,
        cells_scanned: Some(total),
        converged: true,
        changes: Vec::new(),
    })
}
