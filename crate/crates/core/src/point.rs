//! Coordinate vectors, anchor sets and axis-aligned domain boxes.
//!
//! Dimension is a runtime value. Every constructor rejects NaN/Inf eagerly so
//! that downstream descent diagnostics never see a poisoned coordinate.

use std::cmp::Ordering;
use std::ops::Index;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SteinerError};

/// A point (or vector) in D-dimensional real space.
///
/// Gradients are represented with the same type; the force acting on a test
/// particle is always `-gradient` and never stored separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(SteinerError::InvalidInput(
                "a point needs at least one coordinate".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(SteinerError::NonFinite { what: "point".into() });
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Point(vec![0.0; dim])
    }

    /// Wraps coordinates already known to be finite (internal hot paths).
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }

    /// Total lexicographic order on coordinates, used for deterministic tie-breaking.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        lex_cmp(&self.0, &other.0)
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = SteinerError;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Point::new(coords).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// The n anchor points of a problem, stored row-major in one flat buffer.
///
/// Duplicate anchors are allowed; each copy contributes its own potential term.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    dim: usize,
    coords: Vec<f64>,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Point>) -> Result<Self> {
        let rows = anchors.into_iter().map(Point::into_vec).collect();
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| SteinerError::InvalidInput("anchor set must contain at least one anchor".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(SteinerError::InvalidInput("anchor 0 has no coordinates".into()));
        }
        let mut coords = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(SteinerError::InvalidInput(format!(
                    "anchor {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(SteinerError::NonFinite {
                    what: format!("anchor {i}"),
                });
            }
            coords.extend_from_slice(row);
        }
        Ok(AnchorSet { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> Point {
        Point::from_vec_unchecked(self.get(i).to_vec())
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<Point> {
        self.iter().map(|row| Point::from_vec_unchecked(row.to_vec())).collect()
    }

    /// Tight axis-aligned bounds `(lo, hi)` of the anchors.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.get(0).to_vec();
        let mut hi = lo.clone();
        for row in self.iter() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(row[k]);
                hi[k] = hi[k].max(row[k]);
            }
        }
        (lo, hi)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        distance(&lo, &hi)
    }

    /// Concatenates two anchor sets of equal dimension.
    pub fn union(&self, other: &AnchorSet) -> Result<AnchorSet> {
        if self.dim != other.dim {
            return Err(SteinerError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(AnchorSet { dim: self.dim, coords })
    }
}

/// Per-coordinate `[lo, hi]` bounds. Serialized as `[[lo, hi], ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(SteinerError::config("domain_box", "needs at least one axis"));
        }
        let mut lo = Vec::with_capacity(bounds.len());
        let mut hi = Vec::with_capacity(bounds.len());
        for (k, [l, h]) in bounds.into_iter().enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(SteinerError::config(
                    format!("domain_box[{k}]"),
                    "bounds must be finite",
                ));
            }
            if l >= h {
                return Err(SteinerError::config(
                    format!("domain_box[{k}]"),
                    format!("degenerate interval [{l}, {h}] (need lo < hi)"),
                ));
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(DomainBox { lo, hi })
    }

    /// Bounding box of the anchors widened by 20% of the extent on each side.
    ///
    /// Axes with zero extent get a margin of 20% of the anchor diagonal, or 1
    /// when all anchors coincide.
    pub fn around(anchors: &AnchorSet) -> Self {
        let (lo, hi) = anchors.bounds();
        let diag = distance(&lo, &hi);
        let fallback = if diag > 0.0 { 0.2 * diag } else { 1.0 };
        let (lo, hi) = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| {
                let margin = if h > l { 0.2 * (h - l) } else { fallback };
                (l - margin, h + margin)
            })
            .unzip();
        DomainBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn diagonal(&self) -> f64 {
        distance(&self.lo, &self.hi)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    pub fn contains_all(&self, anchors: &AnchorSet) -> bool {
        anchors.iter().all(|a| self.contains(a))
    }

    pub(crate) fn clamp(&self, p: &mut [f64]) {
        for (x, (l, h)) in p.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| [*l, *h]).collect()
    }
}

impl Serialize for DomainBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.bounds().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DomainBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bounds = Vec::<[f64; 2]>::deserialize(d)?;
        DomainBox::new(bounds).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_coordinates() {
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn anchor_rows_must_share_dimension() {
        let err = AnchorSet::from_rows(vec![vec![0.0, 0.0], vec![1.0, 2.0, 3.0]]).unwrap_err();
        assert!(err.to_string().contains("anchor 1"), "{err}");
        assert!(AnchorSet::from_rows(vec![]).is_err());
    }

    #[test]
    fn duplicate_anchors_are_kept() {
        let a = AnchorSet::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn auto_box_has_twenty_percent_margin() {
        let a = AnchorSet::from_rows(vec![vec![0.0, 0.0], vec![10.0, 5.0]]).unwrap();
        let b = DomainBox::around(&a);
        assert_eq!(b.lo(), &[-2.0, -1.0]);
        assert_eq!(b.hi(), &[12.0, 6.0]);
        assert!(b.contains_all(&a));

        let single = AnchorSet::from_rows(vec![vec![3.0]]).unwrap();
        let b = DomainBox::around(&single);
        assert_eq!(b.bounds(), vec![[2.0, 4.0]]);
    }

    #[test]
    fn degenerate_box_is_a_config_error() {
        let err = DomainBox::new(vec![[0.0, 1.0], [2.0, 2.0]]).unwrap_err();
        assert!(matches!(err, SteinerError::InvalidConfig { .. }));
        assert!(err.to_string().contains("domain_box[1]"));
    }

    #[test]
    fn lexicographic_order() {
        let a = Point::new(vec![0.0, 1.0]).unwrap();
        let b = Point::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(a.lex_cmp(&b), Ordering::Less);
        assert_eq!(b.lex_cmp(&a), Ordering::Greater);
        assert_eq!(a.lex_cmp(&a), Ordering::Equal);
    }
}
