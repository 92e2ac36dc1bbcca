#![allow(dead_code)]

use proptest::prelude::*;
use steiner_core::{AnchorSet, Point};

pub fn pt(c: &[f64]) -> Point {
    Point::new(c.to_vec()).unwrap()
}

pub fn anchor_rows(dim: usize, n: std::ops::RangeInclusive<usize>, span: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-span..span, dim), n)
}

pub fn anchors(rows: Vec<Vec<f64>>) -> AnchorSet {
    AnchorSet::from_rows(rows).unwrap()
}

/// Orthonormal matrix from Gram-Schmidt on the given rows (assumed independent).
pub fn orthonormalize(mut m: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let d = m.len();
    for i in 0..d {
        for j in 0..i {
            let dot: f64 = (0..d).map(|k| m[i][k] * m[j][k]).sum();
            let prev = m[j].clone();
            m[i].iter_mut().zip(&prev).for_each(|(a, b)| *a -= dot * b);
        }
        let n: f64 = m[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-3 {
            return None;
        }
        m[i].iter_mut().for_each(|x| *x /= n);
    }
    Some(m)
}

pub fn rotation(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, dim), dim)
        .prop_filter_map("degenerate basis", orthonormalize)
}

pub fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}
