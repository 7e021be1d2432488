//! Low-discrepancy points in axis-aligned boxes.

use sobol::params::JoeKuoD6;
use sobol::Sobol;

/// Closed axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        BoxDomain { lo, hi }
    }

    /// `[-r, r]^d`.
    pub fn cube(d: usize, r: f64) -> Self {
        BoxDomain::new(vec![-r; d], vec![r; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// True when every axis has positive width.
    pub fn is_proper(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(a, b)| a.is_finite() && b.is_finite() && a < b)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Maps a point of the unit cube into the box.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + t * (b - a))
            .collect()
    }
}

/// The first `n` points of the Sobol sequence in `[0, 1)^dims`, starting at
/// the origin.
pub fn unit_sobol(dims: usize, n: usize) -> Vec<Vec<f64>> {
    Sobol::<f64>::new(dims, &JoeKuoD6::minimal()).take(n).collect()
}

/// The first `n` Sobol points of the product of `boxes`, split back into
/// one vector per box.
pub fn sobol_in_boxes(boxes: &[&BoxDomain], n: usize) -> Vec<Vec<Vec<f64>>> {
    let dims: usize = boxes.iter().map(|b| b.dim()).sum();
    unit_sobol(dims, n)
        .into_iter()
        .map(|u| {
            let mut off = 0;
            boxes
                .iter()
                .map(|b| {
                    let part = b.map_unit(&u[off..off + b.dim()]);
                    off += b.dim();
                    part
                })
                .collect()
        })
        .collect()
}
