use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::CertificateError;
use crate::sampling::{sobol_in_boxes, BoxDomain};

/// Quasi-random `(x, p)` points with a fixed set of unit directions at each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub xbox: BoxDomain,
    pub pbox: BoxDomain,
    pub seed: u64,
    /// Random directions per point; the `2d` axis directions come on top.
    pub random_directions: usize,
    pub points: Vec<(Vec<f64>, Vec<f64>)>,
    pub directions: Vec<Vec<Vec<f64>>>,
}

impl SampleSet {
    pub fn dim(&self) -> usize {
        self.xbox.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `n` points with their directions; Sobol prefixes make this
    /// a subset of `self`.
    pub fn prefix(&self, n: usize) -> SampleSet {
        SampleSet {
            points: self.points[..n].to_vec(),
            directions: self.directions[..n].to_vec(),
            ..self.clone()
        }
    }
}

/// `n` Sobol points over `xbox × pbox`, each carrying `m` seeded uniform unit
/// directions followed by `±e_i`.
pub fn build_samples(
    xbox: &BoxDomain,
    pbox: &BoxDomain,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<SampleSet, CertificateError> {
    let d = xbox.dim();
    if d == 0 || pbox.dim() != d {
        return Err(CertificateError::Input(format!(
            "x-box and p-box dimensions differ ({} vs {})",
            d,
            pbox.dim()
        )));
    }
    if !xbox.is_proper() || !pbox.is_proper() {
        return Err(CertificateError::Input("sample box has an axis with lo >= hi".into()));
    }
    if n == 0 || m == 0 {
        return Err(CertificateError::Input("sample and direction counts must be positive".into()));
    }
    let points: Vec<_> = sobol_in_boxes(&[xbox, pbox], n)
        .into_iter()
        .map(|mut pair| {
            let p = pair.pop().unwrap();
            let x = pair.pop().unwrap();
            (x, p)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions = (0..n)
        .map(|_| {
            let mut dirs = Vec::with_capacity(m + 2 * d);
            while dirs.len() < m {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let r = crate::linalg::norm(&g);
                if r > 1e-8 {
                    dirs.push(g.iter().map(|a| a / r).collect());
                }
            }
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    dirs.push(e);
                }
            }
            dirs
        })
        .collect();
    Ok(SampleSet {
        xbox: xbox.clone(),
        pbox: pbox.clone(),
        seed,
        random_directions: m,
        points,
        directions,
    })
}
