//! Sampled convexification certificates.
//!
//! All infima and suprema over phase space are taken over a finite
//! low-discrepancy sample of a compact box, so a `CERTIFIED` verdict speaks
//! for that box only. Reductions always run in sample order, which keeps
//! parallel and serial runs bit-identical.

mod samples;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{eig_extrema, quad, sym, sym_norm};
use crate::model::{CanonicalShift, Hamiltonian, HamiltonianJet, Lagrangian, ModelError, TerminalCost};

pub use samples::{build_samples, SampleSet};

pub const DISCLAIMER: &str = "Sampled certificate: every infimum and supremum was evaluated on a \
finite low-discrepancy sample of the declared compact boxes only. This is not a proof of global \
well-posedness on all of phase space.";

/// Tolerance below which a discriminant counts as violated.
pub const DISCRIMINANT_TOL: f64 = -1e-9;
/// Square-root arguments in `[-SQRT_CLAMP, 0)` are treated as rounding.
pub const SQRT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("evaluation failed at x={x:?}, p={p:?}: {source}")]
    Model {
        x: Vec<f64>,
        p: Vec<f64>,
        source: ModelError,
    },
    #[error("w·∂ₚₚH·w = {} < muMin at x={:?}, p={:?}", .0.value, .0.x, .0.p)]
    StrongConvexity(Witness),
    #[error("discriminant {} < 0 at x={:?}, p={:?}, w={:?}", .0.value, .0.x, .0.p, .0.w)]
    Discriminant(Witness),
    #[error("no certified alpha in [0, {alpha_max}]")]
    NoCertifiedAlpha { alpha_max: f64 },
}

/// A sample point (and direction, when relevant) with the value found there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub w: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralBounds {
    /// inf λ_min(Sym ∂ₓₚH).
    pub lambda0: f64,
    /// sup λ_max(∂ₓₓH).
    #[serde(rename = "lambdaH")]
    pub lambda_h: f64,
    /// inf λ_min(D²G) over the x-samples.
    #[serde(rename = "lambdaG")]
    pub lambda_g: f64,
    /// sup ‖∂ₚₚH‖.
    #[serde(rename = "normPP")]
    pub norm_pp: f64,
    /// inf λ_min(∂ₚₚH).
    #[serde(rename = "muPP")]
    pub mu_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaInterval {
    /// sup over samples of `(a − √(a² − bc))/c`.
    pub lower: f64,
    /// inf over samples of `(a + √(a² − bc))/c`.
    pub upper: f64,
    pub feasible: bool,
    pub lower_witness: Witness,
    pub upper_witness: Witness,
}

/// Per-sample Hessian data: `(Sym ∂ₓₚH, ∂ₓₓH, ∂ₚₚH)`.
struct Blocks {
    sxp: DMatrix<f64>,
    xx: DMatrix<f64>,
    pp: DMatrix<f64>,
}

fn eval_blocks<H: Hamiltonian + ?Sized>(h: &H, s: &SampleSet) -> Result<Vec<Blocks>, CertificateError> {
    s.points
        .par_iter()
        .map(|(x, p)| {
            h.hessian_blocks(x, p)
                .map(|b| Blocks {
                    sxp: sym(&b.xp),
                    xx: b.xx,
                    pp: b.pp,
                })
                .map_err(|source| CertificateError::Model {
                    x: x.clone(),
                    p: p.clone(),
                    source,
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `(a, b, c) = (w·Sym∂ₓₚH·w, w·∂ₓₓH·w, w·∂ₚₚH·w)`.
fn abc(b: &Blocks, w: &[f64]) -> (f64, f64, f64) {
    (quad(&b.sxp, w), quad(&b.xx, w), quad(&b.pp, w))
}

fn witness(s: &SampleSet, i: usize, w: &[f64], value: f64) -> Witness {
    Witness {
        x: s.points[i].0.clone(),
        p: s.points[i].1.clone(),
        w: w.to_vec(),
        value,
    }
}

/// Smallest Hessian eigenvalue of `G` over the x-parts of the samples.
pub fn terminal_min_eig(g: &TerminalCost, s: &SampleSet) -> Result<f64, CertificateError> {
    let vals: Vec<Result<f64, CertificateError>> = s
        .points
        .par_iter()
        .map(|(x, p)| {
            g.hessian(x)
                .map(|m| eig_extrema(&m).0)
                .map_err(|source| CertificateError::Model {
                    x: x.clone(),
                    p: p.clone(),
                    source,
                })
        })
        .collect();
    vals.into_iter()
        .try_fold(f64::INFINITY, |acc, v| Ok(acc.min(v?)))
}

pub fn spectral_bounds<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    s: &SampleSet,
) -> Result<SpectralBounds, CertificateError> {
    let blocks = eval_blocks(h, s)?;
    Ok(reduce_spectral(&blocks, terminal_min_eig(g, s)?))
}

fn reduce_spectral(blocks: &[Blocks], lambda_g: f64) -> SpectralBounds {
    let mut out = SpectralBounds {
        lambda0: f64::INFINITY,
        lambda_h: f64::NEG_INFINITY,
        lambda_g,
        norm_pp: 0.0,
        mu_pp: f64::INFINITY,
    };
    for b in blocks {
        out.lambda0 = out.lambda0.min(eig_extrema(&b.sxp).0);
        out.lambda_h = out.lambda_h.max(eig_extrema(&b.xx).1);
        let (lo, _) = eig_extrema(&b.pp);
        out.norm_pp = out.norm_pp.max(sym_norm(&b.pp));
        out.mu_pp = out.mu_pp.min(lo);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
pub enum DiscriminantCheck {
    Pass { margin: f64 },
    Violation { witness: Witness },
}

pub fn check_discriminant<H: Hamiltonian + ?Sized>(
    h: &H,
    s: &SampleSet,
) -> Result<DiscriminantCheck, CertificateError> {
    Ok(discriminant(&eval_blocks(h, s)?, s))
}

fn discriminant(blocks: &[Blocks], s: &SampleSet) -> DiscriminantCheck {
    let mut worst = (f64::INFINITY, 0, 0);
    for (i, b) in blocks.iter().enumerate() {
        for (k, w) in s.directions[i].iter().enumerate() {
            let (a, bb, c) = abc(b, w);
            let disc = a * a - c * bb;
            if disc < worst.0 {
                worst = (disc, i, k);
            }
        }
    }
    let (value, i, k) = worst;
    if value < DISCRIMINANT_TOL {
        DiscriminantCheck::Violation {
            witness: witness(s, i, &s.directions[i][k], value),
        }
    } else {
        DiscriminantCheck::Pass { margin: value }
    }
}

pub fn alpha_interval<H: Hamiltonian + ?Sized>(
    h: &H,
    s: &SampleSet,
    mu_min: f64,
) -> Result<AlphaInterval, CertificateError> {
    interval(&eval_blocks(h, s)?, s, mu_min)
}

fn interval(blocks: &[Blocks], s: &SampleSet, mu_min: f64) -> Result<AlphaInterval, CertificateError> {
    let mut lower = (f64::NEG_INFINITY, 0, 0);
    let mut upper = (f64::INFINITY, 0, 0);
    for (i, b) in blocks.iter().enumerate() {
        for (k, w) in s.directions[i].iter().enumerate() {
            let (a, bb, c) = abc(b, w);
            if !(c >= mu_min) {
                return Err(CertificateError::StrongConvexity(witness(s, i, w, c)));
            }
            let mut disc = a * a - bb * c;
            if disc < 0.0 {
                if disc >= -SQRT_CLAMP {
                    disc = 0.0;
                } else {
                    return Err(CertificateError::Discriminant(witness(s, i, w, disc)));
                }
            }
            let r = disc.sqrt();
            let lo = (a - r) / c;
            let hi = (a + r) / c;
            if lo > lower.0 {
                lower = (lo, i, k);
            }
            if hi < upper.0 {
                upper = (hi, i, k);
            }
        }
    }
    Ok(AlphaInterval {
        lower: lower.0,
        upper: upper.0,
        feasible: lower.0 <= upper.0,
        lower_witness: witness(s, lower.1, &s.directions[lower.1][lower.2], lower.0),
        upper_witness: witness(s, upper.1, &s.directions[upper.1][upper.2], upper.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    NotCertified,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "CERTIFIED",
            Verdict::NotCertified => "NOT_CERTIFIED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Which of the two sufficient cases of condition (iii) holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum WellposednessCase {
    /// `λ_H ≤ 0`: the discriminant condition holds trivially and every
    /// minus-root is non-positive.
    ConcaveInX,
    /// `λ₀ ≥ 0` with `λ_H > 0`: the discriminant follows from
    /// `λ₀² ≥ ‖∂ₚₚH‖ λ_H` and minus-roots are bounded by
    /// `(λ₀ − √(λ₀² − ‖∂ₚₚH‖ λ_H)) / ‖∂ₚₚH‖`.
    MonotoneCrossTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub passed: bool,
    /// Non-negative exactly when the condition holds.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Range of α guaranteed by the spectral bounds alone, before sampling
/// directions: the minus and plus roots of
/// `λ_H − 2αλ₀ + α²‖∂ₚₚH‖ = 0`, with the lower end replaced by 0 in the
/// concave-in-x case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremBounds {
    pub case: WellposednessCase,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub spectral: SpectralBounds,
    pub interval: Option<AlphaInterval>,
    pub theorem: Option<TheoremBounds>,
    pub verdict: Verdict,
    pub chosen_alpha: Option<f64>,
    pub conditions: Vec<Condition>,
    pub disclaimer: &'static str,
}

impl CertificateReport {
    /// The admissible lower end `max(lemma lower, −λ_G)` and the lemma upper
    /// end, when the interval could be computed.
    pub fn admissible_interval(&self) -> Option<(f64, f64)> {
        self.interval
            .as_ref()
            .map(|iv| (iv.lower.max(-self.spectral.lambda_g), iv.upper))
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn cond(name: &'static str, margin: f64, witness: Option<Witness>) -> Condition {
    Condition {
        name,
        passed: margin >= 0.0,
        margin,
        witness,
    }
}

/// Evaluates the three spectral conditions, then the sampled lemma
/// conditions (discriminant, non-empty interval, convexity of the shifted
/// terminal cost at the chosen α).
pub fn check_wellposedness<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    s: &SampleSet,
    mu_min: f64,
) -> Result<CertificateReport, CertificateError> {
    let blocks = eval_blocks(h, s)?;
    let spectral = reduce_spectral(&blocks, terminal_min_eig(g, s)?);
    let SpectralBounds {
        lambda0: l0,
        lambda_h: lh,
        lambda_g: lg,
        norm_pp: npp,
        mu_pp,
    } = spectral;
    let mut conditions = Vec::new();

    let strongly_convex = mu_pp >= mu_min;
    conditions.push(cond("strongConvexityInP", mu_pp - mu_min, None));

    // (i) λ₀² ≥ ‖∂ₚₚH‖ λ_H
    let radicand = l0 * l0 - npp * lh;
    conditions.push(cond("discriminantBound", radicand, None));
    // (ii) λ₀ + √(λ₀² − ‖∂ₚₚH‖ λ_H) + ‖∂ₚₚH‖ λ_G ≥ 0; undefined when (i) fails.
    let root = if radicand >= -SQRT_CLAMP { radicand.max(0.0).sqrt() } else { f64::NAN };
    let m2 = l0 + root + npp * lg;
    conditions.push(Condition {
        name: "terminalConvexification",
        passed: m2 >= 0.0,
        margin: if m2.is_nan() { f64::NEG_INFINITY } else { m2 },
        witness: None,
    });
    // (iii) λ_H ≤ 0 or λ₀ ≥ 0.
    let case = if lh <= 0.0 {
        Some(WellposednessCase::ConcaveInX)
    } else if l0 >= 0.0 {
        Some(WellposednessCase::MonotoneCrossTerm)
    } else {
        None
    };
    conditions.push(cond("caseCondition", (-lh).max(l0), None));

    let theorem = match (case, root.is_nan() || npp <= 0.0) {
        (Some(case), false) => Some(match case {
            WellposednessCase::ConcaveInX => TheoremBounds {
                case,
                lower: 0.0,
                upper: (l0 + root) / npp,
            },
            WellposednessCase::MonotoneCrossTerm => TheoremBounds {
                case,
                lower: (l0 - root) / npp,
                upper: (l0 + root) / npp,
            },
        }),
        _ => None,
    };

    if !strongly_convex {
        return Ok(CertificateReport {
            spectral,
            interval: None,
            theorem,
            verdict: Verdict::Inconclusive,
            chosen_alpha: None,
            conditions,
            disclaimer: DISCLAIMER,
        });
    }

    let disc = discriminant(&blocks, s);
    let (interval, disc_cond) = match disc {
        DiscriminantCheck::Pass { margin } => (
            Some(interval(&blocks, s, mu_min)?),
            cond("sampledDiscriminant", margin, None),
        ),
        DiscriminantCheck::Violation { witness } => {
            (None, cond("sampledDiscriminant", witness.value, Some(witness)))
        }
    };
    conditions.push(disc_cond);

    let mut chosen = None;
    if let Some(iv) = &interval {
        let alpha = iv.lower.max(-lg);
        chosen = Some(alpha);
        let slack = 1e-9 * (1.0 + alpha.abs());
        conditions.push(Condition {
            name: "alphaAdmissible",
            passed: alpha <= iv.upper + slack,
            margin: iv.upper - alpha,
            witness: Some(iv.upper_witness.clone()),
        });
        conditions.push(cond(
            "shiftedTerminalConvex",
            terminal_min_eig(&g.shifted(alpha), s)? + 1e-9,
            None,
        ));
    }

    let verdict = if conditions.iter().all(|c| c.passed) {
        Verdict::Certified
    } else {
        Verdict::NotCertified
    };
    Ok(CertificateReport {
        spectral,
        interval,
        theorem,
        verdict,
        chosen_alpha: chosen.filter(|_| verdict == Verdict::Certified),
        conditions,
        disclaimer: DISCLAIMER,
    })
}

/// The two Hamiltonian families of the corollary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum CorollaryVariant {
    /// `H(x, p) + α x·p`.
    CrossTerm,
    /// `H(x, p) − α|x|²/2`.
    ConcaveWell,
}

/// `H` modified by one of the corollary terms with weight `alpha`.
pub struct Modified<'a, H: ?Sized> {
    pub inner: &'a H,
    pub variant: CorollaryVariant,
    pub alpha: f64,
}

impl<'a, H: Hamiltonian + ?Sized> Hamiltonian for Modified<'a, H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64], p: &[f64]) -> Result<f64, ModelError> {
        let v = self.inner.value(x, p)?;
        Ok(match self.variant {
            CorollaryVariant::CrossTerm => v + self.alpha * crate::linalg::dot(x, p),
            CorollaryVariant::ConcaveWell => v - 0.5 * self.alpha * crate::linalg::dot(x, x),
        })
    }

    fn jet(&self, x: &[f64], p: &[f64]) -> Result<HamiltonianJet, ModelError> {
        let mut j = self.inner.jet(x, p)?;
        let a = self.alpha;
        let d = x.len();
        let xs = DVector::from_column_slice(x);
        match self.variant {
            CorollaryVariant::CrossTerm => {
                j.value += a * xs.dot(&DVector::from_column_slice(p));
                j.dx += DVector::from_column_slice(p) * a;
                j.dp += &xs * a;
                j.xp += DMatrix::identity(d, d) * a;
            }
            CorollaryVariant::ConcaveWell => {
                j.value -= 0.5 * a * xs.dot(&xs);
                j.dx -= &xs * a;
                j.xx -= DMatrix::identity(d, d) * a;
            }
        }
        Ok(j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryResult {
    pub variant: CorollaryVariant,
    /// Smallest certified weight, to within `tolerance`.
    pub alpha: f64,
    pub tolerance: f64,
    pub evaluations: usize,
}

/// Smallest `α ∈ [0, α_max]` for which the modified Hamiltonian is
/// certified, by bisection to `1e-3`. Certification is assumed monotone in
/// `α`, which holds for both families.
pub fn corollary_threshold<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    variant: CorollaryVariant,
    s: &SampleSet,
    mu_min: f64,
    alpha_max: f64,
) -> Result<CorollaryResult, CertificateError> {
    const TOL: f64 = 1e-3;
    if !(alpha_max >= 0.0) {
        return Err(CertificateError::Input("alpha_max must be non-negative".into()));
    }
    let base = spectral_bounds(h, g, s)?;
    if base.mu_pp < mu_min {
        return Err(CertificateError::Input(format!(
            "H(x, ·) is not uniformly strongly convex on the samples (muPP = {:e} < {:e})",
            base.mu_pp, mu_min
        )));
    }
    let mut evaluations = 0;
    let mut certified = |alpha: f64| -> Result<bool, CertificateError> {
        evaluations += 1;
        let m = Modified { inner: h, variant, alpha };
        Ok(check_wellposedness(&m, g, s, mu_min)?.verdict == Verdict::Certified)
    };
    if certified(0.0)? {
        return Ok(CorollaryResult { variant, alpha: 0.0, tolerance: TOL, evaluations: 1 });
    }
    if !certified(alpha_max)? {
        return Err(CertificateError::NoCertifiedAlpha { alpha_max });
    }
    let (mut lo, mut hi) = (0.0, alpha_max);
    while hi - lo > TOL {
        let mid = 0.5 * (lo + hi);
        if certified(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CorollaryResult { variant, alpha: hi, tolerance: TOL, evaluations })
}

/// Smallest eigenvalue of the joint `(x, v)` Hessian of `L` over the
/// samples, reading each sample's second component as `v`.
pub fn joint_convexity_min_eig<L: Lagrangian + ?Sized>(
    l: &L,
    s: &SampleSet,
) -> Result<f64, CertificateError> {
    let vals: Vec<Result<f64, CertificateError>> = s
        .points
        .par_iter()
        .map(|(x, v)| {
            l.jet(x, v)
                .map(|j| eig_extrema(&j.joint_hessian()).0)
                .map_err(|source| CertificateError::Model {
                    x: x.clone(),
                    p: v.clone(),
                    source,
                })
        })
        .collect();
    vals.into_iter().try_fold(f64::INFINITY, |acc, v| Ok(acc.min(v?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HamiltonianModel, LagrangianModel};
    use crate::sampling::BoxDomain;

    fn samples(n: usize) -> SampleSet {
        let b = BoxDomain::cube(1, 6.0);
        build_samples(&b, &b, n, 8, 1).unwrap()
    }

    fn h(src: &str) -> HamiltonianModel {
        HamiltonianModel::parse(src, 1).unwrap()
    }

    fn g(src: &str) -> TerminalCost {
        TerminalCost::parse(src, 1).unwrap()
    }

    #[test]
    fn spectral_bounds_of_fixtures() {
        let s = samples(512);
        let b = spectral_bounds(&h("0.5*p1^2 + x1*p1"), &g("cos(x1)"), &s).unwrap();
        assert_eq!((b.lambda0, b.lambda_h, b.lambda_g, b.norm_pp, b.mu_pp), (1.0, 0.0, -1.0, 1.0, 1.0));
        let b = spectral_bounds(&h("0.5*p1^2"), &g("0.5*x1^2"), &s).unwrap();
        assert_eq!((b.lambda0, b.lambda_h, b.lambda_g, b.norm_pp), (0.0, 0.0, 1.0, 1.0));
        let b = spectral_bounds(&h("0.5*p1^2 - cos(x1)"), &g("cos(x1)"), &s).unwrap();
        assert_eq!(b.lambda_h, 1.0);
    }

    #[test]
    fn discriminant_fixtures() {
        let s = samples(128);
        assert_eq!(
            check_discriminant(&h("0.5*p1^2 + x1*p1"), &s).unwrap(),
            DiscriminantCheck::Pass { margin: 1.0 }
        );
        assert_eq!(
            check_discriminant(&h("0.5*p1^2 - 0.5*x1^2"), &s).unwrap(),
            DiscriminantCheck::Pass { margin: 1.0 }
        );
        match check_discriminant(&h("0.5*p1^2 + 0.5*x1^2"), &s).unwrap() {
            DiscriminantCheck::Violation { witness } => assert_eq!(witness.value, -1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interval_fixtures() {
        let s = samples(128);
        let iv = alpha_interval(&h("0.5*p1^2 + 2*x1*p1 + 1.5*x1^2"), &s, 1e-6).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.0, 3.0));
        let iv = alpha_interval(&h("0.5*p1^2"), &s, 1e-6).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));
        assert!(iv.feasible);
        let iv = alpha_interval(&h("0.5*p1^2 + x1*p1"), &s, 1e-6).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 2.0));
        assert!(matches!(
            alpha_interval(&h("0.5*p1^2 + 0.5*x1^2"), &s, 1e-6),
            Err(CertificateError::Discriminant(_))
        ));
        assert!(matches!(
            alpha_interval(&h("x1*p1"), &s, 1e-6),
            Err(CertificateError::StrongConvexity(_))
        ));
    }

    #[test]
    fn wellposedness_fixtures() {
        let s = samples(512);
        let r = check_wellposedness(&h("0.5*p1^2 + x1*p1"), &g("cos(x1)"), &s, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        assert_eq!(r.chosen_alpha, Some(1.0));
        assert_eq!(r.admissible_interval(), Some((1.0, 2.0)));
        assert_eq!(r.theorem.unwrap().case, WellposednessCase::ConcaveInX);

        let r = check_wellposedness(&h("0.5*p1^2"), &g("cos(x1)"), &s, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::NotCertified);
        let iv = r.interval.as_ref().unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));
        assert!(!r.condition("terminalConvexification").unwrap().passed);
        assert_eq!(r.chosen_alpha, None);

        let r = check_wellposedness(&h("0.5*p1^2"), &g("0.5*x1^2"), &s, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Certified);
        assert_eq!(r.chosen_alpha, Some(0.0));

        let r = check_wellposedness(&h("x1*p1"), &g("0.5*x1^2"), &s, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn second_case_path() {
        // λ_H = 1 > 0 but λ₀ = 2 ≥ 0.
        let s = samples(256);
        let r = check_wellposedness(&h("0.5*p1^2 + 2*x1*p1 + 0.5*x1^2"), &g("0.5*x1^2"), &s, 1e-6).unwrap();
        let t = r.theorem.unwrap();
        assert_eq!(t.case, WellposednessCase::MonotoneCrossTerm);
        assert!((t.lower - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Certified);
        // Neither case: λ_H > 0 and λ₀ < 0.
        let r = check_wellposedness(&h("0.5*p1^2 - 2*x1*p1 + 0.5*x1^2"), &g("0.5*x1^2"), &s, 1e-6).unwrap();
        assert!(r.theorem.is_none());
        assert_eq!(r.verdict, Verdict::NotCertified);
    }

    #[test]
    fn corollary_variants() {
        let s = samples(256);
        let base = h("0.5*p1^2");
        let cos = g("cos(x1)");
        let r = corollary_threshold(&base, &cos, CorollaryVariant::ConcaveWell, &s, 1e-6, 4.0).unwrap();
        assert!((r.alpha - 1.0).abs() <= 1e-3, "{r:?}");
        let r = corollary_threshold(&base, &cos, CorollaryVariant::CrossTerm, &s, 1e-6, 4.0).unwrap();
        assert!((r.alpha - 0.5).abs() <= 1e-3, "{r:?}");
        let r = corollary_threshold(&base, &g("0.5*x1^2"), CorollaryVariant::ConcaveWell, &s, 1e-6, 4.0).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert!(matches!(
            corollary_threshold(&base, &cos, CorollaryVariant::ConcaveWell, &s, 1e-6, 0.5),
            Err(CertificateError::NoCertifiedAlpha { .. })
        ));
    }

    #[test]
    fn joint_convexity_round_trip() {
        let s = samples(64);
        let l = LagrangianModel::parse("0.5*v1^2 + 0.5*x1^2", 1).unwrap();
        assert!((joint_convexity_min_eig(&l, &s).unwrap() - 1.0).abs() < 1e-12);
        assert!((joint_convexity_min_eig(&l.shifted(2.0), &s).unwrap() + 1.0).abs() < 1e-12);
        assert!((joint_convexity_min_eig(&l.shifted(2.0).shifted(-2.0), &s).unwrap() - 1.0).abs() < 1e-12);
    }
}
