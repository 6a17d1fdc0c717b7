//! Variance estimators for the internal pilot study and the sampling laws of
//! the blinded ones.
//!
//! | method | needs | bias |
//! |---|---|---|
//! | [`Estimator::Pooled`] | group labels (unblinded) | none |
//! | [`Estimator::OneSample`] | nothing | between-group spread |
//! | [`Estimator::AdjustedOneSample`] | planning means | none if the planning means are right |
//! | [`Estimator::XingGanju`] | block membership | none |

use crate::design::Arm;
use crate::error::{Error, Result};
use crate::statcore::{chisq_cdf, chisq_noncentral_cdf, chisq_noncentral_pdf, chisq_pdf, find_root, Weight};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Every estimate is floored here so that downstream sample size searches
/// see a positive variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Outcomes of the pilot, optionally with arm labels and block indices.
///
/// Blocks are not checked on construction: the final data set of a trial may
/// end in a truncated block. [`xing_ganju`] checks them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    outcomes: Vec<f64>,
    labels: Option<Vec<Arm>>,
    blocks: Option<Vec<usize>>,
}

impl TrialData {
    pub fn new(outcomes: Vec<f64>, labels: Option<Vec<Arm>>, blocks: Option<Vec<usize>>) -> Result<Self> {
        if let Some(bad) = outcomes.iter().find(|y| !y.is_finite()) {
            return Err(Error::data(format!("non-finite outcome {bad}")));
        }
        let n = outcomes.len();
        if labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(Error::data("label count differs from outcome count"));
        }
        if blocks.as_ref().is_some_and(|b| b.len() != n) {
            return Err(Error::data("block count differs from outcome count"));
        }
        Ok(TrialData {
            outcomes,
            labels,
            blocks,
        })
    }

    /// Outcomes only.
    pub fn from_outcomes(outcomes: Vec<f64>) -> Result<Self> {
        TrialData::new(outcomes, None, None)
    }

    /// The same subjects with the arm labels removed.
    pub fn blinded(&self) -> TrialData {
        TrialData {
            outcomes: self.outcomes.clone(),
            labels: None,
            blocks: self.blocks.clone(),
        }
    }

    pub fn n1(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn labels(&self) -> Option<&[Arm]> {
        self.labels.as_deref()
    }

    pub fn blocks(&self) -> Option<&[usize]> {
        self.blocks.as_deref()
    }

    /// Subjects per arm, if labelled.
    pub fn group_counts(&self) -> Option<[usize; 3]> {
        let labels = self.labels.as_ref()?;
        let mut c = [0usize; 3];
        for a in labels {
            c[a.index()] += 1;
        }
        Some(c)
    }

    /// Outcomes of one arm, if labelled.
    pub fn group(&self, arm: Arm) -> Option<Vec<f64>> {
        let labels = self.labels.as_ref()?;
        Some(
            self.outcomes
                .iter()
                .zip(labels)
                .filter(|(_, a)| **a == arm)
                .map(|(y, _)| *y)
                .collect(),
        )
    }
}

/// Which estimator produced a variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    /// Unblinded pooled within-group variance.
    Pooled,
    /// Blinded one-sample variance.
    OneSample,
    /// Blinded one-sample variance minus its bias under the planning alternative.
    AdjustedOneSample,
    /// Blinded block-sum estimator.
    XingGanju,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Pooled,
        Estimator::OneSample,
        Estimator::AdjustedOneSample,
        Estimator::XingGanju,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Estimator::Pooled => "POOLED",
            Estimator::OneSample => "OS",
            Estimator::AdjustedOneSample => "OSU",
            Estimator::XingGanju => "XG",
        }
    }

    pub fn is_blinded(self) -> bool {
        self != Estimator::Pooled
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "POOLED" | "POOL" => Ok(Estimator::Pooled),
            "OS" => Ok(Estimator::OneSample),
            "OSU" => Ok(Estimator::AdjustedOneSample),
            "XG" => Ok(Estimator::XingGanju),
            _ => Err(Error::domain(format!(
                "unknown estimator {s:?}, expected POOLED, OS, OSU or XG"
            ))),
        }
    }
}

impl Serialize for Estimator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Estimator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inputs needed to reproduce an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EstimateMeta {
    pub n1: usize,
    pub block_size: Option<usize>,
    pub block_count: Option<usize>,
    /// Planning means `(μ_E, μ_R, μ_P)` used for the bias adjustment.
    pub assumed_means: Option<[f64; 3]>,
    /// Value before flooring.
    pub raw: f64,
}

/// A variance estimate, floored at [`VARIANCE_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub method: Estimator,
    pub meta: EstimateMeta,
}

impl VarianceEstimate {
    fn new(raw: f64, method: Estimator, meta: EstimateMeta) -> Self {
        VarianceEstimate {
            value: raw.max(VARIANCE_FLOOR),
            method,
            meta: EstimateMeta { raw, ..meta },
        }
    }

    /// An estimate of known value, as if produced by `method`. Used to feed
    /// the re-estimation rule directly.
    pub fn given(value: f64, method: Estimator) -> Self {
        VarianceEstimate::new(value, method, EstimateMeta::default())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// `Σ (n_k − 1) s²_k / (n1 − 3)`. Requires labels and at least two subjects per arm.
pub fn pooled_variance(data: &TrialData) -> Result<VarianceEstimate> {
    if data.labels.is_none() {
        return Err(Error::data(
            "pooled variance needs group labels (it is an unblinded estimator)",
        ));
    }
    let n1 = data.n1();
    if n1 <= 3 {
        return Err(Error::data(format!(
            "pooled variance needs more than 3 subjects, got {n1}"
        )));
    }
    let mut ss = 0.0;
    for arm in Arm::ALL {
        let g = data.group(arm).expect("labels checked above");
        if g.len() < 2 {
            return Err(Error::data(format!(
                "arm {arm} has {} subjects, need at least 2",
                g.len()
            )));
        }
        ss += sum_sq_dev(&g);
    }
    Ok(VarianceEstimate::new(
        ss / (n1 - 3) as f64,
        Estimator::Pooled,
        EstimateMeta {
            n1,
            ..Default::default()
        },
    ))
}

/// Sample variance of the blinded outcomes.
pub fn one_sample_variance(data: &TrialData) -> Result<VarianceEstimate> {
    let n1 = data.n1();
    if n1 < 2 {
        return Err(Error::data(format!(
            "one-sample variance needs at least 2 subjects, got {n1}"
        )));
    }
    Ok(VarianceEstimate::new(
        sum_sq_dev(&data.outcomes) / (n1 - 1) as f64,
        Estimator::OneSample,
        EstimateMeta {
            n1,
            ..Default::default()
        },
    ))
}

fn check_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "pilot weights {w:?} must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

/// Bias of the one-sample estimator, `E[σ̂²_OS] − σ²`, for pilot arm weights
/// `w_1 = (w_E, w_R, w_P)` and pilot size `n1`:
///
/// ```text
/// n1/(n1−1) · Δ²_PR · (w_E Δ*² + w_R − (w_E Δ* + w_R)²),   Δ_PR = μ_P − μ_R,  Δ* = (μ_P − μ_E)/Δ_PR
/// ```
///
/// When `μ_P = μ_R` the equivalent form `n1/(n1−1) · Σ w_k (μ_k − μ̄)²` is used.
pub fn os_bias(means: [f64; 3], pilot_weights: [f64; 3], n1: usize) -> Result<f64> {
    check_weights(&pilot_weights)?;
    if n1 < 2 {
        return Err(Error::domain("pilot size must be at least 2"));
    }
    let factor = n1 as f64 / (n1 - 1) as f64;
    let [mu_e, mu_r, mu_p] = means;
    let [w_e, w_r, _] = pilot_weights;
    let d_pr = mu_p - mu_r;
    let spread = if d_pr != 0.0 {
        let ds = (mu_p - mu_e) / d_pr;
        let s = w_e * ds + w_r;
        d_pr * d_pr * (w_e * ds * ds + w_r - s * s)
    } else {
        between_group_variance(means, pilot_weights)
    };
    Ok(factor * spread.max(0.0))
}

/// `Σ w_k (μ_k − μ̄)²` with `μ̄ = Σ w_k μ_k`.
pub fn between_group_variance(means: [f64; 3], weights: [f64; 3]) -> f64 {
    let mbar: f64 = means.iter().zip(&weights).map(|(m, w)| m * w).sum();
    means
        .iter()
        .zip(&weights)
        .map(|(m, w)| w * (m - mbar) * (m - mbar))
        .sum()
}

/// One-sample variance minus [`os_bias`] under the assumed means, floored.
pub fn adjusted_one_sample(
    data: &TrialData,
    assumed_means: [f64; 3],
    pilot_weights: [f64; 3],
) -> Result<VarianceEstimate> {
    let os = one_sample_variance(data)?;
    let bias = os_bias(assumed_means, pilot_weights, data.n1())?;
    Ok(VarianceEstimate::new(
        os.meta.raw - bias,
        Estimator::AdjustedOneSample,
        EstimateMeta {
            n1: data.n1(),
            assumed_means: Some(assumed_means),
            ..Default::default()
        },
    ))
}

/// `Σ_k (T_k − T̄)² / (n1 − m)` over the block sums `T_k`. Every block must hold
/// the same number `m` of subjects and there must be at least two blocks.
pub fn xing_ganju(data: &TrialData) -> Result<VarianceEstimate> {
    let blocks = data
        .blocks
        .as_ref()
        .ok_or_else(|| Error::data("block-sum estimator needs block membership"))?;
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (y, b) in data.outcomes.iter().zip(blocks) {
        let e = sums.entry(*b).or_insert((0.0, 0));
        e.0 += y;
        e.1 += 1;
    }
    let b = sums.len();
    if b < 2 {
        return Err(Error::data(format!("need at least 2 blocks, got {b}")));
    }
    let m = sums.values().next().expect("at least two blocks").1;
    if let Some((id, (_, c))) = sums.iter().find(|(_, (_, c))| *c != m) {
        return Err(Error::data(format!(
            "block {id} has {c} subjects but the first block has {m}; blocks must be complete and equal"
        )));
    }
    if let Some(labels) = &data.labels {
        check_block_composition(labels, blocks)?;
    }
    let totals: Vec<f64> = sums.values().map(|(s, _)| *s).collect();
    let n1 = data.n1();
    Ok(VarianceEstimate::new(
        sum_sq_dev(&totals) / (n1 - m) as f64,
        Estimator::XingGanju,
        EstimateMeta {
            n1,
            block_size: Some(m),
            block_count: Some(b),
            ..Default::default()
        },
    ))
}

fn check_block_composition(labels: &[Arm], blocks: &[usize]) -> Result<()> {
    let mut comp: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for (a, b) in labels.iter().zip(blocks) {
        comp.entry(*b).or_default()[a.index()] += 1;
    }
    let first = *comp.values().next().expect("non-empty");
    if let Some((id, c)) = comp.iter().find(|(_, c)| **c != first) {
        return Err(Error::data(format!(
            "block {id} has composition {c:?}, expected {first:?}"
        )));
    }
    Ok(())
}

/// Run `method` on `data`. `assumed_means` and `pilot_weights` are only read by
/// the adjusted one-sample estimator.
pub fn estimate(
    method: Estimator,
    data: &TrialData,
    assumed_means: [f64; 3],
    pilot_weights: [f64; 3],
) -> Result<VarianceEstimate> {
    match method {
        Estimator::Pooled => pooled_variance(data),
        Estimator::OneSample => one_sample_variance(data),
        Estimator::AdjustedOneSample => adjusted_one_sample(data, assumed_means, pilot_weights),
        Estimator::XingGanju => xing_ganju(data),
    }
}

/// Shape of an estimator's sampling law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityFamily {
    /// `scale · χ²_df(λ)`.
    StretchedNoncentralChiSq,
    /// `scale · χ²_df`.
    StretchedCentralChiSq,
}

/// Sampling law `scale · χ²_df(λ)` of a blinded variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorDensity {
    pub family: DensityFamily,
    pub scale: f64,
    pub df: f64,
    pub lambda: f64,
}

impl EstimatorDensity {
    pub fn new(scale: f64, df: f64, lambda: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!("scale {scale} must be positive")));
        }
        if !(df >= 1.0 && df.is_finite()) {
            return Err(Error::domain(format!("degrees of freedom {df} must be at least 1")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("noncentrality {lambda} must be non-negative")));
        }
        let family = if lambda == 0.0 {
            DensityFamily::StretchedCentralChiSq
        } else {
            DensityFamily::StretchedNoncentralChiSq
        };
        Ok(EstimatorDensity {
            family,
            scale,
            df,
            lambda,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let z = x / self.scale;
        let g = match self.family {
            DensityFamily::StretchedCentralChiSq => chisq_pdf(z, self.df),
            DensityFamily::StretchedNoncentralChiSq => chisq_noncentral_pdf(z, self.df, self.lambda),
        };
        g.unwrap_or(0.0) / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x / self.scale;
        match self.family {
            DensityFamily::StretchedCentralChiSq => chisq_cdf(z, self.df),
            DensityFamily::StretchedNoncentralChiSq => chisq_noncentral_cdf(z, self.df, self.lambda),
        }
        .unwrap_or(f64::NAN)
    }

    pub fn mean(&self) -> f64 {
        self.scale * (self.df + self.lambda)
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.scale * self.scale * (self.df + 2.0 * self.lambda)
    }

    /// Inverse of [`cdf`](Self::cdf) by bracketed root finding.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability {p} outside (0, 1)")));
        }
        let sd = self.variance().sqrt();
        let mut hi = self.mean() + 10.0 * sd;
        while self.cdf(hi) < p {
            hi += 10.0 * sd;
        }
        let tol = (1e-12 * p.min(1.0 - p)).max(1e-15);
        find_root(|x| self.cdf(x) - p, 0.0, hi, tol)
    }
}

impl Weight for EstimatorDensity {
    fn pdf(&self, x: f64) -> f64 {
        EstimatorDensity::pdf(self, x)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        EstimatorDensity::quantile(self, p)
    }
}

/// Law of the one-sample estimator: `σ²/(n1−1) · χ²_{n1−1}(λ)` with
/// `λ = Σ n1_k (μ_k − μ̄)² / σ²`.
pub fn density_os(sigma2: f64, n1: usize, means: [f64; 3], pilot_weights: [f64; 3]) -> Result<EstimatorDensity> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("variance {sigma2} must be positive")));
    }
    if n1 < 2 {
        return Err(Error::domain("pilot size must be at least 2"));
    }
    check_weights(&pilot_weights)?;
    let lambda = n1 as f64 * between_group_variance(means, pilot_weights) / sigma2;
    EstimatorDensity::new(sigma2 / (n1 - 1) as f64, (n1 - 1) as f64, lambda)
}

/// Law of the block-sum estimator: `m σ²/(n1−m) · χ²_{b−1}` with `b = n1/m`
/// blocks. Independent of the group means.
pub fn density_xg(sigma2: f64, n1: usize, m: usize) -> Result<EstimatorDensity> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("variance {sigma2} must be positive")));
    }
    if m < 2 || !n1.is_multiple_of(m) || n1 / m < 2 {
        return Err(Error::domain(format!(
            "pilot size {n1} must be a multiple of block size {m} with at least 2 blocks (m >= 2)"
        )));
    }
    let b = n1 / m;
    EstimatorDensity::new(m as f64 * sigma2 / (n1 - m) as f64, (b - 1) as f64, 0.0)
}
