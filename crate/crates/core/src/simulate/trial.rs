use crate::design::{Arm, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::TrialData;
use crate::statcore::t_cdf;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Draw a trial in permuted blocks.
///
/// `sizes` must be a whole number of blocks of `composition` (subjects per arm
/// and block). Each block's arm order is a uniform random permutation; outcomes
/// are `N(truth_k, σ²)`. Block indices start at `first_block`.
pub fn generate_trial<R: Rng + ?Sized>(
    truth: [f64; 3],
    sigma: f64,
    sizes: [u64; 3],
    composition: [u64; 3],
    first_block: usize,
    rng: &mut R,
) -> Result<TrialData> {
    if composition.contains(&0) {
        return Err(Error::domain("block composition needs at least one subject per arm"));
    }
    let k = sizes[0] / composition[0];
    if (0..3).any(|i| sizes[i] != k * composition[i]) {
        return Err(Error::data(format!(
            "sizes {sizes:?} are not a whole number of blocks {composition:?}"
        )));
    }
    generate_blocks(truth, sigma, sizes, composition, first_block, rng)
}

/// Like [`generate_trial`], but any remainder that does not fill a block goes
/// into one final truncated block.
pub(crate) fn generate_blocks<R: Rng + ?Sized>(
    truth: [f64; 3],
    sigma: f64,
    sizes: [u64; 3],
    composition: [u64; 3],
    first_block: usize,
    rng: &mut R,
) -> Result<TrialData> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain("sigma must be positive"));
    }
    let total: u64 = sizes.iter().sum();
    let mut outcomes = Vec::with_capacity(total as usize);
    let mut labels = Vec::with_capacity(total as usize);
    let mut blocks = Vec::with_capacity(total as usize);
    let mut left = sizes;
    let mut block = first_block;
    let mut order: Vec<Arm> = Vec::new();
    while left.iter().any(|&c| c > 0) {
        order.clear();
        let full = (0..3).all(|i| left[i] >= composition[i]);
        for arm in Arm::ALL {
            let i = arm.index();
            let take = if full { composition[i] } else { left[i] };
            left[i] -= take;
            order.extend(std::iter::repeat_n(arm, take as usize));
        }
        order.shuffle(rng);
        for &arm in &order {
            let z: f64 = rng.sample(StandardNormal);
            outcomes.push(truth[arm.index()] + sigma * z);
            labels.push(arm);
            blocks.push(block);
        }
        block += 1;
    }
    TrialData::new(outcomes, Some(labels), Some(blocks))
}

/// Outcome of the three local tests and their intersection-union combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IutResult {
    pub reject_er: bool,
    pub reject_ep: bool,
    pub reject_rp: bool,
    pub reject_global: bool,
    /// One-sided p-values, ordered ER, EP, RP.
    pub p_values: [f64; 3],
    /// t statistics, ordered ER, EP, RP.
    pub statistics: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
struct Summary {
    n: f64,
    mean: f64,
    ss: f64,
}

fn summarize(data: &TrialData) -> Result<[Summary; 3]> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::data("the final analysis needs group labels"))?;
    let mut n = [0usize; 3];
    let mut sum = [0.0; 3];
    for (y, a) in data.outcomes().iter().zip(labels) {
        n[a.index()] += 1;
        sum[a.index()] += y;
    }
    if let Some(k) = n.iter().position(|&c| c < 2) {
        return Err(Error::data(format!(
            "arm {} has {} subjects, need at least 2",
            Arm::ALL[k],
            n[k]
        )));
    }
    let mean = [0, 1, 2].map(|k| sum[k] / n[k] as f64);
    let mut ss = [0.0; 3];
    for (y, a) in data.outcomes().iter().zip(labels) {
        let d = y - mean[a.index()];
        ss[a.index()] += d * d;
    }
    Ok([0, 1, 2].map(|k| Summary {
        n: n[k] as f64,
        mean: mean[k],
        ss: ss[k],
    }))
}

// One-sided pooled two-sample t test of mean(a) - mean(b) + shift < 0.
fn lower_t(a: Summary, b: Summary, shift: f64) -> (f64, f64) {
    let nu = a.n + b.n - 2.0;
    let s2 = (a.ss + b.ss) / nu;
    let diff = a.mean - b.mean + shift;
    let se = (s2 * (1.0 / a.n + 1.0 / b.n)).sqrt();
    let t = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    (t, t_cdf(t, nu))
}

/// The three pairwise pooled-variance t tests at level `spec.alpha`.
///
/// - ER: rejects `μ_E − μ_R ≥ δ_ER` when `(ȳ_E − ȳ_R − δ_ER)/se` is small.
/// - EP: rejects `μ_P − μ_E ≤ δ_EP` when `(ȳ_E − ȳ_P + δ_EP)/se` is small.
/// - RP: rejects `μ_P − μ_R ≤ δ_RP` when `(ȳ_R − ȳ_P + δ_RP)/se` is small.
///
/// Each test uses `ν = n_i + n_j − 2`; a hypothesis is rejected when its
/// p-value is below `α`. The global null is rejected only if all three are.
pub fn iut_test(data: &TrialData, spec: &DesignSpec) -> Result<IutResult> {
    let [e, r, p] = summarize(data)?;
    let (t_er, p_er) = lower_t(e, r, -spec.delta_er);
    let (t_ep, p_ep) = lower_t(e, p, spec.delta_ep);
    let (t_rp, p_rp) = lower_t(r, p, spec.delta_rp);
    let reject_er = p_er < spec.alpha;
    let reject_ep = p_ep < spec.alpha;
    let reject_rp = p_rp < spec.alpha;
    Ok(IutResult {
        reject_er,
        reject_ep,
        reject_rp,
        reject_global: reject_er && reject_ep && reject_rp,
        p_values: [p_er, p_ep, p_rp],
        statistics: [t_er, t_ep, t_rp],
    })
}
