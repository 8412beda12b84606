//! Group summaries and rank-based significance tests.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Both samples must be at most this large for the exact rank-sum test.
pub const EXACT_RANK_SUM_LIMIT: usize = 50;

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("invalid argument: {0}")]
    Domain(String),
}

/// Sample quartiles under the linear-interpolation (type 7) rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

pub const QUANTILE_CONVENTION: &str = "type-7 linear interpolation";

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn median_iqr(values: &[f64]) -> Result<GroupSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(GroupSummary {
        n: sorted.len(),
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    ChiSquareApprox,
    NormalApproxTieCorrected,
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMethod::Exact => "exact",
            TestMethod::ChiSquareApprox => "chi-square-approx",
            TestMethod::NormalApproxTieCorrected => "normal-approx-tie-corrected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    /// Significance annotation, see [`significance_stars`].
    pub stars: String,
    pub groups: Vec<String>,
}

impl HypothesisTestResult {
    fn new(statistic: f64, p_value: f64, method: TestMethod) -> Self {
        HypothesisTestResult {
            statistic,
            p_value,
            method,
            stars: significance_stars(p_value).to_string(),
            groups: Vec::new(),
        }
    }

    pub fn with_groups<S: Into<String>>(mut self, groups: impl IntoIterator<Item = S>) -> Self {
        self.groups = groups.into_iter().map(Into::into).collect();
        self
    }
}

/// `**` for p <= 0.01, `*` for 0.01 < p <= 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p <= 0.01 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else {
        ""
    }
}

/// Midranks of the pooled sample plus the sizes of every tie block.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Kruskal-Wallis H with midranks and tie correction; chi-square p-value on `k - 1` df.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<HypothesisTestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.as_ref().is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.as_ref().iter().copied())
        .collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let correction = 1.0 - tie_sum(&ties) / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(HypothesisTestResult::new(
            0.0,
            1.0,
            TestMethod::ChiSquareApprox,
        ));
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let len = g.as_ref().len();
        let r: f64 = ranks[offset..offset + len].iter().sum();
        sum += r * r / len as f64;
        offset += len;
    }
    let h = ((12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction).max(0.0);
    let p = chi_square_sf(h, groups.len() - 1)?;
    Ok(HypothesisTestResult::new(h, p, TestMethod::ChiSquareApprox))
}

/// Number of ways each Mann-Whitney U value arises for sample sizes `n`, `m`
/// (index = U), by counting k-subsets of ranks `1..=n+m` per rank sum.
fn rank_sum_counts(n: usize, m: usize) -> Vec<u128> {
    // U is symmetric in the sample sizes, so count subsets of the smaller one
    let k = n.min(m);
    let total = n + m;
    let max_sum = (total - k + 1..=total).sum::<usize>();
    let mut ways = vec![vec![0u128; max_sum + 1]; k + 1];
    ways[0][0] = 1;
    for element in 1..=total {
        for size in (1..=k.min(element)).rev() {
            let (lower, upper) = ways.split_at_mut(size);
            let (prev, cur) = (&lower[size - 1], &mut upper[0]);
            for s in (element..=max_sum).rev() {
                cur[s] += prev[s - element];
            }
        }
    }
    let base = k * (k + 1) / 2;
    ways[k][base..=base + n * m].to_vec()
}

/// Two-sample rank-sum test. The statistic is `W = R_x - n(n+1)/2`.
///
/// Without ties and with both samples of at most [`EXACT_RANK_SUM_LIMIT`]
/// observations the p-value comes from the exact null distribution; otherwise
/// from the normal approximation with tie-corrected variance and continuity
/// correction.
pub fn wilcoxon_rank_sum_exact(x: &[f64], y: &[f64]) -> Result<HypothesisTestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty);
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..n].iter().sum();
    let w = rank_sum - (n * (n + 1)) as f64 / 2.0;

    if ties.is_empty() && n <= EXACT_RANK_SUM_LIMIT && m <= EXACT_RANK_SUM_LIMIT {
        let counts = rank_sum_counts(n, m);
        let total: u128 = counts.iter().sum();
        let u = w.round() as usize;
        let lower: u128 = counts[..=u].iter().sum();
        let upper: u128 = counts[u..].iter().sum();
        let tail = lower.min(upper) as f64 / total as f64;
        return Ok(HypothesisTestResult::new(
            w,
            (2.0 * tail).min(1.0),
            TestMethod::Exact,
        ));
    }

    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let z = w - nf * mf / 2.0;
    let sigma =
        (nf * mf / 12.0 * ((total + 1.0) - tie_sum(&ties) / (total * (total - 1.0)))).sqrt();
    let p = if sigma > 0.0 && sigma.is_finite() {
        let z = (z - 0.5 * z.signum()) / sigma;
        (2.0 * normal_cdf(z).min(normal_cdf(-z))).min(1.0)
    } else {
        1.0
    };
    Ok(HypothesisTestResult::new(
        w,
        p,
        TestMethod::NormalApproxTieCorrected,
    ))
}

/// Upper tail of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::Domain("df must be positive".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(format!(
            "x must be nonnegative, got {x}"
        )));
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0))
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let q = gamma_q(0.5, x * x);
    if x >= 0.0 {
        q
    } else {
        2.0 - q
    }
}

/// Lanczos approximation (g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`.
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}
