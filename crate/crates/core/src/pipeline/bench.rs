use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::PipelineError;
use crate::embeddings::EmbeddingTable;
use crate::textprep::NBow;
use crate::transport::{lc_rwmd_batch, wmd_exact, Variant, EXACT_LIMIT};

/// Dimension of the random vectors used by the benchmark.
pub const BENCH_DIM: usize = 16;

const MIN_BATCH: Duration = Duration::from_millis(2);
const BATCHES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub median_wmd_seconds: f64,
    pub median_rwmd_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log time against log size.
    pub wmd_slope: f64,
    pub rwmd_slope: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,median_wmd_seconds,median_rwmd_seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6e},{:.6e}",
                r.size, r.median_wmd_seconds, r.median_rwmd_seconds
            );
        }
        let _ = writeln!(out, "slope,{:.6},{:.6}", self.wmd_slope, self.rwmd_slope);
        out
    }
}

/// Table of `words` random unit vectors named `w0, w1, ...`.
pub fn random_table(rng: &mut impl Rng, words: usize, dim: usize) -> EmbeddingTable {
    let rows = (0..words).map(|i| {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        (format!("w{i}"), v.into_iter().map(|x| x as f32).collect())
    });
    EmbeddingTable::from_rows(rows).expect("random rows are nonzero")
}

/// Bag over the given words with random positive weights.
pub fn random_nbow(rng: &mut impl Rng, words: &[String], table: &EmbeddingTable) -> NBow {
    let pairs: Vec<(&str, f64)> = words
        .iter()
        .map(|w| (w.as_str(), rng.gen_range(0.05..1.0)))
        .collect();
    NBow::from_weights(&pairs, table).expect("words come from the table")
}

fn seconds_per_call(mut f: impl FnMut()) -> f64 {
    f();
    let mut reps = 1u32;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        if start.elapsed() >= MIN_BATCH || reps >= 1 << 20 {
            break;
        }
        reps *= 2;
    }
    (0..BATCHES)
        .map(|_| {
            let start = Instant::now();
            for _ in 0..reps {
                f();
            }
            start.elapsed().as_secs_f64() / f64::from(reps)
        })
        .fold(f64::INFINITY, f64::min)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn log_log_slope(xs: &[usize], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|&x| (x as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Times exact transport against the batched relaxed kernel on random
/// document pairs with `size` unique words per side.
pub fn bench_scaling(
    sizes: &[usize],
    pairs_per_size: usize,
    seed: u64,
) -> Result<BenchReport, PipelineError> {
    if sizes.len() < 2 {
        return Err(PipelineError::Bench(
            "need at least two sizes to fit a slope".into(),
        ));
    }
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > EXACT_LIMIT) {
        return Err(PipelineError::Bench(format!(
            "size {bad} outside 1..={EXACT_LIMIT}"
        )));
    }
    if pairs_per_size < 3 {
        return Err(PipelineError::Bench(
            "need at least 3 pairs per size".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut wmd = Vec::with_capacity(pairs_per_size);
        let mut rwmd = Vec::with_capacity(pairs_per_size);
        for _ in 0..pairs_per_size {
            let table = random_table(&mut rng, 2 * size, BENCH_DIM);
            let names: Vec<String> = (0..2 * size).map(|i| format!("w{i}")).collect();
            let a = random_nbow(&mut rng, &names[..size], &table);
            let b = random_nbow(&mut rng, &names[size..], &table);
            let candidates = [b.clone()];
            wmd.push(seconds_per_call(|| {
                black_box(wmd_exact(&a, &b, &table).expect("exact solve"));
            }));
            rwmd.push(seconds_per_call(|| {
                black_box(
                    lc_rwmd_batch(&a, &candidates, &table, Variant::SymmetricMax).expect("batch"),
                );
            }));
        }
        rows.push(BenchRow {
            size,
            median_wmd_seconds: median(wmd),
            median_rwmd_seconds: median(rwmd),
        });
    }
    let wmd_times: Vec<f64> = rows.iter().map(|r| r.median_wmd_seconds).collect();
    let rwmd_times: Vec<f64> = rows.iter().map(|r| r.median_rwmd_seconds).collect();
    Ok(BenchReport {
        wmd_slope: log_log_slope(sizes, &wmd_times),
        rwmd_slope: log_log_slope(sizes, &rwmd_times),
        rows,
    })
}
