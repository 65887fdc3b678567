use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean and sample standard deviation; `(0, 0)` for no data.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    pub mean_difference: f64,
    pub lower: f64,
    pub upper: f64,
    pub pairs: usize,
}

/// Percentile bootstrap interval of mean(a − b) over paired samples. Pairs
/// with a missing side are dropped.
pub fn paired_bootstrap(a: &[Option<f64>], b: &[Option<f64>], resamples: usize, level: f64, seed: u64) -> BootstrapInterval {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((*x)? - (*y)?))
        .collect();
    let n = diffs.len();
    let (mean, _) = mean_std(&diffs);
    if n == 0 || resamples == 0 {
        return BootstrapInterval { mean_difference: mean, lower: mean, upper: mean, pairs: n };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let pick = |p: f64| {
        let idx = (p * (resamples - 1) as f64).round() as usize;
        means[idx.min(resamples - 1)]
    };
    BootstrapInterval { mean_difference: mean, lower: pick(tail), upper: pick(1.0 - tail), pairs: n }
}
