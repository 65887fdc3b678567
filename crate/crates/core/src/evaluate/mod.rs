//! SINR, multicast beam rates, MODCOD mapping and the Monte Carlo runner.

mod modcod;
mod montecarlo;
mod stats;

pub use modcod::ModcodTable;
pub use montecarlo::{
    derive_seed, run_monte_carlo, Aggregate, ExperimentConfig, GroupingMode, MonteCarloResult, PowerPoint, Scenario,
    Scheme, SeedPurpose, TrialResult, RESULTS_CSV_HEADER,
};
pub use stats::{mean_std, paired_bootstrap, BootstrapInterval};

use crate::channel::{ChannelMatrix, LinkBudget};
use crate::scalar::{CMat, Real};

/// SINR of user (k, q) with noise power `noise`, counting interference only
/// from beams `j ≠ k` with `interferes(j)`.
pub fn sinr_with<T: Real>(
    h: &ChannelMatrix<T>,
    w: &CMat<T>,
    k: usize,
    q: usize,
    noise: T,
    interferes: impl Fn(usize) -> bool,
) -> T {
    let row = h.user_row(k, q);
    let mut signal = T::zero();
    let mut interference = T::zero();
    for j in 0..w.ncols() {
        let p = (&row * w.column(j))[(0, 0)].norm_sqr();
        if j == k {
            signal = p;
        } else if interferes(j) {
            interference += p;
        }
    }
    signal / (interference + noise)
}

/// |h_{k,q} w_k|² / (Σ_{j≠k} |h_{k,q} w_j|² + 1).
pub fn sinr<T: Real>(h: &ChannelMatrix<T>, w: &CMat<T>, k: usize, q: usize) -> T {
    sinr_with(h, w, k, q, T::one(), |_| true)
}

/// SINR of every user, in channel row order.
pub fn sinr_all<T: Real>(h: &ChannelMatrix<T>, w: &CMat<T>) -> Vec<T> {
    let g = h.matrix() * w;
    (0..h.beams())
        .flat_map(|k| (0..h.users_per_beam()).map(move |q| (k, q)))
        .map(|(k, q)| {
            let row = g.row(h.row_index(k, q));
            let total = row.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
            let signal = row[k].norm_sqr();
            signal / (total - signal + T::one())
        })
        .collect()
}

/// Worst SINR in each beam.
pub fn min_sinr_per_beam<T: Real>(sinrs: &[T], users_per_beam: usize) -> Vec<T> {
    sinrs
        .chunks(users_per_beam)
        .map(|c| c.iter().copied().fold(c[0], |a, b| if b < a { b } else { a }))
        .collect()
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Multicast throughput of one beam: the symbol rate B/(1+ρ) times the
/// efficiency at the worst member SINR, scaled by the bandwidth share.
pub fn beam_rate(sinrs: &[f64], modcod: &ModcodTable, budget: &LinkBudget, bandwidth_share: f64) -> f64 {
    let worst = sinrs.iter().copied().fold(f64::INFINITY, f64::min);
    if sinrs.is_empty() {
        return 0.0;
    }
    budget.symbol_rate() * bandwidth_share * modcod.lookup(linear_to_db(worst))
}
