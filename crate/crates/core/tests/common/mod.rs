#![allow(dead_code)]

use mbprecode::channel::ChannelMatrix;
use mbprecode::{CMat, Cx};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat<f64> {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re, im) / 2f64.sqrt()
    })
}

pub fn hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat<f64> {
    let a = gaussian(rng, n, n);
    (&a + a.adjoint()).map(|z| z * 0.5)
}

/// One randomly shaped test instance: channel and total power.
#[derive(Debug, Clone)]
pub struct Instance {
    pub h: ChannelMatrix<f64>,
    pub power: f64,
}

/// Random channels with K ≤ 7, Q ≤ 3, Q ≤ N ≤ 14, an overall gain between
/// 0.1 and 10 and P_T between 1 and 1000.
pub fn corpus(count: usize, seed: u64) -> Vec<Instance> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let k = r.random_range(1..=7);
            let q = r.random_range(1..=3);
            let n = r.random_range(q..=14);
            let scale = 10f64.powf(r.random_range(-1.0..1.0));
            let h = gaussian(&mut r, k * q, n).map(|z| z * scale);
            let power = 10f64.powf(r.random_range(0.0..3.0));
            Instance { h: ChannelMatrix::new(h, k, q).unwrap(), power }
        })
        .collect()
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> nalgebra::DVector<Cx<f64>> {
    let v = gaussian(rng, n, 1).column(0).into_owned();
    let norm = v.norm();
    v.map(|z| z / norm)
}

/// Largest diagonal entry and trace of W Wᴴ, computed from the entries.
pub fn feed_power_stats(w: &CMat<f64>) -> (f64, f64) {
    let rows: Vec<f64> = w.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();
    (rows.iter().copied().fold(0.0, f64::max), rows.iter().sum())
}

pub fn max_abs(m: &CMat<f64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
