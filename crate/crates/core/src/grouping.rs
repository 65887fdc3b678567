//! Per-beam user selection: a random seed user plus the Q−1 pool users whose
//! channel vectors lie closest to it.

use nalgebra::ComplexField;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGroup {
    pub beam: usize,
    pub seed_user: usize,
    /// Pool indices, seed first, then by increasing score.
    pub members: Vec<usize>,
}

impl UserGroup {
    pub fn member_set(&self) -> std::collections::BTreeSet<usize> {
        self.members.iter().copied().collect()
    }
}

/// Per-beam member lists, ready for [`ChannelMatrix::select_users`].
pub fn selection(groups: &[UserGroup]) -> Vec<Vec<usize>> {
    groups.iter().map(|g| g.members.clone()).collect()
}

fn check_pool<T: Real>(pool: &ChannelMatrix<T>, q: usize) -> Result<()> {
    if q == 0 || pool.users_per_beam() < q {
        return Err(Error::Config(format!(
            "pool of {} users per beam cannot supply {q} users",
            pool.users_per_beam()
        )));
    }
    Ok(())
}

/// Nominal grouping: score ‖h_m − h_n‖².
pub fn group_users<T: Real>(pool: &ChannelMatrix<T>, q: usize, rng_seed: u64) -> Result<Vec<UserGroup>> {
    let zeros = vec![T::zero(); pool.users()];
    grouped(pool, q, rng_seed, &zeros)
}

/// Robust grouping: score ‖h_m − h_n‖² + γ_n with one bound per pool user
/// (row order of `pool`).
pub fn robust_group_users<T: Real>(pool: &ChannelMatrix<T>, user_gamma: &[T], q: usize, rng_seed: u64) -> Result<Vec<UserGroup>> {
    if user_gamma.len() != pool.users() {
        return Err(Error::Dimension(format!(
            "{} user bounds for {} pool users",
            user_gamma.len(),
            pool.users()
        )));
    }
    if user_gamma.iter().any(|g| !(*g >= T::zero()) || !g.is_finite()) {
        return Err(Error::Config("user bounds must be finite and >= 0".into()));
    }
    grouped(pool, q, rng_seed, user_gamma)
}

fn grouped<T: Real>(pool: &ChannelMatrix<T>, q: usize, rng_seed: u64, gamma: &[T]) -> Result<Vec<UserGroup>> {
    check_pool(pool, q)?;
    let size = pool.users_per_beam();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut groups = Vec::with_capacity(pool.beams());
    for k in 0..pool.beams() {
        let seed_user = rng.random_range(0..size);
        let block = pool.beam_block(k);
        let seed_row = block.row(seed_user);
        let beam_gamma = &gamma[k * size..(k + 1) * size];
        // the penalty only ranks candidates, so shift it to start at zero
        let floor = beam_gamma
            .iter()
            .enumerate()
            .filter(|&(n, _)| n != seed_user)
            .fold(None, |acc: Option<T>, (_, &g)| Some(acc.map_or(g, |a| if g < a { g } else { a })))
            .unwrap_or(T::zero());
        let mut scored: Vec<(T, usize)> = (0..size)
            .filter(|&n| n != seed_user)
            .map(|n| ((block.row(n) - seed_row).norm_squared() + (beam_gamma[n] - floor), n))
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let mut members = vec![seed_user];
        members.extend(scored.iter().take(q - 1).map(|&(_, n)| n));
        groups.push(UserGroup { beam: k, seed_user, members });
    }
    Ok(groups)
}

/// Uniformly random Q-subset per beam, the reference for grouping gains.
pub fn random_groups<T: Real>(pool: &ChannelMatrix<T>, q: usize, rng_seed: u64) -> Result<Vec<UserGroup>> {
    check_pool(pool, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok((0..pool.beams())
        .map(|k| {
            let members = sample(&mut rng, pool.users_per_beam(), q).into_vec();
            UserGroup { beam: k, seed_user: members[0], members }
        })
        .collect())
}

/// Mean over member pairs of |h_mᴴh_n| / (‖h_m‖‖h_n‖); 1 for single users.
pub fn mean_pairwise_collinearity<T: Real>(pool: &ChannelMatrix<T>, group: &UserGroup) -> T {
    let rows: Vec<_> = group.members.iter().map(|&m| pool.user_row(group.beam, m)).collect();
    let mut sum = T::zero();
    let mut count = 0usize;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let num = rows[i].dotc(&rows[j]).modulus();
            let den = rows[i].norm() * rows[j].norm();
            if den > T::zero() {
                sum += num / den;
            }
            count += 1;
        }
    }
    if count == 0 {
        T::one()
    } else {
        sum / T::from_usize_lossy(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::CMat;
    use nalgebra::Complex;

    fn pool_from(values: &[f64], beams: usize) -> ChannelMatrix<f64> {
        let per = values.len() / beams;
        let h = CMat::from_fn(values.len(), 1, |i, _| Complex::new(values[i], 0.0));
        ChannelMatrix::new(h, beams, per).unwrap()
    }

    #[test]
    fn single_user_group_is_seed() {
        let pool = pool_from(&[0.0, 1.0, 2.0, 3.0], 1);
        let g = group_users(&pool, 1, 3).unwrap();
        assert_eq!(g[0].members, vec![g[0].seed_user]);
    }

    #[test]
    fn hand_distances_pick_two_nearest() {
        // whichever seed is drawn, the two nearest by distance are chosen
        let values = [0.0, 0.1_f64.sqrt(), -(0.2_f64.sqrt()), 0.9_f64.sqrt() + 1.0, -3.0];
        let pool = pool_from(&values, 1);
        for seed in 0..20 {
            let g = &group_users(&pool, 3, seed).unwrap()[0];
            let s = g.seed_user;
            let mut order: Vec<usize> = (0..5).filter(|&n| n != s).collect();
            order.sort_by(|&a, &b| {
                let da = (values[a] - values[s]).powi(2);
                let db = (values[b] - values[s]).powi(2);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            assert_eq!(g.members, vec![s, order[0], order[1]]);
        }
    }

    #[test]
    fn duplicate_of_seed_selected_first() {
        let pool = pool_from(&[5.0, 5.0, 5.0, 5.0], 1);
        let g = &group_users(&pool, 2, 9).unwrap()[0];
        let first_other = (0..4).find(|&n| n != g.seed_user).unwrap();
        assert_eq!(g.members[1], first_other);
    }

    #[test]
    fn penalty_changes_choice() {
        // seed 0 at 0; A (index 1) at distance² 1.0, γ=0; B (index 2) at 0.9, γ=0.5
        let pool = pool_from(&[0.0, 1.0, 0.9_f64.sqrt(), 10.0], 1);
        let gamma = [0.0, 0.0, 0.5, 0.0];
        for seed in 0..50 {
            let g = &robust_group_users(&pool, &gamma, 2, seed).unwrap()[0];
            if g.seed_user == 0 {
                assert_eq!(g.members, vec![0, 1]);
                assert_eq!(group_users(&pool, 2, seed).unwrap()[0].members, vec![0, 2]);
                return;
            }
        }
        panic!("seed user 0 never drawn");
    }

    #[test]
    fn pool_too_small() {
        let pool = pool_from(&[0.0, 1.0], 1);
        assert!(matches!(group_users(&pool, 3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn random_groups_distinct() {
        let pool = pool_from(&(0..40).map(|i| i as f64).collect::<Vec<_>>(), 2);
        for g in random_groups(&pool, 5, 11).unwrap() {
            assert_eq!(g.member_set().len(), 5);
            assert!(g.members.iter().all(|&m| m < 20));
        }
    }
}
