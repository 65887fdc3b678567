mod common;

use common::{feed_power_stats, gaussian, hermitian, max_abs, rng, unit_vector};
use mbprecode::channel::{build_phase_matrix, perturb_channel, ChannelMatrix, PhaseModel, PhaseVariant};
use mbprecode::evaluate::{
    beam_rate, derive_seed, run_monte_carlo, sinr_all, ExperimentConfig, ModcodTable, Scenario, Scheme, SeedPurpose,
};
use mbprecode::gateway::{make_plan, share_csi, GatewayMode};
use mbprecode::grouping::{group_users, mean_pairwise_collinearity, random_groups, robust_group_users};
use mbprecode::linalg::{eigen_gap_coupler, hermitian_eigen};
use mbprecode::precoding::{
    intrabeam, mbim_interbeam, regularization, regularized_gram, rzf_interbeam, rzf_null_basis, two_stage,
    InterBeamKind, PowerMode,
};
use mbprecode::robust::{epsilon_from, gram_perturbation, robust_two_stage, PerturbationBounds};
use mbprecode::{CMat, CVec};
use nalgebra::Complex;
use proptest::prelude::*;

/// (K, Q, N, seed, P_T) with Q ≤ N.
fn shape() -> impl Strategy<Value = (usize, usize, usize, u64, f64)> {
    (1usize..=6, 1usize..=3, 0usize..=8, any::<u64>(), 0.0f64..3.0)
        .prop_map(|(k, q, extra, seed, exp)| (k, q, q + extra, seed, 10f64.powf(exp)))
}

fn channel(k: usize, q: usize, n: usize, seed: u64) -> ChannelMatrix<f64> {
    ChannelMatrix::new(gaussian(&mut rng(seed), k * q, n), k, q).unwrap()
}

fn line_sine(a: &CVec<f64>, b: &CVec<f64>) -> f64 {
    let c = a.dotc(b).norm() / (a.norm() * b.norm());
    (1.0 - c * c).max(0.0).sqrt()
}

fn kind() -> impl Strategy<Value = InterBeamKind> {
    prop_oneof![Just(InterBeamKind::Mbim), Just(InterBeamKind::Rzf)]
}

fn power_mode() -> impl Strategy<Value = PowerMode> {
    prop_oneof![Just(PowerMode::PerFeed), Just(PowerMode::Total)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mbim_whitens_interference((k, q, n, seed, p) in shape()) {
        let h = channel(k, q, n, seed);
        let wa = mbim_interbeam(&h, p).unwrap();
        let c = Complex::new(regularization(k, q, p), 0.0);
        for b in 0..k {
            let ht = h.without_beam(b);
            let gram = ht.adjoint() * &ht + CMat::identity(n, n) * c;
            let block = wa.columns(b * q, q);
            prop_assert!(max_abs(&(block.adjoint() * gram * block - CMat::identity(q, q))) <= 1e-8);
        }
    }

    #[test]
    fn rzf_basis_is_null((k, q, n, seed, p) in shape()) {
        prop_assume!(k >= 2);
        let h = channel(k, q, n, seed);
        let hr = regularized_gram(&h, regularization(k, q, p));
        for b in 0..k {
            let (reduced, v0) = rzf_null_basis(&hr, b, q).unwrap();
            prop_assert_eq!(v0.ncols(), q);
            prop_assert!((&reduced * &v0).norm() <= 1e-8 * reduced.norm());
            prop_assert!(max_abs(&(v0.adjoint() * &v0 - CMat::identity(q, q))) <= 1e-10);
        }
    }

    #[test]
    fn intrabeam_reaches_top_singular_value((k, q, n, seed, p) in shape(), kind in kind()) {
        let h = channel(k, q, n, seed);
        let wa = match kind {
            InterBeamKind::Mbim => mbim_interbeam(&h, p).unwrap(),
            InterBeamKind::Rzf => rzf_interbeam(&h, p).unwrap(),
        };
        let mut r = rng(seed ^ 0x55);
        for b in 0..k {
            let z = h.beam_block(b) * wa.columns(b * q, q);
            let w = intrabeam(&z, b).unwrap();
            prop_assert!((w.norm() - 1.0).abs() <= 1e-12);
            let sigma = z.clone().svd(false, false).singular_values.max();
            let got = (&z * &w).norm_squared();
            prop_assert!((got - sigma * sigma).abs() <= 1e-10 * sigma * sigma);
            for _ in 0..20 {
                prop_assert!((&z * unit_vector(&mut r, q)).norm_squared() <= got * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn binding_power_constraint_is_tight((k, q, n, seed, p) in shape(), kind in kind(), mode in power_mode()) {
        let h = channel(k, q, n, seed);
        let w = two_stage(&h, p, kind, mode).unwrap().w;
        let (max_row, trace) = feed_power_stats(&w);
        match mode {
            PowerMode::PerFeed => {
                let cap = p / n as f64;
                prop_assert!((max_row - cap).abs() <= 1e-9 * cap);
                prop_assert!(w.row_iter().all(|r| r.norm_squared() <= cap * (1.0 + 1e-9)));
            }
            PowerMode::Total => prop_assert!((trace - p).abs() <= 1e-9 * p),
        }
    }

    #[test]
    fn scaling_the_channel_keeps_intrabeam_direction(
        (k, q, n, seed, p) in shape(),
        kind in kind(),
        log_c in -1.0f64..1.0,
    ) {
        // with P_T scaled by 1/c² the regularization follows the channel
        let c = 10f64.powf(log_c);
        let h = channel(k, q, n, seed);
        let hs = h.scaled(c);
        let a = two_stage(&h, p, kind, PowerMode::PerFeed).unwrap();
        let b = two_stage(&hs, p / (c * c), kind, PowerMode::PerFeed).unwrap();
        let expected = match kind {
            InterBeamKind::Mbim => 1.0 / c,
            InterBeamKind::Rzf => c,
        };
        // directions are only unique when the retained MBIM subspace does not
        // split a repeated zero eigenvalue of H̃ᴴH̃
        let zero_dim = n.saturating_sub((k - 1) * q);
        let unique_beam = kind == InterBeamKind::Rzf || zero_dim <= q;
        let unique_wb = kind == InterBeamKind::Mbim && zero_dim <= 1;
        for beam in 0..k {
            let (wa_beam, wb_beam) = (a.w.column(beam).into_owned(), b.w.column(beam).into_owned());
            if unique_beam {
                prop_assert!(line_sine(&wa_beam, &wb_beam) <= 1e-6);
            }
            if unique_wb {
                prop_assert!(line_sine(&a.wb_block(beam), &b.wb_block(beam)) <= 1e-6);
            }
            let (wa, wb) = (a.wa_block(beam), b.wa_block(beam));
            for j in 0..q {
                let ratio = wb.column(j).norm() / wa.column(j).norm();
                prop_assert!((ratio - expected).abs() <= 1e-6 * expected);
            }
        }
        let (max_row, _) = feed_power_stats(&b.w);
        let cap = p / (c * c) / n as f64;
        prop_assert!((max_row - cap).abs() <= 1e-9 * cap);
    }

    #[test]
    fn coupler_is_antisymmetric(values in prop::collection::vec(-50.0f64..50.0, 1..8), dup in any::<bool>()) {
        let mut values = values;
        if dup && values.len() > 1 {
            values[1] = values[0];
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let floor = 1e-8;
        let (d, zeroed) = eigen_gap_coupler(&values, floor);
        let scale = values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut small = 0;
        for g in 0..values.len() {
            prop_assert_eq!(d[(g, g)], 0.0);
            for f in 0..values.len() {
                prop_assert_eq!(d[(g, f)], -d[(f, g)]);
                let gap = values[f] - values[g];
                if g != f && gap.abs() < floor * scale.max(f64::MIN_POSITIVE) {
                    prop_assert_eq!(d[(g, f)], 0.0);
                }
                if g < f && d[(g, f)] == 0.0 {
                    small += 1;
                }
            }
        }
        prop_assert_eq!(small, zeroed);
    }

    #[test]
    fn weyl_bound_holds(m in 1usize..10, n in 1usize..7, seed in any::<u64>(), gain in 1.0f64..4.0, gh in 0.001f64..1.0) {
        let mut r = rng(seed);
        let ht = gaussian(&mut r, m, n).map(|z| z * gain);
        let dt = gaussian(&mut r, m, n);
        let dt = dt.map(|z| z * (gh / dt.norm()));
        let mut nominal: Vec<f64> = (ht.adjoint() * &ht).symmetric_eigenvalues().iter().copied().collect();
        let lmax = nominal.iter().copied().fold(0.0, f64::max);
        let eps = epsilon_from(gh, lmax);
        let dk = gram_perturbation(&ht, &dt);
        prop_assume!(dk.clone().svd(false, false).singular_values.max() <= eps);
        let mut perturbed: Vec<f64> = (ht.adjoint() * &ht + dk).symmetric_eigenvalues().iter().copied().collect();
        nominal.sort_by(|a, b| b.total_cmp(a));
        perturbed.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in nominal.iter().zip(&perturbed) {
            prop_assert!(*b <= a + eps + 1e-12 * (lmax + eps));
        }
    }

    #[test]
    fn zero_uncertainty_is_nominal((k, q, n, seed, p) in shape(), mode in power_mode()) {
        let h = channel(k, q, n, seed);
        let nominal = two_stage(&h, p, InterBeamKind::Mbim, mode).unwrap();
        let robust = robust_two_stage(&h, &PerturbationBounds::zero(k), p, mode).unwrap().precoder;
        prop_assert_eq!(robust.wa, nominal.wa);
        prop_assert_eq!(robust.wb, nominal.wb);
    }

    #[test]
    fn small_uncertainty_stays_close((k, q, n, seed, _p) in shape(), mode in power_mode()) {
        let h = channel(k, q, n, seed);
        let p = 10.0;
        let nominal = two_stage(&h, p, InterBeamKind::Mbim, mode).unwrap();
        let bounds = PerturbationBounds::from_beam_bounds(vec![1e-20; k]).unwrap().with_lower_bound(1.0).unwrap();
        let robust = robust_two_stage(&h, &bounds, p, mode).unwrap();
        prop_assert!((&robust.precoder.wa - &nominal.wa).norm() <= 1e-6 * nominal.wa.norm());
        for b in 0..k {
            prop_assert!(line_sine(&robust.precoder.wb_block(b), &nominal.wb_block(b)) <= 1e-6);
        }
    }

    #[test]
    fn robust_power_matches_nominal_rule((k, q, n, seed, p) in shape(), mode in power_mode(), g in 0.0f64..2.0) {
        let h = channel(k, q, n, seed);
        let bounds = PerturbationBounds::from_beam_bounds(vec![g; k]).unwrap().with_lower_bound(1.0).unwrap();
        let r = robust_two_stage(&h, &bounds, p, mode).unwrap();
        prop_assert!(r.bounds.validate().is_ok());
        let (max_row, trace) = feed_power_stats(&r.precoder.w);
        match mode {
            PowerMode::PerFeed => prop_assert!((max_row - p / n as f64).abs() <= 1e-9 * p / n as f64),
            PowerMode::Total => prop_assert!((trace - p).abs() <= 1e-9 * p),
        }
    }

    #[test]
    fn grouping_ignores_a_constant_shift(
        k in 1usize..5,
        pool in 2usize..10,
        seed in any::<u64>(),
        shift in 0.0f64..100.0,
    ) {
        let mut r = rng(seed);
        let h = ChannelMatrix::new(gaussian(&mut r, k * pool, 4), k, pool).unwrap();
        let q = 1 + (seed as usize) % pool;
        let gamma: Vec<f64> = (0..k * pool).map(|i| ((i * 7919) % 13) as f64 * 0.1).collect();
        let shifted: Vec<f64> = gamma.iter().map(|g| g + shift).collect();
        let a = robust_group_users(&h, &gamma, q, seed).unwrap();
        let b = robust_group_users(&h, &shifted, q, seed).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.member_set(), y.member_set());
        }
    }

    #[test]
    fn groups_are_well_formed_and_repeatable(k in 1usize..5, pool in 1usize..10, seed in any::<u64>()) {
        let h = ChannelMatrix::new(gaussian(&mut rng(seed), k * pool, 3), k, pool).unwrap();
        let q = 1 + (seed as usize / 7) % pool;
        let a = group_users(&h, q, seed).unwrap();
        prop_assert_eq!(&a, &group_users(&h, q, seed).unwrap());
        for (beam, g) in a.iter().enumerate() {
            prop_assert_eq!(g.beam, beam);
            prop_assert_eq!(g.member_set().len(), q);
            prop_assert!(g.members.contains(&g.seed_user));
            prop_assert!(g.members.iter().all(|&m| m < pool));
        }
    }

    #[test]
    fn gateway_partition_is_complete(k in 1usize..30, f in 1usize..3, extra in 0usize..5, q in 1usize..4, g_pick in any::<usize>()) {
        let n = k * f + extra;
        let g = 1 + g_pick % k;
        let plan = make_plan(k, n, q, g, GatewayMode::Icp).unwrap();
        let mut beams = vec![0; k];
        let mut feeds = vec![0; n];
        let (mut next_beam, mut next_feed) = (0, 0);
        for gw in 0..g {
            let (b, fr) = (plan.beams_of(gw), plan.feeds_of(gw));
            prop_assert_eq!(b.start, next_beam);
            prop_assert_eq!(fr.start, next_feed);
            prop_assert!(!b.is_empty() && !fr.is_empty());
            next_beam = b.end;
            next_feed = fr.end;
            b.for_each(|i| beams[i] += 1);
            fr.for_each(|i| feeds[i] += 1);
        }
        prop_assert!(beams.iter().all(|&c| c == 1));
        prop_assert!(feeds.iter().all(|&c| c == 1));
    }

    #[test]
    fn more_cooperation_knows_more(kg in 1usize..4, g in 2usize..5, q in 1usize..3, seed in any::<u64>()) {
        let k = kg * g;
        let h = channel(k, q, k, seed);
        let mut modes = vec![GatewayMode::Icp];
        modes.extend((1..g).map(GatewayMode::Closest));
        modes.push(GatewayMode::FullSharing);
        let views: Vec<_> = modes
            .iter()
            .map(|&m| share_csi(&h, &make_plan(k, k, q, g, m).unwrap()).unwrap())
            .collect();
        for pair in views.windows(2) {
            for (small, large) in pair[0].iter().zip(&pair[1]) {
                for b in 0..k {
                    prop_assert!(!small.exact_beams[b] || large.exact_beams[b]);
                }
                prop_assert!(small.overhead_complex_count <= large.overhead_complex_count);
            }
        }
        let plan = make_plan(k, k, q, g, GatewayMode::Icp).unwrap();
        for view in &views[0] {
            let (rows, cols) = (plan.user_rows(view.gateway), plan.feeds_of(view.gateway));
            let local = h.matrix().view((rows.start, cols.start), (rows.len(), cols.len()));
            prop_assert_eq!(view.h.matrix().rows(rows.start, rows.len()).into_owned(), local.into_owned());
        }
        for view in views.last().unwrap() {
            prop_assert!(view.exact_beams.iter().all(|&e| e));
        }
    }

    #[test]
    fn beam_rate_never_beats_a_member(sinrs in prop::collection::vec(0.0f64..1000.0, 1..6)) {
        let table = ModcodTable::dvbs2x();
        let budget = Default::default();
        let rate = beam_rate(&sinrs, &table, &budget, 1.0);
        for s in &sinrs {
            prop_assert!(rate <= beam_rate(&[*s], &table, &budget, 1.0));
        }
        let worst = sinrs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(rate == 0.0, 10.0 * worst.log10() < table.min_threshold_db());
    }

    #[test]
    fn interference_energy_balances((k, q, n, seed, p) in shape(), kind in kind()) {
        let h = channel(k, q, n, seed);
        let w = two_stage(&h, p, kind, PowerMode::PerFeed).unwrap().w;
        let sinrs = sinr_all(&h, &w);
        let hw = h.matrix() * &w;
        let mut signal = 0.0;
        let mut interference = 0.0;
        for b in 0..k {
            for u in 0..q {
                let s = hw[(h.row_index(b, u), b)].norm_sqr();
                signal += s;
                if s > 0.0 {
                    interference += s / sinrs[h.row_index(b, u)] - 1.0;
                }
            }
        }
        let total = hw.norm_squared();
        prop_assume!(signal > 0.0);
        prop_assert!((interference - (total - signal)).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn modcod_is_monotone(a in -10.0f64..30.0, b in -10.0f64..30.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for table in [ModcodTable::dvbs2x(), ModcodTable::coarse()] {
            prop_assert!(table.lookup(lo) <= table.lookup(hi));
            if lo < table.min_threshold_db() {
                prop_assert_eq!(table.lookup(lo), 0.0);
            }
        }
    }

    #[test]
    fn stacking_round_trip((k, q, n, seed, _p) in shape(), pick in any::<usize>()) {
        let h = channel(k, q, n, seed);
        prop_assume!(k >= 2);
        let b = pick % k;
        let back = ChannelMatrix::reinsert_beam(&h.without_beam(b), b, &h.beam_block(b)).unwrap();
        prop_assert_eq!(back.matrix(), h.matrix());
    }

    #[test]
    fn phases_have_unit_modulus(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>(), chi in 0.0f64..30.0, uniform in any::<bool>()) {
        let variant = if uniform { PhaseVariant::Uniform } else { PhaseVariant::UltraStable };
        let model = PhaseModel { variant, chi_deg: chi, rng_seed: seed };
        let phi: CMat<f64> = build_phase_matrix(&model, rows, cols).unwrap();
        prop_assert!(phi.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        if !uniform && chi == 0.0 {
            for r in phi.row_iter() {
                prop_assert!(r.iter().all(|z| (z - r[0]).norm() <= 1e-12));
            }
        }
    }

    #[test]
    fn perturbation_bounds_add_up((k, q, n, seed, _p) in shape(), ratio in 0.0f64..0.5) {
        let h = channel(k, q, n, seed);
        let (_, delta, bounds) = perturb_channel(&h, ratio, seed).unwrap();
        let total: f64 = bounds.gamma_k.iter().sum();
        prop_assert!((total - delta.norm_squared()).abs() <= 1e-12 * delta.norm_squared().max(1.0));
        prop_assert!((delta.norm() - ratio * h.frobenius_norm()).abs() <= 1e-12 * h.frobenius_norm());
        for b in 0..k {
            prop_assert!((bounds.gamma_tilde_k[b] + bounds.gamma_k[b] - bounds.gamma_total).abs() <= 1e-12 * total.max(1.0));
        }
    }

    #[test]
    fn eigen_reconstructs(n in 1usize..8, seed in any::<u64>()) {
        let a = hermitian(&mut rng(seed), n);
        let e = hermitian_eigen(&a);
        prop_assert!((e.reconstruct() - &a).norm() <= 1e-10 * a.norm().max(f64::MIN_POSITIVE));
        prop_assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn seeds_are_pure(master in any::<u64>(), trial in 0usize..10_000) {
        for purpose in [SeedPurpose::Users, SeedPurpose::Phase, SeedPurpose::Perturbation, SeedPurpose::Grouping] {
            prop_assert_eq!(derive_seed(master, trial, purpose), derive_seed(master, trial, purpose));
        }
        prop_assert_ne!(derive_seed(master, trial, SeedPurpose::Users), derive_seed(master, trial, SeedPurpose::Phase));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn monte_carlo_is_repeatable(seed in any::<u64>()) {
        let cfg = ExperimentConfig {
            trials: 6,
            master_seed: seed,
            power_dbw: vec![20.0],
            scenarios: vec![Scenario::new("mbim", Scheme::Mbim), Scenario::new("rzf", Scheme::Rzf)],
            ..Default::default()
        };
        let csv = || {
            let r = run_monte_carlo(&cfg).unwrap();
            let mut buf = Vec::new();
            r.write_results_csv(&mut buf, &r.aggregate()).unwrap();
            buf
        };
        prop_assert_eq!(csv(), csv());
    }
}

#[test]
fn grouping_raises_collinearity() {
    let mut wins = 0;
    for trial in 0..500u64 {
        let h = ChannelMatrix::new(gaussian(&mut rng(trial), 20, 3), 1, 20).unwrap();
        let grouped = &group_users(&h, 3, trial).unwrap()[0];
        let random = &random_groups(&h, 3, trial + 1_000_000).unwrap()[0];
        if mean_pairwise_collinearity(&h, grouped) >= mean_pairwise_collinearity(&h, random) {
            wins += 1;
        }
    }
    assert!(wins >= 275, "grouped collinearity won {wins} of 500 trials");
}

#[test]
fn single_precision_meets_the_budget() {
    let h64 = gaussian(&mut rng(5), 8, 6);
    let h = ChannelMatrix::new(h64.map(|z| Complex::new(z.re as f32, z.im as f32)), 4, 2).unwrap();
    for kind in [InterBeamKind::Mbim, InterBeamKind::Rzf] {
        let w = two_stage::<f32>(&h, 100.0, kind, PowerMode::Total).unwrap().w;
        let trace: f32 = w.iter().map(|z| z.norm_sqr()).sum();
        assert!((trace - 100.0).abs() <= 1e-4 * 100.0, "trace {trace}");
    }
}
