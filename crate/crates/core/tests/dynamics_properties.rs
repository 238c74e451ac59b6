use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use switchsim::dynamics::{
    build_effective_hamiltonian_with, build_jump_operators, run_ensemble, simulate_pulse_scattering_with, HilbertSpace,
    Outcome, ScatterConfig, SourceProfile, TrajectoryEngine, TrajectoryOptions,
};
use switchsim::model::{angular, AtomLevel, Direction, SystemParams};

fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (5.0..40.0f64, 0.0..15.0f64, 10.0..50.0f64, 0.0..5.0f64, any::<bool>()).prop_map(|(g, ki, kex, h, parasitic)| {
        let p = SystemParams {
            kappa_i: ki,
            kappa_ex: kex,
            h,
            ..SystemParams::experiment().with_coupling(g)
        };
        if parasitic {
            p
        } else {
            p.without_parasitics()
        }
    })
}

fn level_strategy() -> impl Strategy<Value = AtomLevel> {
    prop_oneof![Just(AtomLevel::GMinus), Just(AtomLevel::GZero), Just(AtomLevel::GPlus)]
}

fn fast_gaussian() -> SourceProfile {
    SourceProfile::gaussian(0.0, 15.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_never_grows_and_sectors_conserve_excitations(
        p in params_strategy(),
        level in level_strategy(),
        n in 1usize..=2,
        seed in any::<u64>(),
    ) {
        let engine = TrajectoryEngine::new(&p, &HilbertSpace::default(), Direction::Rightward).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = 0usize;
        let mut wrong_sector = 0usize;
        let (jumps, _) = engine
            .run_observed(level, n, &fast_gaussian(), &TrajectoryOptions::default(), &mut rng, &mut |s| {
                if s.norm_after > s.norm_before * (1.0 + 1e-9) {
                    violations += 1;
                }
                if s.sector.states.iter().any(|b| b.excitations() != s.sector.n) {
                    wrong_sector += 1;
                }
            })
            .unwrap();
        prop_assert_eq!(violations, 0);
        prop_assert_eq!(wrong_sector, 0);
        prop_assert_eq!(jumps.len(), n);
        prop_assert!(jumps.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn jump_rates_account_for_norm_loss(
        p in params_strategy(),
        n in 1usize..=2,
        kappa_s in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let engine = TrajectoryEngine::new(&p, &HilbertSpace::default(), Direction::Leftward).unwrap();
        let sector = engine.sector(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi: Vec<Complex64> = (0..sector.dim())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let total: f64 = engine.channel_rates(sector, kappa_s, &psi).iter().map(|(_, r)| r).sum();
        let decay = engine.norm_decay_rate(sector, kappa_s, &psi);
        prop_assert!((total - decay).abs() <= 1e-12 * total.abs().max(1.0), "{} vs {}", total, decay);
    }

    #[test]
    fn dense_generator_is_consistent_with_jumps(p in params_strategy(), kappa_s in 0.01..2.0f64) {
        // H_eff − H_eff† = −i Σ C†C
        let space = HilbertSpace::default();
        let h = build_effective_hamiltonian_with(&p, &space, Direction::Rightward, kappa_s).unwrap();
        let ops = build_jump_operators(&p, &space, Direction::Rightward, kappa_s).unwrap();
        let anti = &h - h.adjoint();
        let mut sum = nalgebra::DMatrix::<Complex64>::zeros(h.nrows(), h.ncols());
        for (_, c) in &ops {
            sum += c.adjoint() * c;
        }
        let diff = anti + sum * Complex64::new(0.0, 1.0);
        prop_assert!(diff.norm() < 1e-9, "{}", diff.norm());
    }
}

#[test]
fn outcome_probabilities_sum_to_one() {
    let p = SystemParams::experiment();
    let cfg = ScatterConfig::control_pulse();
    let t = simulate_pulse_scattering_with(&p, &cfg, AtomLevel::GMinus, 500, 4).unwrap();
    let mut total = 0.0;
    for o in Outcome::ALL {
        for toggle in [true, false] {
            total += t.probability(o, toggle);
        }
    }
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}

#[test]
fn seeded_ensembles_are_reproducible() {
    let p = SystemParams::experiment();
    let mut cfg = ScatterConfig::control_pulse();
    cfg.g_dist = Some(switchsim::model::GDistribution::experiment());
    let a = simulate_pulse_scattering_with(&p, &cfg, AtomLevel::GMinus, 300, 77).unwrap();
    let b = simulate_pulse_scattering_with(&p, &cfg, AtomLevel::GMinus, 300, 77).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let c = simulate_pulse_scattering_with(&p, &cfg, AtomLevel::GMinus, 300, 78).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

#[test]
fn mirrored_drive_gives_mirrored_outcomes() {
    // A leftward photon on m_F = +1 is the mirror image of a rightward photon
    // on m_F = −1.
    let p = SystemParams::experiment();
    let right = ScatterConfig::control_pulse();
    let left = ScatterConfig {
        drive: Direction::Leftward,
        ..right
    };
    let n = 4000;
    let a = simulate_pulse_scattering_with(&p, &right, AtomLevel::GMinus, n, 5).unwrap();
    let b = simulate_pulse_scattering_with(&p, &left, AtomLevel::GPlus, n, 5).unwrap();
    for o in Outcome::ALL {
        for toggle in [true, false] {
            let (x, y) = (a.probability(o, toggle), b.probability(o, toggle));
            let se = ((x * (1.0 - x) + y * (1.0 - y)) / n as f64).sqrt().max(1.0 / n as f64);
            assert!((x - y).abs() < 4.0 * se, "{o:?} {toggle}: {x} vs {y}");
        }
    }
}

#[test]
fn doubling_cutoffs_changes_nothing() {
    let p = SystemParams::experiment();
    let base = ScatterConfig::control_pulse();
    let wide = ScatterConfig {
        space: base.space.doubled(),
        ..base
    };
    let n = 2000;
    for level in [AtomLevel::GMinus, AtomLevel::GPlus] {
        let a = run_ensemble(&p, &base, level, 2, n, 9).unwrap();
        let b = run_ensemble(&p, &wide, level, 2, n, 9).unwrap();
        let tally = |recs: &[switchsim::dynamics::TrajectoryRecord]| {
            let mut t = std::collections::BTreeMap::new();
            for r in recs {
                *t.entry((r.jumps[0].channel, r.final_atom)).or_insert(0u64) += 1;
            }
            t
        };
        let (ta, tb) = (tally(&a), tally(&b));
        for key in ta.keys().chain(tb.keys()) {
            let pa = *ta.get(key).unwrap_or(&0) as f64 / n as f64;
            let pb = *tb.get(key).unwrap_or(&0) as f64 / n as f64;
            assert!((pa - pb).abs() < 1e-3, "{key:?}: {pa} vs {pb}");
        }
    }
}

#[test]
fn constant_source_matches_angular_units() {
    let p = SystemParams::experiment();
    let prof = SourceProfile::constant_mhz(p.kappa_s).unwrap();
    assert!((prof.rate(0.0) - angular(p.kappa_s)).abs() < 1e-15);
}

#[test]
fn constant_source_matches_bandwidth_averaged_linear_response() {
    use switchsim::analytic::source_averaged_probabilities;
    let p = SystemParams {
        h: 0.0,
        kappa_s: 0.3,
        ..SystemParams::experiment().without_parasitics()
    };
    let cfg = ScatterConfig::constant_source(&p).unwrap();
    let n = 40_000;
    let t = simulate_pulse_scattering_with(&p, &cfg, AtomLevel::GMinus, n, 12).unwrap();
    let (pr, pt) = source_averaged_probabilities(&p, p.kappa_s).unwrap();
    for (outcome, oracle) in [(Outcome::Reflection, pr), (Outcome::Transmission, pt)] {
        let v = t.outcome_probability(outcome).value().unwrap();
        let se = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!((v - oracle).abs() < 3.0 * se, "{outcome:?}: {v} vs {oracle} ± {se}");
    }
}
