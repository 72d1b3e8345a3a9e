use optcmd::geometry::project_simplex;
use optcmd::predictors::clamp_g;
use optcmd::prox::subproblem_objective;
use optcmd::regret::{fmt_g12, RegretLedger, RoundInput};
use optcmd::verify::oracles::{random_nonsmooth, random_point, random_setup, normal_vec, NonsmoothKind, SetKind};
use optcmd::{composite_prox, Schedule, StepSizeState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prox_is_feasible_and_beats_feasible_points(
        seed in any::<u64>(),
        set in 0usize..SetKind::ALL.len(),
        r in 0usize..NonsmoothKind::ALL.len(),
        dim in 1usize..6,
        eta in 0.05f64..3.0,
    ) {
        let (set, r) = (SetKind::ALL[set], NonsmoothKind::ALL[r]);
        prop_assume!(set.supports(r));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let setup = random_setup(set, dim, &mut rng).unwrap();
        let nonsmooth = random_nonsmooth(r, setup.dim, &mut rng);
        let v = random_point(&setup, &mut rng);
        let w = normal_vec(&mut rng, setup.dim, 2.0);
        let x = composite_prox(&setup, &w, &nonsmooth, eta, &v).unwrap();
        prop_assert!(setup.contains(&x));
        let best = subproblem_objective(&setup, &w, &nonsmooth, eta, &v, &x).unwrap();
        for _ in 0..20 {
            let z = random_point(&setup, &mut rng);
            let other = subproblem_objective(&setup, &w, &nonsmooth, eta, &v, &z).unwrap();
            prop_assert!(best <= other + 1e-7 * (1.0 + other.abs()), "{best} > {other}");
        }
    }

    #[test]
    fn bregman_is_nonnegative(seed in any::<u64>(), set in 0usize..SetKind::ALL.len(), dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let setup = random_setup(SetKind::ALL[set], dim, &mut rng).unwrap();
        let (x, y) = (random_point(&setup, &mut rng), random_point(&setup, &mut rng));
        prop_assert!(setup.bregman(&x, &y).unwrap() >= -1e-12);
        prop_assert!(setup.bregman(&x, &x).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn simplex_projection_lands_on_simplex(x in prop::collection::vec(-10.0f64..10.0, 1..12)) {
        let p = project_simplex(&x);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn clamp_g_takes_only_three_values(
        r in prop::collection::vec(0.5f64..1.5, 1..10),
        lo in 0.5f64..0.99,
        hi in 1.01f64..1.5,
    ) {
        for (g, r) in clamp_g(&r, lo, hi).iter().zip(&r) {
            prop_assert!(*g == lo || *g == 1.0 || *g == hi);
            prop_assert_eq!(*g > 1.0, *r > 1.0);
        }
    }

    #[test]
    fn convex_schedule_never_increases(
        beta in 0.1f64..10.0,
        errs in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..50),
    ) {
        let mut s = StepSizeState::new(beta).unwrap();
        let mut prev = f64::INFINITY;
        for (t, (g, d)) in errs.iter().enumerate() {
            let eta = s.eta(Schedule::Thm1, t + 1).unwrap();
            prop_assert!(eta <= prev && eta > 0.0);
            prop_assert!(eta <= 1.0 / (2.0 * beta) + 1e-15);
            prev = eta;
            s.accumulate(*g, *d, 0.0).unwrap();
        }
    }

    #[test]
    fn g12_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = fmt_g12(x).parse().unwrap();
        let rel = ((back - x) / x.abs().max(f64::MIN_POSITIVE)).abs();
        prop_assert!(rel <= 1e-11 || back == x, "{x} -> {}", fmt_g12(x));
    }

    #[test]
    fn ledger_totals_equal_row_sums(
        rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..2.0), 1..60),
    ) {
        let mut ledger = RegretLedger::new();
        for (loss, cmp, e) in &rows {
            ledger.push(RoundInput {
                played: vec![0.0],
                loss: *loss,
                comparator_loss: Some(*cmp),
                grad_err_sq: *e,
                delta_abs: *e,
                ref_step: *e,
                eta: 1.0,
            }).unwrap();
        }
        prop_assert!(ledger.resummation_holds());
        let last = ledger.last().unwrap();
        let reg: f64 = rows.iter().map(|(l, c, _)| l - c).sum();
        prop_assert!((last.reg_d - reg).abs() <= 1e-9);
    }
}
