mod common;

use common::{lp_violation, random_lp, vertex_oracle};
use microclimate::lp::{solve_lp, LinearProgram, LpStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_vertex_enumeration_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0usize; 3];
    for case in 0..1000 {
        let p = random_lp(&mut rng);
        let (status, value) = vertex_oracle(&p);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, status, "case {case}: {p:?}");
        match status {
            LpStatus::Optimal => {
                counts[0] += 1;
                assert!(
                    (sol.objective - value).abs() <= 1e-8 * (1.0 + value.abs()),
                    "case {case}: got {} expected {value}",
                    sol.objective
                );
                assert!(lp_violation(&p, &sol.x) <= 1e-8, "case {case}");
            }
            LpStatus::Infeasible => counts[1] += 1,
            LpStatus::Unbounded => counts[2] += 1,
        }
    }
    // the generator must exercise every outcome
    assert!(counts.iter().all(|&c| c >= 20), "{counts:?}");
}

fn small_lp() -> impl Strategy<Value = LinearProgram> {
    any::<u64>().prop_map(|seed| random_lp(&mut ChaCha8Rng::seed_from_u64(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn objective_scales_with_cost(p in small_lp(), k in 0.01f64..100.0) {
        let base = solve_lp(&p).unwrap();
        let mut scaled = p.clone();
        scaled.c.iter_mut().for_each(|c| *c *= k);
        let s = solve_lp(&scaled).unwrap();
        prop_assert_eq!(s.status, base.status);
        if base.status == LpStatus::Optimal {
            prop_assert!((s.objective - k * base.objective).abs() <= 1e-8 * (1.0 + (k * base.objective).abs()));
            for (a, b) in s.x.iter().zip(&base.x) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{:?} vs {:?}", s.x, base.x);
            }
        }
    }

    #[test]
    fn optimal_points_are_feasible_and_match_objective(p in small_lp()) {
        let s = solve_lp(&p).unwrap();
        if s.status == LpStatus::Optimal {
            prop_assert!(lp_violation(&p, &s.x) <= 1e-8);
            let cx: f64 = p.c.iter().zip(&s.x).map(|(a, b)| a * b).sum();
            prop_assert!((cx - s.objective).abs() <= 1e-9 * (1.0 + cx.abs()));
            prop_assert!(s.duals_ub.iter().all(|&d| d <= 1e-9));
        }
    }

    #[test]
    fn relaxing_a_row_never_hurts(p in small_lp(), extra in 0.0f64..5.0) {
        prop_assume!(!p.b_ub.is_empty());
        let base = solve_lp(&p).unwrap();
        prop_assume!(base.status == LpStatus::Optimal);
        let mut relaxed = p.clone();
        relaxed.b_ub[0] += extra;
        let r = solve_lp(&relaxed).unwrap();
        if r.status == LpStatus::Optimal {
            prop_assert!(r.objective <= base.objective + 1e-8 * (1.0 + base.objective.abs()));
        } else {
            prop_assert_eq!(r.status, LpStatus::Unbounded);
        }
    }
}
