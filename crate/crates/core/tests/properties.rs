use ggcoord::analysis::{coordination_efficiency, expected_utility, fano_bound};
use ggcoord::equilibrium::{best_response_threshold, ce_threshold, ne_threshold, oracle_threshold};
use ggcoord::numerics::{binary_entropy, inverse_binary_entropy};
use ggcoord::{AgentCount, GameParams};
use proptest::prelude::*;

fn agent_count() -> impl Strategy<Value = AgentCount> {
    prop_oneof![Just(AgentCount::Infinite), (2u64..200).prop_map(AgentCount::Finite)]
}

fn game() -> impl Strategy<Value = GameParams> {
    (agent_count(), 0.2f64..4.0, 0.2f64..5.0, 0.02f64..6.0)
        .prop_map(|(n, l, sx2, sz2)| GameParams::new(n, l, sx2, sz2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn efficiency_report_invariants(p in game(), tau in -3.0f64..5.0) {
        let r = coordination_efficiency(tau, oracle_threshold(&p), &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.rho));
        prop_assert!((r.rho - (1.0 - r.miscoordination_integral)).abs() <= 1e-12);
        prop_assert!(r.std_error == 0.0);
    }

    #[test]
    fn fano_report_invariants(p in game(), shift in -1.5f64..1.5) {
        let to = oracle_threshold(&p) + shift;
        let f = fano_bound(to, &p).unwrap();
        prop_assert!((f.h_astar - binary_entropy(f.p_astar_one).unwrap()).abs() <= 1e-12);
        prop_assert!(f.h_astar_given_y >= 0.0 && f.h_astar_given_y <= f.h_astar + 1e-6);
        let inv = 1.0 - inverse_binary_entropy(f.h_astar_given_y).unwrap();
        prop_assert!((f.rho_upper_bound - inv).abs() <= 1e-10);
        prop_assert!((0.5..=1.0).contains(&f.rho_upper_bound));
    }

    #[test]
    fn bound_dominates_equilibrium_and_ce(p in game()) {
        let to = oracle_threshold(&p);
        let bound = fano_bound(to, &p).unwrap().rho_upper_bound;
        for tau in [ne_threshold(&p).unwrap().tau_star, ce_threshold(&p), to] {
            prop_assert!(coordination_efficiency(tau, to, &p).unwrap().rho <= bound + 1e-3);
        }
    }

    #[test]
    fn threshold_relations(p in game()) {
        let to = oracle_threshold(&p);
        let ce = ce_threshold(&p);
        prop_assert!((ce - (1.0 + p.sigma_z_sq() / p.sigma_x_sq()) * to).abs() <= 1e-12 * ce.abs().max(1.0));
        let ne = ne_threshold(&p).unwrap().tau_star;
        prop_assert!((best_response_threshold(ne, &p).unwrap() - ne).abs() <= 1e-9);
        prop_assert!(ne >= to - 1e-9);
    }

    #[test]
    fn equilibrium_utility_beats_ce(sz2 in 0.05f64..4.0) {
        let p = GameParams::new(AgentCount::Infinite, 1.0, 1.0, sz2).unwrap();
        let ne = ne_threshold(&p).unwrap().tau_star;
        prop_assert!(expected_utility(ne, &p).unwrap() >= expected_utility(ce_threshold(&p), &p).unwrap());
    }
}
