use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapley_core::analysis::stability::{classify_stability, OrbitId};
use shapley_core::flow::{constrained_target, hexagon_seed, jitter_residual, simulate_constrained};
use shapley_core::game::{random_interior, shapley_family};
use shapley_core::induced::{first_return, project_to_boundary, ray_point, BoundaryPoint};
use shapley_core::jitter::{random_admissible_itinerary, realize_itinerary};
use shapley_core::{Limits, SectionSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn constrained_orbit_stays_on_double_indifference(beta in 0.05f64..0.95, r in 0.05f64..1.0) {
        let g = shapley_family(beta).unwrap();
        let start = ray_point(&g, &hexagon_seed(&g).unwrap(), r);
        let traj = simulate_constrained(&g, &start, &Limits { max_events: 12, ..Limits::default() }).unwrap();
        for leg in &traj.legs {
            prop_assert!(jitter_residual(&g, &leg.start, &leg.targets) <= 1e-9);
            let next = constrained_target(&g, &leg.end).unwrap();
            prop_assert!(jitter_residual(&g, &leg.end, &next) <= 1e-9);
        }
    }

    #[test]
    fn induced_orbits_cross_the_global_section(seed in 0u64..1_000_000, beta in 0.05f64..0.9) {
        let g = shapley_family(beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = project_to_boundary(&random_interior(&mut rng), &g.equilibrium).unwrap();
        // usually within a circuit; starts near the stable set of the
        // anticlockwise saddle can circle it for a long while first
        let hits = first_return(&g, &SectionSpec::global_s(), &b, 1, 400);
        prop_assert!(hits.is_ok(), "{:?}", hits.err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn realized_itineraries_round_trip(seed in 0u64..1_000_000, m in 2usize..10) {
        let model = shapley_core::analysis::corners::game_jitter_model(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ks = random_admissible_itinerary(&model, m, 20, &mut rng);
        let r = realize_itinerary(&model, &ks).unwrap();
        prop_assert_eq!(r.realized, ks);
    }
}

#[test]
fn anticlockwise_orbit_never_meets_the_global_section() {
    let g = shapley_family(0.95).unwrap();
    let rep = classify_stability(&g, OrbitId::AntiShapley).unwrap();
    let b = BoundaryPoint { state: rep.fixed_point.unwrap() };
    assert!(first_return(&g, &SectionSpec::global_s(), &b, 1, 60).is_err());
}
