use corridor_core::ftc::{
    compute_reward, density_bin, discretize_state, flow_bin, queue_bin, FtcRawState, RewardParams,
};
use corridor_core::mesosim::{ControlVector, Simulator, SimParams};
use corridor_core::netmodel::{DemandLevel, NetworkPreset, ScenarioConfig};
use corridor_core::qcore::{learning_rate, ActionKey, QTable, StateKey};
use corridor_core::tsc::{flow_ratios, green_splits, DemandEstimate, FlowRatios, SignalPlan};
use proptest::prelude::*;

fn raw_state() -> impl Strategy<Value = FtcRawState> {
    (
        -50.0..400.0f64,
        -6000.0..6000.0f64,
        -10.0..900.0f64,
        0u8..2,
        1u8..6,
        prop::array::uniform4(-100.0..5000.0f64),
    )
        .prop_map(|(rho, q, w, nc, np, d)| FtcRawState {
            density_veh_km: rho,
            net_inflow_veh_h: q,
            onramp_queue_m: w,
            closed_lanes: nc,
            dominant_phase: np,
            demand_east_veh_h: d[0],
            demand_south_veh_h: d[1],
            demand_west_veh_h: d[2],
            demand_north_veh_h: d[3],
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn bins_are_idempotent_and_in_range(x in -1000.0..6000.0f64) {
        let d = density_bin(x);
        prop_assert_eq!(density_bin(f64::from(d)), d);
        prop_assert!((20..=150).contains(&d) && d % 10 == 0);
        let q = flow_bin(x);
        prop_assert_eq!(flow_bin(f64::from(q)), q);
        prop_assert!((0..=4000).contains(&q) && q % 100 == 0);
        let w = queue_bin(x);
        prop_assert_eq!(queue_bin(f64::from(w)), w);
        prop_assert!((0..=500).contains(&w) && w % 50 == 0);
    }

    #[test]
    fn discretized_state_is_a_fixed_point(raw in raw_state()) {
        let key = discretize_state(&raw);
        prop_assert_eq!(key.0.len(), 9);
        let again = FtcRawState {
            density_veh_km: f64::from(key.0[0]),
            net_inflow_veh_h: f64::from(key.0[1]),
            onramp_queue_m: f64::from(key.0[2]),
            closed_lanes: key.0[3] as u8,
            dominant_phase: key.0[4] as u8,
            demand_east_veh_h: f64::from(key.0[5]),
            demand_south_veh_h: f64::from(key.0[6]),
            demand_west_veh_h: f64::from(key.0[7]),
            demand_north_veh_h: f64::from(key.0[8]),
        };
        prop_assert_eq!(discretize_state(&again), key);
    }

    #[test]
    fn reward_zero_once_ramp_queue_reaches_reference(
        tt in 0.01..30.0f64, excess in 0.0..500.0f64, rho in 0.0..500.0f64, rho_star in 1.0..150.0f64,
    ) {
        let p = RewardParams {
            reference_queue_m: 300.0,
            desired_density_veh_km: rho_star,
            section_length_km: 1.6,
            free_flow_speed_kmh: 100.0,
        };
        prop_assert_eq!(compute_reward(tt, 300.0 + excess, rho, &p), 0.0);
    }

    #[test]
    fn green_splits_fill_the_effective_cycle(
        d in prop::array::uniform4(0.0..3000.0f64), cycle in 17.0..400.0f64,
    ) {
        let ix = corridor_core::netmodel::Intersection::default();
        let est = DemandEstimate { east: d[0], south: d[1], west: d[2], north: d[3] };
        let ratios = flow_ratios(&est, &ix.turn_ratios, ix.saturation_flow_veh_h).unwrap();
        let g = green_splits(cycle, 16.0, &ratios).unwrap();
        let sum: f64 = g.iter().sum();
        prop_assert!((sum - (cycle - 16.0)).abs() < 1e-9);
        prop_assert!(g.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn q_values_stay_within_discounted_reward_bounds(
        steps in prop::collection::vec((0i32..6, 0i32..3, 0.0..1.0f64, 0i32..6), 1..400),
        discount in 0.0..0.99f64,
    ) {
        let mut t = QTable::new(discount).unwrap();
        let hi = 1.0 / (1.0 - discount);
        for (x, a, r, y) in steps {
            t.update(&StateKey(vec![x]), &ActionKey(vec![a]), r, &StateKey(vec![y])).unwrap();
        }
        for (_, rec) in t.states() {
            for pair in rec.actions.values() {
                prop_assert!(pair.q >= 0.0 && pair.q <= hi + 1e-9, "q = {}", pair.q);
            }
        }
    }

    #[test]
    fn learning_rate_is_a_decreasing_fraction(n in 0u64..10_000_000, discount in 0.0..0.999f64) {
        let a = learning_rate(n, discount);
        let b = learning_rate(n + 1, discount);
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b <= a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random control sequences on the corridor never create or lose vehicles and
    /// never exceed jam density.
    #[test]
    fn corridor_conserves_vehicles(
        seed in any::<u64>(),
        high in any::<bool>(),
        incident in any::<bool>(),
        controls in prop::collection::vec((prop::collection::vec(0usize..5, 6), prop::collection::vec(0usize..8, 6), any::<bool>()), 40),
    ) {
        let mut cfg = ScenarioConfig { network: NetworkPreset::I710, seed, ..Default::default() };
        cfg.demand_level = if high { DemandLevel::High } else { DemandLevel::Moderate };
        cfg.incident.enabled = incident;
        cfg.incident.start_s = 120.0;
        cfg.incident.clear_s = 900.0;
        let net = cfg.build_network().unwrap();
        let profile = cfg.build_demand(&net);
        let plans = vec![SignalPlan::uniform(90.0, 16.0); net.intersections.len()];
        let mut sim = Simulator::new(net.clone(), &profile, SimParams::from_scenario(&cfg), plans.clone(), seed).unwrap();
        let speeds = [60.0, 70.0, 80.0, 90.0, 100.0];
        let reds = corridor_core::mesosim::RED_DURATIONS_S;
        let mut worst = 0.0f64;
        for (v, r, lc) in &controls {
            let mut c = ControlVector::inactive(&net, plans.clone());
            c.speed_limits_kmh = v.iter().map(|i| speeds[*i]).collect();
            c.red_s = r.iter().map(|i| reds[*i]).collect();
            c.lc_merge = vec![*lc; net.sections.len()];
            c.lc_lane_drop = *lc;
            for _ in 0..30 {
                sim.step(&c).unwrap();
                worst = worst.max(sim.state().conservation_error().abs());
            }
            for (i, s) in sim.state().sections.iter().enumerate() {
                let jam = net.sections[i].fd.jam_density_veh_km;
                prop_assert!(s.density_veh_km <= jam + 1e-9, "section {} density {}", i, s.density_veh_km);
            }
        }
        prop_assert!(worst < 1e-6, "conservation error {}", worst);
    }
}

#[test]
fn flow_ratio_worked_example() {
    let ix = corridor_core::netmodel::Intersection::default();
    let est = DemandEstimate { east: 1800.0, south: 1800.0, west: 1800.0, north: 1800.0 };
    let FlowRatios { per_phase } = flow_ratios(&est, &ix.turn_ratios, ix.saturation_flow_veh_h).unwrap();
    let want = [0.25, 0.375, 0.25, 0.375, 0.125];
    for (a, b) in per_phase.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}
