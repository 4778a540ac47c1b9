mod common;

use common::{all_optima, choices, random_instance, SMALL};
use hetalloc::compaction::HighLayerModel;
use hetalloc::model::Platform;
use hetalloc::solver::{brute_force, check_scheme, solve, SolverConfig, Status, UnitOrder};
use hetalloc::Quantity;
use proptest::prelude::*;

fn scale_exec(model: &HighLayerModel, c: Quantity) -> HighLayerModel {
    let mut m = model.clone();
    for u in &mut m.units {
        for v in &mut u.variants {
            v.props.exec_ms = v.props.exec_ms * c;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_matches_exhaustive_search(seed in any::<u64>()) {
        let inst = random_instance(seed, SMALL);
        let cfg = SolverConfig::default();
        let fast = solve(&inst.model, &inst.platform, &cfg).unwrap();
        let slow = brute_force(&inst.model, &inst.platform, &cfg).unwrap();
        prop_assert_eq!(fast.status, slow.status);
        prop_assert_eq!(fast.objective_ms, slow.objective_ms);
        let (best, optima) = all_optima(&inst.model, &inst.platform, &cfg);
        prop_assert_eq!(best, fast.objective_ms);
        if fast.is_optimal() {
            prop_assert!(optima.contains(&choices(&fast, &inst.model, &inst.platform)));
            prop_assert!(optima.contains(&choices(&slow, &inst.model, &inst.platform)));
            prop_assert!(check_scheme(&fast, &inst.model, &inst.platform).unwrap().is_empty());
        } else {
            prop_assert!(fast.placements.is_empty());
        }
    }

    #[test]
    fn weighted_objective_matches_exhaustive_search(seed in any::<u64>(), w in 1i128..20) {
        let inst = random_instance(seed, SMALL);
        let unit = inst.model.units[0].id.clone();
        let cfg = SolverConfig::default().with_weight(unit, Quantity::new(w, 4));
        let fast = solve(&inst.model, &inst.platform, &cfg).unwrap();
        let (best, _) = all_optima(&inst.model, &inst.platform, &cfg);
        prop_assert_eq!(fast.objective_ms, best);
    }

    #[test]
    fn unit_order_does_not_change_the_optimum(seed in any::<u64>()) {
        let inst = random_instance(seed, SMALL);
        let by_demand = solve(&inst.model, &inst.platform, &SolverConfig::default()).unwrap();
        let declared = SolverConfig { unit_order: UnitOrder::Declared, ..SolverConfig::default() };
        let in_order = solve(&inst.model, &inst.platform, &declared).unwrap();
        prop_assert_eq!(by_demand.objective_ms, in_order.objective_ms);
    }

    #[test]
    fn positive_scaling_keeps_the_argmin(seed in any::<u64>(), num in 1i128..50, den in 1i128..50) {
        let inst = random_instance(seed, SMALL);
        let c = Quantity::new(num, den);
        let cfg = SolverConfig::default();
        let scaled = scale_exec(&inst.model, c);
        let a = solve(&inst.model, &inst.platform, &cfg).unwrap();
        let b = solve(&scaled, &inst.platform, &cfg).unwrap();
        prop_assert_eq!(a.objective_ms.map(|p| p * c), b.objective_ms);
        prop_assert_eq!(&a.placements, &b.placements);
        prop_assert_eq!(all_optima(&inst.model, &inst.platform, &cfg).1, all_optima(&scaled, &inst.platform, &cfg).1);
    }

    #[test]
    fn more_capacity_never_hurts(seed in any::<u64>(), which in 0usize..3, node in 0usize..4, extra in 1u64..20) {
        let inst = random_instance(seed, SMALL);
        let cfg = SolverConfig::default();
        let mut bigger = inst.platform.clone();
        let h = node % bigger.nodes.len();
        match which {
            0 => bigger.nodes[h].use_mem += Quantity::from(extra),
            1 => bigger.nodes[h].use_cpu += Quantity::new(extra as i128, 10),
            _ => bigger.nodes[h].use_gpu += extra * 16,
        }
        let before = solve(&inst.model, &inst.platform, &cfg).unwrap();
        let after = solve(&inst.model, &bigger, &cfg).unwrap();
        if let Some(p) = before.objective_ms {
            prop_assert!(after.is_optimal());
            prop_assert!(after.objective_ms.unwrap() <= p);
        }
    }

    #[test]
    fn aggregate_shortfall_is_infeasible(seed in any::<u64>(), cpu in any::<bool>()) {
        let inst = random_instance(seed, SMALL);
        let min_demand: Quantity = inst
            .model
            .units
            .iter()
            .map(|u| u.variants.iter().map(|v| if cpu { v.props.cpu } else { v.props.mem }).min().unwrap())
            .sum();
        // Shrink every node so the platform total falls just short.
        let mut small: Platform = inst.platform.clone();
        let k = Quantity::from(small.nodes.len() as u64);
        let each = (min_demand - Quantity::new(1, 100)) / k;
        for n in &mut small.nodes {
            if cpu { n.use_cpu = each.max(Quantity::ZERO) } else { n.use_mem = each.max(Quantity::ZERO) }
        }
        let total: Quantity = small.nodes.iter().map(|n| if cpu { n.use_cpu } else { n.use_mem }).sum();
        prop_assert!(total < min_demand);
        let scheme = solve(&inst.model, &small, &SolverConfig::default()).unwrap();
        prop_assert_eq!(scheme.status, Status::Infeasible);
    }

    #[test]
    fn reruns_are_byte_identical(seed in any::<u64>()) {
        let a = random_instance(seed, SMALL);
        let b = random_instance(seed, SMALL);
        prop_assert_eq!(serde_json::to_string(&a.model).unwrap(), serde_json::to_string(&b.model).unwrap());
        let cfg = SolverConfig::default();
        prop_assert_eq!(solve(&a.model, &a.platform, &cfg).unwrap().to_json(), solve(&b.model, &b.platform, &cfg).unwrap().to_json());
    }
}

#[test]
fn generous_limit_still_proves_optimality() {
    let inst = random_instance(11, SMALL);
    let cfg = SolverConfig::default().with_time_limit(std::time::Duration::from_secs(60));
    let scheme = solve(&inst.model, &inst.platform, &cfg).unwrap();
    assert_ne!(scheme.status, Status::Timeout);
}
