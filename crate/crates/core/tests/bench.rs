use hetalloc::bench::{check_objective_consistency, draw_system, generate_system, run_bench, BenchModel, BenchSpec};
use hetalloc::model::ComponentKind;
use hetalloc::solver::{brute_force, solve, SolverConfig};
use hetalloc::Quantity;

#[test]
fn generated_systems_are_bit_identical() {
    for seed in 0..5 {
        let spec = BenchSpec::new(3, 1, seed);
        let a = generate_system(&spec).unwrap();
        let b = generate_system(&spec).unwrap();
        for which in BenchModel::ALL {
            assert_eq!(serde_json::to_string(a.model(which)).unwrap(), serde_json::to_string(b.model(which)).unwrap());
        }
        assert_eq!(serde_json::to_string(&a.platform).unwrap(), serde_json::to_string(&b.platform).unwrap());
        assert_eq!(serde_json::to_string(&a.repository).unwrap(), serde_json::to_string(&b.repository).unwrap());
    }
}

#[test]
fn shapes_follow_the_chain() {
    let system = draw_system(&BenchSpec::new(7, 1, 5), 0).unwrap();
    assert_eq!(system.naive_cpu.units.len(), 8);
    assert_eq!(system.naive_gpu.units.len(), 8);
    assert_eq!(system.two_variant.units.len(), 2);
    assert_eq!(system.two_variant.units[0].variants.len(), 2);
    assert_eq!(system.platform.nodes.len(), 6);
    assert_eq!(system.platform.nodes.iter().filter(|n| n.use_gpu > 0).count(), 3);
    let kinds: Vec<ComponentKind> =
        system.naive_gpu.units[..7].iter().map(|u| system.repository.get(u.variants[0].members[0].as_str()).unwrap().kind).collect();
    assert!(kinds.iter().all(|k| *k == ComponentKind::Gpu));
    assert!(system.model(BenchModel::NaiveCpu).validate().is_ok());
}

#[test]
fn chain_variants_sum_member_demands() {
    let system = draw_system(&BenchSpec::new(4, 1, 8), 0).unwrap();
    let chain = &system.two_variant.units[0];
    for (variant, kind) in chain.variants.iter().zip([ComponentKind::Cpu, ComponentKind::Gpu]) {
        let members: Vec<_> = system.repository.components().iter().filter(|c| c.kind == kind && c.id.as_str().contains('_')).collect();
        assert_eq!(members.len(), 4);
        let exec = members.iter().fold(Quantity::ZERO, |a, c| a + c.demand.exec_ms);
        let cpu = members.iter().fold(Quantity::ZERO, |a, c| a + c.demand.cpu);
        assert_eq!(variant.props.exec_ms, exec);
        assert_eq!(variant.props.cpu, cpu);
    }
}

#[test]
fn small_chains_agree_with_exhaustive_search() {
    let cfg = SolverConfig::default();
    for seed in 0..10 {
        let system = generate_system(&BenchSpec::new(3, 1, seed)).unwrap();
        for which in BenchModel::ALL {
            let m = system.model(which);
            assert_eq!(
                solve(m, &system.platform, &cfg).unwrap().objective_ms,
                brute_force(m, &system.platform, &cfg).unwrap().objective_ms,
                "seed {seed} {which:?}"
            );
        }
        check_objective_consistency(&system).unwrap();
    }
}

#[test]
fn two_variant_is_faster_at_n10() {
    let report = run_bench(&BenchSpec::new(10, 50, 7)).unwrap();
    let two = report.row(BenchModel::TwoVariant).mean_ms;
    assert!(two < report.row(BenchModel::NaiveCpu).mean_ms);
    assert!(two < report.row(BenchModel::NaiveGpu).mean_ms);
    for row in &report.rows {
        assert_eq!(row.objectives.len(), 50);
        assert!(!row.flagged);
        assert!(row.objectives.iter().all(|o| *o == row.objective_ms));
    }
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"two-variant\""));
}

#[test]
fn timeouts_are_flagged_not_fatal() {
    let mut spec = BenchSpec::new(3, 2, 0);
    spec.warmup = 0;
    spec.time_limit = std::time::Duration::ZERO;
    let report = run_bench(&spec).unwrap();
    for row in &report.rows {
        assert!(row.flagged);
        assert_eq!(row.timeouts, 2);
        assert_eq!(row.objective_ms, None);
    }
    assert!(hetalloc::bench::format_table(&[report]).contains('*'));
}
