use std::path::{Path, PathBuf};
use std::time::Duration;

use hetalloc::bench::{format_csv, format_table, run_bench, BenchSpec};
use hetalloc::compaction::{compact_model, unfold as unfold_scheme, HighLayerModel};
use hetalloc::model::{check_feasibility, SystemModel};
use hetalloc::solver::{brute_force, export_lp_string, solve as solve_model, AllocationScheme, SolverConfig, Status, UnitOrder};
use hetalloc::{fixtures, Quantity};

use crate::error::CliError;
use crate::files::{read_json, read_platform, to_pretty_json, write_atomic};

fn report_diagnostics(model: &SystemModel) -> Result<(), CliError> {
    let diagnostics = model.validate();
    if diagnostics.is_empty() {
        return Ok(());
    }
    for d in &diagnostics {
        eprintln!("{d}");
    }
    Err(CliError::Domain(format!("{} diagnostic(s)", diagnostics.len())))
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    let model: SystemModel = read_json(path)?;
    report_diagnostics(&model)?;
    println!("{}: {} components, {} nodes, valid", path.display(), model.repository.components().len(), model.platform.nodes.len());
    Ok(())
}

pub fn compact(path: &Path, output: &Path) -> Result<(), CliError> {
    let model: SystemModel = read_json(path)?;
    report_diagnostics(&model)?;
    let compacted = compact_model(&model).map_err(CliError::domain)?;
    write_atomic(output, &to_pretty_json(&compacted))?;
    for unit in &compacted.units {
        println!("{}: {} variant(s)", unit.id, unit.variants.len());
    }
    Ok(())
}

/// Parses `unit=weight,unit=weight`.
pub fn parse_weights(spec: &str) -> Result<Vec<(String, Quantity)>, CliError> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (unit, w) =
                item.split_once('=').ok_or_else(|| CliError::Usage(format!("weight {item:?} is not of the form unit=value")))?;
            let w: Quantity = w.trim().parse().map_err(|e| CliError::Usage(format!("weight of {}: {e}", unit.trim())))?;
            Ok((unit.trim().to_string(), w))
        })
        .collect()
}

fn config(weights: Option<&str>) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(spec) = weights {
        for (unit, w) in parse_weights(spec)? {
            cfg = cfg.with_weight(unit, w);
        }
    }
    Ok(cfg)
}

pub struct SolveOptions {
    pub weights: Option<String>,
    pub time_limit_ms: Option<u64>,
    pub oracle: bool,
    pub incumbent: bool,
    pub declared_order: bool,
}

fn describe(scheme: &AllocationScheme) -> String {
    match scheme.objective_ms {
        Some(p) => format!("{} (objective {p} ms)", scheme.status),
        None => scheme.status.to_string(),
    }
}

pub fn solve(compacted: &Path, platform: &Path, output: &Path, opts: &SolveOptions) -> Result<(), CliError> {
    let model: HighLayerModel = read_json(compacted)?;
    let platform = read_platform(platform)?;
    let mut cfg = config(opts.weights.as_deref())?;
    cfg.time_limit = opts.time_limit_ms.map(Duration::from_millis);
    cfg.report_incumbent = opts.incumbent;
    if opts.declared_order {
        cfg.unit_order = UnitOrder::Declared;
    }

    let scheme = solve_model(&model, &platform, &cfg).map_err(CliError::domain)?;
    let oracle = if opts.oracle {
        let mut exhaustive = cfg.clone();
        exhaustive.time_limit = None;
        Some(brute_force(&model, &platform, &exhaustive).map_err(CliError::domain)?)
    } else {
        None
    };
    write_atomic(output, &scheme.to_json())?;
    println!("{}", describe(&scheme));
    for (unit, p) in &scheme.placements {
        println!("  {unit}: variant {} on {}", p.variant, p.node);
    }
    if let Some(reference) = oracle {
        if scheme.status != Status::Timeout && (reference.status != scheme.status || reference.objective_ms != scheme.objective_ms) {
            eprintln!("oracle disagrees: solver {}, brute force {}", describe(&scheme), describe(&reference));
            return Err(CliError::Domain("oracle mismatch".into()));
        }
        println!("oracle agrees: {}", describe(&reference));
    }
    match scheme.status {
        Status::Optimal => Ok(()),
        Status::Infeasible => Err(CliError::Infeasible),
        Status::Timeout => Err(CliError::Timeout),
    }
}

pub fn unfold(scheme: &Path, compacted: &Path, model: &Path, output: &Path) -> Result<(), CliError> {
    let scheme: AllocationScheme = read_json(scheme)?;
    let compacted: HighLayerModel = read_json(compacted)?;
    let model: SystemModel = read_json(model)?;
    let assignment = unfold_scheme(&scheme, &compacted, &model.repository).map_err(CliError::domain)?;
    let feasibility = check_feasibility(&assignment, &model.repository, &model.platform).map_err(CliError::domain)?;
    if !feasibility.is_feasible() {
        for v in &feasibility.violations {
            eprintln!("{v}");
        }
        return Err(CliError::Domain(format!("{} capacity violation(s)", feasibility.violations.len())));
    }
    write_atomic(output, &to_pretty_json(&assignment))?;
    println!("{} component instance(s) placed, feasible", assignment.len());
    Ok(())
}

pub struct BenchOptions {
    pub n: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub warmup: usize,
    pub time_limit_ms: Option<u64>,
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn bench(opts: &BenchOptions) -> Result<(), CliError> {
    let specs: Vec<BenchSpec> = opts
        .n
        .iter()
        .map(|&n| {
            let mut spec = BenchSpec::new(n, opts.reps, opts.seed);
            spec.warmup = opts.warmup;
            if let Some(ms) = opts.time_limit_ms {
                spec.time_limit = Duration::from_millis(ms);
            }
            spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(spec)
        })
        .collect::<Result<_, CliError>>()?;
    let mut reports = Vec::with_capacity(specs.len());
    for spec in &specs {
        let report = run_bench(spec).map_err(CliError::domain)?;
        log::info!("n={} done, {} rejected draws", report.n, report.rejections);
        reports.push(report);
    }
    if let Some(path) = &opts.json {
        write_atomic(path, &to_pretty_json(&reports))?;
    }
    if let Some(path) = &opts.csv {
        write_atomic(path, &format_csv(&reports))?;
    }
    print!("{}", format_table(&reports));
    Ok(())
}

pub fn export_lp(compacted: &Path, platform: &Path, output: &Path, weights: Option<&str>) -> Result<(), CliError> {
    let model: HighLayerModel = read_json(compacted)?;
    let platform = read_platform(platform)?;
    let cfg = config(weights)?;
    let text = export_lp_string(&model, &platform, &cfg).map_err(CliError::domain)?;
    write_atomic(output, &text)?;
    let binaries: usize = model.units.iter().map(|u| u.variants.len() * platform.nodes.len()).sum();
    println!("{binaries} binaries, {} rows", model.units.len() + 3 * platform.nodes.len());
    Ok(())
}

pub fn fixture(name: &str, output: &Path) -> Result<(), CliError> {
    match name {
        "robot" => write_atomic(output, fixtures::ROBOT_JSON),
        other => Err(CliError::Usage(format!("unknown fixture {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_parse() {
        let w = parse_weights("a=2, b=0.5").unwrap();
        assert_eq!(w, vec![("a".into(), Quantity::from(2u64)), ("b".into(), Quantity::new(1, 2))]);
        assert!(parse_weights("a").is_err());
        assert!(parse_weights("a=x").is_err());
        assert!(parse_weights("").unwrap().is_empty());
    }
}
