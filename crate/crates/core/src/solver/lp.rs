//! CPLEX LP text export of the allocation problem.
//!
//! Binaries `x_u<i>_v<j>_h<k>` select variant `j` of unit `i` on node `k`
//! (indices follow declaration order). Each unit gets one assignment row,
//! each node one capacity row per resource. Coefficients are written as
//! exact decimals; a row containing a value without a finite decimal
//! expansion is multiplied through by the least common multiple of its
//! denominators, and a comment records the factor.

use std::fmt::Write as _;
use std::io;

use num_integer::Integer;

use super::{check_inputs, SolveError, SolverConfig};
use crate::compaction::{HighLayerModel, VariantProperties};
use crate::model::Platform;
use crate::quantity::Quantity;

const TERMS_PER_LINE: usize = 8;

/// Capacity row label, right-hand side and the per-variant coefficient.
type CapacityRow = (&'static str, Quantity, fn(&VariantProperties) -> Quantity);

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error(transparent)]
    Model(#[from] SolveError),
    #[error("writing LP output: {0}")]
    Io(#[from] io::Error),
}

fn var(u: usize, v: usize, h: usize) -> String {
    format!("x_u{u}_v{v}_h{h}")
}

/// Scale that turns every value into a decimal-representable one (1 when
/// they already are).
fn row_scale(values: &[Quantity]) -> i128 {
    if values.iter().all(Quantity::is_decimal) {
        return 1;
    }
    values.iter().fold(1i128, |acc, v| acc.lcm(&v.denom()))
}

fn write_terms(out: &mut String, terms: &[(Quantity, String)], scale: i128) {
    let scale = Quantity::from_integer(scale);
    for (i, (coef, name)) in terms.iter().enumerate() {
        if i > 0 {
            if i % TERMS_PER_LINE == 0 {
                out.push_str("\n   ");
            }
            out.push_str(" +");
        }
        let _ = write!(out, " {} {}", *coef * scale, name);
    }
}

fn write_row(out: &mut String, name: &str, terms: &[(Quantity, String)], sense: &str, rhs: Quantity) {
    let mut values: Vec<Quantity> = terms.iter().map(|(c, _)| *c).collect();
    values.push(rhs);
    let scale = row_scale(&values);
    if scale != 1 {
        let _ = writeln!(out, "\\ {name} multiplied by {scale}");
    }
    let _ = write!(out, " {name}:");
    write_terms(out, terms, scale);
    let _ = writeln!(out, " {sense} {}", rhs * Quantity::from_integer(scale));
}

/// The LP file as a string.
pub fn export_lp_string(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig) -> Result<String, SolveError> {
    check_inputs(model, platform, cfg)?;
    let mut out = String::new();
    out.push_str("\\ component-to-hardware allocation, 0/1 formulation\n");
    for (u, unit) in model.units.iter().enumerate() {
        let _ = writeln!(out, "\\ u{u} = {}", unit.id);
    }
    for (h, node) in platform.nodes.iter().enumerate() {
        let _ = writeln!(out, "\\ h{h} = {}", node.id);
    }

    let mut objective = Vec::new();
    for (u, unit) in model.units.iter().enumerate() {
        let w = cfg.weight(&unit.id);
        for (v, variant) in unit.variants.iter().enumerate() {
            for h in 0..platform.nodes.len() {
                objective.push((w * variant.props.exec_ms, var(u, v, h)));
            }
        }
    }
    let coefs: Vec<Quantity> = objective.iter().map(|(c, _)| *c).collect();
    let obj_scale = row_scale(&coefs);
    if obj_scale != 1 {
        let _ = writeln!(out, "\\ objective multiplied by {obj_scale}");
    }
    out.push_str("Minimize\n obj:");
    if objective.is_empty() {
        out.push_str(" 0");
    } else {
        write_terms(&mut out, &objective, obj_scale);
    }
    out.push_str("\nSubject To\n");

    for (u, unit) in model.units.iter().enumerate() {
        let terms: Vec<(Quantity, String)> =
            (0..unit.variants.len()).flat_map(|v| (0..platform.nodes.len()).map(move |h| (Quantity::ONE, var(u, v, h)))).collect();
        write_row(&mut out, &format!("assign_u{u}"), &terms, "=", Quantity::ONE);
    }
    for (h, node) in platform.nodes.iter().enumerate() {
        let rows: [CapacityRow; 3] = [
            ("mem", node.use_mem, |p| p.mem),
            ("cpu", node.use_cpu, |p| p.cpu),
            ("gpu", Quantity::from(node.use_gpu), |p| Quantity::from(p.gpu_threads)),
        ];
        for (label, capacity, pick) in rows {
            let terms: Vec<(Quantity, String)> = model
                .units
                .iter()
                .enumerate()
                .flat_map(|(u, unit)| unit.variants.iter().enumerate().map(move |(v, var_)| (pick(&var_.props), var(u, v, h))))
                .collect();
            if terms.is_empty() {
                let _ = writeln!(out, " {label}_h{h}: 0 <= {capacity}");
            } else {
                write_row(&mut out, &format!("{label}_h{h}"), &terms, "<=", capacity);
            }
        }
    }

    let binaries: Vec<String> = objective.into_iter().map(|(_, name)| name).collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Writes the LP file to `sink`.
pub fn export_lp<W: io::Write>(model: &HighLayerModel, platform: &Platform, cfg: &SolverConfig, sink: &mut W) -> Result<(), LpError> {
    let text = export_lp_string(model, platform, cfg)?;
    sink.write_all(text.as_bytes())?;
    sink.flush()?;
    Ok(())
}
