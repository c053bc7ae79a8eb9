use std::collections::BTreeMap;

use super::{Action, CorruptError, CorruptionKind, CorruptionRecipe, CorruptionStep, GroundTruthLog, LogEntry};
use crate::predicate::{select_rows, validate};
use crate::rng::Substream;
use crate::table::{index_value, Cell, ColumnKind, Table};

/// Linear-interpolation quantile (type 7) of already sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sample_size(fraction: f64, n: usize) -> usize {
    // The epsilon keeps products like 0.7 * 10 from flooring to 6.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

fn check_step(table: &Table, step: &CorruptionStep) -> Result<(usize, Option<usize>), CorruptError> {
    let invalid = |reason: String| CorruptError::InvalidStep { label: step.stream_label.clone(), reason };
    if step.action.kind() != step.kind {
        return Err(invalid(format!("action {:?} does not belong to kind {:?}", step.action, step.kind)));
    }
    if !(0.0..=1.0).contains(&step.fraction) {
        return Err(invalid(format!("fraction {} outside [0, 1]", step.fraction)));
    }
    if table.index_column().is_none() {
        return Err(invalid("table has no index column".into()));
    }
    if table.index_column() == Some(step.target_column.as_str()) {
        return Err(invalid("the index column cannot be corrupted".into()));
    }
    let (col, spec) = table
        .column(&step.target_column)
        .map_err(|_| invalid(format!("unknown target column `{}`", step.target_column)))?;
    validate(table, &step.predicate)
        .map_err(|source| CorruptError::Predicate { label: step.stream_label.clone(), source })?;
    let needs_numeric = step.kind == CorruptionKind::NumericalShift;
    let needs_text = step.kind == CorruptionKind::CategoricalShift;
    if (needs_numeric && spec.kind != ColumnKind::Numeric) || (needs_text && !spec.kind.is_stringly()) {
        return Err(invalid(format!("{:?} cannot target {} column `{}`", step.kind, spec.kind, spec.name)));
    }
    let mut key = None;
    match &step.action {
        Action::ResampleRange { lo, hi } if !(lo <= hi && lo.is_finite() && hi.is_finite()) => {
            return Err(invalid(format!("range [{lo}, {hi}] is empty")));
        }
        Action::ResampleQuantileBand { q_lo, q_hi } if !(0.0 <= *q_lo && q_lo <= q_hi && *q_hi <= 1.0) => {
            return Err(invalid(format!("quantile band [{q_lo}, {q_hi}] outside [0, 1]")));
        }
        Action::Replace { value } if value.is_empty() => {
            return Err(invalid("replacement value is empty (use nan_corruption)".into()));
        }
        Action::CompoundYearly { key_column, .. } => {
            let (k, kspec) =
                table.column(key_column).map_err(|_| invalid(format!("unknown key column `{key_column}`")))?;
            if kspec.kind != ColumnKind::Numeric {
                return Err(invalid(format!("key column `{key_column}` must be numeric")));
            }
            key = Some(k);
        }
        _ => {}
    }
    Ok((col, key))
}

/// Apply a single step, drawing from `rng`. `ordinal` is recorded in the log.
///
/// The draw order is fixed: first the row sample (only when `fraction < 1`),
/// then one value per selected row, in row order, for resampling actions.
pub fn apply_step(
    table: &Table,
    step: &CorruptionStep,
    rng: &mut Substream,
    ordinal: usize,
) -> Result<(Table, Vec<LogEntry>), CorruptError> {
    let (col, key_col) = check_step(table, step)?;
    let mut matching = select_rows(table, &step.predicate)
        .map_err(|source| CorruptError::Predicate { label: step.stream_label.clone(), source })?;
    if step.kind == CorruptionKind::NanCorruption {
        matching.retain(|&r| !table.cell(r, col).is_missing());
    }
    let chosen = if step.fraction >= 1.0 {
        matching
    } else {
        rng.sample_sorted(&matching, sample_size(step.fraction, matching.len()))
    };

    let band = match step.action {
        Action::ResampleQuantileBand { q_lo, q_hi } => {
            let mut values: Vec<f64> = table.column_cells(col).filter_map(Cell::as_f64).collect();
            if values.is_empty() {
                return Err(CorruptError::EmptyColumn {
                    label: step.stream_label.clone(),
                    column: step.target_column.clone(),
                });
            }
            values.sort_by(f64::total_cmp);
            Some((quantile(&values, q_lo), quantile(&values, q_hi)))
        }
        _ => None,
    };

    let index_pos = table.column_position(table.index_column().expect("checked")).expect("checked");
    let mut edits = Vec::with_capacity(chosen.len());
    let mut entries = Vec::with_capacity(chosen.len());
    for &row in &chosen {
        let old = table.cell(row, col).clone();
        let new = match (&step.action, &old) {
            (Action::Add { value }, Cell::Number(v)) => Cell::Number(v + value),
            (Action::Multiply { value }, Cell::Number(v)) => Cell::Number(v * value),
            (Action::ResampleRange { lo, hi }, _) => Cell::Number(rng.uniform(*lo, *hi)),
            (Action::ResampleQuantileBand { .. }, _) => {
                let (lo, hi) = band.expect("computed above");
                Cell::Number(rng.uniform(lo, hi))
            }
            (Action::CompoundYearly { base, factor, compounding, .. }, Cell::Number(v)) => {
                let key = table.cell(row, key_col.expect("checked")).as_f64();
                let multiplier = match key {
                    Some(k) if k > *base && *compounding => {
                        let mut m = 1.0;
                        for _ in 0..((k - base).round() as i64) {
                            m *= factor;
                        }
                        m
                    }
                    Some(k) if k > *base => *factor,
                    _ => 1.0,
                };
                Cell::Number(v * multiplier)
            }
            (Action::SetMissing, _) => Cell::Missing,
            (Action::Replace { value }, _) => Cell::Text(value.clone()),
            // Arithmetic on a missing cell leaves it missing.
            (_, Cell::Missing) => Cell::Missing,
            (action, cell) => unreachable!("{action:?} on {cell:?} rejected by validation"),
        };
        let index = table.cell(row, index_pos).as_f64().and_then(index_value).expect("validated index");
        entries.push(LogEntry { index, column: step.target_column.clone(), old, new: new.clone(), step: ordinal });
        edits.push((row, col, new));
    }
    Ok((table.with_cells(edits)?, entries))
}

/// Apply all steps in order. Step `i` (1-based) draws from the substream
/// named by `(recipe.master_seed, step.stream_label)`.
pub fn apply_recipe(table: &Table, recipe: &CorruptionRecipe) -> Result<(Table, GroundTruthLog), CorruptError> {
    let mut current = table.clone();
    let mut log = GroundTruthLog::default();
    for (i, step) in recipe.steps.iter().enumerate() {
        let mut rng = Substream::new(recipe.master_seed, &step.stream_label);
        let (next, entries) = apply_step(&current, step, &mut rng, i + 1)?;
        current = next;
        log.entries.extend(entries);
    }
    Ok((current, log))
}

/// Undo every logged write, newest first.
pub fn invert(dirty: &Table, log: &GroundTruthLog) -> Result<Table, CorruptError> {
    if log.is_empty() {
        return Ok(dirty.clone());
    }
    let lookup: BTreeMap<i64, usize> = dirty.index_lookup();
    if lookup.is_empty() && dirty.n_rows() > 0 {
        return Err(CorruptError::LogMismatch("table has no index column".into()));
    }
    let mut rows: Vec<Vec<Cell>> = dirty.rows().to_vec();
    for e in log.entries.iter().rev() {
        let row = *lookup.get(&e.index).ok_or_else(|| CorruptError::LogMismatch(format!("index {} not in table", e.index)))?;
        let col = dirty
            .column_position(&e.column)
            .ok_or_else(|| CorruptError::LogMismatch(format!("column `{}` not in table", e.column)))?;
        if !rows[row][col].identical(&e.new) {
            return Err(CorruptError::LogMismatch(format!(
                "index {} column `{}` holds {} but the log recorded {}",
                e.index, e.column, rows[row][col], e.new
            )));
        }
        rows[row][col] = e.old.clone();
    }
    Ok(Table::new(dirty.columns().to_vec(), rows, dirty.index_column().map(String::from))?)
}
