//! Mean ± sd of test dice across seeds, per strategy and round.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::experiment::CurveRow;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub round: usize,
    /// Mean labeled fraction across seeds; seeds differ by at most a region.
    pub labeled_fraction: f64,
    pub mean_dice: f64,
    /// Population standard deviation (divides by n).
    pub sd_dice: f64,
    pub seeds: usize,
}

/// Groups by (strategy, round), in first-appearance order of strategies.
pub fn emit_summary(rows: &[CurveRow]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<&CurveRow>> = BTreeMap::new();
    for row in rows {
        let s = match order.iter().position(|&s| s == row.strategy) {
            Some(i) => i,
            None => {
                order.push(&row.strategy);
                order.len() - 1
            }
        };
        groups.entry((s, row.round)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((s, round), rows)| {
            let n = rows.len() as f64;
            let dice: Vec<f64> = rows.iter().map(|r| r.mean_dice as f64).collect();
            let mean = dice.iter().sum::<f64>() / n;
            let var = dice.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                strategy: order[s].to_string(),
                round,
                labeled_fraction: rows.iter().map(|r| r.labeled_fraction).sum::<f64>() / n,
                mean_dice: mean,
                sd_dice: var.sqrt(),
                seeds: rows.len(),
            }
        })
        .collect()
}

/// Aligned text table, one line per (strategy, round).
pub fn format_table(rows: &[SummaryRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.strategy.len())
        .max()
        .unwrap_or(0)
        .max("strategy".len());
    let mut out = format!(
        "{:<width$}  {:>5}  {:>8}  {:>15}  {:>5}\n",
        "strategy", "round", "labeled", "dice", "seeds"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>7.2}%  {:>6.4} ± {:.4}  {:>5}",
            r.strategy,
            r.round,
            100.0 * r.labeled_fraction,
            r.mean_dice,
            r.sd_dice,
            r.seeds
        );
    }
    out
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy", "round", "labeled_fraction", "mean_dice", "sd_dice", "seeds"])?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.round.to_string(),
            r.labeled_fraction.to_string(),
            r.mean_dice.to_string(),
            r.sd_dice.to_string(),
            r.seeds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, seed: u64, round: usize, dice: f32) -> CurveRow {
        CurveRow {
            strategy: strategy.into(),
            seed,
            round,
            labeled_fraction: 0.02 + 0.1 * round as f64,
            mean_dice: dice,
            per_class_dice: vec![Some(dice)],
        }
    }

    #[test]
    fn single_seed_has_zero_sd() {
        let s = emit_summary(&[row("edgeal", 1, 0, 0.5)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].sd_dice, 0.0);
        assert_eq!(s[0].seeds, 1);
    }

    #[test]
    fn population_sd() {
        let s = emit_summary(&[row("random", 1, 1, 0.6), row("random", 2, 1, 0.8)]);
        assert!((s[0].mean_dice - 0.7).abs() < 1e-6);
        assert!((s[0].sd_dice - 0.1).abs() < 1e-6);
    }

    #[test]
    fn grouping_keeps_strategy_order() {
        let rows = [
            row("random", 1, 0, 0.5),
            row("edgeal", 1, 0, 0.5),
            row("random", 1, 1, 0.6),
            row("edgeal", 1, 1, 0.7),
        ];
        let s = emit_summary(&rows);
        let keys: Vec<_> = s.iter().map(|r| (r.strategy.as_str(), r.round)).collect();
        assert_eq!(keys, [("random", 0), ("random", 1), ("edgeal", 0), ("edgeal", 1)]);
        let table = format_table(&s);
        assert_eq!(table.lines().count(), 5);
        assert!(table.contains("0.7000 ± 0.0000"));
    }
}
