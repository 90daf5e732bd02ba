use serde::{Deserialize, Serialize};

use super::{run_replicates, RunSpec, RunSummary};
use crate::error::Result;
use crate::problems::PlantCatalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub seed: u64,
    pub experiments: usize,
    pub violations: usize,
    pub final_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub label: String,
    pub replicates: usize,
    pub total_violations: usize,
    pub runs_with_violation: usize,
    pub median_violations: f64,
    pub median_final_gap: f64,
    pub median_initial_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub seed: u64,
    pub gap_anneal: f64,
    pub gap_fixed: f64,
    /// `gap_anneal - gap_fixed`; negative when annealing ends closer.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub anneal: String,
    pub fixed: String,
    pub rows: Vec<PairRow>,
    /// Share of pairs with `gap_anneal <= gap_fixed`.
    pub anneal_not_worse: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<AggregateRow>,
    pub medians: Vec<MedianRow>,
    pub pairs: Vec<PairedComparison>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs every spec and tabulates the replicates. Specs that differ only in
/// the annealing flag are also compared seed by seed.
pub fn aggregate(catalog: &PlantCatalog, specs: &[RunSpec]) -> Result<SummaryTable> {
    let mut results = Vec::with_capacity(specs.len());
    for spec in specs {
        let summaries: Vec<RunSummary> = run_replicates(catalog, spec)?
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        results.push(summaries);
    }
    Ok(tabulate(specs, &results))
}

pub fn tabulate(specs: &[RunSpec], results: &[Vec<RunSummary>]) -> SummaryTable {
    let mut table = SummaryTable::default();
    for (spec, summaries) in specs.iter().zip(results) {
        let label = spec.label();
        table.rows.extend(summaries.iter().map(|s| AggregateRow {
            label: label.clone(),
            seed: s.seed,
            experiments: s.total_experiments,
            violations: s.total_violations,
            final_gap: s.final_gap,
        }));
        let column = |f: fn(&RunSummary) -> f64| summaries.iter().map(f).collect::<Vec<_>>();
        table.medians.push(MedianRow {
            label,
            replicates: summaries.len(),
            total_violations: summaries.iter().map(|s| s.total_violations).sum(),
            runs_with_violation: summaries.iter().filter(|s| s.total_violations > 0).count(),
            median_violations: median(&column(|s| s.total_violations as f64)),
            median_final_gap: median(&column(|s| s.final_gap)),
            median_initial_gap: median(&column(|s| s.initial_gap)),
        });
    }

    for (i, a) in specs.iter().enumerate() {
        if !a.anneal {
            continue;
        }
        for (j, b) in specs.iter().enumerate() {
            let twin = RunSpec {
                anneal: true,
                ..b.clone()
            };
            if b.anneal || twin != *a {
                continue;
            }
            let rows: Vec<PairRow> = results[i]
                .iter()
                .zip(&results[j])
                .map(|(x, y)| PairRow {
                    seed: x.seed,
                    gap_anneal: x.final_gap,
                    gap_fixed: y.final_gap,
                    difference: x.final_gap - y.final_gap,
                })
                .collect();
            let not_worse = rows.iter().filter(|r| r.difference <= 0.0).count();
            table.pairs.push(PairedComparison {
                anneal: a.label(),
                fixed: b.label(),
                anneal_not_worse: not_worse as f64 / rows.len().max(1) as f64,
                rows,
            });
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn pairs_anneal_with_fixed_twin() {
        let catalog = PlantCatalog::builtin();
        let mut fixed = RunSpec::new("quad-linear", 0.05, 4, 100);
        fixed.replicates = 3;
        let anneal = RunSpec {
            anneal: true,
            ..fixed.clone()
        };
        let other = RunSpec::new("quad-circle", 0.05, 2, 0);
        let table = aggregate(&catalog, &[fixed, anneal, other]).unwrap();
        assert_eq!(table.rows.len(), 3 + 3 + 1);
        assert_eq!(table.medians.len(), 3);
        assert_eq!(table.pairs.len(), 1);
        let pair = &table.pairs[0];
        assert_eq!(
            pair.rows.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![100, 101, 102]
        );
        for r in &pair.rows {
            assert_eq!(r.difference, r.gap_anneal - r.gap_fixed);
        }
    }
}
