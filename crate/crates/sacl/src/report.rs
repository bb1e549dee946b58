//! CSV summary tables.

use sacl_core::complexity::DifficultyTier;
use sacl_core::curriculum::{stage_pool, CurriculumPlan, PoolEntry};
use sacl_core::sacl::{build_sacl_plan, SaclParams};
use sacl_core::simharness::TrainLog;

use crate::error::Result;

/// Scale grid of the adapted-parameter table.
pub const RHO_GRID: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

fn render(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn tier_histogram_csv(hist: [usize; 3]) -> String {
    let rows = DifficultyTier::ALL
        .iter()
        .zip(hist)
        .map(|(t, n)| vec![t.name().to_owned(), n.to_string()])
        .collect();
    render(&["tier", "count"], rows)
}

pub fn stage_pools_csv(plan: &CurriculumPlan, entries: &[PoolEntry]) -> String {
    let rows = plan
        .stages
        .iter()
        .map(|s| {
            let pool = stage_pool(s, entries);
            let negatives = pool
                .eligible
                .iter()
                .filter(|&&i| matches!(entries[i], PoolEntry::Negative(_)))
                .count();
            vec![
                s.index.to_string(),
                pool.eligible.len().to_string(),
                (pool.eligible.len() - negatives).to_string(),
                negatives.to_string(),
                pool.hard_pool.len().to_string(),
            ]
        })
        .collect();
    render(&["stage", "eligible", "labeled", "negatives", "hard_pool"], rows)
}

/// One row per (rho, stage) of the SACL adaptation of `static_plan`.
pub fn rho_grid_csv(static_plan: &CurriculumPlan, params: &SaclParams) -> Result<String> {
    let mut rows = Vec::new();
    for rho in RHO_GRID {
        let plan = build_sacl_plan(static_plan, rho, params)?;
        for s in &plan.stages {
            rows.push(vec![
                rho.to_string(),
                s.index.to_string(),
                s.epochs.to_string(),
                s.lr.to_string(),
                s.min_hard_ratio.to_string(),
                plan.regularization.weight_decay.to_string(),
                plan.regularization.dropout.to_string(),
            ]);
        }
    }
    Ok(render(
        &["rho", "stage", "epochs", "lr", "min_hard_ratio", "weight_decay", "dropout"],
        rows,
    ))
}

pub fn epoch_loss_csv(log: &TrainLog) -> String {
    let rows = log
        .epochs
        .iter()
        .map(|e| vec![e.stage.to_string(), e.epoch.to_string(), e.mean_loss.to_string()])
        .collect();
    render(&["stage", "epoch", "mean_loss"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sacl_core::curriculum::{build_static_plan, default_stages, CurriculumConfig, Provenance, Regularization};

    fn static_plan() -> CurriculumPlan {
        build_static_plan(&CurriculumConfig {
            stages: default_stages(0.1),
            r0: 0.1,
            regularization: Regularization {
                weight_decay: 0.0005,
                dropout: 0.0,
            },
            provenance: Provenance {
                config_hash: String::new(),
                seed: 0,
                generator: String::new(),
            },
        })
        .unwrap()
    }

    #[test]
    fn histogram_rows() {
        assert_eq!(tier_histogram_csv([3, 2, 1]), "tier,count\nEasy,3\nMedium,2\nHard,1\n");
    }

    #[test]
    fn rho_grid_rows() {
        let csv = rho_grid_csv(&static_plan(), &SaclParams::default()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 13);
        let row1: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        let want = [0.1, 1.0, 20.0, 0.00273, 0.37, 0.00095, 0.18];
        for (got, want) in row1.iter().zip(want) {
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
        assert!(lines[7].starts_with("0.5,1,31,") && lines[7].contains(",0.25,"));
        assert_eq!(lines[10], "1,1,50,0.003,0.1,0.0005,0");
        assert_eq!(lines[12], "1,3,100,0.001,0.1,0.0005,0");
    }
}
