//! Prior-assumption selection of cells for clustering-block training.
//!
//! Cells whose average CQI is among the highest and whose average throughput
//! is among the lowest are assumed problematic. Averages are two-stage: first
//! per UE, then the unweighted mean over the cell's UEs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::telemetry::{CellDataset, CellId, UeId};

pub const DEFAULT_FRACTION: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeAverages {
    pub ue_id: UeId,
    pub throughput: f64,
    pub cqi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregates {
    pub cell_id: CellId,
    /// Mean of per-UE throughput means.
    pub throughput: f64,
    /// Mean of per-UE CQI means.
    pub cqi: f64,
    pub ues: Vec<UeAverages>,
}

/// Two-stage per-cell averages, in ascending cell order.
pub fn aggregate(ds: &CellDataset) -> Vec<CellAggregates> {
    let mut sums: BTreeMap<CellId, BTreeMap<UeId, (f64, f64, usize)>> = BTreeMap::new();
    for s in &ds.samples {
        let e = sums
            .entry(s.cell_id)
            .or_default()
            .entry(s.ue_id)
            .or_insert((0.0, 0.0, 0));
        e.0 += s.throughput_kbps;
        e.1 += s.cqi;
        e.2 += 1;
    }
    sums.into_iter()
        .map(|(cell_id, per_ue)| {
            let ues: Vec<UeAverages> = per_ue
                .into_iter()
                .map(|(ue_id, (t, c, n))| UeAverages {
                    ue_id,
                    throughput: t / n as f64,
                    cqi: c / n as f64,
                })
                .collect();
            let m = ues.len() as f64;
            CellAggregates {
                cell_id,
                throughput: ues.iter().map(|u| u.throughput).sum::<f64>() / m,
                cqi: ues.iter().map(|u| u.cqi).sum::<f64>() / m,
                ues,
            }
        })
        .collect()
}

/// Number of cells in each "top fraction" set: `ceil(fraction * n)`.
pub fn quota(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// Intersection of the highest-CQI and lowest-throughput `fraction` of cells.
///
/// Ties are broken by ascending cell id.
pub fn select_assumed_problematic(aggs: &[CellAggregates], fraction: f64) -> BTreeSet<CellId> {
    let k = quota(fraction, aggs.len());
    let mut by_cqi: Vec<&CellAggregates> = aggs.iter().collect();
    by_cqi.sort_by(|a, b| b.cqi.total_cmp(&a.cqi).then(a.cell_id.cmp(&b.cell_id)));
    let high_cqi: BTreeSet<CellId> = by_cqi.iter().take(k).map(|a| a.cell_id).collect();

    let mut by_tput: Vec<&CellAggregates> = aggs.iter().collect();
    by_tput.sort_by(|a, b| {
        a.throughput
            .total_cmp(&b.throughput)
            .then(a.cell_id.cmp(&b.cell_id))
    });
    by_tput
        .iter()
        .take(k)
        .map(|a| a.cell_id)
        .filter(|id| high_cqi.contains(id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::tests::example_sample;
    use crate::telemetry::Sample;
    use proptest::prelude::*;

    fn agg(cell_id: CellId, throughput: f64, cqi: f64) -> CellAggregates {
        CellAggregates {
            cell_id,
            throughput,
            cqi,
            ues: vec![UeAverages {
                ue_id: 0,
                throughput,
                cqi,
            }],
        }
    }

    #[test]
    fn two_stage_mean() {
        let mk = |ue, t| Sample {
            cell_id: 1,
            ue_id: ue,
            throughput_kbps: t,
            cqi: t / 10.0,
            ..example_sample()
        };
        let ds = CellDataset::unlabeled(vec![mk(1, 10.0), mk(1, 20.0), mk(2, 40.0)]);
        let a = &aggregate(&ds)[0];
        assert_eq!(a.ues[0].throughput, 15.0);
        assert_eq!(a.ues[1].throughput, 40.0);
        assert_eq!(a.throughput, 27.5);
        assert!((a.cqi - 2.75).abs() < 1e-12);

        let single = CellDataset::unlabeled(vec![mk(1, 10.0), mk(1, 20.0)]);
        assert_eq!(aggregate(&single)[0].throughput, 15.0);
    }

    #[test]
    fn hand_cases() {
        let aggs = [agg(0, 10.0, 9.5), agg(1, 100.0, 9.0), agg(2, 50.0, 3.0)];
        assert_eq!(select_assumed_problematic(&aggs, 0.3), BTreeSet::from([0]));
        let aggs = [agg(0, 10.0, 9.0), agg(1, 100.0, 9.5), agg(2, 50.0, 3.0)];
        assert!(select_assumed_problematic(&aggs, 0.3).is_empty());
    }

    #[test]
    fn quota_is_ceiling() {
        assert_eq!(quota(0.3, 53), 16);
        assert_eq!(quota(0.3, 3), 1);
        assert_eq!(quota(0.3, 10), 3);
    }

    proptest! {
        #[test]
        fn bounded_and_rank_invariant(values in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40)) {
            let aggs: Vec<CellAggregates> = values.iter().enumerate()
                .map(|(i, &(t, c))| agg(i as u64, t, c)).collect();
            let sel = select_assumed_problematic(&aggs, 0.3);
            prop_assert!(sel.len() <= quota(0.3, aggs.len()));
            let warped: Vec<CellAggregates> = aggs.iter()
                .map(|a| agg(a.cell_id, (a.throughput * 3.0).exp() + 5.0, a.cqi.powi(3) - 2.0)).collect();
            prop_assert_eq!(select_assumed_problematic(&warped, 0.3), sel);
        }
    }
}
