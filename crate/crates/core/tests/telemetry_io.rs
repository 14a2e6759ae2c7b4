use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use celltriage::synthgen::{generate, IntRange, SynthConfig};
use celltriage::telemetry::{
    load_csv, load_labels, save_csv, save_labels, scramble_ids, Validation,
};
use celltriage::CellDataset;

fn small(seed: u64) -> CellDataset {
    generate(&SynthConfig {
        n_cells: 6,
        n_problematic: 1,
        n_congested: 1,
        ues_per_cell: IntRange::new(2, 5),
        samples_per_ue: IntRange::new(1, 4),
        seed,
        noise: 0.25,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip_is_exact(seed in 0u64..10_000) {
        let ds = small(seed);
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.csv");
        let labels = dir.path().join("l.csv");
        save_csv(&data, &ds).unwrap();
        save_labels(&labels, &ds.labels).unwrap();
        let back = load_csv(&data, Validation::Strict).unwrap();
        prop_assert_eq!(&back.samples, &ds.samples);
        prop_assert_eq!(load_labels(&labels).unwrap(), ds.labels.clone());
    }

    #[test]
    fn scramble_is_a_bijection(seed in 0u64..10_000, key in any::<u64>()) {
        let ds = small(seed);
        let sc = scramble_ids(&ds, key);
        prop_assert_eq!(sc.len(), ds.len());

        let mut cell_map = BTreeMap::new();
        let mut ue_map = BTreeMap::new();
        for (a, b) in ds.samples.iter().zip(&sc.samples) {
            // same mapping wherever an id appears
            prop_assert_eq!(*cell_map.entry(a.cell_id).or_insert(b.cell_id), b.cell_id);
            prop_assert_eq!(*ue_map.entry(a.ue_id).or_insert(b.ue_id), b.ue_id);
            prop_assert_eq!(a.features(), b.features());
        }
        let cells: BTreeSet<_> = cell_map.values().collect();
        let ues: BTreeSet<_> = ue_map.values().collect();
        prop_assert_eq!(cells.len(), cell_map.len());
        prop_assert_eq!(ues.len(), ue_map.len());

        let mut a: Vec<usize> = ds.cell_counts().into_values().collect();
        let mut b: Vec<usize> = sc.cell_counts().into_values().collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        for (id, label) in &ds.labels {
            prop_assert_eq!(sc.labels[&cell_map[id]], *label);
        }
        prop_assert_eq!(scramble_ids(&ds, key), sc);
    }
}
