mod common;

use common::*;
use pdm_core::analysis::{
    dominance_report, edge_budget, embedding_report, sector_pressure, window_count, EntityLabel,
    Sector,
};
use pdm_core::pdm::{decompose, PartitionVector};

#[test]
fn rotation_lags_are_recovered() {
    let (t, window, step) = (1680, 168, 21);
    let (panel, labels) = rotation_panel(t, 6, 0.6, 0.5, 17);
    let out = sector_pressure(&panel, &labels, window, step).unwrap();
    assert_eq!(out.windows.len(), window_count(t, window, step));
    let offset = (t / 8 / step) as isize;
    let max_lag = (t / 2 / step) as isize;
    let series: Vec<&Vec<f64>> = Sector::ALL[..4]
        .iter()
        .map(|s| &out.sectors[s].normalized)
        .collect();
    for a in 0..4 {
        for b in a + 1..4 {
            let lag = argmax_lag(series[b], series[a], max_lag);
            let planted = (b - a) as isize * offset;
            assert!((lag - planted).abs() <= 1, "{a}->{b}: {lag} vs {planted}");
        }
    }
}

#[test]
fn pressure_rows_per_sector() {
    let (panel, labels) = rotation_panel(600, 3, 0.3, 1.0, 2);
    let out = sector_pressure(&panel, &labels, 252, 21).unwrap();
    assert_eq!(out.sectors.len(), 8);
    for s in out.sectors.values() {
        assert_eq!(s.raw.len(), (600 - 252) / 21 + 1);
        assert_eq!(s.members, 3);
    }
}

#[test]
fn seven_cluster_embedding() {
    let (panel, truth) = block_panel(&[8; 7], 400, 0.8, 1.5, 5);
    let record = decompose(
        &panel,
        &PartitionVector(vec![1]),
        &fast_null(),
        &fast_kmeans(0),
    )
    .unwrap();
    let it = &record.iterations[1];
    assert_eq!(it.num_clusters(), 7);
    let labels: Vec<EntityLabel> = (0..56)
        .map(|i| EntityLabel {
            sector: Sector::ALL[truth.label(i)],
            exchange: if i % 2 == 0 { "NASDAQ" } else { "NYSE" }.into(),
        })
        .collect();
    let report = embedding_report(&it.characteristic, &labels, 0.10).unwrap();
    assert_eq!(report.embedding.coords.shape(), (7, 2));
    assert_eq!(report.edges.len(), edge_budget(21, 0.10));
    assert_eq!(report.edges.len(), 2);
    let dom = dominance_report(it.partition(), &labels);
    assert!(dom.iter().all(|c| c.dominant.is_some()));
}
