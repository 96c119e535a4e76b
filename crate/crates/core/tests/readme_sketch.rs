use focalprune_core::focal::NegativeSampling;
use focalprune_core::pruning::HierarchicalPruner;
use focalprune_core::{FocalContext, HqConfig, Metric, PredictionDataset};

#[test]
fn readme_sketch_compiles() -> focalprune_core::Result<()> {
    let names: Vec<String> = (0..6).map(|i| format!("m{i}")).collect();
    let truth: Vec<u32> = (0..40).map(|i| i % 3).collect();
    let predictions: Vec<Vec<u32>> = (0..6u32)
        .map(|m| {
            truth
                .iter()
                .enumerate()
                .map(|(i, &y)| {
                    if (i as u32 + m).is_multiple_of(4) {
                        (y + 1) % 3
                    } else {
                        y
                    }
                })
                .collect()
        })
        .collect();
    let ds = PredictionDataset::new(names, None, truth, predictions, None)?;
    let ctx = FocalContext::new(&ds, NegativeSampling::Full);
    let config = HqConfig {
        target_size: 4,
        ..HqConfig::for_models(ds.num_models())
    };
    let result = HierarchicalPruner::new(Metric::GeneralizedDiversity, &ctx, config)?.finish()?;
    assert!(result.selected_teams().iter().all(|t| t.len() == 4));
    Ok(())
}
