//! Exhaustive single stuck-at campaign on a small array.

use sta_selftest::campaign::synthetic_tiles;
use sta_selftest::{enumerate_faults, run_campaign, ArrayConfig, CampaignOptions};

fn main() -> sta_selftest::Result<()> {
    let config = ArrayConfig::new(4, 4, 4, 2);
    let tiles = synthetic_tiles(&config, 10, 1);
    let faults = enumerate_faults(&config);
    let options = CampaignOptions {
        harmless_trials: 4,
        ..CampaignOptions::default()
    };
    let report = run_campaign(&tiles, &config, &faults, &options)?;

    println!(
        "{} faults, {} tiles: coverage {:.2}%, false positives {}",
        report.total_faults,
        report.tiles,
        report.coverage * 100.0,
        report.false_positive_tiles
    );
    for (class, s) in &report.per_class {
        println!(
            "  {:<11} {:>5}/{:<5} detected, {:>3} undetected ({} harmless, {} not), classification {}/{}",
            class.to_string(),
            s.detected,
            s.total,
            s.undetected,
            s.harmless_verified,
            s.not_harmless,
            s.classification_correct,
            s.classification_checked
        );
    }
    print!("{}", report.curve_csv());
    Ok(())
}
