// Simulate a dataset, write it as text files, read it back, localize every
// query and score the results.

use std::error::Error;

use essloc::config::PipelineConfig;
use essloc::eval::{evaluate_results, EvalSummary};
use essloc::io::{parse_dataset, write_dataset, DatasetLayout};
use essloc::pipeline::{localize_dataset, simulate_dataset, SimulationSpec};
use essloc::simulator::NoiseSpec;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = std::env::temp_dir().join(format!("essloc-example-{}", std::process::id()));
    let spec = SimulationSpec {
        scenes: 3,
        noise: NoiseSpec {
            direction_noise: 1.0,
            rotation_noise: 0.5,
            ..NoiseSpec::default()
        },
        matches: false,
        ..SimulationSpec::default()
    };
    let layout = DatasetLayout::default();
    let ds = simulate_dataset("demo", &spec, 1)?;
    write_dataset(&dir, &ds, &layout)?;
    let back = parse_dataset(&dir, &layout)?;
    println!(
        "{} database images and {} queries read back from {}",
        back.images.len(),
        back.queries.len(),
        dir.display()
    );

    let mut cfg = PipelineConfig::default();
    cfg.localizer.min_pair_distance_a = 0.0;
    let results = localize_dataset(&back, &cfg)?;
    let summary = EvalSummary::new(vec![evaluate_results("demo", &results, &back.queries)?])?;
    print!("{summary}");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
