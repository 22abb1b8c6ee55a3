// Small Monte-Carlo sweep of the localizer, printed as CSV.

use std::error::Error;

use essloc::bench::{run_bench, write_bench_csv, BenchSpec};
use essloc::localizer::LocalizerConfig;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = BenchSpec {
        trials: 20,
        direction_noise: vec![0.0, 2.0],
        outlier_fraction: vec![0.0, 0.4],
        ..BenchSpec::default()
    };
    let rows = run_bench(&spec, &LocalizerConfig::default(), 3)?;
    write_bench_csv(&rows, std::io::stdout())?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
