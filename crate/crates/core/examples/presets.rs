// Threshold presets and config-file layering.

use std::error::Error;

use essloc::config::{ConfigFile, Method, PipelineConfig, SceneKind};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for scene in [SceneKind::Indoor, SceneKind::Outdoor] {
        for method in [Method::EssNet, Method::Sift5Pt, Method::LearnableMatching] {
            let cfg = PipelineConfig::resolve(Some((scene, method)), None, None)?;
            println!(
                "{scene:?} {method:?}: t1 = {} px, t2 = {} deg, window [{}, {}] m",
                cfg.solver.t1_pixels,
                cfg.localizer.alpha_max_t2,
                cfg.localizer.min_pair_distance_a,
                cfg.localizer.max_pair_distance_b
            );
        }
    }
    let file = ConfigFile::parse("seed = 11\n[localizer]\nt2_degrees = 8\n")?;
    let cfg = PipelineConfig::resolve(Some((SceneKind::Outdoor, Method::Sift5Pt)), Some(&file), None)?;
    println!("outdoor preset with a config file on top:\n{cfg}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
