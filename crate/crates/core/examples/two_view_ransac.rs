// Estimate an essential matrix from noisy pixel matches with 40% outliers,
// then recover the relative pose by cheirality.

use std::error::Error;

use essloc::essential::essential_distance;
use essloc::essential::essential_from_relative;
use essloc::geometry::{angular_distance, vector_angle_deg};
use essloc::simulator::{generate_scene, synth_correspondences, Geometry, NoiseSpec};
use essloc::solver::{estimate_essential_ransac, recover_pose, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let scene = generate_scene(300, 3, Geometry::General, &mut rng)?;
    let noise = NoiseSpec {
        pixel_sigma: 1.0,
        outlier_match_fraction: 0.4,
        ..NoiseSpec::default()
    };
    let matches = synth_correspondences(&scene, 0, &noise, &mut rng)?;

    let cfg = SolverConfig {
        inlier_threshold_t1: SolverConfig::threshold_from_pixels(3.0, &scene.intrinsics),
        ..SolverConfig::default()
    };
    let est = estimate_essential_ransac(&matches.correspondences, &cfg, &mut rng)?;
    let inliers: Vec<_> = est.inliers.iter().map(|&i| matches.correspondences[i]).collect();
    let (signed, rel) = recover_pose(&est.essential, &inliers)?;

    let truth = scene.relative(0)?;
    println!(
        "{} matches, {} outliers planted, {} inliers kept after {} iterations",
        matches.correspondences.len(),
        matches.outlier_indices.len(),
        est.inliers.len(),
        est.iterations
    );
    println!(
        "distance to true E: {:.4}",
        essential_distance(&signed, &essential_from_relative(&truth))
    );
    let rot_err = angular_distance(&rel.rotation, &truth.rotation);
    let dir_err = vector_angle_deg(rel.direction(), truth.direction());
    println!("rotation error {rot_err:.3} deg, direction error {dir_err:.3} deg");
    if rot_err > 1.0 {
        return Err("rotation error above 1 degree".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
