// Build an essential matrix from a relative pose and recover the pose from
// its four-fold decomposition.

use std::error::Error;

use essloc::essential::{decompose, essential_from_relative};
use essloc::geometry::{angular_distance, vector_angle_deg, RelativePose, Rotation, Vec3};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let truth = RelativePose::new(
        Rotation::from_axis_angle(&Vec3::new(0.2, 1.0, -0.3), 0.35)?,
        Vec3::new(0.8, -0.1, 0.3),
    )?;
    let e = essential_from_relative(&truth);
    println!("E =\n{e}");

    let cands = decompose(&e)?;
    for (i, c) in cands.candidates().iter().enumerate() {
        let dr = angular_distance(&c.rotation, &truth.rotation);
        let dt = vector_angle_deg(c.direction(), truth.direction());
        println!("candidate {i}: rotation off by {dr:.2e} deg, direction off by {dt:.2e} deg");
    }
    let hits = cands
        .candidates()
        .iter()
        .filter(|c| {
            angular_distance(&c.rotation, &truth.rotation) < 1e-7
                && vector_angle_deg(c.direction(), truth.direction()) < 1e-7
        })
        .count();
    if hits != 1 {
        return Err(format!("expected exactly one matching candidate, found {hits}").into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
