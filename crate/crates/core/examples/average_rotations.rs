// Chordal mean of noisy rotation estimates.

use std::error::Error;

use essloc::geometry::{angular_distance, chordal_mean, Rotation, Vec3};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let truth = Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 1.1)?;
    let offsets = [
        Vec3::new(0.01, 0.0, 0.0),
        Vec3::new(-0.01, 0.0, 0.0),
        Vec3::new(0.0, 0.02, 0.0),
        Vec3::new(0.0, -0.02, 0.0),
    ];
    let samples: Vec<Rotation> = offsets
        .iter()
        .map(|w| Ok(Rotation::from_axis_angle(w, w.norm())?.compose(&truth)))
        .collect::<Result<_, essloc::Error>>()?;
    for (i, s) in samples.iter().enumerate() {
        println!("sample {i}: {:.3} deg from truth", angular_distance(s, &truth));
    }
    let mean = chordal_mean(&samples).ok_or("empty input")?;
    println!("mean: {:.2e} deg from truth, quaternion {}", angular_distance(&mean, &truth), mean.quaternion());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
