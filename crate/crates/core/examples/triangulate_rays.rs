// Camera center from two rays, as the midpoint of their common
// perpendicular, and the rejection of near-parallel rays.

use std::error::Error;

use essloc::geometry::{Ray, Vec3};
use essloc::localizer::triangulate_center;
use essloc::Error as LocError;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let a = Ray::new(Vec3::zeros(), Vec3::z())?;
    let b = Ray::new(Vec3::new(1.0, 0.0, 1.0), Vec3::y())?;
    let c = triangulate_center(&a, &b, 1.0)?;
    println!("skew rays meet closest at {:?}", c.as_slice());

    let swapped = triangulate_center(&b.flipped(), &a, 1.0)?;
    println!("flipped and swapped: {:?}", swapped.as_slice());

    let nearly = Ray::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.001, 0.0, 1.0))?;
    match triangulate_center(&a, &nearly, 1.0) {
        Err(LocError::NearCollinear { angle_deg }) => {
            println!("rejected near-parallel pair ({angle_deg:.3} deg)")
        }
        other => return Err(format!("expected a near-collinear error, got {other:?}").into()),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
