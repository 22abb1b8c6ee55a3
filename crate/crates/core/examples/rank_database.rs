// Rank database images by global-descriptor similarity.

use std::error::Error;

use essloc::retrieval::{rank_database, GlobalDescriptor};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let db = vec![
        GlobalDescriptor::new("kitchen", vec![0.9, 0.1, 0.0, 0.1])?,
        GlobalDescriptor::new("hallway", vec![0.1, 0.9, 0.2, 0.0])?,
        GlobalDescriptor::new("stairs", vec![0.0, 0.3, 0.9, 0.1])?,
        GlobalDescriptor::new("office", vec![0.5, 0.5, 0.1, 0.5])?,
    ];
    let query = GlobalDescriptor::new("query", vec![0.8, 0.3, 0.0, 0.3])?;
    for d in &db {
        println!("{:<8} similarity {:.3}", d.id, query.similarity(d));
    }
    let top = rank_database(&query, &db, 2)?;
    println!("top-2: {top:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
