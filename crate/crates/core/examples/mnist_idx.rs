//! Loads the bundled MNIST subset, downsamples it to 7x7 and draws the
//! first few digits.

use std::path::Path;

use milptrain::dataset::{load_split, make_batches, Split};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset");
    let train = load_split(&data, Split::Train)?;
    let test = load_split(&data, Split::Test)?;
    println!(
        "{} training and {} test images of {}x{}",
        train.len(),
        test.len(),
        train.rows,
        train.cols
    );
    let small = train.take(3).downsampled()?;
    for (img, label) in small.images.iter().zip(&small.labels) {
        println!("label {label}");
        for row in img.chunks(small.cols) {
            let line: String = row
                .iter()
                .map(|&p| match p {
                    p if p > 0.5 => '#',
                    p if p > 0.2 => '+',
                    p if p > 0.0 => '.',
                    _ => ' ',
                })
                .collect();
            println!("  |{line}|");
        }
    }
    let batches = make_batches(&train, 100)?;
    println!("{} batches, first targets {:?}", batches.len(), batches[0].targets[0]);
    Ok(())
}
