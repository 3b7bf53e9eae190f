//! Writes the weight MILP of one first-layer neuron, fitted to two MNIST
//! images, in LP format to stdout.

use std::io;
use std::path::Path;

use milptrain::dataset::{load_split, Split};
use milptrain::encodings::{build_weight_milp, BigM};
use milptrain::network::LayerSpec;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset");
    let set = load_split(&data, Split::Train)?.take(2).downsampled()?;
    let spec = LayerSpec::dense(49, 8);
    let targets = [1.0, 0.0];
    let enc = build_weight_milp(&spec, 0, &set.images, &targets, BigM::for_batch(49, &set.images), None)?;
    enc.model.export_lp_format(io::stdout().lock())?;
    Ok(())
}
