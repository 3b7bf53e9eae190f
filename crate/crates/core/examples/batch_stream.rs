//! Trains a 49-8-10 network on three consecutive batches of 15 images with
//! weight windows between batches, printing the metrics table.

use std::io;
use std::path::Path;

use milptrain::dataset::{load_split, make_batches, Split};
use milptrain::network::LayerSpec;
use milptrain::trainer::{init_network, train_batched_stream, write_metrics_csv, TrainConfig};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset");
    let train = load_split(&data, Split::Train)?.take(45).downsampled()?;
    let test = load_split(&data, Split::Test)?.take(200).downsampled()?;
    let batches = make_batches(&train, 15)?;
    let test = make_batches(&test, test.len())?.remove(0);

    let config = TrainConfig {
        seed: 4,
        node_limit: Some(2_000),
        max_while_iterations: 4,
        postprocess_every: 3,
        ..TrainConfig::default()
    };
    let net = init_network(&[LayerSpec::dense(49, 8), LayerSpec::dense(8, 10)], &config)?;
    let out = train_batched_stream(net, &batches, Some(&test), &config, |row| {
        eprintln!("finished batch {}", row.batch);
    })?;
    write_metrics_csv(&out.rows, io::stdout().lock())?;
    Ok(())
}
