//! Trains a 49-8-8-10 network on the first downsampled MNIST images.
//!
//! cargo run --release --example train_batch -- [seed] [images]

use std::path::Path;

use milptrain::dataset::{load_split, make_batches, Split};
use milptrain::network::LayerSpec;
use milptrain::trainer::{init_network, train_batch, TrainConfig, TrainState};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(Ok(1), |s| s.parse())?;
    let images = args.next().map_or(Ok(30), |s| s.parse())?;

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset");
    let set = load_split(&data, Split::Train)?.take(images).downsampled()?;
    let batch = make_batches(&set, images)?.remove(0);

    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let specs = [LayerSpec::dense(49, 8), LayerSpec::dense(8, 8), LayerSpec::dense(8, 10)];
    let mut state = TrainState::new(init_network(&specs, &config)?);
    let report = train_batch(&mut state, &batch, &config)?;

    println!("initial accuracy {:.4}", report.initial_accuracy);
    for (i, acc) in report.trace.iter().enumerate() {
        println!("iteration {}: {acc:.4}", i + 1);
    }
    println!(
        "best {:.4}, final {:.4}, {} MILPs ({} at limit), {} LPs, {:.1?}",
        report.best_accuracy,
        report.final_accuracy,
        report.stats.milps,
        report.stats.at_limit,
        report.stats.lps,
        report.elapsed
    );
    Ok(())
}
