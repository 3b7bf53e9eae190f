//! Trains three small networks on different slices of the data, saves and
//! reloads them, and compares single accuracies with the majority vote.

use std::io::BufReader;
use std::path::Path;

use milptrain::dataset::{load_split, make_batches, Split};
use milptrain::network::{LayerSpec, Network};
use milptrain::trainer::{committee_accuracy, init_network, train_batch, TrainConfig, TrainState};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset");
    let train = load_split(&data, Split::Train)?.take(60).downsampled()?;
    let test = load_split(&data, Split::Test)?.downsampled()?;
    let test = make_batches(&test, test.len())?.remove(0);
    let dir = std::env::temp_dir();

    let mut nets = Vec::new();
    for (k, batch) in make_batches(&train, 20)?.iter().enumerate() {
        let config = TrainConfig {
            seed: k as u64,
            node_limit: Some(1_000),
            max_while_iterations: 3,
            ..TrainConfig::default()
        };
        let net = init_network(&[LayerSpec::dense(49, 6), LayerSpec::dense(6, 10)], &config)?;
        let mut state = TrainState::new(net);
        let report = train_batch(&mut state, batch, &config)?;

        let path = dir.join(format!("milptrain-committee-{k}.txt"));
        state.net.save(std::fs::File::create(&path)?)?;
        let net = Network::load(BufReader::new(std::fs::File::open(&path)?))?;
        assert_eq!(net, state.net);
        println!(
            "member {k}: batch accuracy {:.4}, test accuracy {:.4}",
            report.final_accuracy,
            net.accuracy(&test.inputs, &test.labels)?
        );
        nets.push(net);
    }
    println!("committee test accuracy {:.4}", committee_accuracy(&nets, &test)?);
    Ok(())
}
