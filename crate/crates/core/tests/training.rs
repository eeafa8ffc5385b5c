use tfdm::data::{synthetic_dataset, Dataset, Split};
use tfdm::models::{build_network, LayerSpec, Network, NetworkConfig};
use tfdm::training::{train, Optimizer, OptimizerConfig, TrainConfig, TrainReport};

/// A small mixed network: time conv, bridge, EML, frequency head.
fn small() -> NetworkConfig {
    use LayerSpec::*;
    let cfg = NetworkConfig {
        name: "small".into(),
        input: [8, 8, 1],
        classes: 4,
        assumed: false,
        assumptions: vec![],
        layers: vec![
            Conv { k: 3, channels: 4, stride: 1 },
            Relu,
            BridgeToFreq,
            Eml { k: 3, channels: 4 },
            FreqBn,
            SplitRelu,
            FlattenHead { hidden: vec![16] },
        ],
    };
    cfg.validate().unwrap();
    cfg
}

fn data(n: usize, seed: u64) -> Dataset {
    synthetic_dataset(n, [8, 8, 1], 4, 42, seed, Split::Train).unwrap()
}

fn run(net: &mut Network<f32>, ds: &Dataset, cfg: &TrainConfig) -> TrainReport {
    let mut opt = Optimizer::new(cfg.optimizer.clone());
    train(net, &mut opt, ds, None, cfg, &mut |_, _, _| Ok(())).unwrap()
}

fn params(net: &mut Network<f32>) -> Vec<f32> {
    let mut v = Vec::new();
    net.visit_params(&mut |p| v.extend_from_slice(p.value));
    v
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let mut net: Network<f32> = build_network(&small(), 1).unwrap();
    let before = params(&mut net);
    run(&mut net, &data(64, 0), &TrainConfig::new(2, 16, 1, OptimizerConfig::sgd(0.0, 0.9)));
    assert_eq!(before, params(&mut net));
}

#[test]
fn same_seed_same_history() {
    let ds = data(96, 1);
    let cfg = TrainConfig::new(3, 16, 5, OptimizerConfig::rmsprop(1e-3));
    let go = || {
        let mut net: Network<f32> = build_network(&small(), 5).unwrap();
        let r = run(&mut net, &ds, &cfg);
        let losses: Vec<u64> = r.history.iter().map(|h| h.train_loss.to_bits()).collect();
        (losses, params(&mut net))
    };
    assert_eq!(go(), go());
}

#[test]
fn overfits_a_tiny_set() {
    let ds = data(32, 2);
    let mut cfg = TrainConfig::new(500, 32, 0, OptimizerConfig::rmsprop(3e-3));
    cfg.max_steps = Some(500);
    let mut net: Network<f32> = build_network(&small(), 0).unwrap();
    let mut opt = Optimizer::new(cfg.optimizer.clone());
    let mut best = f64::INFINITY;
    train(&mut net, &mut opt, &ds, None, &cfg, &mut |rec, _, _| {
        best = best.min(rec.train_loss);
        Ok(())
    })
    .unwrap();
    assert!(best < 0.01, "best loss {best}");
}

#[test]
fn loss_decreases_for_most_seeds() {
    let ds = data(200, 3);
    let decreased = (0..5u64)
        .filter(|&seed| {
            let mut net: Network<f32> = build_network(&small(), seed).unwrap();
            let r = run(&mut net, &ds, &TrainConfig::new(5, 20, seed, OptimizerConfig::rmsprop(1e-3)));
            r.history.last().unwrap().train_loss < r.history[0].train_loss
        })
        .count();
    assert!(decreased >= 4, "{decreased}/5");
}
