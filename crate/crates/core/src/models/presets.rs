//! Named architectures. Every shape detail that is a convention rather than
//! a fixed part of the architecture family is listed in `assumptions`.

use crate::models::config::{LayerSpec, NetworkConfig};

use LayerSpec::*;

const VGG_CHANNELS: [usize; 5] = [64, 128, 256, 512, 512];
const VGG_LARGE_DEPTH: [usize; 5] = [2, 2, 2, 3, 3];
const ALEXNET_CHANNELS: [usize; 5] = [96, 256, 384, 384, 256];

fn config(name: &str, input: [usize; 3], classes: usize, assumptions: &[&str], layers: Vec<LayerSpec>) -> NetworkConfig {
    NetworkConfig {
        name: name.into(),
        input,
        classes,
        assumed: !assumptions.is_empty(),
        assumptions: assumptions.iter().map(|s| s.to_string()).collect(),
        layers,
    }
}

fn conv(k: usize, channels: usize) -> LayerSpec {
    Conv { k, channels, stride: 1 }
}

fn pool2() -> LayerSpec {
    Maxpool { window: 2, stride: 2 }
}

fn freq_pool2() -> LayerSpec {
    FreqMaxpool { window: 2, stride: 2 }
}

const LENET_ASSUMED: &[&str] = &[
    "channels 6/16 with 5x5 filters and same padding",
    "batch normalization after each filter layer, 2x2 max pooling after each activation",
    "dropout p=0.5 before the dense layers, dense widths 120/84",
];

pub fn lenet_cnn() -> NetworkConfig {
    let layers = vec![
        conv(5, 6),
        Bn,
        Relu,
        pool2(),
        conv(5, 16),
        Bn,
        Relu,
        pool2(),
        Dropout { p: 0.5 },
        Dense { units: 120 },
        Relu,
        Dense { units: 84 },
        Relu,
        Dense { units: 10 },
    ];
    config("lenet-cnn", [28, 28, 1], 10, LENET_ASSUMED, layers)
}

pub fn tfdm_lenet() -> NetworkConfig {
    let layers = vec![
        BridgeToFreq,
        Eml { k: 5, channels: 6 },
        FreqBn,
        SplitRelu,
        freq_pool2(),
        Eml { k: 5, channels: 16 },
        FreqBn,
        SplitRelu,
        freq_pool2(),
        FreqDropout { p: 0.5 },
        FlattenHead { hidden: vec![120, 84] },
    ];
    let mut assumed = LENET_ASSUMED.to_vec();
    assumed.push("split ReLU as the frequency-domain activation");
    config("tfdm-lenet", [28, 28, 1], 10, &assumed, layers)
}

const VGG_ASSUMED: &[&str] = &[
    "3x3 filters with channel ladder 64/128/256/512/512",
    "batch normalization after every filter layer",
    "2x2 max pooling after each block, dropout p=0.5 before the 512-unit dense layer",
];

const VGG_FREQ_ASSUMED: &str =
    "EML filter size clamped to the plane size where a 3x3 filter does not fit (2x2 planes use K=2)";

fn vgg_time_block(layers: &mut Vec<LayerSpec>, depth: usize, channels: usize) {
    for _ in 0..depth {
        layers.extend([conv(3, channels), Bn, Relu]);
    }
    layers.push(pool2());
}

fn vgg_freq_block(layers: &mut Vec<LayerSpec>, depth: usize, channels: usize, plane: usize) {
    for _ in 0..depth {
        layers.extend([Eml { k: 3.min(plane), channels }, FreqBn, SplitRelu]);
    }
    layers.push(freq_pool2());
}

fn vgg_cnn(name: &str, depth: [usize; 5]) -> NetworkConfig {
    let mut layers = Vec::new();
    for (d, c) in depth.into_iter().zip(VGG_CHANNELS) {
        vgg_time_block(&mut layers, d, c);
    }
    layers.extend([Dropout { p: 0.5 }, Dense { units: 512 }, Relu, Dense { units: 10 }]);
    config(name, [32, 32, 3], 10, VGG_ASSUMED, layers)
}

/// VGG ladder whose first `time_blocks` blocks run in the time domain.
fn vgg_tfdm(name: &str, depth: [usize; 5], time_blocks: usize) -> NetworkConfig {
    let mut layers = Vec::new();
    let mut plane = 32;
    for (b, (d, c)) in depth.into_iter().zip(VGG_CHANNELS).enumerate() {
        if b == time_blocks {
            layers.push(BridgeToFreq);
        }
        if b < time_blocks {
            vgg_time_block(&mut layers, d, c);
        } else {
            vgg_freq_block(&mut layers, d, c, plane);
        }
        plane /= 2;
    }
    layers.extend([FreqDropout { p: 0.5 }, FlattenHead { hidden: vec![512] }]);
    let mut assumed = VGG_ASSUMED.to_vec();
    assumed.extend([VGG_FREQ_ASSUMED, "split ReLU as the frequency-domain activation"]);
    config(name, [32, 32, 3], 10, &assumed, layers)
}

pub fn vgg_small_cnn() -> NetworkConfig {
    vgg_cnn("vgg-small-cnn", [1; 5])
}

pub fn vgg_small_tfdm() -> NetworkConfig {
    vgg_tfdm("vgg-small-tfdm", [1; 5], 0)
}

pub fn vgg_large_cnn() -> NetworkConfig {
    vgg_cnn("vgg-large-cnn", VGG_LARGE_DEPTH)
}

pub fn vgg_large_tfdm_mixture() -> NetworkConfig {
    vgg_tfdm("vgg-large-tfdm-mixture", VGG_LARGE_DEPTH, 3)
}

const ALEXNET_ASSUMED: &[&str] = &[
    "single-tower channels 96/256/384/384/256, filters 11 (stride 4)/5/3/3/3, same padding",
    "3x3 stride-2 max pooling after layers 1, 2 and 5; no local response normalization",
    "dropout p=0.5 before the dense layers",
];

pub fn alexnet_cnn() -> NetworkConfig {
    let c = ALEXNET_CHANNELS;
    let pool = || Maxpool { window: 3, stride: 2 };
    let layers = vec![
        Conv { k: 11, channels: c[0], stride: 4 },
        Relu,
        pool(),
        conv(5, c[1]),
        Relu,
        pool(),
        conv(3, c[2]),
        Relu,
        conv(3, c[3]),
        Relu,
        conv(3, c[4]),
        Relu,
        pool(),
        Dropout { p: 0.5 },
        Dense { units: 4096 },
        Relu,
        Dropout { p: 0.5 },
        Dense { units: 4096 },
        Relu,
        Dense { units: 1000 },
    ];
    config("alexnet-cnn", [224, 224, 3], 1000, ALEXNET_ASSUMED, layers)
}

pub fn alexnet_tfdm() -> NetworkConfig {
    let c = ALEXNET_CHANNELS;
    let pool = || FreqMaxpool { window: 3, stride: 2 };
    let layers = vec![
        Conv { k: 11, channels: c[0], stride: 4 },
        Relu,
        BridgeToFreq,
        pool(),
        Eml { k: 5, channels: c[1] },
        SplitRelu,
        pool(),
        Eml { k: 3, channels: c[2] },
        SplitRelu,
        Eml { k: 3, channels: c[3] },
        SplitRelu,
        Eml { k: 3, channels: c[4] },
        SplitRelu,
        pool(),
        FreqDropout { p: 0.5 },
        FlattenHead { hidden: vec![4096, 4096] },
    ];
    let mut assumed = ALEXNET_ASSUMED.to_vec();
    assumed.push("split ReLU as the frequency-domain activation");
    config("alexnet-tfdm", [224, 224, 3], 1000, &assumed, layers)
}

/// Every named architecture.
pub fn presets() -> Vec<NetworkConfig> {
    vec![
        lenet_cnn(),
        tfdm_lenet(),
        vgg_small_cnn(),
        vgg_small_tfdm(),
        vgg_large_cnn(),
        vgg_large_tfdm_mixture(),
        alexnet_cnn(),
        alexnet_tfdm(),
    ]
}

pub fn preset(name: &str) -> Option<NetworkConfig> {
    presets().into_iter().find(|c| c.name == name)
}

pub fn preset_names() -> Vec<String> {
    presets().into_iter().map(|c| c.name).collect()
}
