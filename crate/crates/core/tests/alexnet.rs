//! AlexNet-sized presets are only smoke-tested: one forward/backward batch.

use tfdm::layers::Mode;
use tfdm::models::{build_network, preset, Network};
use tfdm::reference::random_real;
use tfdm::training::softmax_cross_entropy;
use tfdm::RealTensor4;

#[test]
fn alexnet_presets_run_one_batch() {
    for name in ["alexnet-cnn", "alexnet-tfdm"] {
        let cfg = preset(name).unwrap();
        let mut net: Network<f32> = build_network(&cfg, 0).unwrap();
        let [h, w, c] = cfg.input;
        let x = random_real::<f32>([1, h, w, c], 5);
        let logits = net.forward(&x, Mode::Train, 0).unwrap();
        assert_eq!(logits.len(), cfg.classes);
        assert!(logits.data().iter().all(|v| v.is_finite()), "{name}");
        let (_, g) = softmax_cross_entropy(logits.data(), cfg.classes, &[7]).unwrap();
        net.backward(RealTensor4::from_vec(logits.shape(), g).unwrap()).unwrap();
        net.visit_params(&mut |p| assert!(p.grad.iter().all(|g| g.is_finite()), "{name}: {}", p.name));
    }
}
