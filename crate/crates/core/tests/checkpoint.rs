use tempfile::TempDir;
use tfdm::layers::Mode;
use tfdm::models::{build_network, load_checkpoint, load_checkpoint_as, preset, save_checkpoint, NamedTensor, Network};
use tfdm::reference::random_real;
use tfdm::{CheckpointError, Error};

fn trained_net() -> Network<f32> {
    let mut net: Network<f32> = build_network(&preset("tfdm-lenet").unwrap(), 9).unwrap();
    // A training pass moves the BN running statistics off their initial values.
    net.forward(&random_real([4, 28, 28, 1], 1), Mode::Train, 0).unwrap();
    net.clear_cache();
    net
}

#[test]
fn round_trip_restores_outputs_and_extras() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("net.tfdm");
    let mut net = trained_net();
    let extra = vec![NamedTensor::flat("opt.rms.0", vec![0.5f32, 1.5])];
    save_checkpoint(&path, &mut net, &extra).unwrap();
    let (mut back, rest) = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(rest, extra);
    let x = random_real([3, 28, 28, 1], 2);
    let a = net.forward(&x, Mode::Eval, 0).unwrap();
    let b = back.forward(&x, Mode::Eval, 0).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn truncated_or_flipped_files_fail_checksum() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("net.tfdm");
    save_checkpoint(&path, &mut trained_net(), &[]).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    let err = load_checkpoint::<f32>(&path).err().unwrap();
    assert!(matches!(err, Error::Checkpoint(CheckpointError::Checksum)), "{err}");

    let mut flipped = bytes.clone();
    flipped[bytes.len() / 3] ^= 1;
    std::fs::write(&path, &flipped).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::Checkpoint(CheckpointError::Checksum))));

    let mut magic = bytes;
    magic[0] = b'X';
    std::fs::write(&path, &magic).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::Checkpoint(CheckpointError::BadMagic))));
}

#[test]
fn config_and_dtype_mismatch_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("net.tfdm");
    save_checkpoint(&path, &mut trained_net(), &[]).unwrap();
    let err = load_checkpoint_as::<f32>(&path, &preset("lenet-cnn").unwrap()).err().unwrap();
    assert!(matches!(err, Error::Checkpoint(CheckpointError::ConfigMismatch { .. })), "{err}");
    assert!(load_checkpoint_as::<f32>(&path, &preset("tfdm-lenet").unwrap()).is_ok());
    let err = load_checkpoint::<f64>(&path).err().unwrap();
    assert!(matches!(err, Error::Checkpoint(CheckpointError::DType { .. })), "{err}");
}

#[test]
fn missing_file_names_path() {
    let err = load_checkpoint::<f32>(std::path::Path::new("/nonexistent/x.tfdm")).err().unwrap();
    assert!(err.to_string().contains("/nonexistent/x.tfdm"));
}
