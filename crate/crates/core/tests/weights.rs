use aesz::model::{Autoencoder, BlockAutoencoder};
use aesz::pipeline::CompressOptions;
use aesz::synth::{self, SyntheticKind};
use aesz::{compress, decompress, Error, ErrorBound};
use sha2::{Digest, Sha256};

/// Writes a weight file the way an external exporter would, field by field:
/// 2D, S=4, d=2, one stage of 2 channels.
fn hand_written_file() -> (Vec<u8>, Vec<Vec<f32>>) {
    let counts = [18, 2, 36, 2, 2, 4, 16, 2, 16, 8, 36, 2, 36, 2, 2, 4, 18, 1];
    // beta tensors sit at positions 4 and 14, gamma at 5 and 15.
    let tensors: Vec<Vec<f32>> = counts
        .iter()
        .enumerate()
        .map(|(t, &n)| {
            (0..n)
                .map(|i| match t {
                    4 | 14 => 1.0 + i as f32 * 0.5,
                    5 | 15 => 0.01 * i as f32,
                    _ => ((t * 31 + i * 17) % 23) as f32 / 23.0 - 0.5,
                })
                .collect()
        })
        .collect();
    let mut b = Vec::new();
    b.extend_from_slice(b"AESZW");
    b.extend_from_slice(&1u16.to_le_bytes());
    b.push(2);
    b.extend_from_slice(&4u16.to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.push(1);
    b.extend_from_slice(&2u16.to_le_bytes());
    for t in &tensors {
        b.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    (b, tensors)
}

#[test]
fn externally_written_file_loads_byte_identically() {
    let (bytes, tensors) = hand_written_file();
    let path = std::env::temp_dir().join(format!("aesz-weights-{}.aeszw", std::process::id()));
    std::fs::write(&path, &bytes).unwrap();
    let ae = Autoencoder::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();

    assert_eq!(ae.config().channels, vec![2]);
    assert_eq!(ae.config().bottleneck_features(), 8);
    for (loaded, written) in ae.weights().tensors().iter().zip(&tensors) {
        assert_eq!(&loaded.data, written);
    }
    assert_eq!(ae.to_bytes(), bytes);
    let digest: [u8; 32] = Sha256::digest(&bytes).into();
    assert_eq!(ae.digest(), digest);
}

#[test]
fn malformed_files_are_rejected() {
    let (bytes, _) = hand_written_file();
    for cut in [3, 12, bytes.len() - 1] {
        assert!(matches!(
            Autoencoder::from_bytes(&bytes[..cut]),
            Err(Error::InvalidWeights(_))
        ));
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(Autoencoder::from_bytes(&extra).is_err());
    let mut wrong_count = bytes.clone();
    // First tensor count lives right after the 15-byte preamble.
    wrong_count[15] = 17;
    assert!(Autoencoder::from_bytes(&wrong_count).is_err());
    let mut negative_beta = bytes;
    let beta_at = 15 + (8 + 18 * 4) + (8 + 2 * 4) + (8 + 36 * 4) + (8 + 2 * 4) + 8;
    negative_beta[beta_at..beta_at + 4].copy_from_slice(&(-1.0f32).to_le_bytes());
    assert!(Autoencoder::from_bytes(&negative_beta).is_err());
}

#[test]
fn loaded_model_drives_compression_within_bound() {
    let (bytes, _) = hand_written_file();
    let ae = Autoencoder::from_bytes(&bytes).unwrap();
    let field = synth::generate(SyntheticKind::GaussianMixture, &[30, 30], 6).unwrap();
    for eps in [1e-2, 1e-4] {
        let c = compress(
            &field,
            ErrorBound::Relative(eps),
            Some(&ae),
            &CompressOptions::default(),
        )
        .unwrap();
        let out = decompress(&c.container, Some(&ae)).unwrap();
        let e = eps * field.value_range();
        assert!(field
            .values()
            .iter()
            .zip(out.values())
            .all(|(a, b)| (a - b).abs() <= e));
    }
}
