use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::NetworkConfig;
use super::layers::{Conv, Deconv, Dense, FeatureMap, Gdn};
use super::weights::{decode_weights, encode_weights, Layout, WeightSet};
use crate::error::{Error, Result};

/// Block encoder/decoder pair used as a predictor.
///
/// Inputs and outputs live in the normalized `[-1, 1]` domain. Implementations
/// must be deterministic: the compressor and decompressor both call
/// [`decode`](Self::decode) on the same latent and must see the same block.
pub trait BlockAutoencoder: Send + Sync {
    fn dimensionality(&self) -> usize;
    fn block_edge(&self) -> usize;
    fn latent_size(&self) -> usize;
    fn encode(&self, block: &[f32]) -> Result<Vec<f32>>;
    fn decode(&self, latent: &[f32]) -> Result<Vec<f32>>;
    /// Identifies the exact model so a container can refuse the wrong one.
    fn digest(&self) -> [u8; 32];
}

struct EncoderStage {
    conv1: Conv,
    conv2: Conv,
    gdn: Gdn,
}

struct DecoderStage {
    deconv1: Deconv,
    deconv2: Deconv,
    igdn: Gdn,
}

/// The convolutional autoencoder: `[conv s1 → conv s2 → GDN] × n → dense`
/// on the way in, `dense → [deconv s1 → deconv s2 → iGDN] × n → conv → clamp`
/// on the way out.
pub struct Autoencoder {
    config: NetworkConfig,
    weights: WeightSet,
    encoder: Vec<EncoderStage>,
    encoder_fc: Dense,
    decoder_fc: Dense,
    /// Deepest stage first, i.e. execution order.
    decoder: Vec<DecoderStage>,
    output: Conv,
    digest: [u8; 32],
}

impl std::fmt::Debug for Autoencoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Autoencoder")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Autoencoder {
    pub fn new(config: NetworkConfig, weights: WeightSet) -> Result<Self> {
        // Re-validate: the weight set may have been built for another config.
        let weights = WeightSet::from_tensors(&config, weights.tensors().to_vec())?;
        let layout = Layout::new(&config);
        let t = |i: usize| weights.tensor(i);
        let encoder = (0..config.num_stages())
            .map(|s| {
                let b = layout.encoder(s);
                EncoderStage {
                    conv1: Conv::new(t(b), t(b + 1), 1),
                    conv2: Conv::new(t(b + 2), t(b + 3), 2),
                    gdn: Gdn::new(t(b + 4), t(b + 5), false),
                }
            })
            .collect();
        let decoder = (0..config.num_stages())
            .rev()
            .map(|s| {
                let b = layout.decoder(s);
                DecoderStage {
                    deconv1: Deconv::new(t(b), t(b + 1), 1),
                    deconv2: Deconv::new(t(b + 2), t(b + 3), 2),
                    igdn: Gdn::new(t(b + 4), t(b + 5), true),
                }
            })
            .collect();
        let encoder_fc = Dense::new(t(layout.encoder_fc()), t(layout.encoder_fc() + 1));
        let decoder_fc = Dense::new(t(layout.decoder_fc()), t(layout.decoder_fc() + 1));
        let output = Conv::new(t(layout.output()), t(layout.output() + 1), 1);
        let digest = Sha256::digest(encode_weights(&config, &weights)).into();
        Ok(Autoencoder {
            config,
            weights,
            encoder,
            encoder_fc,
            decoder_fc,
            decoder,
            output,
            digest,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (cfg, weights) = decode_weights(bytes)?;
        Self::new(cfg, weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_weights(&self.config, &self.weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    fn spatial(&self, edge: usize) -> [usize; 3] {
        if self.config.dimensionality == 2 {
            [1, edge, edge]
        } else {
            [edge, edge, edge]
        }
    }

    /// Convolutional part of the encoder, before the dense layer.
    pub(crate) fn encoder_trunk(&self, block: &[f32]) -> Result<Vec<f32>> {
        if block.len() != self.config.block_len() {
            return Err(Error::IncompleteBlock);
        }
        let mut x = FeatureMap::new(1, self.spatial(self.config.block_edge), block.to_vec());
        for stage in &self.encoder {
            x = stage
                .gdn
                .forward(&stage.conv2.forward(&stage.conv1.forward(&x)));
        }
        Ok(x.data)
    }

    /// Convolutional part of the decoder, after the dense layer, unclamped.
    pub(crate) fn decoder_trunk(&self, features: &[f32]) -> Vec<f32> {
        let cfg = &self.config;
        let c = cfg.channels[cfg.num_stages() - 1];
        let mut x = FeatureMap::new(c, self.spatial(cfg.bottom_edge()), features.to_vec());
        for stage in &self.decoder {
            x = stage
                .igdn
                .forward(&stage.deconv2.forward(&stage.deconv1.forward(&x)));
        }
        self.output.forward(&x).data
    }

    pub fn encoder_forward(&self, block: &[f32]) -> Result<Vec<f32>> {
        Ok(self.encoder_fc.forward(&self.encoder_trunk(block)?))
    }

    pub fn decoder_forward(&self, latent: &[f32]) -> Result<Vec<f32>> {
        if latent.len() != self.config.latent_size {
            return Err(Error::LatentLength {
                expected: self.config.latent_size,
                actual: latent.len(),
            });
        }
        let mut out = self.decoder_trunk(&self.decoder_fc.forward(latent));
        for v in &mut out {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(out)
    }
}

impl BlockAutoencoder for Autoencoder {
    fn dimensionality(&self) -> usize {
        self.config.dimensionality
    }

    fn block_edge(&self) -> usize {
        self.config.block_edge
    }

    fn latent_size(&self) -> usize {
        self.config.latent_size
    }

    fn encode(&self, block: &[f32]) -> Result<Vec<f32>> {
        self.encoder_forward(block)
    }

    fn decode(&self, latent: &[f32]) -> Result<Vec<f32>> {
        self.decoder_forward(latent)
    }

    fn digest(&self) -> [u8; 32] {
        self.digest
    }
}
