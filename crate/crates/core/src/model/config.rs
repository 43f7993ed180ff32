use crate::error::{Error, Result};

/// Architecture of the blockwise convolutional autoencoder.
///
/// Each of the `channels.len()` stages halves every spatial axis, so the
/// block edge must be divisible by `2^stages`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkConfig {
    pub dimensionality: usize,
    pub block_edge: usize,
    pub latent_size: usize,
    pub channels: Vec<usize>,
}

/// Kernel edge of every (de)convolution.
pub const KERNEL_EDGE: usize = 3;

impl NetworkConfig {
    pub fn new(
        dimensionality: usize,
        block_edge: usize,
        latent_size: usize,
        channels: Vec<usize>,
    ) -> Result<Self> {
        let cfg = NetworkConfig {
            dimensionality,
            block_edge,
            latent_size,
            channels,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dimensionality == 2 || self.dimensionality == 3) {
            return bad(format!(
                "dimensionality must be 2 or 3, got {}",
                self.dimensionality
            ));
        }
        if self.channels.is_empty() || self.channels.len() > u8::MAX as usize {
            return bad(format!("stage count {} out of range", self.channels.len()));
        }
        if let Some(c) = self
            .channels
            .iter()
            .find(|&&c| c == 0 || c > u16::MAX as usize)
        {
            return bad(format!("channel count {c} out of range"));
        }
        if self.latent_size == 0 || self.latent_size > u16::MAX as usize {
            return bad(format!("latent size {} out of range", self.latent_size));
        }
        if self.block_edge < 2 || self.block_edge > u16::MAX as usize {
            return bad(format!("block edge {} out of range", self.block_edge));
        }
        let stages = self.channels.len() as u32;
        if stages >= usize::BITS || !self.block_edge.is_multiple_of(1usize << stages) {
            return bad(format!(
                "block edge {} is not divisible by 2^{stages}",
                self.block_edge
            ));
        }
        Ok(())
    }

    pub fn num_stages(&self) -> usize {
        self.channels.len()
    }

    /// Spatial edge of the deepest feature map.
    pub fn bottom_edge(&self) -> usize {
        self.block_edge >> self.num_stages()
    }

    /// Length of the flattened deepest feature map.
    pub fn bottleneck_features(&self) -> usize {
        self.channels[self.num_stages() - 1] * self.bottom_edge().pow(self.dimensionality as u32)
    }

    /// Samples per input block.
    pub fn block_len(&self) -> usize {
        self.block_edge.pow(self.dimensionality as u32)
    }

    /// Input samples per latent element.
    pub fn latent_ratio(&self) -> f64 {
        self.block_len() as f64 / self.latent_size as f64
    }

    pub fn kernel_dims(&self) -> Vec<usize> {
        vec![KERNEL_EDGE; self.dimensionality]
    }

    /// Input channels of encoder stage `i`.
    pub fn encoder_in_channels(&self, stage: usize) -> usize {
        if stage == 0 {
            1
        } else {
            self.channels[stage - 1]
        }
    }

    /// Output channels of decoder stage `i`; the shallowest stage keeps its
    /// width and the final output conv reduces to one channel.
    pub fn decoder_out_channels(&self, stage: usize) -> usize {
        if stage == 0 {
            self.channels[0]
        } else {
            self.channels[stage - 1]
        }
    }

    /// Names and shapes of every tensor, in weight-file order.
    ///
    /// Kernels follow the usual deep-learning layouts: convolutions are
    /// `[out, in, k..]`, transposed convolutions `[in, out, k..]`, dense
    /// layers `[out, in]`.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.kernel_dims();
        let with_kernel = |a: usize, b: usize| {
            let mut s = vec![a, b];
            s.extend_from_slice(&k);
            s
        };
        let mut out = Vec::new();
        for (i, &c) in self.channels.iter().enumerate() {
            let cin = self.encoder_in_channels(i);
            out.push((format!("encoder.{i}.conv1.kernel"), with_kernel(c, cin)));
            out.push((format!("encoder.{i}.conv1.bias"), vec![c]));
            out.push((format!("encoder.{i}.conv2.kernel"), with_kernel(c, c)));
            out.push((format!("encoder.{i}.conv2.bias"), vec![c]));
            out.push((format!("encoder.{i}.gdn.beta"), vec![c]));
            out.push((format!("encoder.{i}.gdn.gamma"), vec![c, c]));
        }
        let f = self.bottleneck_features();
        let d = self.latent_size;
        out.push(("encoder.fc.weight".into(), vec![d, f]));
        out.push(("encoder.fc.bias".into(), vec![d]));
        out.push(("decoder.fc.weight".into(), vec![f, d]));
        out.push(("decoder.fc.bias".into(), vec![f]));
        for i in (0..self.num_stages()).rev() {
            let c = self.channels[i];
            let cout = self.decoder_out_channels(i);
            out.push((format!("decoder.{i}.deconv1.kernel"), with_kernel(c, c)));
            out.push((format!("decoder.{i}.deconv1.bias"), vec![c]));
            out.push((format!("decoder.{i}.deconv2.kernel"), with_kernel(c, cout)));
            out.push((format!("decoder.{i}.deconv2.bias"), vec![cout]));
            out.push((format!("decoder.{i}.igdn.beta"), vec![cout]));
            out.push((format!("decoder.{i}.igdn.gamma"), vec![cout, cout]));
        }
        out.push(("output.kernel".into(), with_kernel(1, self.channels[0])));
        out.push(("output.bias".into(), vec![1]));
        out
    }
}
