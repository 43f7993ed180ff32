//! Layer kernels for the blockwise autoencoder.
//!
//! Feature maps are `[channel][z][y][x]` with `z` of length 1 for 2D data.
//! Every output element is accumulated in `f64` in a fixed order (input
//! channel, then kernel tap) and rounded to `f32` once at the end of the
//! layer. Zero weights are skipped when the layer is prepared; this does not
//! change any sum.

use super::weights::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FeatureMap {
    pub channels: usize,
    pub spatial: [usize; 3],
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, spatial: [usize; 3], data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), channels * spatial.iter().product::<usize>());
        FeatureMap {
            channels,
            spatial,
            data,
        }
    }

    fn plane(&self) -> usize {
        self.spatial.iter().product()
    }

    fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane();
        &self.data[c * n..(c + 1) * n]
    }
}

#[derive(Clone, Copy, Debug)]
struct Tap {
    offset: [usize; 3],
    weight: f64,
}

/// Kernel geometry shared by convolutions and transposed convolutions.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    /// Kernel extent per padded axis (1 on the unused depth axis of 2D nets).
    kernel: [usize; 3],
    pad: [usize; 3],
    stride: usize,
}

impl Geometry {
    fn new(kernel_dims: &[usize], stride: usize) -> Self {
        let mut kernel = [1; 3];
        let off = 3 - kernel_dims.len();
        kernel[off..].copy_from_slice(kernel_dims);
        let pad = kernel.map(|k| (k - 1) / 2);
        Geometry {
            kernel,
            pad,
            stride,
        }
    }

    fn taps(&self) -> usize {
        self.kernel.iter().product()
    }

    fn tap_offset(&self, t: usize) -> [usize; 3] {
        let kx = t % self.kernel[2];
        let ky = (t / self.kernel[2]) % self.kernel[1];
        let kz = t / (self.kernel[2] * self.kernel[1]);
        [kz, ky, kx]
    }

    fn conv_out(&self, input: [usize; 3]) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..3 {
            out[a] = (input[a] + 2 * self.pad[a] - self.kernel[a]) / self.stride + 1;
        }
        out
    }

    /// Transposed-conv output size; unit-kernel axes keep their size.
    fn deconv_out(&self, input: [usize; 3]) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..3 {
            out[a] = if self.kernel[a] == 1 {
                input[a]
            } else {
                input[a] * self.stride
            };
        }
        out
    }
}

/// Per output channel: the input channels that feed it and their nonzero taps.
type SparseKernel = Vec<Vec<(usize, Vec<Tap>)>>;

#[derive(Clone, Debug)]
pub(crate) struct Conv {
    geometry: Geometry,
    in_channels: usize,
    out_channels: usize,
    kernel: SparseKernel,
    bias: Vec<f64>,
}

impl Conv {
    /// `kernel` is `[out, in, k..]`.
    pub fn new(kernel: &Tensor, bias: &Tensor, stride: usize) -> Self {
        let (out_channels, in_channels) = (kernel.shape[0], kernel.shape[1]);
        let geometry = Geometry::new(&kernel.shape[2..], stride);
        let taps = geometry.taps();
        let mut sparse = vec![Vec::new(); out_channels];
        for (o, row) in sparse.iter_mut().enumerate() {
            for i in 0..in_channels {
                let base = (o * in_channels + i) * taps;
                let list = collect_taps(&geometry, &kernel.data[base..base + taps]);
                if !list.is_empty() {
                    row.push((i, list));
                }
            }
        }
        Conv {
            geometry,
            in_channels,
            out_channels,
            kernel: sparse,
            bias: bias.data.iter().map(|&b| b as f64).collect(),
        }
    }

    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        assert_eq!(input.channels, self.in_channels);
        let g = &self.geometry;
        let out_sp = g.conv_out(input.spatial);
        let in_sp = input.spatial;
        let plane: usize = out_sp.iter().product();
        let mut data = Vec::with_capacity(self.out_channels * plane);
        let mut acc = vec![0f64; plane];
        for o in 0..self.out_channels {
            acc.fill(self.bias[o]);
            for (i, taps) in &self.kernel[o] {
                let src = input.channel(*i);
                for tap in taps {
                    // Output positions whose input coordinate
                    // out*stride + tap - pad stays inside the input.
                    let mut lo = [0usize; 3];
                    let mut hi = [0usize; 3];
                    for a in 0..3 {
                        let t = tap.offset[a] as isize - g.pad[a] as isize;
                        let s = g.stride as isize;
                        let first = if t >= 0 { 0 } else { (-t + s - 1) / s };
                        let last = (in_sp[a] as isize - 1 - t).div_euclid(s);
                        lo[a] = first as usize;
                        hi[a] = (last + 1).clamp(0, out_sp[a] as isize) as usize;
                    }
                    for z in lo[0]..hi[0] {
                        let iz = z * g.stride + tap.offset[0] - g.pad[0];
                        for y in lo[1]..hi[1] {
                            let iy = y * g.stride + tap.offset[1] - g.pad[1];
                            let in_row = (iz * in_sp[1] + iy) * in_sp[2];
                            let out_row = (z * out_sp[1] + y) * out_sp[2];
                            for x in lo[2]..hi[2] {
                                let ix = x * g.stride + tap.offset[2] - g.pad[2];
                                acc[out_row + x] += tap.weight * src[in_row + ix] as f64;
                            }
                        }
                    }
                }
            }
            data.extend(acc.iter().map(|&v| v as f32));
        }
        FeatureMap::new(self.out_channels, out_sp, data)
    }
}

fn collect_taps(geometry: &Geometry, weights: &[f32]) -> Vec<Tap> {
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(t, &w)| Tap {
            offset: geometry.tap_offset(t),
            weight: w as f64,
        })
        .collect()
}

/// Transposed convolution; output position `in*stride - pad + tap`.
#[derive(Clone, Debug)]
pub(crate) struct Deconv {
    geometry: Geometry,
    in_channels: usize,
    out_channels: usize,
    kernel: SparseKernel,
    bias: Vec<f64>,
}

impl Deconv {
    /// `kernel` is `[in, out, k..]`.
    pub fn new(kernel: &Tensor, bias: &Tensor, stride: usize) -> Self {
        let (in_channels, out_channels) = (kernel.shape[0], kernel.shape[1]);
        let geometry = Geometry::new(&kernel.shape[2..], stride);
        let taps = geometry.taps();
        let mut sparse = vec![Vec::new(); out_channels];
        for (o, row) in sparse.iter_mut().enumerate() {
            for i in 0..in_channels {
                let base = (i * out_channels + o) * taps;
                let list = collect_taps(&geometry, &kernel.data[base..base + taps]);
                if !list.is_empty() {
                    row.push((i, list));
                }
            }
        }
        Deconv {
            geometry,
            in_channels,
            out_channels,
            kernel: sparse,
            bias: bias.data.iter().map(|&b| b as f64).collect(),
        }
    }

    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        assert_eq!(input.channels, self.in_channels);
        let g = &self.geometry;
        let in_sp = input.spatial;
        let out_sp = g.deconv_out(in_sp);
        let plane: usize = out_sp.iter().product();
        let mut data = Vec::with_capacity(self.out_channels * plane);
        let mut acc = vec![0f64; plane];
        for o in 0..self.out_channels {
            acc.fill(self.bias[o]);
            for (i, taps) in &self.kernel[o] {
                let src = input.channel(*i);
                for tap in taps {
                    // Input positions q with q*stride + tap - pad inside the output.
                    let mut lo = [0usize; 3];
                    let mut hi = [0usize; 3];
                    for a in 0..3 {
                        let t = tap.offset[a] as isize - g.pad[a] as isize;
                        let s = g.stride as isize;
                        let first = if t >= 0 { 0 } else { (-t + s - 1) / s };
                        let last = (out_sp[a] as isize - 1 - t).div_euclid(s);
                        lo[a] = first as usize;
                        hi[a] = (last + 1).clamp(0, in_sp[a] as isize) as usize;
                    }
                    for qz in lo[0]..hi[0] {
                        let z = qz * g.stride + tap.offset[0] - g.pad[0];
                        for qy in lo[1]..hi[1] {
                            let y = qy * g.stride + tap.offset[1] - g.pad[1];
                            let in_row = (qz * in_sp[1] + qy) * in_sp[2];
                            let out_row = (z * out_sp[1] + y) * out_sp[2];
                            for qx in lo[2]..hi[2] {
                                let x = qx * g.stride + tap.offset[2] - g.pad[2];
                                acc[out_row + x] += tap.weight * src[in_row + qx] as f64;
                            }
                        }
                    }
                }
            }
            data.extend(acc.iter().map(|&v| v as f32));
        }
        FeatureMap::new(self.out_channels, out_sp, data)
    }
}

/// Generalized divisive normalization, or its inverse.
///
/// `y_c = x_c / sqrt(beta_c + sum_k gamma[c][k] * x_k^2)`; the inverse
/// multiplies by the same root.
#[derive(Clone, Debug)]
pub(crate) struct Gdn {
    beta: Vec<f64>,
    /// Nonzero gamma entries per output channel.
    gamma: Vec<Vec<(usize, f64)>>,
    inverse: bool,
}

impl Gdn {
    pub fn new(beta: &Tensor, gamma: &Tensor, inverse: bool) -> Self {
        let c = beta.len();
        let gamma = (0..c)
            .map(|i| {
                (0..c)
                    .filter_map(|k| {
                        let g = gamma.data[i * c + k];
                        (g != 0.0).then_some((k, g as f64))
                    })
                    .collect()
            })
            .collect();
        Gdn {
            beta: beta.data.iter().map(|&b| b as f64).collect(),
            gamma,
            inverse,
        }
    }

    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        let c = input.channels;
        assert_eq!(c, self.beta.len());
        let plane = input.plane();
        let mut data = vec![0f32; input.data.len()];
        let mut squares = vec![0f64; c];
        for site in 0..plane {
            for (k, sq) in squares.iter_mut().enumerate() {
                let v = input.data[k * plane + site] as f64;
                *sq = v * v;
            }
            for ch in 0..c {
                let mut norm = self.beta[ch];
                for &(k, g) in &self.gamma[ch] {
                    norm += g * squares[k];
                }
                let root = norm.sqrt();
                let x = input.data[ch * plane + site] as f64;
                let y = if self.inverse { x * root } else { x / root };
                data[ch * plane + site] = y as f32;
            }
        }
        FeatureMap::new(c, input.spatial, data)
    }
}

/// Fully connected layer, weight `[out, in]`.
#[derive(Clone, Debug)]
pub(crate) struct Dense {
    inputs: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: &Tensor, bias: &Tensor) -> Self {
        Dense {
            inputs: weight.shape[1],
            weight: weight.data.iter().map(|&w| w as f64).collect(),
            bias: bias.data.iter().map(|&b| b as f64).collect(),
        }
    }

    pub fn forward(&self, input: &[f32]) -> Vec<f32> {
        assert_eq!(input.len(), self.inputs);
        self.bias
            .iter()
            .enumerate()
            .map(|(o, &b)| {
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                let mut acc = b;
                for (w, &x) in row.iter().zip(input) {
                    acc += w * x as f64;
                }
                acc as f32
            })
            .collect()
    }
}
