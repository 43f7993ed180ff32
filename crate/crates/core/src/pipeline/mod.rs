//! Block-adaptive compression and its mirror decompression.
//!
//! For every complete block the autoencoder prediction (built from the latent
//! as the decompressor will decode it) competes with the Lorenzo preview on
//! l1 error; incomplete blocks and degenerate fields use Lorenzo only. Block
//! work runs in parallel; sections are assembled in block order, so the
//! output does not depend on the number of worker threads.

mod container;

pub use container::{
    pack_flags, unpack_flags, Container, Header, PredictorFlag, CONTAINER_MAGIC, CONTAINER_VERSION,
    HEADER_LEN,
};

use rayon::prelude::*;

use crate::entropy::{huffman_decode, huffman_encode, Backend};
use crate::error::{Error, Result};
use crate::field::{
    denormalize_value, normalize_value, BlockGrid, BlockRegion, ErrorBound, ErrorBoundSpec, Field,
    Precision,
};
use crate::latent::{
    compress_latents, decompress_latents, latent_error_bound, latent_quantizer, latent_range,
    quantize_latent, LatentBuffer,
};
use crate::lorenzo::{
    lorenzo_compress_block, lorenzo_decompress_block, lorenzo_preview, LorenzoVariant,
};
use crate::model::BlockAutoencoder;
use crate::quantizer::{Quantized, QuantizerConfig, DEFAULT_ALPHABET, SENTINEL};

/// Outcome of comparing the two predictors on one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predictor {
    Autoencoder,
    Lorenzo,
}

/// Lorenzo wins ties.
pub fn select_predictor(loss_ae: f64, loss_lorenzo: f64) -> Predictor {
    if loss_lorenzo <= loss_ae {
        Predictor::Lorenzo
    } else {
        Predictor::Autoencoder
    }
}

/// Block edge used when no model fixes it.
pub fn default_block_edge(ndim: usize) -> usize {
    match ndim {
        1 => 256,
        2 => 16,
        _ => 8,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressOptions {
    /// Block edge; must equal the model's when a model is given.
    pub block_edge: Option<usize>,
    pub alphabet: u32,
    pub backend: Backend,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            block_edge: None,
            alphabet: DEFAULT_ALPHABET,
            backend: Backend::Zstd,
        }
    }
}

/// Per-block selection record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockReport {
    pub flag: PredictorFlag,
    pub lorenzo_l1: f64,
    /// `None` when the autoencoder was not a candidate.
    pub ae_l1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Compressed {
    pub container: Container,
    /// The reconstruction the decompressor will produce.
    pub reconstruction: Field,
    pub blocks: Vec<BlockReport>,
}

impl Compressed {
    pub fn ae_fraction(&self) -> f64 {
        let h = &self.container.header;
        h.ae_blocks as f64 / h.block_count as f64
    }
}

struct EncodedBlock {
    report: BlockReport,
    codes: Vec<u32>,
    unpredictable: Vec<f64>,
    reconstructed: Vec<f64>,
    mean: Option<f64>,
}

fn l1(data: &[f64], pred: &[f64]) -> f64 {
    data.iter().zip(pred).map(|(d, p)| (d - p).abs()).sum()
}

/// Autoencoder prediction of a block from its decoded latent.
fn ae_prediction(
    model: &dyn BlockAutoencoder,
    latent: &[f32],
    vmin: f64,
    vmax: f64,
    len: usize,
) -> Result<Vec<f64>> {
    let out = model.decode(latent)?;
    if out.len() != len {
        return Err(Error::CodeCountMismatch {
            expected: len,
            actual: out.len(),
        });
    }
    Ok(out
        .iter()
        .map(|&y| denormalize_value(y as f64, vmin, vmax))
        .collect())
}

fn quantize_against(
    data: &[f64],
    pred: &[f64],
    q: &QuantizerConfig,
) -> (Vec<u32>, Vec<f64>, Vec<f64>) {
    let mut codes = Vec::with_capacity(data.len());
    let mut unpredictable = Vec::new();
    let mut reconstructed = Vec::with_capacity(data.len());
    for (&d, &p) in data.iter().zip(pred) {
        match q.quantize(d, p) {
            Quantized::Code {
                code,
                reconstructed: r,
            } => {
                codes.push(code);
                reconstructed.push(r);
            }
            Quantized::Unpredictable => {
                codes.push(SENTINEL);
                unpredictable.push(d);
                reconstructed.push(d);
            }
        }
    }
    (codes, unpredictable, reconstructed)
}

struct AeContext<'a> {
    model: &'a dyn BlockAutoencoder,
    latent_q: QuantizerConfig,
    vmin: f64,
    vmax: f64,
}

fn encode_block(
    data: &[f64],
    region: &BlockRegion,
    latent: Option<&[f32]>,
    ae: Option<&AeContext>,
    q: &QuantizerConfig,
) -> Result<EncodedBlock> {
    let preview = lorenzo_preview(data, &region.extent);
    let mut ae_l1 = None;
    if let (Some(z), Some(ctx)) = (latent, ae) {
        let zd: Vec<f32> = z
            .iter()
            .map(|&v| quantize_latent(v, &ctx.latent_q).1)
            .collect();
        let pred = ae_prediction(ctx.model, &zd, ctx.vmin, ctx.vmax, data.len())?;
        let loss = l1(data, &pred);
        ae_l1 = Some(loss);
        if select_predictor(loss, preview.l1) == Predictor::Autoencoder {
            let (codes, unpredictable, reconstructed) = quantize_against(data, &pred, q);
            return Ok(EncodedBlock {
                report: BlockReport {
                    flag: PredictorFlag::Autoencoder,
                    lorenzo_l1: preview.l1,
                    ae_l1,
                },
                codes,
                unpredictable,
                reconstructed,
                mean: None,
            });
        }
    }
    let (flag, mean) = match preview.variant {
        LorenzoVariant::Classic => (PredictorFlag::LorenzoClassic, None),
        LorenzoVariant::Mean(m) => (PredictorFlag::LorenzoMean, Some(m)),
    };
    let out = lorenzo_compress_block(data, &region.extent, preview.variant, q);
    Ok(EncodedBlock {
        report: BlockReport {
            flag,
            lorenzo_l1: preview.l1,
            ae_l1,
        },
        codes: out.codes,
        unpredictable: out.unpredictable,
        reconstructed: out.reconstructed,
        mean,
    })
}

fn resolve_edge(
    field: &Field,
    model: Option<&dyn BlockAutoencoder>,
    requested: Option<usize>,
) -> Result<usize> {
    match model {
        Some(m) => {
            if m.dimensionality() != field.ndim() {
                return Err(Error::DimensionalityMismatch {
                    field: field.ndim(),
                    model: m.dimensionality(),
                });
            }
            if let Some(s) = requested.filter(|&s| s != m.block_edge()) {
                return Err(Error::BlockSizeMismatch {
                    requested: s,
                    model: m.block_edge(),
                });
            }
            Ok(m.block_edge())
        }
        None => Ok(requested.unwrap_or_else(|| default_block_edge(field.ndim()))),
    }
}

fn values_to_bytes(values: &[f64], precision: Precision) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * precision.byte_width());
    for &v in values {
        match precision {
            Precision::Single => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Precision::Double => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

fn bytes_to_values(bytes: &[u8], precision: Precision) -> Vec<f64> {
    match precision {
        Precision::Single => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Precision::Double => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    }
}

/// Compresses `field` under `bound`, using `model` as the second predictor
/// when given.
pub fn compress(
    field: &Field,
    bound: ErrorBound,
    model: Option<&dyn BlockAutoencoder>,
    opts: &CompressOptions,
) -> Result<Compressed> {
    let spec = ErrorBoundSpec::resolve(bound, field)?;
    let edge = resolve_edge(field, model, opts.block_edge)?;
    let grid = BlockGrid::new(field.dims(), edge)?;
    let q = QuantizerConfig::new(spec.absolute, opts.alphabet, field.precision())?;
    let (vmin, vmax) = (field.vmin(), field.vmax());
    // Normalization is undefined on a constant field.
    let ae_model = model.filter(|_| vmax > vmin);

    let regions: Vec<BlockRegion> = grid.regions().collect();
    let blocks: Vec<Vec<f64>> = regions
        .par_iter()
        .map(|r| grid.gather(r, field.values()))
        .collect();

    let latents: Vec<Option<Vec<f32>>> = match ae_model {
        Some(m) => regions
            .par_iter()
            .zip(&blocks)
            .map(|(r, b)| {
                if !r.is_complete(edge) {
                    return Ok(None);
                }
                let input: Vec<f32> = b
                    .iter()
                    .map(|&x| normalize_value(x, vmin, vmax) as f32)
                    .collect();
                let z = m.encode(&input)?;
                if z.len() != m.latent_size() || z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::LatentLength {
                        expected: m.latent_size(),
                        actual: z.len(),
                    });
                }
                Ok(Some(z))
            })
            .collect::<Result<_>>()?,
        None => vec![None; regions.len()],
    };
    // The latent bound is anchored on every candidate latent, so it is known
    // before any block is assigned to a predictor.
    let (zmin, zmax) = latent_range(latents.iter().flatten().map(|z| z.as_slice()));
    let e_latent = latent_error_bound(spec.epsilon, zmin, zmax);
    let latent_q = latent_quantizer(e_latent, opts.alphabet)?;
    let ctx = ae_model.map(|model| AeContext {
        model,
        latent_q,
        vmin,
        vmax,
    });

    let encoded: Vec<EncodedBlock> = regions
        .par_iter()
        .zip(&blocks)
        .zip(&latents)
        .map(|((r, b), z)| encode_block(b, r, z.as_deref(), ctx.as_ref(), &q))
        .collect::<Result<_>>()?;

    let mut flags = Vec::with_capacity(encoded.len());
    let mut ae_vectors = Vec::new();
    let mut means = Vec::new();
    let mut codes = Vec::with_capacity(field.len());
    let mut unpredictable = Vec::new();
    let mut values = vec![0.0; field.len()];
    for ((enc, region), z) in encoded.iter().zip(&regions).zip(&latents) {
        flags.push(enc.report.flag);
        if enc.report.flag == PredictorFlag::Autoencoder {
            ae_vectors.push(z.clone().expect("autoencoder block has a latent"));
        }
        means.extend(enc.mean);
        codes.extend_from_slice(&enc.codes);
        unpredictable.extend_from_slice(&enc.unpredictable);
        grid.scatter(region, &enc.reconstructed, &mut values);
    }

    let latent_unpredictable = ae_vectors
        .iter()
        .flatten()
        .filter(|&&v| quantize_latent(v, &latent_q).0 == SENTINEL)
        .count() as u64;
    let ae_blocks = ae_vectors.len() as u64;
    let latent_size = model.map_or(0, |m| m.latent_size());
    let buffer = LatentBuffer {
        latent_size,
        vectors: ae_vectors,
        error_bound: e_latent,
        zmin,
        zmax,
    };
    let mean_bytes: Vec<u8> = means.iter().flat_map(|m| m.to_le_bytes()).collect();
    let header = Header {
        dims: field.dims().to_vec(),
        block_edge: edge,
        precision: field.precision(),
        backend: opts.backend,
        alphabet: opts.alphabet,
        latent_size,
        epsilon: spec.epsilon,
        error_bound: spec.absolute,
        latent_error_bound: e_latent,
        vmin,
        vmax,
        block_count: regions.len() as u64,
        ae_blocks,
        mean_blocks: means.len() as u64,
        unpredictable: unpredictable.len() as u64,
        latent_unpredictable,
        model_digest: model.map(|m| m.digest()),
    };
    let container = Container {
        header,
        flags: pack_flags(&flags),
        latents: compress_latents(&buffer, opts.alphabet)?,
        means: if mean_bytes.is_empty() {
            Vec::new()
        } else {
            opts.backend.encode(&mean_bytes)
        },
        codes: opts.backend.encode(&huffman_encode(&codes, opts.alphabet)?),
        unpredictable: values_to_bytes(&unpredictable, field.precision()),
    };
    Ok(Compressed {
        container,
        reconstruction: Field::new(field.dims().to_vec(), values, field.precision())?,
        blocks: encoded.iter().map(|e| e.report).collect(),
    })
}

/// Rebuilds the field from a container. `model` must be the one the
/// container was written with whenever it holds autoencoder blocks.
pub fn decompress(container: &Container, model: Option<&dyn BlockAutoencoder>) -> Result<Field> {
    let h = &container.header;
    let bad = |m: String| Error::CorruptContainer(m);
    let grid = BlockGrid::new(&h.dims, h.block_edge)?;
    if grid.len() as u64 != h.block_count {
        return Err(bad(format!(
            "{} blocks recorded, geometry gives {}",
            h.block_count,
            grid.len()
        )));
    }
    let q = QuantizerConfig::new(h.error_bound, h.alphabet, h.precision)
        .map_err(|e| bad(e.to_string()))?;
    let flags = container.predictor_flags()?;
    let regions: Vec<BlockRegion> = grid.regions().collect();
    let count = |f: PredictorFlag| flags.iter().filter(|&&x| x == f).count() as u64;
    if count(PredictorFlag::Autoencoder) != h.ae_blocks {
        return Err(bad("autoencoder flag count differs from header".into()));
    }
    if count(PredictorFlag::LorenzoMean) != h.mean_blocks {
        return Err(bad("mean flag count differs from header".into()));
    }
    if flags
        .iter()
        .zip(&regions)
        .any(|(&f, r)| f == PredictorFlag::Autoencoder && !r.is_complete(h.block_edge))
    {
        return Err(bad("autoencoder flag on an incomplete block".into()));
    }

    if let (Some(m), Some(digest)) = (model, h.model_digest) {
        if m.digest() != digest {
            return Err(Error::ModelMismatch);
        }
    }
    let model = if h.ae_blocks > 0 {
        let m = model.ok_or(Error::ModelRequired(h.ae_blocks))?;
        if m.dimensionality() != h.dims.len()
            || m.block_edge() != h.block_edge
            || m.latent_size() != h.latent_size
        {
            return Err(Error::ModelMismatch);
        }
        Some(m)
    } else {
        None
    };

    let latents = decompress_latents(
        &container.latents,
        h.ae_blocks as usize,
        h.latent_size,
        h.alphabet,
    )?;
    if latents.error_bound.to_bits() != h.latent_error_bound.to_bits() {
        return Err(bad("latent bound differs from header".into()));
    }

    let means: Vec<f64> = if h.mean_blocks == 0 {
        if !container.means.is_empty() {
            return Err(bad("means present without mean blocks".into()));
        }
        Vec::new()
    } else {
        let raw = h.backend.decode(&container.means)?;
        if raw.len() as u64 != 8 * h.mean_blocks {
            return Err(bad(format!(
                "{} mean bytes for {} blocks",
                raw.len(),
                h.mean_blocks
            )));
        }
        bytes_to_values(&raw, Precision::Double)
    };

    let codes = huffman_decode(&h.backend.decode(&container.codes)?)?;
    let total: usize = h.dims.iter().product();
    if codes.len() != total {
        return Err(Error::CodeCountMismatch {
            expected: total,
            actual: codes.len(),
        });
    }
    let width = h.precision.byte_width();
    if container.unpredictable.len() as u64 != h.unpredictable * width as u64 {
        return Err(bad("unpredictable section size differs from header".into()));
    }
    let sentinels = codes.iter().filter(|&&c| c == SENTINEL).count() as u64;
    if sentinels != h.unpredictable {
        return Err(bad(format!(
            "{sentinels} sentinel codes for {} unpredictable values",
            h.unpredictable
        )));
    }
    let verbatim = bytes_to_values(&container.unpredictable, h.precision);

    // Per-block slices into the shared streams.
    struct Job<'a> {
        flag: PredictorFlag,
        codes: &'a [u32],
        verbatim: &'a [f64],
        latent: Option<&'a [f32]>,
        mean: Option<f64>,
    }
    let mut jobs = Vec::with_capacity(regions.len());
    let (mut c_at, mut u_at, mut z_at, mut m_at) = (0, 0, 0, 0);
    for (&flag, region) in flags.iter().zip(&regions) {
        let n = region.len();
        let block_codes = &codes[c_at..c_at + n];
        let k = block_codes.iter().filter(|&&c| c == SENTINEL).count();
        let mut job = Job {
            flag,
            codes: block_codes,
            verbatim: &verbatim[u_at..u_at + k],
            latent: None,
            mean: None,
        };
        match flag {
            PredictorFlag::Autoencoder => {
                job.latent = Some(&latents.vectors[z_at]);
                z_at += 1;
            }
            PredictorFlag::LorenzoMean => {
                job.mean = Some(means[m_at]);
                m_at += 1;
            }
            PredictorFlag::LorenzoClassic => {}
        }
        jobs.push(job);
        c_at += n;
        u_at += k;
    }

    let (vmin, vmax) = (h.vmin, h.vmax);
    let decoded: Vec<Vec<f64>> = jobs
        .par_iter()
        .zip(&regions)
        .map(|(job, region)| -> Result<Vec<f64>> {
            match job.flag {
                PredictorFlag::Autoencoder => {
                    let m = model.expect("checked above");
                    let pred = ae_prediction(m, job.latent.unwrap(), vmin, vmax, region.len())?;
                    let mut verbatim = job.verbatim.iter();
                    job.codes
                        .iter()
                        .zip(&pred)
                        .map(|(&c, &p)| {
                            if c == SENTINEL {
                                Ok(*verbatim.next().unwrap())
                            } else {
                                q.dequantize(c, p)
                            }
                        })
                        .collect()
                }
                flag => {
                    let variant = match flag {
                        PredictorFlag::LorenzoMean => LorenzoVariant::Mean(job.mean.unwrap()),
                        _ => LorenzoVariant::Classic,
                    };
                    let mut verbatim = job.verbatim.iter().copied();
                    lorenzo_decompress_block(job.codes, &mut verbatim, variant, &q, &region.extent)
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; total];
    for (block, region) in decoded.iter().zip(&regions) {
        grid.scatter(region, block, &mut values);
    }
    Field::new(h.dims.clone(), values, h.precision)
}
