//! `aesz`: compress, decompress, verify, evaluate, and inspect fields.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aesz::eval::{max_abs_error, psnr, sweep, to_csv, SweepOptions};
use aesz::field::split_blocks;
use aesz::model::fit_linear_autoencoder;
use aesz::pipeline::CompressOptions;
use aesz::synth::{self, SyntheticKind};
use aesz::{
    compress, decompress, Autoencoder, BlockAutoencoder, Container, ErrorBound, Field, Precision,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const WEIGHT_DIR_ENV: &str = "AESZ_WEIGHT_DIR";

#[derive(Parser)]
#[command(
    name = "aesz",
    version,
    about = "Error-bounded lossy compressor for floating-point fields"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a raw field into a container.
    Compress(CompressArgs),
    /// Decompress a container into a raw field.
    Decompress(DecompressArgs),
    /// Decompress and check the error bound against the original.
    Verify(VerifyArgs),
    /// Rate-distortion sweep, written as CSV.
    Eval(EvalArgs),
    /// Print container header fields as key=value lines.
    Inspect(InspectArgs),
    /// Fit a linear autoencoder to a raw field and write a weight file.
    Fit(FitArgs),
    /// Write a synthetic test field.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::Single,
            PrecisionArg::F64 => Precision::Double,
        }
    }
}

#[derive(Args)]
struct RawInput {
    /// Raw little-endian input file.
    #[arg(short, long)]
    input: PathBuf,
    /// Extents, slowest axis first, e.g. 512,512,512.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, value_enum, default_value = "f32")]
    precision: PrecisionArg,
}

impl RawInput {
    fn read(&self) -> Result<Field, CliError> {
        Ok(Field::read_raw(
            &self.input,
            self.dims.clone(),
            self.precision.into(),
        )?)
    }
}

#[derive(Args)]
struct WeightArg {
    /// Weight file; relative names not found as given are looked up in
    /// the directory named by AESZ_WEIGHT_DIR.
    #[arg(short, long)]
    weights: Option<PathBuf>,
}

impl WeightArg {
    fn load(&self) -> Result<Option<Autoencoder>, CliError> {
        let Some(path) = &self.weights else {
            return Ok(None);
        };
        Ok(Some(Autoencoder::load(resolve_weights(path))?))
    }
}

fn resolve_weights(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(WEIGHT_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

#[derive(Args)]
#[group(id = "bound", required = true, multiple = false)]
struct BoundArgs {
    /// Relative bound: fraction of the field's value range.
    #[arg(long, group = "bound")]
    eps: Option<f64>,
    /// Absolute bound in data units.
    #[arg(long = "abs", group = "bound")]
    absolute: Option<f64>,
}

impl BoundArgs {
    fn bound(&self) -> ErrorBound {
        match (self.eps, self.absolute) {
            (Some(e), _) => ErrorBound::Relative(e),
            (_, Some(a)) => ErrorBound::Absolute(a),
            _ => unreachable!("clap requires one bound"),
        }
    }
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    input: RawInput,
    #[command(flatten)]
    bound: BoundArgs,
    #[command(flatten)]
    weights: WeightArg,
    /// Block edge; must match the model when one is given.
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct DecompressArgs {
    /// Container file.
    #[arg(short, long)]
    container: PathBuf,
    #[command(flatten)]
    weights: WeightArg,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(short, long)]
    container: PathBuf,
    #[command(flatten)]
    weights: WeightArg,
    /// Raw original; dims and precision come from the container.
    #[arg(long)]
    original: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: RawInput,
    #[command(flatten)]
    weights: WeightArg,
    /// Relative bounds to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2e-2,1e-2,1e-3,1e-4")]
    eps: Vec<f64>,
    #[arg(long)]
    block_size: Option<usize>,
    /// Fill the timing columns (otherwise "nan", keeping output byte-stable).
    #[arg(long)]
    timing: bool,
    /// CSV destination (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(short, long)]
    container: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: RawInput,
    /// Block edge (a power of two).
    #[arg(long)]
    block_size: usize,
    #[arg(long, default_value_t = 16)]
    latent: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    GaussianMixture,
    Turbulence,
    Constant,
    Ramp,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Aesz(#[from] aesz::Error),
    #[error("{0}")]
    Usage(String),
    #[error("max_err {max_err:e} > e {bound:e}: FAIL")]
    BoundViolation { max_err: f64, bound: f64 },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Aesz(_) => 1,
            CliError::Usage(_) => 2,
            CliError::BoundViolation { .. } => 3,
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(aesz::Error::from(e).into()),
        _ => Ok(()),
    }
}

fn model_ref(m: &Option<Autoencoder>) -> Option<&dyn BlockAutoencoder> {
    m.as_ref().map(|m| m as &dyn BlockAutoencoder)
}

fn read_container(path: &Path) -> Result<Container, CliError> {
    let bytes = std::fs::read(path).map_err(aesz::Error::from)?;
    Ok(Container::from_bytes(&bytes)?)
}

fn run_compress(a: &CompressArgs) -> Result<(), CliError> {
    let field = a.input.read()?;
    let model = a.weights.load()?;
    let opts = CompressOptions {
        block_edge: a.block_size,
        ..CompressOptions::default()
    };
    let t = Instant::now();
    let c = compress(&field, a.bound.bound(), model_ref(&model), &opts)?;
    let bytes = c.container.to_bytes();
    let seconds = t.elapsed().as_secs_f64();
    std::fs::write(&a.output, &bytes).map_err(aesz::Error::from)?;
    let cr = (field.len() * field.precision().byte_width()) as f64 / bytes.len() as f64;
    eprintln!(
        "cr={cr:.3} psnr={:.3} bytes={} ae_blocks={}/{} seconds={seconds:.3}",
        psnr(&field, &c.reconstruction).unwrap_or(f64::NAN),
        bytes.len(),
        c.container.header.ae_blocks,
        c.container.header.block_count,
    );
    Ok(())
}

fn run_decompress(a: &DecompressArgs) -> Result<(), CliError> {
    let container = read_container(&a.container)?;
    let model = a.weights.load()?;
    let field = decompress(&container, model_ref(&model))?;
    field.write_raw(&a.output)?;
    Ok(())
}

fn run_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let container = read_container(&a.container)?;
    let model = a.weights.load()?;
    let h = &container.header;
    let original = Field::read_raw(&a.original, h.dims.clone(), h.precision)?;
    let out = decompress(&container, model_ref(&model))?;
    let max_err = max_abs_error(&original, &out)?;
    let bound = h.error_bound;
    if max_err <= bound {
        emit(&format!(
            "max_err={max_err:e} e={bound:e} max_err <= e: PASS\n"
        ))
    } else {
        Err(CliError::BoundViolation { max_err, bound })
    }
}

fn run_eval(a: &EvalArgs) -> Result<(), CliError> {
    if a.eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(CliError::Usage("bounds must be positive and finite".into()));
    }
    let field = a.input.read()?;
    let model = a.weights.load()?;
    let opts = SweepOptions {
        compress: CompressOptions {
            block_edge: a.block_size,
            ..CompressOptions::default()
        },
        timing: a.timing,
    };
    let csv = to_csv(&sweep(&field, &a.eps, model_ref(&model), &opts)?);
    match &a.output {
        Some(path) => std::fs::write(path, csv).map_err(aesz::Error::from)?,
        None => emit(&csv)?,
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn run_inspect(a: &InspectArgs) -> Result<(), CliError> {
    let c = read_container(&a.container)?;
    let h = &c.header;
    let dims: Vec<String> = h.dims.iter().map(|d| d.to_string()).collect();
    let lines = [
        ("dims", dims.join(",")),
        ("precision", h.precision.bits().to_string()),
        ("block_edge", h.block_edge.to_string()),
        ("backend", h.backend.id().to_string()),
        ("alphabet", h.alphabet.to_string()),
        ("latent_size", h.latent_size.to_string()),
        ("epsilon", h.epsilon.to_string()),
        ("error_bound", h.error_bound.to_string()),
        ("latent_error_bound", h.latent_error_bound.to_string()),
        ("vmin", h.vmin.to_string()),
        ("vmax", h.vmax.to_string()),
        ("blocks", h.block_count.to_string()),
        ("ae_blocks", h.ae_blocks.to_string()),
        ("mean_blocks", h.mean_blocks.to_string()),
        ("unpredictable", h.unpredictable.to_string()),
        ("latent_unpredictable", h.latent_unpredictable.to_string()),
        (
            "model_digest",
            h.model_digest.map_or("none".into(), |d| hex(&d)),
        ),
        ("flags_bytes", c.flags.len().to_string()),
        ("latents_bytes", c.latents.len().to_string()),
        ("means_bytes", c.means.len().to_string()),
        ("codes_bytes", c.codes.len().to_string()),
        ("unpredictable_bytes", c.unpredictable.len().to_string()),
        ("total_bytes", c.byte_len().to_string()),
    ];
    let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    emit(&text)
}

fn run_fit(a: &FitArgs) -> Result<(), CliError> {
    let field = a.input.read()?;
    if field.ndim() < 2 {
        return Err(CliError::Usage("fitting needs a 2D or 3D field".into()));
    }
    let (lo, hi) = (field.vmin(), field.vmax());
    if !(hi > lo) {
        return Err(aesz::Error::DegenerateRange(lo).into());
    }
    let blocks: Vec<Vec<f32>> = split_blocks(&field, a.block_size)?
        .into_iter()
        .filter(|b| b.complete)
        .map(|b| {
            b.data
                .iter()
                .map(|&x| aesz::field::normalize_value(x, lo, hi) as f32)
                .collect()
        })
        .collect();
    let ae = fit_linear_autoencoder(field.ndim(), a.block_size, a.latent, &blocks)?;
    ae.save(&a.output)?;
    eprintln!(
        "fitted on {} blocks, digest {}",
        blocks.len(),
        hex(&ae.digest())
    );
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<(), CliError> {
    let kind = match a.kind {
        KindArg::GaussianMixture => SyntheticKind::GaussianMixture,
        KindArg::Turbulence => SyntheticKind::Turbulence,
        KindArg::Constant => SyntheticKind::Constant,
        KindArg::Ramp => SyntheticKind::Ramp,
    };
    synth::generate(kind, &a.dims, a.seed)?.write_raw(&a.output)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Compress(a) => run_compress(a),
        Command::Decompress(a) => run_decompress(a),
        Command::Verify(a) => run_verify(a),
        Command::Eval(a) => run_eval(a),
        Command::Inspect(a) => run_inspect(a),
        Command::Fit(a) => run_fit(a),
        Command::Synth(a) => run_synth(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aesz: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
