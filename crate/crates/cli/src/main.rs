use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockdialect::{build_default_formatbook, load_formatbook, AccumulatorMode, Axis, Formatbook};
use blockdialect_cli::commands::{self, Method};
use blockdialect_cli::csv_io;
use blockdialect_cli::rng::{random_matrix, Dist};
use blockdialect_cli::tensor_file::{Dtype, TensorFile};
use blockdialect_cli::{CliError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "blockdialect", version, about = "Block-wise mixed-format 4-bit quantization tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Elements per block.
    #[arg(long, default_value_t = 32)]
    block_size: usize,
    /// Formatbook file; the built-in default when omitted.
    #[arg(long)]
    formatbook: Option<PathBuf>,
    /// Direction blocks run in.
    #[arg(long, value_enum, default_value_t = AxisArg::Cols)]
    axis: AxisArg,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Cols,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dialect,
    DialectMse,
    Mx,
    Nv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Fp16,
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Gaussian,
    StudentT,
    Uniform,
}

#[derive(Subcommand)]
enum Command {
    /// Histograms of scaled magnitudes and block maxima.
    Profile {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Quantize a tensor file into a BDQ1 file.
    Quantize {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Dialect)]
        format: FormatArg,
        #[command(flatten)]
        common: Common,
    },
    /// Decode a BDQ1 file back to a tensor file.
    Dequantize {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Per-format error table.
    Compare {
        input: PathBuf,
        /// Formats to compare; all of them when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        format: Vec<FormatArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Dialect selection frequencies for two-stage and exhaustive selection.
    SelectReport {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Quantized GEMM against the full-precision and dequantized products.
    GemmCheck {
        a: PathBuf,
        w: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Dialect)]
        format: FormatArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Write a seeded random tensor.
    Generate {
        rows: usize,
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
        dist: DistArg,
        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a CSV of floats to a tensor file.
    ImportCsv {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a tensor file to CSV.
    ExportCsv {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Cols => Axis::Cols,
            AxisArg::Rows => Axis::Rows,
        }
    }
}

impl From<FormatArg> for Method {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dialect => Method::Dialect,
            FormatArg::DialectMse => Method::DialectMse,
            FormatArg::Mx => Method::Mx,
            FormatArg::Nv => Method::Nv,
        }
    }
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        }
    }
}

fn formatbook(path: Option<&Path>) -> Result<Formatbook> {
    match path {
        None => Ok(build_default_formatbook()),
        Some(p) => Ok(load_formatbook(&fs::read_to_string(p)?)?),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn load_matrix(p: &Path) -> Result<blockdialect::Matrix<f64>> {
    Ok(TensorFile::load(p)?.to_matrix())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Profile { input, common } => {
            let r = commands::cmd_profile(&load_matrix(&input)?, common.block_size, common.axis.into())?;
            emit(common.out.as_deref(), r.to_csv().as_bytes())
        }
        Command::Quantize { input, format, common } => {
            let fb = formatbook(common.formatbook.as_deref())?;
            let m = load_matrix(&input)?;
            let bytes = commands::cmd_quantize(&m, common.block_size, common.axis.into(), format.into(), &fb)?;
            let out = common
                .out
                .ok_or_else(|| CliError::Usage("quantize needs --out".into()))?;
            emit(Some(&out), &bytes)
        }
        Command::Dequantize { input, dtype, common } => {
            let fb = formatbook(common.formatbook.as_deref())?;
            let m = commands::cmd_dequantize(&fs::read(&input)?, &fb)?;
            let out = common
                .out
                .ok_or_else(|| CliError::Usage("dequantize needs --out".into()))?;
            TensorFile::from_matrix(&m, dtype.into()).save(&out)
        }
        Command::Compare { input, format, common } => {
            let fb = formatbook(common.formatbook.as_deref())?;
            let methods: Vec<Method> = if format.is_empty() {
                Method::ALL.to_vec()
            } else {
                format.into_iter().map(Method::from).collect()
            };
            let r = commands::cmd_compare(
                &load_matrix(&input)?,
                common.block_size,
                common.axis.into(),
                &methods,
                &fb,
            )?;
            emit(common.out.as_deref(), r.to_csv().as_bytes())
        }
        Command::SelectReport { input, common } => {
            let fb = formatbook(common.formatbook.as_deref())?;
            let r = commands::cmd_select_report(&load_matrix(&input)?, common.block_size, common.axis.into(), &fb)?;
            emit(common.out.as_deref(), r.to_csv().as_bytes())
        }
        Command::GemmCheck { a, w, format, mode, common } => {
            let fb = formatbook(common.formatbook.as_deref())?;
            let method = Method::from(format);
            if method == Method::DialectMse {
                return Err(CliError::Usage("gemm-check takes dialect, mx or nv".into()));
            }
            let mode = match mode {
                ModeArg::Exact => AccumulatorMode::Exact,
                ModeArg::Fp16 => AccumulatorMode::Fp16,
            };
            let r = commands::cmd_gemm_check(
                &load_matrix(&a)?,
                &load_matrix(&w)?,
                common.block_size,
                method.block_format(),
                mode,
                &fb,
            )?;
            emit(common.out.as_deref(), r.to_csv().as_bytes())
        }
        Command::Generate { rows, cols, seed, dist, dtype, out } => {
            let dist = match dist {
                DistArg::Gaussian => Dist::Gaussian,
                DistArg::StudentT => Dist::StudentT(3.0),
                DistArg::Uniform => Dist::Uniform,
            };
            TensorFile::from_matrix(&random_matrix(seed, rows, cols, dist), dtype.into()).save(&out)
        }
        Command::ImportCsv { input, dtype, out } => {
            let m = csv_io::read_matrix(fs::File::open(&input)?)?;
            TensorFile::from_matrix(&m, dtype.into()).save(&out)
        }
        Command::ExportCsv { input, out } => {
            let mut buf = Vec::new();
            csv_io::write_matrix(&load_matrix(&input)?, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
