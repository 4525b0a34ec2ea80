//! Subcommand bodies. Each returns a report with a `to_csv` rendering so the
//! binary and the tests share one code path.

use std::fmt::Write as _;

use blockdialect::{
    dequantize_block, effective_bitwidth, extract_blocks, gemm, gemm_reference, quantize_block,
    quantize_block_mse, quantize_block_mx, quantize_block_nv, quantize_matrix,
    quantize_matrix_with, relative_frobenius_error, round_to_half, select_dialect_mse,
    select_dialect_two_stage, AccumulatorMode, Axis, BlockFormat, Formatbook, Matrix,
    PreprocessedBlock, QBlock, QuantizedMatrix, SelectionReport, NUM_DIALECTS,
};

use crate::error::{CliError, Result};

/// Quantization method as named on the command line. `DialectMse` writes
/// ordinary dialect blocks but picks each dialect by exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dialect,
    DialectMse,
    Mx,
    Nv,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dialect, Method::DialectMse, Method::Mx, Method::Nv];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dialect => "dialect",
            Method::DialectMse => "dialect-mse",
            Method::Mx => "mx",
            Method::Nv => "nv",
        }
    }

    pub fn block_format(self) -> BlockFormat {
        match self {
            Method::Dialect | Method::DialectMse => BlockFormat::Dialect,
            Method::Mx => BlockFormat::Mx,
            Method::Nv => BlockFormat::Nv,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown format {s:?}")))
    }
}

pub fn quantize_with_method(
    m: &Matrix<f64>,
    block_size: usize,
    axis: Axis,
    method: Method,
    fb: &Formatbook,
) -> Result<QuantizedMatrix> {
    let qm = match method {
        Method::DialectMse => quantize_matrix_with(m, block_size, axis, BlockFormat::Dialect, |b| {
            Ok(QBlock::Dialect(quantize_block_mse(b, fb)?))
        })?,
        Method::Dialect => quantize_matrix(m, block_size, axis, BlockFormat::Dialect, fb)?,
        Method::Mx => quantize_matrix_with(m, block_size, axis, BlockFormat::Mx, |b| {
            Ok(QBlock::Mx(quantize_block_mx(b)?))
        })?,
        Method::Nv => quantize_matrix_with(m, block_size, axis, BlockFormat::Nv, |b| {
            Ok(QBlock::Nv(quantize_block_nv(b)?))
        })?,
    };
    Ok(qm)
}

fn blocks_of(m: &Matrix<f64>, block_size: usize, axis: Axis) -> Result<Vec<Vec<f64>>> {
    Ok(extract_blocks(m, block_size, axis)?)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.9e}")
}

// ---------------------------------------------------------------- profile

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileReport {
    /// Scaled magnitudes `|x| / 2^SE` in bins of width 0.25 over `[0, 8)`.
    pub magnitude_bins: [u64; 32],
    /// Block maxima rounded to the 0.5 grid, bins for 4.0 through 7.5.
    pub max_bins: [u64; 8],
    pub zero_blocks: u64,
}

impl ProfileReport {
    pub fn element_count(&self) -> u64 {
        self.magnitude_bins.iter().sum()
    }

    pub fn block_count(&self) -> u64 {
        self.max_bins.iter().sum::<u64>() + self.zero_blocks
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("histogram,bin_lo,count\n");
        for (i, c) in self.magnitude_bins.iter().enumerate() {
            let _ = writeln!(s, "magnitude,{:.2},{c}", i as f64 * 0.25);
        }
        for (i, c) in self.max_bins.iter().enumerate() {
            let _ = writeln!(s, "block_max,{:.1},{c}", 4.0 + i as f64 * 0.5);
        }
        let _ = writeln!(s, "zero_blocks,,{}", self.zero_blocks);
        s
    }
}

pub fn cmd_profile(m: &Matrix<f64>, block_size: usize, axis: Axis) -> Result<ProfileReport> {
    let mut r = ProfileReport {
        magnitude_bins: [0; 32],
        max_bins: [0; 8],
        zero_blocks: 0,
    };
    for b in blocks_of(m, block_size, axis)? {
        let pre = PreprocessedBlock::from_block(&b)?;
        if pre.se.is_zero_block() {
            r.zero_blocks += 1;
            r.magnitude_bins[0] += b.len() as u64;
            continue;
        }
        for q in &pre.mags {
            r.magnitude_bins[usize::from(q.get())] += 1;
        }
        let half = round_to_half(pre.max_code()).get();
        r.max_bins[usize::from(half) - 8] += 1;
    }
    Ok(r)
}

// ----------------------------------------------------------- quantize/deq

pub fn cmd_quantize(
    m: &Matrix<f64>,
    block_size: usize,
    axis: Axis,
    method: Method,
    fb: &Formatbook,
) -> Result<Vec<u8>> {
    let qm = quantize_with_method(m, block_size, axis, method, fb)?;
    Ok(crate::quantized_file::encode(&qm))
}

pub fn cmd_dequantize(bytes: &[u8], fb: &Formatbook) -> Result<Matrix<f64>> {
    Ok(crate::quantized_file::decode(bytes)?.dequantize(fb))
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    pub mean_block_mse: f64,
    pub worst_block_mse: f64,
    pub relative_error: f64,
    pub effective_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn row(&self, method: Method) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("format,mean_block_mse,worst_block_mse,relative_frobenius_error,effective_bits\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.method.name(),
                fmt_f(r.mean_block_mse),
                fmt_f(r.worst_block_mse),
                fmt_f(r.relative_error),
                r.effective_bits
            );
        }
        s
    }
}

pub fn cmd_compare(
    m: &Matrix<f64>,
    block_size: usize,
    axis: Axis,
    methods: &[Method],
    fb: &Formatbook,
) -> Result<CompareReport> {
    let originals = blocks_of(m, block_size, axis)?;
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let qm = quantize_with_method(m, block_size, axis, method, fb)?;
        let (mut sum, mut worst) = (0.0f64, 0.0f64);
        for (orig, qb) in originals.iter().zip(qm.blocks()) {
            let deq: Vec<f64> = qb.dequantize(fb);
            let mse = blockdialect::block_mse(orig, &deq)?;
            sum += mse;
            worst = worst.max(mse);
        }
        let n = originals.len().max(1) as f64;
        let deq = qm.dequantize::<f64>(fb);
        let relative_error = if m.as_slice().iter().all(|&x| x == 0.0) {
            0.0
        } else {
            relative_frobenius_error(m, &deq)?
        };
        rows.push(CompareRow {
            method,
            mean_block_mse: sum / n,
            worst_block_mse: worst,
            relative_error,
            effective_bits: effective_bitwidth(method.block_format(), block_size, NUM_DIALECTS),
        });
    }
    Ok(CompareReport { rows })
}

// ---------------------------------------------------------- select-report

#[derive(Debug, Clone, PartialEq)]
pub struct SelectReport {
    pub two_stage: SelectionReport,
    pub oracle: SelectionReport,
    /// Fraction of nonzero blocks where both selectors agree.
    pub agreement: f64,
}

impl SelectReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dialect,two_stage_count,two_stage_freq,oracle_count,oracle_freq\n");
        let (ft, fo) = (self.two_stage.frequencies(), self.oracle.frequencies());
        for d in 0..NUM_DIALECTS {
            let _ = writeln!(
                s,
                "{d},{},{:.6},{},{:.6}",
                self.two_stage.counts[d], ft[d], self.oracle.counts[d], fo[d]
            );
        }
        let _ = writeln!(
            s,
            "# zero_blocks={} agreement={:.6}",
            self.two_stage.zero_blocks, self.agreement
        );
        s
    }
}

pub fn cmd_select_report(
    m: &Matrix<f64>,
    block_size: usize,
    axis: Axis,
    fb: &Formatbook,
) -> Result<SelectReport> {
    let mut two_stage = SelectionReport::default();
    let mut oracle = SelectionReport::default();
    let mut agree = 0usize;
    for b in blocks_of(m, block_size, axis)? {
        let pre = PreprocessedBlock::from_block(&b)?;
        if pre.se.is_zero_block() {
            two_stage.zero_blocks += 1;
            oracle.zero_blocks += 1;
            continue;
        }
        let t = select_dialect_two_stage(&pre, fb)?;
        let (o, _) = select_dialect_mse(&b, pre.se, fb)?;
        two_stage.record(t);
        oracle.record(o);
        agree += usize::from(t == o);
    }
    let total = two_stage.total();
    let agreement = if total == 0 { 1.0 } else { agree as f64 / total as f64 };
    Ok(SelectReport {
        two_stage,
        oracle,
        agreement,
    })
}

// ------------------------------------------------------------- gemm-check

#[derive(Debug, Clone, PartialEq)]
pub struct GemmCheckReport {
    pub format: BlockFormat,
    pub mode: AccumulatorMode,
    /// Quantized GEMM against the full-precision product.
    pub error_vs_reference: f64,
    /// Quantized GEMM against the product of the dequantized operands.
    pub error_vs_dequantized: f64,
    /// Whether the quantized GEMM equals the dequantized product bit for bit.
    pub bit_exact: bool,
    /// Error against the full-precision product for each format, same mode.
    pub baselines: Vec<(BlockFormat, f64)>,
}

impl GemmCheckReport {
    pub fn baseline(&self, f: BlockFormat) -> Option<f64> {
        self.baselines.iter().find(|(g, _)| *g == f).map(|&(_, e)| e)
    }

    pub fn to_csv(&self) -> String {
        let mode = match self.mode {
            AccumulatorMode::Exact => "exact",
            AccumulatorMode::Fp16 => "fp16",
        };
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "format,{}", self.format.name());
        let _ = writeln!(s, "mode,{mode}");
        let _ = writeln!(s, "relative_error_vs_reference,{}", fmt_f(self.error_vs_reference));
        let _ = writeln!(s, "relative_error_vs_dequantized,{}", fmt_f(self.error_vs_dequantized));
        let _ = writeln!(s, "bit_exact,{}", self.bit_exact);
        for (f, e) in &self.baselines {
            let _ = writeln!(s, "{}_relative_error,{}", f.name(), fmt_f(*e));
        }
        s
    }
}

fn quantized_gemm(
    a: &Matrix<f64>,
    w: &Matrix<f64>,
    block_size: usize,
    format: BlockFormat,
    mode: AccumulatorMode,
    fb: &Formatbook,
) -> Result<(QuantizedMatrix, QuantizedMatrix, Matrix<f64>)> {
    let qa = quantize_matrix(a, block_size, Axis::Cols, format, fb)?;
    let qw = quantize_matrix(w, block_size, Axis::Rows, format, fb)?;
    let out = gemm(&qa, &qw, fb, mode)?;
    Ok((qa, qw, out))
}

fn rel_err(reference: &Matrix<f64>, test: &Matrix<f64>) -> Result<f64> {
    if reference == test {
        return Ok(0.0);
    }
    if reference.as_slice().iter().all(|&x| x == 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(relative_frobenius_error(reference, test)?)
}

/// Runs the quantized GEMM for `format` alongside the references. In exact
/// mode with the dialect format a mismatch against the dequantized product is
/// an invariant failure.
pub fn cmd_gemm_check(
    a: &Matrix<f64>,
    w: &Matrix<f64>,
    block_size: usize,
    format: BlockFormat,
    mode: AccumulatorMode,
    fb: &Formatbook,
) -> Result<GemmCheckReport> {
    if a.cols() != w.rows() {
        return Err(blockdialect::Error::DimensionMismatch(format!(
            "A is {}x{}, W is {}x{}",
            a.rows(),
            a.cols(),
            w.rows(),
            w.cols()
        ))
        .into());
    }
    let reference = gemm_reference(a, w)?;
    let (qa, qw, out) = quantized_gemm(a, w, block_size, format, mode, fb)?;
    let deq_product = gemm_reference(&qa.dequantize::<f64>(fb), &qw.dequantize::<f64>(fb))?;
    let bit_exact = out
        .as_slice()
        .iter()
        .zip(deq_product.as_slice())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    if format == BlockFormat::Dialect && mode == AccumulatorMode::Exact && !bit_exact {
        return Err(CliError::Invariant(
            "exact-mode dialect GEMM differs from the dequantized product".into(),
        ));
    }
    let mut baselines = Vec::with_capacity(3);
    for f in [BlockFormat::Dialect, BlockFormat::Mx, BlockFormat::Nv] {
        let e = if f == format {
            rel_err(&reference, &out)?
        } else {
            rel_err(&reference, &quantized_gemm(a, w, block_size, f, mode, fb)?.2)?
        };
        baselines.push((f, e));
    }
    Ok(GemmCheckReport {
        format,
        mode,
        error_vs_reference: rel_err(&reference, &out)?,
        error_vs_dequantized: rel_err(&deq_product, &out)?,
        bit_exact,
        baselines,
    })
}

/// Single-block helpers used by the acceptance suite and benchmarks.
pub fn dialect_block_mse(block: &[f64], fb: &Formatbook, oracle: bool) -> Result<f64> {
    let qb = if oracle {
        quantize_block_mse(block, fb)?
    } else {
        quantize_block(block, fb)?
    };
    Ok(blockdialect::block_mse(block, &dequantize_block::<f64>(&qb, fb))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_matrix, Dist};
    use blockdialect::build_default_formatbook;

    #[test]
    fn profile_single_block() {
        let mut data = vec![0.1f64; 32];
        data[3] = 6.5;
        let m = Matrix::new(1, 32, data).unwrap();
        let r = cmd_profile(&m, 32, Axis::Cols).unwrap();
        assert_eq!(r.max_bins, [0, 0, 0, 0, 0, 1, 0, 0]);
        assert_eq!(r.element_count(), 32);
        assert_eq!(r.block_count(), 1);
        // 0.1 scaled by 2^0 truncates to quarter code 0
        assert_eq!(r.magnitude_bins[0], 31);
        assert_eq!(r.magnitude_bins[26], 1);
    }

    #[test]
    fn profile_conservation() {
        let m = random_matrix(1, 8, 64, Dist::StudentT(3.0));
        let r = cmd_profile(&m, 16, Axis::Cols).unwrap();
        assert_eq!(r.element_count(), 8 * 64);
        assert_eq!(r.block_count(), 8 * 4);
        assert!(r.magnitude_bins[..16].iter().sum::<u64>() > 0);
    }

    #[test]
    fn compare_oracle_not_worse_and_bits() {
        let fb = build_default_formatbook();
        let m = random_matrix(7, 16, 64, Dist::Gaussian);
        let r = cmd_compare(&m, 32, Axis::Cols, &Method::ALL, &fb).unwrap();
        let two = r.row(Method::Dialect).unwrap();
        let orc = r.row(Method::DialectMse).unwrap();
        assert!(orc.mean_block_mse <= two.mean_block_mse);
        assert_eq!(two.effective_bits, 4.28125);
        assert_eq!(r.row(Method::Mx).unwrap().effective_bits, 4.15625);
        assert_eq!(r.row(Method::Nv).unwrap().effective_bits, 4.25);
        assert_eq!(r, cmd_compare(&m, 32, Axis::Cols, &Method::ALL, &fb).unwrap());
    }

    #[test]
    fn select_report_constant_tensor() {
        let fb = build_default_formatbook();
        let m = Matrix::new(4, 32, vec![1.0f64; 128]).unwrap();
        let r = cmd_select_report(&m, 32, Axis::Cols, &fb).unwrap();
        assert_eq!(r.two_stage.counts.iter().filter(|&&c| c > 0).count(), 1);
        let total: f64 = r.two_stage.frequencies().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(r.to_csv().lines().count(), 18);
    }

    #[test]
    fn gemm_check_small() {
        let fb = build_default_formatbook();
        let a = random_matrix(3, 16, 64, Dist::Gaussian);
        let w = random_matrix(4, 64, 16, Dist::Gaussian);
        let r = cmd_gemm_check(&a, &w, 32, BlockFormat::Dialect, AccumulatorMode::Exact, &fb).unwrap();
        assert!(r.bit_exact);
        assert_eq!(r.error_vs_dequantized, 0.0);
        assert!(r.baseline(BlockFormat::Mx).is_some());
        let f = cmd_gemm_check(&a, &w, 32, BlockFormat::Dialect, AccumulatorMode::Fp16, &fb).unwrap();
        assert!(f.error_vs_dequantized >= r.error_vs_dequantized);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("int4").is_err());
    }
}
