use blockdialect::{build_default_formatbook, Axis, Matrix};
use blockdialect_cli::commands::{quantize_with_method, Method};
use blockdialect_cli::quantized_file::{decode, encode};
use blockdialect_cli::tensor_file::{TensorData, TensorFile};
use proptest::prelude::*;

fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        -1e-3f64..1e-3,
        Just(0.0),
        Just(-0.0),
    ]
}

proptest! {
    #[test]
    fn tensor_f64_bytes_round_trip(dims in prop::collection::vec(1u32..5, 0..4), seed in any::<u64>()) {
        let n: usize = dims.iter().map(|&d| d as usize).product();
        let data: Vec<f64> = (0..n).map(|i| ((seed as f64) * 1e-9 + i as f64).sin()).collect();
        let t = TensorFile::new(dims, TensorData::F64(data)).unwrap();
        let bytes = t.to_bytes();
        let back = TensorFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn tensor_f32_bytes_round_trip(data in prop::collection::vec(-1e30f32..1e30, 0..40)) {
        let t = TensorFile::new(vec![data.len() as u32], TensorData::F32(data)).unwrap();
        let bytes = t.to_bytes();
        prop_assert_eq!(TensorFile::from_bytes(&bytes).unwrap(), t);
    }

    #[test]
    fn quantized_bytes_round_trip(
        rows in 1usize..4,
        nblocks in 1usize..4,
        b in prop::sample::select(vec![1usize, 5, 8, 16, 32, 64]),
        cells in prop::collection::vec(finite_f64(), 3 * 3 * 64),
        method in prop::sample::select(vec![Method::Dialect, Method::DialectMse, Method::Mx, Method::Nv]),
        by_rows in any::<bool>(),
    ) {
        let fb = build_default_formatbook();
        let (r, c, axis) = if by_rows { (nblocks * b, rows, Axis::Rows) } else { (rows, nblocks * b, Axis::Cols) };
        let m = Matrix::new(r, c, cells[..r * c].to_vec()).unwrap();
        let qm = quantize_with_method(&m, b, axis, method, &fb).unwrap();
        let bytes = encode(&qm);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &qm);
        prop_assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode(&bytes);
        let _ = TensorFile::from_bytes(&bytes);
    }
}

#[test]
fn zero_tensor_has_only_sentinels() {
    let fb = build_default_formatbook();
    let m = Matrix::<f64>::zeros(3, 64);
    let bytes = encode(&quantize_with_method(&m, 32, Axis::Cols, Method::Dialect, &fb).unwrap());
    for rec in bytes[16..].chunks(18) {
        assert_eq!(rec[0], 0x80);
        assert_eq!(rec[1], 15);
    }
}
