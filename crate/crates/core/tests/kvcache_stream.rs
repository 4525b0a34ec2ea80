use blockdialect::{
    append_token, build_default_formatbook, materialize, quantize_matrix, Axis, BlockFormat,
    Matrix, StreamingKeyCache, StreamingValueCache,
};

mod common;
use common::{gaussian_block, rng};

#[test]
fn streaming_equals_batch_and_sealed_blocks_never_change() {
    let fb = build_default_formatbook();
    let (head_dim, channels, b) = (64, 24, 16);
    for n in [b, 2 * b, 2 * b + 3, 5 * b - 1] {
        let mut r = rng(n as u64);
        let keys = Matrix::new(n, head_dim, gaussian_block(&mut r, n * head_dim)).unwrap();
        let values = Matrix::new(n, channels, gaussian_block(&mut r, n * channels)).unwrap();
        let mut kc = StreamingKeyCache::new(head_dim, b).unwrap();
        let mut vc = StreamingValueCache::new(channels, b).unwrap();
        let mut snapshots: Vec<Vec<blockdialect::QuantizedBlock>> = Vec::new();
        for t in 0..n {
            append_token(&mut kc, &mut vc, keys.row(t), values.row(t), &fb).unwrap();
            for (c, snap) in snapshots.iter().enumerate() {
                assert_eq!(&vc.sealed(c)[..snap.len()], &snap[..], "sealed chunk changed");
            }
            snapshots = (0..channels).map(|c| vc.sealed(c).to_vec()).collect();
            assert!(vc.residual_len() < b);
        }
        let (kq, vq, residual) = materialize(&vc, &kc);
        assert_eq!(residual.rows(), n % b);
        let sealed = n / b * b;
        assert_eq!(vq, quantize_matrix(&values.top_rows(sealed), b, Axis::Rows, BlockFormat::Dialect, &fb).unwrap());
        assert_eq!(kq, quantize_matrix(&keys, b, Axis::Cols, BlockFormat::Dialect, &fb).unwrap());
        for t in 0..n % b {
            assert_eq!(residual.row(t), values.row(sealed + t));
        }
    }
}
