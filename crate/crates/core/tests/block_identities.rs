use mtdiff_core::blockops::{block_kron, bvec, weighted_sq_norm, BlockMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= TOL
}

fn bm(m: DMatrix<f64>, br: usize, bc: usize) -> BlockMatrix {
    BlockMatrix::new(m, br, bc).unwrap()
}

/// `(N, M, L)` with `N, M ≤ 4` and `L ≤ 3`.
fn shape() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=4, 1usize..=4, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn outer_product((n, _m, l) in shape(), x in matrix(12, 1), y in matrix(12, 1)) {
        let x = x.view((0, 0), (n * l, 1)).into_owned();
        let y = y.view((0, 0), (n * l, 1)).into_owned();
        let lhs = bvec(&(&x * y.transpose()), l, l);
        let rhs = block_kron(&bm(y, l, 1), &bm(x, l, 1));
        prop_assert!((lhs - DVector::from_column_slice(rhs.data().as_slice())).amax() <= TOL);
    }

    #[test]
    fn distributive((n, m, l) in shape(), a in matrix(12, 12), b in matrix(12, 12), c in matrix(12, 12), d in matrix(12, 12)) {
        let cut = |x: &DMatrix<f64>, r: usize, s: usize| x.view((0, 0), (r, s)).into_owned();
        let (a, b) = (cut(&a, n * l, m * l), cut(&b, n * l, m * l));
        let (c, d) = (cut(&c, m * l, n * l), cut(&d, m * l, n * l));
        let lhs = block_kron(&bm(&a + &b, l, l), &bm(&c + &d, l, l));
        let rhs = block_kron(&bm(a.clone(), l, l), &bm(c.clone(), l, l)).into_data()
            + block_kron(&bm(a, l, l), &bm(d.clone(), l, l)).into_data()
            + block_kron(&bm(b.clone(), l, l), &bm(c, l, l)).into_data()
            + block_kron(&bm(b, l, l), &bm(d, l, l)).into_data();
        prop_assert!(close(lhs.data(), &rhs));
    }

    #[test]
    fn mixed_product((n, m, l) in shape(), p in 1usize..=4, a in matrix(12, 12), b in matrix(12, 12), c in matrix(12, 12), d in matrix(12, 12)) {
        let cut = |x: &DMatrix<f64>, r: usize, s: usize| x.view((0, 0), (r, s)).into_owned();
        let (a, c) = (cut(&a, n * l, m * l), cut(&c, m * l, p * l));
        let (b, d) = (cut(&b, m * l, p * l), cut(&d, p * l, n * l));
        let lhs = block_kron(&bm(&a * &c, l, l), &bm(&b * &d, l, l));
        let rhs = block_kron(&bm(a, l, l), &bm(b, l, l)).into_data()
            * block_kron(&bm(c, l, l), &bm(d, l, l)).into_data();
        prop_assert!(close(lhs.data(), &rhs));
    }

    #[test]
    fn kronecker_factors((n, m, l) in shape(), a in matrix(4, 4), b in matrix(3, 3), c in matrix(4, 4), d in matrix(3, 3)) {
        let a = a.view((0, 0), (n, m)).into_owned();
        let c = c.view((0, 0), (m, n)).into_owned();
        let b = b.view((0, 0), (l, l)).into_owned();
        let d = d.view((0, 0), (l, l)).into_owned();
        let lhs = block_kron(&bm(a.kronecker(&b), l, l), &bm(c.kronecker(&d), l, l));
        let rhs = a.kronecker(&c).kronecker(&b.kronecker(&d));
        prop_assert!(close(lhs.data(), &rhs));
    }

    #[test]
    fn trace((n, m, l) in shape(), a in matrix(12, 12), b in matrix(12, 12)) {
        let a = a.view((0, 0), (n * l, m * l)).into_owned();
        let b = b.view((0, 0), (m * l, n * l)).into_owned();
        let lhs = (&a * &b).trace();
        let rhs = bvec(&b.transpose(), l, l).dot(&bvec(&a, l, l));
        prop_assert!((lhs - rhs).abs() <= TOL);
    }

    #[test]
    fn triple_product((n, m, l) in shape(), p in 1usize..=4, q in 1usize..=4, a in matrix(12, 12), b in matrix(12, 12), c in matrix(12, 12)) {
        let a = a.view((0, 0), (n * l, m * l)).into_owned();
        let b = b.view((0, 0), (m * l, p * l)).into_owned();
        let c = c.view((0, 0), (p * l, q * l)).into_owned();
        let lhs = bvec(&(&a * &b * &c), l, l);
        let rhs = block_kron(&bm(c.transpose(), l, l), &bm(a, l, l)).into_data() * bvec(&b, l, l);
        prop_assert!((lhs - rhs).amax() <= TOL);
    }

    #[test]
    fn transpose((n, m, l) in shape(), a in matrix(12, 12), b in matrix(12, 12)) {
        let a = a.view((0, 0), (n * l, m * l)).into_owned();
        let b = b.view((0, 0), (m * l, n * l)).into_owned();
        let lhs = block_kron(&bm(a.clone(), l, l), &bm(b.clone(), l, l)).transpose();
        let rhs = block_kron(&bm(a.transpose(), l, l), &bm(b.transpose(), l, l));
        prop_assert!(close(lhs.data(), rhs.data()));
    }

    #[test]
    fn weighted_norm_two_routes((n, _m, l) in shape(), v in matrix(12, 1), s in matrix(12, 12)) {
        let v = DVector::from_column_slice(v.view((0, 0), (n * l, 1)).into_owned().as_slice());
        let s = s.view((0, 0), (n * l, n * l)).into_owned();
        let sym = &s * s.transpose();
        let via_bvec = weighted_sq_norm(&v, &bvec(&sym, l, l), l).unwrap();
        let direct = (v.transpose() * &sym * &v)[(0, 0)];
        prop_assert!((via_bvec - direct).abs() <= 1e-13 * direct.abs().max(1.0));
    }
}

#[test]
fn lifted_mean_combination() {
    let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, 0.3, 0.8, 0.4, 0.2, 0.0, 0.6]);
    let l = 2;
    let lifted = a.kronecker(&DMatrix::<f64>::identity(l, l));
    let lhs = block_kron(&bm(lifted.clone(), l, l), &bm(lifted, l, l));
    let rhs = a.kronecker(&a).kronecker(&DMatrix::<f64>::identity(l * l, l * l));
    assert!(close(lhs.data(), &rhs));
}
