//! Block vectorization and the block Kronecker product.
//!
//! A block matrix is partitioned into a grid of equally shaped blocks.
//! `bvec` vectorizes every block column-major and stacks the blocks by
//! scanning the block grid column by column, so that block `(i, j)` of an
//! `N × M` grid lands at block position `j·N + i`. The block Kronecker product
//! `A ⊗_b B` places `A_ij ⊗ B_kl` at block row `i·N_B + k`, block column
//! `j·M_B + l`. With these conventions
//!
//! * `bvec(x yᵀ) = y ⊗_b x`
//! * `bvec(A B C) = (Cᵀ ⊗_b A) bvec(B)`
//! * `trace(A B) = bvec(Bᵀ)ᵀ bvec(A)`
//!
//! hold exactly; the unit and property tests pin them down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A dense matrix partitioned into blocks of `block_rows × block_cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    data: DMatrix<f64>,
    block_rows: usize,
    block_cols: usize,
}

impl BlockMatrix {
    pub fn new(data: DMatrix<f64>, block_rows: usize, block_cols: usize) -> Result<Self> {
        if block_rows == 0
            || block_cols == 0
            || data.nrows() % block_rows != 0
            || data.ncols() % block_cols != 0
        {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix cannot be split into {block_rows}x{block_cols} blocks",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self {
            data,
            block_rows,
            block_cols,
        })
    }

    /// Square `L × L` blocks.
    pub fn square(data: DMatrix<f64>, l: usize) -> Result<Self> {
        Self::new(data, l, l)
    }

    /// Block column vector with `L × 1` blocks.
    pub fn column(v: &DVector<f64>, l: usize) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(v.len(), 1, v.as_slice()), l, 1)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn block_shape(&self) -> (usize, usize) {
        (self.block_rows, self.block_cols)
    }

    /// Number of blocks along each axis.
    pub fn grid(&self) -> (usize, usize) {
        (self.data.nrows() / self.block_rows, self.data.ncols() / self.block_cols)
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            block_rows: self.block_cols,
            block_cols: self.block_rows,
        }
    }

    pub fn bvec(&self) -> DVector<f64> {
        bvec(&self.data, self.block_rows, self.block_cols)
    }

    /// Inverse of [`BlockMatrix::bvec`] for a grid of `grid_rows × grid_cols` blocks.
    pub fn from_bvec(
        v: &DVector<f64>,
        grid_rows: usize,
        grid_cols: usize,
        block_rows: usize,
        block_cols: usize,
    ) -> Result<Self> {
        if v.len() != grid_rows * grid_cols * block_rows * block_cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} is not a bvec of a {grid_rows}x{grid_cols} grid of {block_rows}x{block_cols} blocks",
                v.len()
            )));
        }
        Self::new(
            unbvec(v.as_slice(), grid_rows, grid_cols, block_rows, block_cols),
            block_rows,
            block_cols,
        )
    }
}

/// `bvec` of a raw matrix with the given block shape.
pub fn bvec(m: &DMatrix<f64>, block_rows: usize, block_cols: usize) -> DVector<f64> {
    let (gr, gc) = (m.nrows() / block_rows, m.ncols() / block_cols);
    let mut out = Vec::with_capacity(m.len());
    for j in 0..gc {
        for i in 0..gr {
            for c in 0..block_cols {
                for r in 0..block_rows {
                    out.push(m[(i * block_rows + r, j * block_cols + c)]);
                }
            }
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`bvec`].
pub fn unbvec(
    v: &[f64],
    grid_rows: usize,
    grid_cols: usize,
    block_rows: usize,
    block_cols: usize,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(grid_rows * block_rows, grid_cols * block_cols);
    let mut idx = 0;
    for j in 0..grid_cols {
        for i in 0..grid_rows {
            for c in 0..block_cols {
                for r in 0..block_rows {
                    m[(i * block_rows + r, j * block_cols + c)] = v[idx];
                    idx += 1;
                }
            }
        }
    }
    m
}

/// Block Kronecker product `a ⊗_b b`.
pub fn block_kron(a: &BlockMatrix, b: &BlockMatrix) -> BlockMatrix {
    let (ar, ac) = a.block_shape();
    let (br, bc) = b.block_shape();
    let (agr, agc) = a.grid();
    let (bgr, bgc) = b.grid();
    let (or, oc) = (ar * br, ac * bc);
    let mut out = DMatrix::zeros(agr * bgr * or, agc * bgc * oc);
    for i in 0..agr {
        for j in 0..agc {
            let ablk = a.data.view((i * ar, j * ac), (ar, ac));
            if ablk.iter().all(|&x| x == 0.0) {
                continue;
            }
            for k in 0..bgr {
                for l in 0..bgc {
                    let bblk = b.data.view((k * br, l * bc), (br, bc));
                    let row0 = (i * bgr + k) * or;
                    let col0 = (j * bgc + l) * oc;
                    for q in 0..ac {
                        for p in 0..ar {
                            let av = ablk[(p, q)];
                            if av == 0.0 {
                                continue;
                            }
                            for s in 0..bc {
                                for r in 0..br {
                                    out[(row0 + p * br + r, col0 + q * bc + s)] = av * bblk[(r, s)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    BlockMatrix {
        data: out,
        block_rows: or,
        block_cols: oc,
    }
}

/// `vᵀ Σ v` where `sigma = bvec(Σ)` and `Σ` is `NL × NL` with `L × L` blocks.
///
/// Evaluated as `bvec(v vᵀ)ᵀ σ`; fails if `Σ` is not symmetric to within
/// `1e-10` relative to its largest entry.
pub fn weighted_sq_norm(v: &DVector<f64>, sigma: &DVector<f64>, l: usize) -> Result<f64> {
    let nl = v.len();
    if l == 0 || nl % l != 0 || sigma.len() != nl * nl {
        return Err(Error::DimensionMismatch(format!(
            "weight of length {} does not match a vector of length {nl} with block size {l}",
            sigma.len()
        )));
    }
    let n = nl / l;
    let weight = unbvec(sigma.as_slice(), n, n, l, l);
    let scale = weight.amax().max(f64::MIN_POSITIVE);
    let asym = (&weight - weight.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NonSymmetricWeight(asym));
    }
    let outer = v * v.transpose();
    Ok(bvec(&outer, l, l).dot(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_blocks_reduce_to_vec() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = BlockMatrix::new(m.clone(), 1, 1).unwrap().bvec();
        assert_eq!(v.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn identity_bvec() {
        let v = BlockMatrix::square(DMatrix::identity(4, 4), 2).unwrap().bvec();
        let expected = [
            1.0, 0.0, 0.0, 1.0, // block (0,0)
            0.0, 0.0, 0.0, 0.0, // block (1,0)
            0.0, 0.0, 0.0, 0.0, // block (0,1)
            1.0, 0.0, 0.0, 1.0, // block (1,1)
        ];
        assert_eq!(v.as_slice(), &expected);
    }

    #[test]
    fn scalar_blocks_reduce_to_kron() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[5.0, -1.0]);
        let bk = block_kron(&BlockMatrix::new(a.clone(), 1, 1).unwrap(), &BlockMatrix::new(b.clone(), 1, 1).unwrap());
        assert_eq!(bk.data(), &a.kronecker(&b));
    }

    #[test]
    fn identity_block_kron_is_identity() {
        let eye = BlockMatrix::square(DMatrix::identity(6, 6), 3).unwrap();
        let bk = block_kron(&eye, &eye);
        assert_eq!(bk.data(), &DMatrix::<f64>::identity(36, 36));
        assert_eq!(bk.block_shape(), (9, 9));
    }

    #[test]
    fn round_trip() {
        let m = DMatrix::from_fn(6, 4, |i, j| (i * 7 + j) as f64);
        let b = BlockMatrix::new(m, 3, 2).unwrap();
        let back = BlockMatrix::from_bvec(&b.bvec(), 2, 2, 3, 2).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn bad_shapes() {
        assert!(BlockMatrix::new(DMatrix::zeros(5, 4), 2, 2).is_err());
        let v = DVector::from_element(4, 1.0);
        assert!(weighted_sq_norm(&v, &DVector::zeros(10), 2).is_err());
    }

    #[test]
    fn weighted_norm_zero_vector() {
        let v = DVector::zeros(4);
        let sigma = BlockMatrix::square(DMatrix::identity(4, 4), 2).unwrap().bvec();
        assert_eq!(weighted_sq_norm(&v, &sigma, 2).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_rejects_asymmetric_weight() {
        let mut w = DMatrix::identity(4, 4);
        w[(0, 3)] = 0.5;
        let sigma = BlockMatrix::square(w, 2).unwrap().bvec();
        let v = DVector::from_element(4, 1.0);
        assert!(matches!(weighted_sq_norm(&v, &sigma, 2), Err(Error::NonSymmetricWeight(_))));
    }

    #[test]
    fn network_msd_weight() {
        let v = DVector::from_column_slice(&[1.0, -2.0, 0.5, 3.0]);
        let sigma = BlockMatrix::square(DMatrix::identity(4, 4) * 0.5, 2).unwrap().bvec();
        let got = weighted_sq_norm(&v, &sigma, 2).unwrap();
        assert!((got - 0.5 * v.norm_squared()).abs() < 1e-14);
    }
}
