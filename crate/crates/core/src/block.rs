//! Peter–Weyl block-indexed operators with a truncation bound and an
//! exactness window.
//!
//! An operator built at truncation `N` with spin budget `B` has exact columns
//! on blocks of spin at most `N − B`. Products add budgets, so every equality
//! between block operators is asserted only on the window of the result.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, op_norm};

/// One Peter–Weyl block: its label (e.g. `[ν]` or `[ν₁, ν₂]`), the spin used
/// for windows, and its dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockLabel {
    pub key: Vec<u32>,
    pub spin: u32,
    pub dim: usize,
}

/// Ordered list of blocks making up a truncated Hilbert space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    blocks: Vec<BlockLabel>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(blocks: Vec<BlockLabel>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut o = 0;
        for b in &blocks {
            offsets.push(o);
            o += b.dim;
        }
        offsets.push(o);
        BlockLayout { blocks, offsets }
    }

    pub fn blocks(&self) -> &[BlockLabel] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Index range of block `b`.
    pub fn range(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn position(&self, key: &[u32]) -> Option<usize> {
        self.blocks.iter().position(|b| b.key == key)
    }

    /// Basis indices of all blocks with spin at most `s`.
    pub fn indices_up_to(&self, s: i64) -> Vec<usize> {
        let mut v = Vec::new();
        for (b, l) in self.blocks.iter().enumerate() {
            if (l.spin as i64) <= s {
                v.extend(self.range(b));
            }
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct BlockOperator {
    pub layout: Arc<BlockLayout>,
    /// Truncation bound `N`.
    pub truncation: u32,
    /// Spin budget `B`.
    pub budget: u32,
    pub matrix: DMatrix<Complex64>,
}

impl BlockOperator {
    pub fn new(layout: Arc<BlockLayout>, truncation: u32, budget: u32, matrix: DMatrix<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), layout.dim());
        assert_eq!(matrix.ncols(), layout.dim());
        BlockOperator { layout, truncation, budget, matrix }
    }

    pub fn identity(layout: Arc<BlockLayout>, truncation: u32) -> Self {
        let d = layout.dim();
        Self::new(layout, truncation, 0, DMatrix::identity(d, d))
    }

    pub fn zeros(layout: Arc<BlockLayout>, truncation: u32) -> Self {
        let d = layout.dim();
        Self::new(layout, truncation, 0, DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Largest block spin inside the exactness window, `N − B`.
    pub fn window_spin(&self) -> i64 {
        self.truncation as i64 - self.budget as i64
    }

    pub fn window_indices(&self) -> Vec<usize> {
        self.layout.indices_up_to(self.window_spin())
    }

    /// Compression to the blocks of spin at most `s`.
    pub fn compress(&self, s: i64) -> DMatrix<Complex64> {
        let idx = self.layout.indices_up_to(s);
        self.matrix.select_rows(&idx).select_columns(&idx)
    }

    /// Compression to the exactness window.
    pub fn window(&self) -> DMatrix<Complex64> {
        self.compress(self.window_spin())
    }

    /// Columns of the window blocks, all rows.
    pub fn window_columns(&self) -> DMatrix<Complex64> {
        self.matrix.select_columns(&self.window_indices())
    }

    pub fn block(&self, row: usize, col: usize) -> DMatrix<Complex64> {
        let r = self.layout.range(row);
        let c = self.layout.range(col);
        self.matrix.view((r.start, c.start), (r.len(), c.len())).into_owned()
    }

    fn check_layout(&self, o: &Self) -> Result<()> {
        if self.layout != o.layout || self.truncation != o.truncation {
            return Err(Error::WindowMismatch(format!(
                "truncations {} and {} or block layouts differ",
                self.truncation, o.truncation
            )));
        }
        Ok(())
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check_layout(o)?;
        Ok(Self::new(self.layout.clone(), self.truncation, self.budget + o.budget, &self.matrix * &o.matrix))
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_layout(o)?;
        Ok(Self::new(self.layout.clone(), self.truncation, self.budget.max(o.budget), &self.matrix + &o.matrix))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.check_layout(o)?;
        Ok(Self::new(self.layout.clone(), self.truncation, self.budget.max(o.budget), &self.matrix - &o.matrix))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.layout.clone(), self.truncation, self.budget, &self.matrix * c)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.layout.clone(), self.truncation, self.budget, self.matrix.adjoint())
    }

    /// Operator norm of the window compression.
    pub fn window_norm(&self) -> f64 {
        op_norm(&self.window())
    }

    /// Largest entry of `self − o` on the common window.
    pub fn window_residual(&self, o: &Self) -> Result<f64> {
        self.check_layout(o)?;
        let s = self.window_spin().min(o.window_spin());
        let idx = self.layout.indices_up_to(s);
        let d = (&self.matrix - &o.matrix).select_rows(&idx).select_columns(&idx);
        Ok(max_abs(&d))
    }
}

/// Block-diagonal direct sum; block `[ν]` of summand `h` becomes `[h, ν]`.
pub fn direct_sum(ops: &[BlockOperator]) -> Result<BlockOperator> {
    let Some(first) = ops.first() else {
        return Err(Error::WindowMismatch("empty direct sum".into()));
    };
    let mut blocks = Vec::new();
    for (h, op) in ops.iter().enumerate() {
        if op.truncation != first.truncation {
            return Err(Error::WindowMismatch("summands have different truncations".into()));
        }
        for b in op.layout.blocks() {
            let mut key = vec![h as u32];
            key.extend(&b.key);
            blocks.push(BlockLabel { key, spin: b.spin, dim: b.dim });
        }
    }
    let layout = Arc::new(BlockLayout::new(blocks));
    let mut m = DMatrix::zeros(layout.dim(), layout.dim());
    let mut off = 0;
    for op in ops {
        let d = op.dim();
        m.view_mut((off, off), (d, d)).copy_from(&op.matrix);
        off += d;
    }
    let budget = ops.iter().map(|o| o.budget).max().unwrap_or(0);
    Ok(BlockOperator::new(layout, first.truncation, budget, m))
}

/// Inverse of [`direct_sum`] given the summand layouts.
pub fn split(op: &BlockOperator, layouts: &[Arc<BlockLayout>]) -> Result<Vec<BlockOperator>> {
    let total: usize = layouts.iter().map(|l| l.dim()).sum();
    if total != op.dim() {
        return Err(Error::WindowMismatch(format!("split into {total} rows of a {}-dimensional operator", op.dim())));
    }
    let mut off = 0;
    let mut out = Vec::with_capacity(layouts.len());
    for l in layouts {
        let d = l.dim();
        let m = op.matrix.view((off, off), (d, d)).into_owned();
        out.push(BlockOperator::new(l.clone(), op.truncation, op.budget, m));
        off += d;
    }
    Ok(out)
}
