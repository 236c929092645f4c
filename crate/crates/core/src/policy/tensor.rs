//! Dense row-major f64 matrices, sized for a miniature model.

use alloc::vec::Vec;

#[derive(Clone, PartialEq, Debug)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                t.data[r * cols + c] = f(r, c);
            }
        }
        t
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut t = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            t.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        t
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// `A · B`
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.cols, b.rows);
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let av = a.get(i, k);
            if av == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `A · Bᵀ`
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.cols, b.cols);
    let mut out = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        for j in 0..b.rows {
            let mut s = 0.0;
            for (x, y) in a.row(i).iter().zip(b.row(j)) {
                s += x * y;
            }
            out.set(i, j, s);
        }
    }
    out
}

/// `Aᵀ · B`
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.rows, b.rows);
    let mut out = Tensor::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert!(a.same_shape(b));
    let mut out = a.clone();
    for (o, &v) in out.data.iter_mut().zip(&b.data) {
        *o += v;
    }
    out
}

/// Add a 1×cols bias to every row.
pub fn add_row(a: &Tensor, bias: &Tensor) -> Tensor {
    debug_assert_eq!(bias.rows, 1);
    debug_assert_eq!(a.cols, bias.cols);
    let mut out = a.clone();
    for r in 0..out.rows {
        for (o, &b) in out.row_mut(r).iter_mut().zip(&bias.data) {
            *o += b;
        }
    }
    out
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let mut out = a.clone();
    for o in &mut out.data {
        *o *= c;
    }
    out
}

pub fn relu(a: &Tensor) -> Tensor {
    let mut out = a.clone();
    for o in &mut out.data {
        if *o < 0.0 {
            *o = 0.0;
        }
    }
    out
}

/// Columns `[start, start+width)`.
pub fn slice_cols(a: &Tensor, start: usize, width: usize) -> Tensor {
    let mut out = Tensor::zeros(a.rows, width);
    for r in 0..a.rows {
        out.row_mut(r).copy_from_slice(&a.row(r)[start..start + width]);
    }
    out
}

pub fn concat_cols(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.rows, b.rows);
    let mut out = Tensor::zeros(a.rows, a.cols + b.cols);
    for r in 0..a.rows {
        out.row_mut(r)[..a.cols].copy_from_slice(a.row(r));
        out.row_mut(r)[a.cols..].copy_from_slice(b.row(r));
    }
    out
}

/// Row-wise softmax where row `i` may only attend to columns `0..=i`.
pub fn causal_softmax(a: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.rows, a.cols);
    for r in 0..a.rows {
        let valid = (r + 1).min(a.cols);
        let row = a.row(r);
        let max = row[..valid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..valid {
            let e = crate::fmath::exp(row[c] - max);
            out.set(r, c, e);
            sum += e;
        }
        for c in 0..valid {
            let v = out.get(r, c) / sum;
            out.set(r, c, v);
        }
    }
    out
}

/// Row-wise layer normalization with learnable gain and bias.
pub fn layer_norm(a: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Tensor {
    debug_assert_eq!(gain.cols, a.cols);
    debug_assert_eq!(bias.cols, a.cols);
    let n = a.cols as f64;
    let mut out = Tensor::zeros(a.rows, a.cols);
    for r in 0..a.rows {
        let row = a.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let inv = 1.0 / crate::fmath::sqrt(var + eps);
        for c in 0..a.cols {
            let xhat = (row[c] - mean) * inv;
            out.set(r, c, gain.data[c] * xhat + bias.data[c]);
        }
    }
    out
}
