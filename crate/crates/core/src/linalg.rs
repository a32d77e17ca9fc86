//! Minimal dense row-major matrices and vector kernels.

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// `rows × cols` matrix with ones on the main diagonal and zeros elsewhere.
    pub fn identity_pattern(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m.data[i * cols + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row vector times matrix: `out = x · m`, with `x.len() == m.rows()`.
pub fn vec_mat(x: &[f64], m: &Matrix, out: &mut [f64]) {
    debug_assert_eq!(x.len(), m.rows);
    debug_assert_eq!(out.len(), m.cols);
    out.iter_mut().for_each(|o| *o = 0.0);
    for (xi, row) in x.iter().zip(m.iter_rows()) {
        if *xi == 0.0 {
            continue;
        }
        for (o, mij) in out.iter_mut().zip(row) {
            *o += xi * mij;
        }
    }
}

/// Matrix times column vector: `out = m · y`, with `y.len() == m.cols()`.
pub fn mat_vec(m: &Matrix, y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(y.len(), m.cols);
    debug_assert_eq!(out.len(), m.rows);
    for (o, row) in out.iter_mut().zip(m.iter_rows()) {
        *o = dot(row, y);
    }
}

/// Rescales `x` in place to unit L2 norm when its norm exceeds one.
/// Returns true if the row was changed.
pub fn clip_to_unit_ball(x: &mut [f64]) -> bool {
    let n = norm2(x);
    if n > 1.0 {
        x.iter_mut().for_each(|v| *v /= n);
        true
    } else {
        false
    }
}
