use std::io::Write;
use std::path::Path;

use faer::sparse::{SparseColMat, Triplet};

use crate::{Error, Result};

/// Compressed sparse row matrix with a fixed pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Collects the column set of every row before values are scattered.
#[derive(Debug, Clone)]
pub struct PatternBuilder {
    ncols: usize,
    rows: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        PatternBuilder {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    /// Couples every row in `rows` with every column in `cols`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &r in rows {
            self.rows[r].extend_from_slice(cols);
        }
    }

    pub fn build(self) -> CsrMatrix {
        let nrows = self.rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in self.rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// From unsorted triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut pb = PatternBuilder::new(nrows, ncols);
        for &(r, c, _) in triplets {
            pb.rows[r].push(c);
        }
        let mut m = pb.build();
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).ok().map(|i| a + i)
    }

    /// Adds to an entry of the pattern; panics on entries outside it.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let i = self
            .find(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) is not in the sparsity pattern"));
        self.values[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.find(r, c).map_or(0.0, |i| self.values[i])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `Aᵀx` without forming the transpose.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            count[c + 1] += 1;
        }
        for i in 0..self.ncols {
            count[i + 1] += count[i];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `self + s·other` on the union pattern.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut pb = PatternBuilder::new(self.nrows, self.ncols);
        for r in 0..self.nrows {
            pb.rows[r].extend_from_slice(self.row(r).0);
            pb.rows[r].extend_from_slice(other.row(r).0);
        }
        let mut m = pb.build();
        for r in 0..self.nrows {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                m.add(r, c, v);
            }
            let (c, v) = other.row(r);
            for (&c, &v) in c.iter().zip(v) {
                m.add(r, c, s * v);
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |A − Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d = d.max((v - self.get(c, r)).abs());
            }
        }
        d
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Stacks blocks row-major; `None` is a zero block. Block shapes must agree.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> Result<CsrMatrix> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (i, row) in blocks.iter().enumerate() {
            if row.len() != nbc {
                return Err(Error::Usage("ragged block layout".into()));
            }
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    for (slot, v) in [(&mut heights[i], b.nrows), (&mut widths[j], b.ncols)] {
                        match slot {
                            Some(s) if *s != v => {
                                return Err(Error::Usage("inconsistent block sizes".into()))
                            }
                            _ => *slot = Some(v),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights.into_iter().map(|h| h.unwrap_or(0)).collect();
        let widths: Vec<usize> = widths.into_iter().map(|w| w.unwrap_or(0)).collect();
        let col_off: Vec<usize> = widths
            .iter()
            .scan(0, |s, w| Some(std::mem::replace(s, *s + w)))
            .collect();
        let ncols = widths.iter().sum();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (i, row) in blocks.iter().enumerate() {
            for r in 0..heights[i] {
                for (j, b) in row.iter().enumerate() {
                    if let Some(b) = b {
                        let (c, v) = b.row(r);
                        col_idx.extend(c.iter().map(|c| c + col_off[j]));
                        values.extend_from_slice(v);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok(CsrMatrix {
            nrows: heights.iter().sum(),
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push(Triplet::new(r, c, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Numerical(format!("sparse conversion failed: {e:?}")))
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Coordinate text: `row col value` per line, 17 significant digits.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{r} {c} {v:.16e}")?;
            }
        }
        Ok(())
    }

    pub fn dump_to_file(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_coo(f)?;
        Ok(())
    }
}
