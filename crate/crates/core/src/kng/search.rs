//! Exhaustive nearest-center search.
//!
//! Distances are screened with a blocked `|q|² + |c|² - 2 q·c` product and
//! then recomputed exactly with [`sq_dist`] for every center within a
//! rounding margin of the screened best. Results therefore agree with a
//! plain linear scan over [`sq_dist`], including lowest-index tie-breaking.

const BLOCK: usize = 128;

/// Sequential sum of squared differences; the reference distance.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Best and second-best center for one query, squared distances exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub first: usize,
    pub first_sq: f64,
    pub second: usize,
    pub second_sq: f64,
}

/// Row-major centers with cached squared norms.
#[derive(Debug, Clone)]
pub struct CenterMatrix {
    data: Vec<f64>,
    norms: Vec<f64>,
    max_norm: f64,
    k: usize,
    dim: usize,
}

impl CenterMatrix {
    pub fn new<'a>(centers: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut data = Vec::new();
        for c in centers {
            debug_assert_eq!(c.len(), dim);
            data.extend_from_slice(c);
        }
        let k = if dim == 0 { 0 } else { data.len() / dim };
        let norms: Vec<f64> = data.chunks_exact(dim.max(1)).map(|c| dot(c, c)).collect();
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        Self {
            data,
            norms,
            max_norm,
            k,
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Two nearest centers for each row of `queries` (row-major, `dim`
    /// wide). Requires at least two centers.
    pub fn nearest_two(&self, queries: &[f64]) -> Vec<Nearest> {
        assert!(self.k >= 2, "nearest_two needs two centers");
        self.search(queries, None)
    }

    /// Nearest center for each query row whose index differs from
    /// `exclude[row]`; returns squared distances.
    pub fn nearest_excluding(&self, queries: &[f64], exclude: &[usize]) -> Vec<(usize, f64)> {
        assert!(self.k >= 2);
        self.search(queries, Some(exclude))
            .into_iter()
            .map(|n| (n.first, n.first_sq))
            .collect()
    }

    fn search(&self, queries: &[f64], exclude: Option<&[usize]>) -> Vec<Nearest> {
        let n = queries.len() / self.dim;
        let blocks: Vec<(usize, &[f64])> = queries
            .chunks(BLOCK * self.dim)
            .enumerate()
            .map(|(b, q)| (b * BLOCK, q))
            .collect();
        let run = |&(offset, block): &(usize, &[f64])| -> Vec<Nearest> {
            self.search_block(block, offset, exclude)
        };
        #[cfg(feature = "parallel")]
        let parts: Vec<Vec<Nearest>> = {
            use rayon::prelude::*;
            blocks.par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let parts: Vec<Vec<Nearest>> = blocks.iter().map(run).collect();
        let out: Vec<Nearest> = parts.into_iter().flatten().collect();
        debug_assert_eq!(out.len(), n);
        out
    }

    fn search_block(&self, block: &[f64], offset: usize, exclude: Option<&[usize]>) -> Vec<Nearest> {
        let (m, k, d) = (block.len() / self.dim, self.k, self.dim);
        let mut gram = vec![0.0; m * k];
        // SAFETY: dimensions and strides describe the three buffers exactly:
        // block is m x d row-major, centers read as d x k via (1, d) strides,
        // gram is m x k row-major.
        unsafe {
            matrixmultiply::dgemm(
                m,
                d,
                k,
                1.0,
                block.as_ptr(),
                d as isize,
                1,
                self.data.as_ptr(),
                1,
                d as isize,
                0.0,
                gram.as_mut_ptr(),
                k as isize,
                1,
            );
        }
        let mut out = Vec::with_capacity(m);
        let mut candidates: Vec<usize> = Vec::new();
        for (row, q) in block.chunks_exact(d).enumerate() {
            let qn = dot(q, q);
            let skip = exclude.map(|e| e[offset + row]);
            let g = &gram[row * k..(row + 1) * k];
            let (mut a1, mut a2) = (f64::INFINITY, f64::INFINITY);
            for (j, (&gj, &cn)) in g.iter().zip(&self.norms).enumerate() {
                if Some(j) == skip {
                    continue;
                }
                let approx = qn + cn - 2.0 * gj;
                if approx < a1 {
                    a2 = a1;
                    a1 = approx;
                } else if approx < a2 {
                    a2 = approx;
                }
            }
            let margin = 1e-10 * (qn + self.max_norm) + f64::MIN_POSITIVE;
            let cutoff = if skip.is_some() { a1 } else { a2 } + margin;
            candidates.clear();
            candidates.extend(
                g.iter()
                    .zip(&self.norms)
                    .enumerate()
                    .filter(|&(j, (&gj, &cn))| Some(j) != skip && qn + cn - 2.0 * gj <= cutoff)
                    .map(|(j, _)| j),
            );
            let mut best = (usize::MAX, f64::INFINITY);
            let mut second = (usize::MAX, f64::INFINITY);
            for &j in &candidates {
                let e = sq_dist(q, self.center(j));
                // Candidates are visited in ascending index order, so a strict
                // comparison keeps the lowest index among ties.
                if e < best.1 {
                    second = best;
                    best = (j, e);
                } else if e < second.1 {
                    second = (j, e);
                }
            }
            out.push(Nearest {
                first: best.0,
                first_sq: best.1,
                second: second.0,
                second_sq: second.1,
            });
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
