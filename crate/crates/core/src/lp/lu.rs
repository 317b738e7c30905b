//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The basis is factorized by right-looking Gaussian elimination with a
//! Markowitz-style pivot order (singletons first, then the sparsest column
//! with threshold partial pivoting). Basis changes between refactorizations
//! are appended as eta columns.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Relative threshold for accepting a pivot against the column maximum.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries below this magnitude are dropped during elimination.
const DROP_TOL: f64 = 1e-14;
/// A column whose largest entry is below this is treated as dependent.
const SINGULAR_TOL: f64 = 1e-11;

/// Basis positions that could not be pivoted, paired with rows left without a pivot.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Pivot {
    row: usize,
    pos: usize,
    diag: f64,
    /// Multipliers `(row, l)` eliminated by this pivot.
    lower: Vec<(usize, f64)>,
    /// Off-diagonal entries `(pos, u)` of the pivot row; all pivoted later.
    upper: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Factor {
    m: usize,
    pivots: Vec<Pivot>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl Factor {
    /// Factorizes the `m x m` matrix whose column `pos` is `columns[pos]` as
    /// `(row, value)` pairs.
    pub fn new(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Factor, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (pos, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((pos, v));
                    col_rows[pos].push(r);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_count: Vec<usize> = col_rows.iter().map(|c| c.len()).collect();
        let mut col_heap = BinaryHeap::with_capacity(2 * m);
        let mut row_heap = BinaryHeap::with_capacity(2 * m);
        for j in 0..m {
            col_heap.push(Reverse((col_count[j], j)));
            row_heap.push(Reverse((rows[j].len(), j)));
        }

        let mut pivots = Vec::with_capacity(m);
        let mut singular_positions = Vec::new();
        let mut mark = vec![usize::MAX; m];
        let mut scatter = vec![0.0f64; m];
        let mut slot = vec![usize::MAX; m];

        let mut remaining = m;
        while remaining > 0 {
            // Row singleton candidate, accepted only if numerically safe.
            let mut choice: Option<(usize, usize)> = None;
            while let Some(&Reverse((cnt, i))) = row_heap.peek() {
                if !row_active[i] || rows[i].len() != cnt {
                    row_heap.pop();
                    continue;
                }
                if cnt == 1 && col_active[rows[i][0].0] {
                    let (q, v) = rows[i][0];
                    let cmax = column_max(&rows, &col_rows[q], &row_active, q);
                    if v.abs() >= PIVOT_THRESHOLD * cmax && v.abs() > SINGULAR_TOL {
                        choice = Some((i, q));
                    }
                }
                break;
            }

            // Column with the fewest active entries.
            let mut col_pick = None;
            while let Some(&Reverse((cnt, j))) = col_heap.peek() {
                if !col_active[j] || col_count[j] != cnt {
                    col_heap.pop();
                    continue;
                }
                col_pick = Some((cnt, j));
                break;
            }
            let Some((cnt, q)) = col_pick else { break };

            if cnt <= 1 || choice.is_none() {
                if cnt == 0 {
                    col_active[q] = false;
                    col_heap.pop();
                    singular_positions.push(q);
                    remaining -= 1;
                    continue;
                }
                // Best row in column q by row count among threshold-acceptable entries.
                let cmax = column_max(&rows, &col_rows[q], &row_active, q);
                if cmax <= SINGULAR_TOL {
                    col_active[q] = false;
                    col_heap.pop();
                    singular_positions.push(q);
                    remaining -= 1;
                    for &i in &col_rows[q] {
                        if row_active[i] {
                            rows[i].retain(|&(c, _)| c != q);
                            row_heap.push(Reverse((rows[i].len(), i)));
                        }
                    }
                    continue;
                }
                let mut best: Option<(usize, usize)> = None;
                for &i in &col_rows[q] {
                    if !row_active[i] {
                        continue;
                    }
                    if let Some(v) = entry(&rows[i], q) {
                        if v.abs() >= PIVOT_THRESHOLD * cmax {
                            let key = (rows[i].len(), i);
                            if best.map_or(true, |b| key < b) {
                                best = Some(key);
                            }
                        }
                    }
                }
                let (_, i) = best.expect("column maximum entry always qualifies");
                choice = Some((i, q));
            }

            let (p, q) = choice.unwrap();
            let diag = entry(&rows[p], q).unwrap();
            row_active[p] = false;
            col_active[q] = false;
            remaining -= 1;

            // Scatter pivot row.
            let pivot_row = std::mem::take(&mut rows[p]);
            let mut upper = Vec::with_capacity(pivot_row.len().saturating_sub(1));
            for &(c, v) in &pivot_row {
                if c != q {
                    upper.push((c, v));
                    col_count[c] -= 1;
                    col_heap.push(Reverse((col_count[c], c)));
                }
            }

            // Eliminate column q from every other active row.
            let mut lower = Vec::new();
            let candidates = std::mem::take(&mut col_rows[q]);
            for &i in &candidates {
                if !row_active[i] || mark[i] == p {
                    continue;
                }
                mark[i] = p;
                let Some(idx) = rows[i].iter().position(|&(c, _)| c == q) else {
                    continue;
                };
                let a_iq = rows[i][idx].1;
                rows[i].swap_remove(idx);
                let mult = a_iq / diag;
                lower.push((i, mult));
                if upper.is_empty() {
                    row_heap.push(Reverse((rows[i].len(), i)));
                    continue;
                }
                for (k, &(c, v)) in rows[i].iter().enumerate() {
                    scatter[c] = v;
                    slot[c] = k;
                }
                for &(c, u) in &upper {
                    if slot[c] != usize::MAX {
                        scatter[c] -= mult * u;
                    } else {
                        rows[i].push((c, -mult * u));
                        col_rows[c].push(i);
                        col_count[c] += 1;
                        col_heap.push(Reverse((col_count[c], c)));
                    }
                }
                let mut k = 0;
                while k < rows[i].len() {
                    let c = rows[i][k].0;
                    if slot[c] != usize::MAX {
                        rows[i][k].1 = scatter[c];
                        scatter[c] = 0.0;
                        slot[c] = usize::MAX;
                    }
                    k += 1;
                }
                // Drop cancelled entries.
                let before = rows[i].len();
                let mut dropped = Vec::new();
                rows[i].retain(|&(c, v)| {
                    if v.abs() < DROP_TOL {
                        dropped.push(c);
                        false
                    } else {
                        true
                    }
                });
                if rows[i].len() != before {
                    for c in dropped {
                        col_count[c] -= 1;
                        col_heap.push(Reverse((col_count[c], c)));
                    }
                }
                row_heap.push(Reverse((rows[i].len(), i)));
            }
            col_count[q] = 0;

            pivots.push(Pivot {
                row: p,
                pos: q,
                diag,
                lower,
                upper,
            });
        }

        if !singular_positions.is_empty() {
            let rows_left = (0..m).filter(|&i| row_active[i]).collect();
            return Err(Singular {
                positions: singular_positions,
                rows: rows_left,
            });
        }
        Ok(Factor {
            m,
            pivots,
            etas: Vec::new(),
            eta_nnz: 0,
        })
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// Solves `B x = b`. `b` is indexed by row on input; `x` by basis position on output.
    pub fn ftran(&self, b: &mut Vec<f64>, work: &mut Vec<f64>) {
        work.clear();
        work.resize(self.m, 0.0);
        for pv in &self.pivots {
            let v = b[pv.row];
            if v != 0.0 {
                for &(i, l) in &pv.lower {
                    b[i] -= l * v;
                }
            }
        }
        for pv in self.pivots.iter().rev() {
            let mut s = b[pv.row];
            for &(c, u) in &pv.upper {
                s -= u * work[c];
            }
            work[pv.pos] = s / pv.diag;
        }
        for eta in &self.etas {
            let xr = work[eta.pos];
            if xr != 0.0 {
                let xr = xr / eta.pivot;
                work[eta.pos] = xr;
                for &(i, a) in &eta.entries {
                    work[i] -= a * xr;
                }
            }
        }
        std::mem::swap(b, work);
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position on input; `y` by row on output.
    pub fn btran(&self, c: &mut Vec<f64>, work: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= c[i] * a;
            }
            c[eta.pos] = s / eta.pivot;
        }
        work.clear();
        work.resize(self.m, 0.0);
        for pv in &self.pivots {
            let w = c[pv.pos] / pv.diag;
            work[pv.row] = w;
            if w != 0.0 {
                for &(col, u) in &pv.upper {
                    c[col] -= u * w;
                }
            }
        }
        for pv in self.pivots.iter().rev() {
            let mut s = work[pv.row];
            for &(i, l) in &pv.lower {
                s -= l * work[i];
            }
            work[pv.row] = s;
        }
        std::mem::swap(c, work);
    }

    /// Records the replacement of the column at `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let pivot = alpha[pos];
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot,
            entries,
        });
    }
}

fn entry(row: &[(usize, f64)], col: usize) -> Option<f64> {
    row.iter().find(|&&(c, _)| c == col).map(|&(_, v)| v)
}

fn column_max(rows: &[Vec<(usize, f64)>], pattern: &[usize], active: &[bool], col: usize) -> f64 {
    let mut m = 0.0f64;
    for &i in pattern {
        if active[i] {
            if let Some(v) = entry(&rows[i], col) {
                m = m.max(v.abs());
            }
        }
    }
    m
}
