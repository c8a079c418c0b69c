//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Rows of the basis are constraint rows; columns are basis positions. Elimination uses a
//! Markowitz-style choice (sparsest column, then sparsest acceptable row) with threshold
//! partial pivoting.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Entries below this magnitude are dropped during elimination.
const DROP_TOL: f64 = 1e-14;
/// A pivot must be at least this fraction of the largest entry in its column.
const THRESHOLD: f64 = 0.1;
/// Columns whose largest remaining entry is below this are treated as dependent.
const SINGULAR_TOL: f64 = 1e-11;

/// Columns that could not be pivoted, paired with rows left without a pivot.
#[derive(Debug)]
pub(super) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Eta {
    r: usize,
    pivot: f64,
    /// Off-pivot entries of `B^-1 a_q`.
    col: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default)]
pub(super) struct Lu {
    m: usize,
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl Lu {
    /// Factors the `m x m` matrix whose column `k` is `col(k)` as (row, value) pairs.
    pub fn factor<'a>(m: usize, col: impl Fn(usize) -> &'a [(usize, f64)]) -> Result<Lu, Singular> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut count = vec![0usize; m];
        for k in 0..m {
            for &(i, v) in col(k) {
                if v.abs() > DROP_TOL {
                    rows[i].push((k, v));
                    pattern[k].push(i);
                    count[k] += 1;
                }
            }
        }
        let mut lu = Lu {
            m,
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut work = vec![0.0; m];
        let mut slot = vec![usize::MAX; m];
        let mut failed = Vec::new();

        let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..m).map(|k| Reverse((count[k], k))).collect();
        while let Some(Reverse((cnt, c))) = heap.pop() {
            if col_done[c] || cnt != count[c] {
                continue;
            }
            col_done[c] = true;
            let entry = |rows: &Vec<Vec<(usize, f64)>>, i: usize| rows[i].iter().find(|e| e.0 == c).map(|e| e.1);
            let mut max_abs: f64 = 0.0;
            for &i in &pattern[c] {
                if !row_done[i] {
                    if let Some(v) = entry(&rows, i) {
                        max_abs = max_abs.max(v.abs());
                    }
                }
            }
            if max_abs < SINGULAR_TOL {
                failed.push(c);
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for &i in &pattern[c] {
                if row_done[i] {
                    continue;
                }
                if let Some(v) = entry(&rows, i) {
                    if v.abs() >= THRESHOLD * max_abs && best.map_or(true, |(_, len)| rows[i].len() < len) {
                        best = Some((i, rows[i].len()));
                    }
                }
            }
            let p = best.expect("column has an acceptable pivot").0;
            row_done[p] = true;
            let prow = std::mem::take(&mut rows[p]);
            let pv = prow.iter().find(|e| e.0 == c).unwrap().1;
            let mut touched = Vec::new();
            for &(cc, _) in &prow {
                count[cc] -= 1;
                touched.push(cc);
            }
            let mut targets = std::mem::take(&mut pattern[c]);
            targets.sort_unstable();
            targets.dedup();
            for &i in &targets {
                if row_done[i] {
                    continue;
                }
                let Some(v) = entry(&rows, i) else { continue };
                let f = v / pv;
                lu.l_idx.push(i);
                lu.l_val.push(f);
                let row = std::mem::take(&mut rows[i]);
                let mut order = Vec::with_capacity(row.len() + prow.len());
                for &(cc, val) in &row {
                    if cc == c {
                        continue;
                    }
                    work[cc] = val;
                    slot[cc] = i;
                    order.push(cc);
                }
                for &(cc, val) in &prow {
                    if cc == c {
                        continue;
                    }
                    if slot[cc] == i {
                        work[cc] -= f * val;
                    } else {
                        work[cc] = -f * val;
                        slot[cc] = i;
                        order.push(cc);
                        pattern[cc].push(i);
                        count[cc] += 1;
                    }
                }
                let mut out = Vec::with_capacity(order.len());
                for cc in order {
                    slot[cc] = usize::MAX;
                    if work[cc].abs() > DROP_TOL {
                        out.push((cc, work[cc]));
                    } else {
                        count[cc] -= 1;
                    }
                    touched.push(cc);
                }
                rows[i] = out;
            }
            touched.sort_unstable();
            touched.dedup();
            for cc in touched {
                if !col_done[cc] {
                    heap.push(Reverse((count[cc], cc)));
                }
            }
            lu.l_start.push(lu.l_idx.len());
            lu.piv_row.push(p);
            lu.piv_pos.push(c);
            lu.piv_val.push(pv);
            for &(cc, val) in &prow {
                if cc != c {
                    lu.u_idx.push(cc);
                    lu.u_val.push(val);
                }
            }
            lu.u_start.push(lu.u_idx.len());
        }
        if failed.is_empty() {
            Ok(lu)
        } else {
            let rows = (0..m).filter(|&i| !row_done[i]).collect();
            Err(Singular { positions: failed, rows })
        }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Whether the update file has grown past the size of the factors themselves.
    pub fn is_bloated(&self) -> bool {
        self.eta_nnz > 2 * (self.l_idx.len() + self.u_idx.len() + self.m)
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row and the result by basis position.
    pub fn ftran(&self, rhs: &mut Vec<f64>) {
        let b = rhs;
        for k in 0..self.piv_row.len() {
            let bp = b[self.piv_row[k]];
            if bp != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[t]] -= self.l_val[t] * bp;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for k in (0..self.piv_row.len()).rev() {
            let mut s = b[self.piv_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * x[self.u_idx[t]];
            }
            x[self.piv_pos[k]] = s / self.piv_val[k];
        }
        for e in &self.etas {
            let xr = x[e.r] / e.pivot;
            if xr != 0.0 {
                for &(i, a) in &e.col {
                    x[i] -= a * xr;
                }
            }
            x[e.r] = xr;
        }
        *b = x;
    }

    /// Solves `B^T y = rhs`; `rhs` is indexed by basis position and the result by row.
    pub fn btran(&self, rhs: &mut Vec<f64>) {
        let d = rhs;
        for e in self.etas.iter().rev() {
            let mut s = d[e.r];
            for &(i, a) in &e.col {
                s -= a * d[i];
            }
            d[e.r] = s / e.pivot;
        }
        let mut z = vec![0.0; self.m];
        for k in 0..self.piv_row.len() {
            let zk = d[self.piv_pos[k]] / self.piv_val[k];
            z[self.piv_row[k]] = zk;
            if zk != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    d[self.u_idx[t]] -= self.u_val[t] * zk;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let mut s = 0.0;
            for t in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[t] * z[self.l_idx[t]];
            }
            z[self.piv_row[k]] -= s;
        }
        *d = z;
    }

    /// Records that position `r` now holds a column with `B^-1 a = alpha`.
    pub fn update(&mut self, r: usize, alpha: &[f64]) {
        let col = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != r && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect::<Vec<_>>();
        self.eta_nnz += col.len();
        self.etas.push(Eta {
            r,
            pivot: alpha[r],
            col,
        });
    }
}
