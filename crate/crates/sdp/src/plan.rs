//! Per-block precomputation: every low-rank term of a block is stacked into one
//! factor matrix so that traces, combinations and Schur-complement entries are
//! batched into a few large products instead of one small product per term.

use nalgebra::{DMatrix, DMatrixViewMut, DVector};

use crate::problem::{PsdBlock, Term};

pub(crate) struct LowRankEntry {
    var: usize,
    offset: usize,
    rank: usize,
    core: DMatrix<f64>,
}

pub(crate) struct BlockPlan {
    n: usize,
    /// `n × R`, the factors of all low-rank terms side by side.
    factors: DMatrix<f64>,
    factors_t: DMatrix<f64>,
    lowrank: Vec<LowRankEntry>,
    /// `(variable, index into PsdBlock::terms)` for dense and diagonal terms.
    others: Vec<(usize, usize)>,
    /// `others.len() × n²`, row `j` is `vec(A_j)` of `others[j]`.
    others_vec_t: DMatrix<f64>,
}

/// Schur-complement ingredients for one block at the current iterate.
pub(crate) struct Prepared {
    /// `X F`.
    px: DMatrix<f64>,
    /// `Z⁻¹ F`.
    pz: DMatrix<f64>,
    /// `vec(X A Z⁻¹)` for each entry of `others`, stacked as columns.
    explicit: DMatrix<f64>,
}

impl BlockPlan {
    pub fn new(blk: &PsdBlock) -> Self {
        let n = blk.dim();
        let total: usize = blk
            .terms
            .iter()
            .map(|(_, t)| match t {
                Term::LowRank { factor, .. } => factor.ncols(),
                _ => 0,
            })
            .sum();
        let mut factors = DMatrix::zeros(n, total);
        let mut lowrank = Vec::new();
        let mut others = Vec::new();
        let mut offset = 0;
        for (idx, (v, t)) in blk.terms.iter().enumerate() {
            match t {
                Term::LowRank { factor, core } => {
                    let rank = factor.ncols();
                    factors.columns_mut(offset, rank).copy_from(factor);
                    lowrank.push(LowRankEntry {
                        var: *v,
                        offset,
                        rank,
                        core: core.clone(),
                    });
                    offset += rank;
                }
                _ => others.push((*v, idx)),
            }
        }
        let mut others_vec = DMatrix::zeros(n * n, others.len());
        for (j, &(_, idx)) in others.iter().enumerate() {
            others_vec
                .column_mut(j)
                .copy_from_slice(blk.terms[idx].1.to_dense().as_slice());
        }
        Self {
            n,
            factors_t: factors.transpose(),
            factors,
            lowrank,
            others,
            others_vec_t: others_vec.transpose(),
        }
    }

    /// `F · blockdiag(c_v C_v)`.
    fn scaled_factors(&self, coef: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let mut fc = DMatrix::zeros(self.n, self.factors.ncols());
        for e in &self.lowrank {
            let c = coef(e.var);
            if c != 0.0 {
                let f = self.factors.columns(e.offset, e.rank);
                fc.columns_mut(e.offset, e.rank).gemm(c, &f, &e.core, 0.0);
            }
        }
        fc
    }

    /// `out += scale · Σ_v y_v A_v`.
    pub fn accumulate(&self, blk: &PsdBlock, y: &DVector<f64>, scale: f64, out: &mut DMatrix<f64>) {
        if !self.lowrank.is_empty() {
            let fc = self.scaled_factors(|v| scale * y[v]);
            out.gemm(1.0, &fc, &self.factors_t, 1.0);
        }
        for &(v, idx) in &self.others {
            blk.terms[idx].1.add_scaled_to(scale * y[v], out);
        }
    }

    /// `out[v] += tr(A_v K)` for symmetric `K`.
    pub fn traces(&self, blk: &PsdBlock, k: &DMatrix<f64>, out: &mut DVector<f64>) {
        if !self.lowrank.is_empty() {
            let kf = k * &self.factors;
            for e in &self.lowrank {
                let f = self.factors.columns(e.offset, e.rank);
                let kfe = kf.columns(e.offset, e.rank);
                for a in 0..e.rank {
                    for b in 0..e.rank {
                        out[e.var] += e.core[(a, b)] * f.column(a).dot(&kfe.column(b));
                    }
                }
            }
        }
        for &(v, idx) in &self.others {
            out[v] += blk.terms[idx].1.trace_with(k);
        }
    }

    pub fn prepare(&self, blk: &PsdBlock, x: &DMatrix<f64>, zinv: &DMatrix<f64>) -> Prepared {
        let n = self.n;
        let mut explicit = DMatrix::zeros(n * n, self.others.len());
        let mut left = DMatrix::zeros(n, n);
        for (j, &(_, idx)) in self.others.iter().enumerate() {
            match &blk.terms[idx].1 {
                Term::Dense(a) => left.gemm(1.0, x, a, 0.0),
                Term::Diagonal(d) => {
                    left.copy_from(x);
                    for (c, mut col) in left.column_iter_mut().enumerate() {
                        col *= d[c];
                    }
                }
                Term::LowRank { .. } => unreachable!("low-rank terms are batched"),
            }
            let slot = &mut explicit.as_mut_slice()[j * n * n..(j + 1) * n * n];
            let mut out = DMatrixViewMut::from_slice(slot, n, n);
            out.gemm(1.0, &left, zinv, 0.0);
        }
        Prepared {
            px: x * &self.factors,
            pz: zinv * &self.factors,
            explicit,
        }
    }

    /// Add `tr(A_i X A_k Z⁻¹)` for every pair of terms in this block to `schur`.
    pub fn add_schur(&self, blk: &PsdBlock, prep: &Prepared, schur: &mut DMatrix<f64>) {
        let r = self.factors.ncols();
        if r > 0 {
            // tr(C_a F_aᵀXF_b C_b F_bᵀZ⁻¹F_a) is the block sum of (CᴮMX) ∘ (CᴮMZ)ᵀ.
            let mx = &self.factors_t * &prep.px;
            let mz = &self.factors_t * &prep.pz;
            let mut p = DMatrix::zeros(r, r);
            let mut q = DMatrix::zeros(r, r);
            for e in &self.lowrank {
                p.rows_mut(e.offset, e.rank)
                    .gemm(1.0, &e.core, &mx.rows(e.offset, e.rank), 0.0);
                q.rows_mut(e.offset, e.rank)
                    .gemm(1.0, &e.core, &mz.rows(e.offset, e.rank), 0.0);
            }
            for (ia, a) in self.lowrank.iter().enumerate() {
                for (ib, b) in self.lowrank.iter().enumerate().skip(ia) {
                    let mut val = 0.0;
                    for s in a.offset..a.offset + a.rank {
                        for t in b.offset..b.offset + b.rank {
                            val += p[(s, t)] * q[(t, s)];
                        }
                    }
                    schur[(a.var, b.var)] += val;
                    if ia != ib {
                        schur[(b.var, a.var)] += val;
                    }
                }
            }
            // Mixed pairs: tr(A · X F_b C_b F_bᵀ Z⁻¹).
            let pxc = &prep.px * self.block_core_diag();
            for &(va, idx) in &self.others {
                let weighted: DMatrix<f64> = match &blk.terms[idx].1 {
                    Term::Diagonal(d) => {
                        let mut w = pxc.clone();
                        for (row, dv) in d.iter().enumerate() {
                            w.row_mut(row).scale_mut(*dv);
                        }
                        w
                    }
                    Term::Dense(a) => a * &pxc,
                    Term::LowRank { .. } => unreachable!(),
                };
                for b in &self.lowrank {
                    let mut val = 0.0;
                    for s in b.offset..b.offset + b.rank {
                        val += weighted.column(s).dot(&prep.pz.column(s));
                    }
                    schur[(va, b.var)] += val;
                    schur[(b.var, va)] += val;
                }
            }
        }
        if !self.others.is_empty() {
            // tr(A_a G_b) = ⟨vec A_a, vec G_b⟩ for symmetric A_a.
            let pairs = &self.others_vec_t * &prep.explicit;
            for (ia, &(va, _)) in self.others.iter().enumerate() {
                for (ib, &(vb, _)) in self.others.iter().enumerate() {
                    schur[(va, vb)] += pairs[(ia, ib)];
                }
            }
        }
    }

    /// `blockdiag(C_v)` as an `R × R` matrix.
    fn block_core_diag(&self) -> DMatrix<f64> {
        let r = self.factors.ncols();
        let mut c = DMatrix::zeros(r, r);
        for e in &self.lowrank {
            c.view_mut((e.offset, e.offset), (e.rank, e.rank))
                .copy_from(&e.core);
        }
        c
    }
}
