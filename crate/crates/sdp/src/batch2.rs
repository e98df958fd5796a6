//! Kernels for batches of 2×2 PSD blocks.
//!
//! Matrices are `[m11, m12, m22]`; the trace inner product is therefore
//! `a11 b11 + 2 a12 b12 + a22 b22`.

use nalgebra::{DMatrix, DVector};

use crate::problem::{Psd2Batch, Sym2};

type Mat2 = [[f64; 2]; 2];

fn full(s: &Sym2) -> Mat2 {
    [[s[0], s[1]], [s[1], s[2]]]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn sym_part(m: &Mat2) -> Sym2 {
    [m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]]
}

pub(crate) fn inner(a: &Sym2, b: &Sym2) -> f64 {
    a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
}

/// Inverse of a positive definite block, `None` otherwise.
pub(crate) fn inverse(s: &Sym2) -> Option<Sym2> {
    let det = s[0] * s[2] - s[1] * s[1];
    if s[0] <= 0.0 || s[2] <= 0.0 || det <= 0.0 || !det.is_finite() {
        return None;
    }
    Some([s[2] / det, -s[1] / det, s[0] / det])
}

/// Largest `α` with `S + α dS ⪰ 0` for a positive definite `S`.
pub(crate) fn max_step(s: &Sym2, ds: &Sym2) -> f64 {
    // Normalize by the diagonal of S so the determinant is well scaled.
    if s[0] <= 0.0 || s[2] <= 0.0 {
        return 0.0;
    }
    let d0 = s[0].sqrt();
    let d2 = s[2].sqrt();
    let r = s[1] / (d0 * d2);
    let a = 1.0 - r * r;
    if a <= 0.0 {
        return 0.0;
    }
    let e0 = ds[0] / s[0];
    let e1 = ds[1] / (d0 * d2);
    let e2 = ds[2] / s[2];
    // Generalized eigenvalues μ of (dS, S): a μ² − bq μ + c = 0.
    let bq = e0 + e2 - 2.0 * r * e1;
    let c = e0 * e2 - e1 * e1;
    let disc = (bq * bq - 4.0 * a * c).max(0.0);
    let sq = disc.sqrt();
    let mu_min = if bq >= 0.0 {
        let q = 0.5 * (bq + sq);
        if q == 0.0 {
            0.0
        } else {
            (q / a).min(c / q)
        }
    } else {
        let q = 0.5 * (bq - sq);
        (q / a).min(c / q)
    };
    if mu_min < 0.0 {
        -1.0 / mu_min
    } else {
        f64::INFINITY
    }
}

pub(crate) fn amax(v: &[Sym2]) -> f64 {
    v.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// Row-sparse coefficient layout: for block `k` and entry `p`, the variables
/// whose coefficient matrix has a nonzero `p` entry.
pub(crate) struct Batch2Plan {
    rows: Vec<[Vec<(usize, f64)>; 3]>,
    /// Entry `p` stored densely (blocks × variables) when most blocks share
    /// its variables; pairs of dense entries go through a matrix product.
    dense: [Option<DenseEntry>; 3],
}

struct DenseEntry {
    vars: Vec<usize>,
    coef: DMatrix<f64>,
    coef_t: DMatrix<f64>,
}

impl DenseEntry {
    fn build(rows: &[[Vec<(usize, f64)>; 3]], p: usize) -> Option<Self> {
        let mut vars: Vec<usize> = rows
            .iter()
            .flat_map(|r| r[p].iter().map(|(v, _)| *v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let nnz: usize = rows.iter().map(|r| r[p].len()).sum();
        if vars.len() < 2 || 2 * nnz < rows.len() * vars.len() {
            return None;
        }
        let mut coef = DMatrix::zeros(rows.len(), vars.len());
        for (k, r) in rows.iter().enumerate() {
            for (v, a) in &r[p] {
                let col = vars.binary_search(v).expect("collected above");
                coef[(k, col)] += a;
            }
        }
        Some(Self {
            vars,
            coef_t: coef.transpose(),
            coef,
        })
    }
}

impl Batch2Plan {
    pub(crate) fn new(batch: &Psd2Batch) -> Self {
        let rows = batch
            .terms
            .iter()
            .map(|terms| {
                let mut r: [Vec<(usize, f64)>; 3] = Default::default();
                for (v, a) in terms {
                    for p in 0..3 {
                        if a[p] != 0.0 {
                            r[p].push((*v, a[p]));
                        }
                    }
                }
                r
            })
            .collect::<Vec<_>>();
        let dense = [0, 1, 2].map(|p| DenseEntry::build(&rows, p));
        Self { rows, dense }
    }

    /// Evaluate every `C_k − Σ y_v A_kv`.
    pub(crate) fn slack(&self, constants: &[Sym2], y: &DVector<f64>) -> Vec<Sym2> {
        constants
            .iter()
            .zip(&self.rows)
            .map(|(c, rows)| {
                let mut s = *c;
                for (p, row) in rows.iter().enumerate() {
                    for (v, a) in row {
                        s[p] -= y[*v] * a;
                    }
                }
                s
            })
            .collect()
    }

    /// Subtract `Σ y_v A_kv` from `out`.
    pub(crate) fn subtract(&self, y: &DVector<f64>, out: &mut [Sym2]) {
        for (o, rows) in out.iter_mut().zip(&self.rows) {
            for (p, row) in rows.iter().enumerate() {
                for (v, a) in row {
                    o[p] -= y[*v] * a;
                }
            }
        }
    }

    /// `out_v += Σ_k ⟨A_kv, K_k⟩`.
    pub(crate) fn traces(&self, k: &[Sym2], out: &mut DVector<f64>) {
        for (kk, rows) in k.iter().zip(&self.rows) {
            let w = [kk[0], 2.0 * kk[1], kk[2]];
            for (p, row) in rows.iter().enumerate() {
                for (v, a) in row {
                    out[*v] += a * w[p];
                }
            }
        }
    }

    /// Add `tr(A_i X A_j Z⁻¹)` for every pair of variables.
    pub(crate) fn add_schur(&self, x: &[Sym2], zinv: &[Sym2], schur: &mut DMatrix<f64>) {
        // h_k[p][q] = tr(E_p X_k E_q Z_k⁻¹), symmetric in (p, q).
        let basis = [
            full(&[1.0, 0.0, 0.0]),
            full(&[0.0, 1.0, 0.0]),
            full(&[0.0, 0.0, 1.0]),
        ];
        let h: Vec<[[f64; 3]; 3]> = x
            .iter()
            .zip(zinv)
            .map(|(xk, zk)| {
                let xm = full(xk);
                let zm = full(zk);
                let mut h = [[0.0; 3]; 3];
                for p in 0..3 {
                    let ex = mul(&basis[p], &xm);
                    for q in 0..3 {
                        let t = mul(&mul(&ex, &basis[q]), &zm);
                        h[p][q] = t[0][0] + t[1][1];
                    }
                }
                h
            })
            .collect();
        for p in 0..3 {
            for q in 0..3 {
                if let (Some(dp), Some(dq)) = (&self.dense[p], &self.dense[q]) {
                    let mut weighted = dq.coef.clone();
                    for (k, mut row) in weighted.row_iter_mut().enumerate() {
                        row *= h[k][p][q];
                    }
                    let prod = &dp.coef_t * &weighted;
                    for (b, &vb) in dq.vars.iter().enumerate() {
                        for (a, &va) in dp.vars.iter().enumerate() {
                            schur[(va, vb)] += prod[(a, b)];
                        }
                    }
                    continue;
                }
                let m = schur.nrows();
                let data = schur.as_mut_slice();
                for (hk, rows) in h.iter().zip(&self.rows) {
                    let hpq = hk[p][q];
                    if hpq == 0.0 {
                        continue;
                    }
                    for (i, ai) in &rows[p] {
                        let f = hpq * ai;
                        let col = &mut data[i * m..(i + 1) * m];
                        for (j, aj) in &rows[q] {
                            col[*j] += f * aj;
                        }
                    }
                }
            }
        }
    }
}

/// `(X R + P) Z⁻¹ − target Z⁻¹`, symmetrized, where `P` is an optional
/// second-order product.
pub(crate) fn hkm_rhs(
    x: &Sym2,
    r: &Sym2,
    extra: Option<(&Sym2, &Sym2)>,
    zinv: &Sym2,
    target: f64,
) -> Sym2 {
    let zi = full(zinv);
    let mut inner = mul(&full(x), &full(r));
    if let Some((dx, dz)) = extra {
        let p = mul(&full(dx), &full(dz));
        for a in 0..2 {
            for b in 0..2 {
                inner[a][b] += p[a][b];
            }
        }
    }
    let k = sym_part(&mul(&inner, &zi));
    [
        k[0] - target * zinv[0],
        k[1] - target * zinv[1],
        k[2] - target * zinv[2],
    ]
}

/// `target Z⁻¹ − X − (X ΔZ + P) Z⁻¹`, symmetrized.
pub(crate) fn hkm_dx(
    x: &Sym2,
    dz: &Sym2,
    extra: Option<(&Sym2, &Sym2)>,
    zinv: &Sym2,
    target: f64,
) -> Sym2 {
    let k = hkm_rhs(x, dz, extra, zinv, 0.0);
    [
        target * zinv[0] - x[0] - k[0],
        target * zinv[1] - x[1] - k[1],
        target * zinv[2] - x[2] - k[2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_matches_bisection() {
        let s = [2.0, 0.3, 1.0];
        let ds = [-1.0, 0.8, 0.2];
        let a = max_step(&s, &ds);
        let psd = |t: f64| {
            let m = [s[0] + t * ds[0], s[1] + t * ds[1], s[2] + t * ds[2]];
            m[0] >= 0.0 && m[2] >= 0.0 && m[0] * m[2] - m[1] * m[1] >= -1e-14
        };
        assert!(psd(a * (1.0 - 1e-9)));
        assert!(!psd(a * (1.0 + 1e-6)));
        assert_eq!(max_step(&s, &[1.0, 0.0, 1.0]), f64::INFINITY);
    }

    #[test]
    fn inverse_roundtrip() {
        let s = [3.0, -1.0, 2.0];
        let i = inverse(&s).unwrap();
        let p = mul(&full(&s), &full(&i));
        assert!(
            (p[0][0] - 1.0).abs() < 1e-14 && p[0][1].abs() < 1e-14 && (p[1][1] - 1.0).abs() < 1e-14
        );
        assert!(inverse(&[1.0, 2.0, 1.0]).is_none());
    }
}
