//! Problem data for the LMI form accepted by the solver.

use nalgebra::{DMatrix, DVector};

use crate::SdpError;

/// A symmetric coefficient matrix multiplying one scalar variable inside a PSD block.
///
/// The low-rank form `factor · core · factorᵀ` lets arrow-shaped and rank-one
/// couplings enter the Schur complement at `O(n r²)` cost instead of `O(n³)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
    LowRank {
        factor: DMatrix<f64>,
        core: DMatrix<f64>,
    },
}

impl Term {
    /// Rank-one term `v vᵀ`.
    pub fn rank_one(v: DVector<f64>) -> Self {
        let n = v.len();
        Term::LowRank {
            factor: DMatrix::from_column_slice(n, 1, v.as_slice()),
            core: DMatrix::from_element(1, 1, 1.0),
        }
    }

    /// Symmetric "arrow" term `u eₖᵀ + eₖ uᵀ` scaled by `½`, plus `diag · eₖ eₖᵀ`.
    ///
    /// This is the shape of a variable entering only the last row/column of an LMI.
    pub fn arrow(u: &DVector<f64>, pivot: usize, diag: f64) -> Self {
        let n = u.len();
        let mut factor = DMatrix::zeros(n, 2);
        factor.set_column(0, u);
        factor[(pivot, 1)] = 1.0;
        let core = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, diag]);
        Term::LowRank { factor, core }
    }

    pub fn dim(&self) -> usize {
        match self {
            Term::Dense(a) => a.nrows(),
            Term::Diagonal(d) => d.len(),
            Term::LowRank { factor, .. } => factor.nrows(),
        }
    }

    /// Materialize as a dense symmetric matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        self.add_scaled_to(1.0, &mut out);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            Term::Dense(a) => a.norm(),
            Term::Diagonal(d) => d.norm(),
            Term::LowRank { factor, core } => {
                let gram = factor.transpose() * factor;
                let m = core * &gram;
                (m.dot(&m.transpose())).max(0.0).sqrt()
            }
        }
    }

    pub(crate) fn add_scaled_to(&self, coef: f64, out: &mut DMatrix<f64>) {
        if coef == 0.0 {
            return;
        }
        match self {
            Term::Dense(a) => *out += a * coef,
            Term::Diagonal(d) => {
                for (p, dp) in d.iter().enumerate() {
                    out[(p, p)] += coef * dp;
                }
            }
            Term::LowRank { factor, core } => {
                let left = factor * (core * coef);
                out.gemm(1.0, &left, &factor.transpose(), 1.0);
            }
        }
    }

    /// `tr(A K)` for a symmetric `K`.
    pub(crate) fn trace_with(&self, k: &DMatrix<f64>) -> f64 {
        match self {
            Term::Dense(a) => a.dot(k),
            Term::Diagonal(d) => d.iter().enumerate().map(|(p, dp)| dp * k[(p, p)]).sum(),
            Term::LowRank { factor, core } => {
                let kv = k * factor;
                let inner = factor.transpose() * kv;
                core.dot(&inner.transpose())
            }
        }
    }

    fn is_symmetric(&self, tol: f64) -> bool {
        match self {
            Term::Dense(a) => a.is_square() && (a - a.transpose()).amax() <= tol * (1.0 + a.amax()),
            Term::Diagonal(_) => true,
            Term::LowRank { core, .. } => {
                core.is_square() && (core - core.transpose()).amax() <= tol * (1.0 + core.amax())
            }
        }
    }
}

/// One PSD cone constraint `constant − Σ y_v · term ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, Term)>,
}

impl PsdBlock {
    pub fn new(constant: DMatrix<f64>) -> Self {
        Self {
            constant,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn push(&mut self, var: usize, term: Term) -> &mut Self {
        self.terms.push((var, term));
        self
    }

    /// Evaluate `constant − Σ y_v · term`.
    pub fn slack(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut z = self.constant.clone();
        for (v, t) in &self.terms {
            t.add_scaled_to(-y[*v], &mut z);
        }
        z
    }
}

/// Componentwise inequalities `constant − coefficients · y ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBlock {
    pub constant: DVector<f64>,
    /// One row per inequality, one column per variable.
    pub coefficients: DMatrix<f64>,
}

impl LinearBlock {
    pub fn new(n_vars: usize) -> Self {
        Self {
            constant: DVector::zeros(0),
            coefficients: DMatrix::zeros(0, n_vars),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.len()
    }

    /// Append the inequality `coeffs · y ≤ bound`.
    pub fn push_le(&mut self, coeffs: &[f64], bound: f64) -> &mut Self {
        let rows = self.dim();
        let cols = self.coefficients.ncols();
        assert_eq!(coeffs.len(), cols, "coefficient row has wrong length");
        let coefficients = std::mem::replace(&mut self.coefficients, DMatrix::zeros(0, 0));
        self.coefficients = coefficients.insert_row(rows, 0.0);
        self.coefficients.row_mut(rows).copy_from_slice(coeffs);
        let constant = std::mem::replace(&mut self.constant, DVector::zeros(0));
        self.constant = constant.push(bound);
        self
    }

    pub fn slack(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.constant - &self.coefficients * y
    }
}

/// Symmetric 2×2 matrix stored as `[m11, m12, m22]`.
pub type Sym2 = [f64; 3];

/// Many independent 2×2 PSD constraints `C_k − Σ y_v A_kv ⪰ 0`.
///
/// Each block is a rotated second-order cone in disguise; batching them keeps
/// the per-block overhead to a handful of flops.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Psd2Batch {
    pub constants: Vec<Sym2>,
    /// Sparse coefficient list for each block.
    pub terms: Vec<Vec<(usize, Sym2)>>,
}

impl Psd2Batch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    pub fn push_block(&mut self, constant: Sym2, terms: Vec<(usize, Sym2)>) -> &mut Self {
        self.constants.push(constant);
        self.terms.push(terms);
        self
    }

    /// Evaluate every `C_k − Σ y_v A_kv`.
    pub fn slack(&self, y: &DVector<f64>) -> Vec<Sym2> {
        self.constants
            .iter()
            .zip(&self.terms)
            .map(|(c, terms)| {
                let mut s = *c;
                for (v, a) in terms {
                    for p in 0..3 {
                        s[p] -= y[*v] * a[p];
                    }
                }
                s
            })
            .collect()
    }
}

/// `maximize objectiveᵀ y` subject to every block.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub objective: DVector<f64>,
    pub psd_blocks: Vec<PsdBlock>,
    pub psd2_batches: Vec<Psd2Batch>,
    pub linear_blocks: Vec<LinearBlock>,
}

impl LmiProblem {
    pub fn new(objective: DVector<f64>) -> Self {
        Self {
            objective,
            psd_blocks: Vec::new(),
            psd2_batches: Vec::new(),
            linear_blocks: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let m = self.n_vars();
        if m == 0 {
            return Err(SdpError::InvalidProblem("no variables".into()));
        }
        if self.psd_blocks.is_empty()
            && self.linear_blocks.is_empty()
            && self.psd2_batches.iter().all(|b| b.is_empty())
        {
            return Err(SdpError::InvalidProblem("no constraint blocks".into()));
        }
        for (j, b) in self.psd_blocks.iter().enumerate() {
            let n = b.dim();
            if n == 0 || !b.constant.is_square() {
                return Err(SdpError::InvalidProblem(format!(
                    "psd block {j}: constant must be square and nonempty"
                )));
            }
            if (&b.constant - b.constant.transpose()).amax() > 1e-9 * (1.0 + b.constant.amax()) {
                return Err(SdpError::InvalidProblem(format!(
                    "psd block {j}: constant is not symmetric"
                )));
            }
            for (v, t) in &b.terms {
                if *v >= m {
                    return Err(SdpError::InvalidProblem(format!(
                        "psd block {j}: variable index {v} out of range"
                    )));
                }
                if t.dim() != n {
                    return Err(SdpError::InvalidProblem(format!(
                        "psd block {j}: term for variable {v} has dimension {} (expected {n})",
                        t.dim()
                    )));
                }
                if !t.is_symmetric(1e-9) {
                    return Err(SdpError::InvalidProblem(format!(
                        "psd block {j}: term for variable {v} is not symmetric"
                    )));
                }
            }
        }
        for (j, b) in self.linear_blocks.iter().enumerate() {
            if b.coefficients.ncols() != m || b.coefficients.nrows() != b.dim() {
                return Err(SdpError::InvalidProblem(format!(
                    "linear block {j}: coefficient matrix shape mismatch"
                )));
            }
        }
        for (j, b) in self.psd2_batches.iter().enumerate() {
            if b.constants.len() != b.terms.len() {
                return Err(SdpError::InvalidProblem(format!(
                    "2x2 batch {j}: constants and term lists differ in length"
                )));
            }
            for terms in &b.terms {
                for (v, a) in terms {
                    if *v >= m {
                        return Err(SdpError::InvalidProblem(format!(
                            "2x2 batch {j}: variable index {v} out of range"
                        )));
                    }
                    if a.iter().any(|x| !x.is_finite()) {
                        return Err(SdpError::InvalidProblem(format!(
                            "2x2 batch {j}: non-finite coefficient"
                        )));
                    }
                }
            }
            if b.constants.iter().flatten().any(|x| !x.is_finite()) {
                return Err(SdpError::InvalidProblem(format!(
                    "2x2 batch {j}: non-finite constant"
                )));
            }
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self
                .psd_blocks
                .iter()
                .all(|b| b.constant.iter().all(|v| v.is_finite()))
            && self.linear_blocks.iter().all(|b| {
                b.constant.iter().all(|v| v.is_finite())
                    && b.coefficients.iter().all(|v| v.is_finite())
            });
        if !finite {
            return Err(SdpError::InvalidProblem("non-finite problem data".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_lowrank() -> Term {
        Term::LowRank {
            factor: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -2.0, 0.5, 0.3, 1.0]),
            core: DMatrix::from_row_slice(2, 2, &[0.7, -0.2, -0.2, 1.5]),
        }
    }

    #[test]
    fn lowrank_norm_and_trace_match_dense() {
        let t = sample_lowrank();
        let dense = t.to_dense();
        assert_relative_eq!(t.frobenius_norm(), dense.norm(), epsilon = 1e-12);
        let k = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.3, 0.1, 1.0, -0.4, 0.3, -0.4, 0.5]);
        assert_relative_eq!(t.trace_with(&k), (dense * &k).trace(), epsilon = 1e-12);
    }

    #[test]
    fn arrow_term_shape() {
        let u = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let dense = Term::arrow(&u, 2, 3.0).to_dense();
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.5, 1.0, 3.0]);
        assert_relative_eq!(dense, expected, epsilon = 1e-15);
    }

    #[test]
    fn validate_rejects_bad_dimensions() {
        let mut p = LmiProblem::new(DVector::from_element(1, 1.0));
        let mut blk = PsdBlock::new(DMatrix::identity(2, 2));
        blk.push(0, Term::Dense(DMatrix::identity(3, 3)));
        p.psd_blocks.push(blk);
        assert!(p.validate().is_err());
    }

    #[test]
    fn linear_block_push() {
        let mut l = LinearBlock::new(2);
        l.push_le(&[1.0, 0.0], 1.0).push_le(&[1.0, 1.0], 3.0);
        assert_eq!(l.dim(), 2);
        let s = l.slack(&DVector::from_vec(vec![0.5, 0.5]));
        assert_relative_eq!(s, DVector::from_vec(vec![0.5, 2.0]));
    }
}
