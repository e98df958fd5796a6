//! Assembly of the robust LMI and the enumeration program in the solver's
//! `maximize bᵀy s.t. C − Σ yᵢAᵢ ⪰ 0` form.
//!
//! The covariance is parametrized as `W = P·Σ w̃ᵢEᵢ` over a real basis of the
//! Hermitian matrices, so every functional of `W` stays complex-exact and only
//! the cone `W ⪰ 0` goes through the real embedding.
//!
//! The robust block is written in the eigenbasis `U` of `Ā = BᵀQ_PB`, with the
//! ball mapped to the unit ball and a diagonal rescaling `S` that caps the
//! curvature entries at one. With `Λ' = r²Λ/τ`, `S = diag(1/√max(1, Λ'))`,
//! `t̃ = t/τ` and `λ̃ = λr²/τ` the block is
//!
//! ```text
//! [ S(λ̃I + Λ')S              ½(r/τ)·SUᵀBᵀ(f_P + g) ]
//! [ ½(r/τ)·(f_P + g)ᵀBUS     (C_P + p̄ᵀg)/τ − t̃ − λ̃ ]  ⪰ 0,
//! ```
//!
//! a congruence of the original, so feasibility and the optimum are unchanged.
//!
//! Every coefficient of that block is an arrow matrix (diagonal plus the last
//! row and column). An arrow matrix `[[D, h], [hᵀ, c]]` with diagonal `D` is PSD
//! exactly when there are `σ_k` with `[[d_k, h_k], [h_k, σ_k]] ⪰ 0` and
//! `Σ σ_k ≤ c`, so [`LmiForm::Split`] replaces the `N × N` block by `N − 1`
//! independent 2×2 cones and one linear row.

use lmi_sdp::{LinearBlock, LmiProblem, Psd2Batch, PsdBlock, Solution, Term};
use nalgebra::{DMatrix, DVector};

use super::{clean_covariance, LmiForm, RobustSolution};
use crate::array_model::{realify_unchecked, RadarScene};
use crate::fisher_pcrb::pcrb_from_information;
use crate::prior_pdf::ErrorVector;
use crate::quad_model::QuadraticPcrbModel;
use crate::{CMatrix, Error, Result, C64};

/// Real basis `{E_pp} ∪ {E_pq + E_qp} ∪ {j(E_pq − E_qp)}` of `n × n` Hermitian matrices.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n: usize,
    /// `(p, q, kind)` with kind 0 diagonal, 1 symmetric, 2 antisymmetric imaginary.
    index: Vec<(usize, usize, u8)>,
}

impl HermitianBasis {
    pub fn new(n: usize) -> Self {
        let mut index = Vec::with_capacity(n * n);
        for p in 0..n {
            index.push((p, p, 0));
        }
        for p in 0..n {
            for q in p + 1..n {
                index.push((p, q, 1));
                index.push((p, q, 2));
            }
        }
        Self { n, index }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn element(&self, i: usize) -> CMatrix {
        let (p, q, kind) = self.index[i];
        let mut e = CMatrix::zeros(self.n, self.n);
        match kind {
            0 => e[(p, p)] = C64::new(1.0, 0.0),
            1 => {
                e[(p, q)] = C64::new(1.0, 0.0);
                e[(q, p)] = C64::new(1.0, 0.0);
            }
            _ => {
                e[(p, q)] = C64::new(0.0, 1.0);
                e[(q, p)] = C64::new(0.0, -1.0);
            }
        }
        e
    }

    /// `tr(G Eᵢ)` for Hermitian `G`, for every basis element.
    pub fn traces(&self, g: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.index.iter().map(|&(p, q, kind)| match kind {
                0 => g[(p, p)].re,
                1 => 2.0 * g[(p, q)].re,
                _ => 2.0 * g[(p, q)].im,
            }),
        )
    }

    /// `Σ cᵢEᵢ`.
    pub fn combine(&self, c: &[f64]) -> CMatrix {
        let mut w = CMatrix::zeros(self.n, self.n);
        for (&(p, q, kind), &v) in self.index.iter().zip(c) {
            match kind {
                0 => w[(p, p)] += C64::new(v, 0.0),
                1 => {
                    w[(p, q)] += C64::new(v, 0.0);
                    w[(q, p)] += C64::new(v, 0.0);
                }
                _ => {
                    w[(p, q)] += C64::new(0.0, v);
                    w[(q, p)] += C64::new(0.0, -v);
                }
            }
        }
        w
    }

    /// Coefficients of a Hermitian `W` in this basis.
    pub fn coefficients(&self, w: &CMatrix) -> Vec<f64> {
        self.index
            .iter()
            .map(|&(p, q, kind)| match kind {
                0 => w[(p, p)].re,
                1 => w[(p, q)].re,
                _ => w[(p, q)].im,
            })
            .collect()
    }

    fn trace_row(&self) -> Vec<f64> {
        self.index
            .iter()
            .map(|&(_, _, k)| if k == 0 { 1.0 } else { 0.0 })
            .collect()
    }

    /// Block `R(W) ⪰ 0` with `W = Σ yᵢEᵢ` on variables `0..len`.
    fn psd_block(&self) -> PsdBlock {
        let mut blk = PsdBlock::new(DMatrix::zeros(2 * self.n, 2 * self.n));
        for i in 0..self.len() {
            blk.push(i, Term::Dense(-realify_unchecked(&self.element(i))));
        }
        blk
    }
}

/// Columns `g(P·Eᵢ)` for every basis element, an `N × n²` matrix.
fn sensing_columns(model: &QuadraticPcrbModel, basis: &HermitianBasis, power: f64) -> DMatrix<f64> {
    let n = model.n_points();
    let mut out = DMatrix::zeros(n, basis.len());
    for (k, g) in model.gains.iter().enumerate() {
        let row = basis.traces(&g.value) * (model.sensing_scale * power);
        out.set_row(k, &row.transpose());
    }
    out
}

/// `τ = λ_max(A)·P + C_P`, the nominal optimum, used as the objective scale.
fn objective_scale(model: &QuadraticPcrbModel, power: f64) -> f64 {
    let top = model.nominal_gain().symmetric_eigenvalues().max();
    let tau = top.max(0.0) * power + model.c_p;
    if tau > 0.0 && tau.is_finite() {
        tau
    } else {
        1.0
    }
}

fn recover_covariance(basis: &HermitianBasis, y: &DVector<f64>, power: f64) -> CMatrix {
    basis.combine(&y.as_slice()[..basis.len()]) * C64::new(power, 0.0)
}

pub(super) struct RobustLmi {
    pub problem: LmiProblem,
    basis: HermitianBasis,
    tau: f64,
    radius: f64,
}

impl RobustLmi {
    pub fn assemble(model: &QuadraticPcrbModel, scene: &RadarScene, form: LmiForm) -> Result<Self> {
        if model.n_tx() != scene.n_tx {
            return Err(Error::InvalidInput(
                "model and scene disagree on N_T".into(),
            ));
        }
        let power = scene.power_budget;
        let basis = HermitianBasis::new(scene.n_tx);
        let nw = basis.len();
        let (it, il) = (nw, nw + 1);
        let r = model.ball_radius;
        let tau = objective_scale(model, power);
        let sp = model.reduced_spectrum();
        let m = sp.eigenvalues.len();

        let lam_p = sp.eigenvalues.map(|v| r * r * v / tau);
        let s = lam_p.map(|v| 1.0 / v.max(1.0).sqrt());
        // Maps an N-vector x to (r/τ)·SUᵀBᵀx.
        let proj = |x: &DMatrix<f64>| -> DMatrix<f64> {
            let mut y = sp.eigenvectors.transpose() * (model.basis.transpose() * x);
            for k in 0..m {
                y.row_mut(k).scale_mut(s[k] * r / tau);
            }
            y
        };

        let f_cols = DMatrix::from_column_slice(model.n_points(), 1, model.f_p.as_slice());
        let hf = proj(&f_cols);
        let gcols = sensing_columns(model, &basis, power);
        let hg = proj(&gcols);
        let pg = model.p_bar.density().transpose() * &gcols / tau;

        let n_vars = match form {
            LmiForm::Dense => nw + 2,
            LmiForm::Split => nw + 2 + m,
        };
        let mut objective = DVector::zeros(n_vars);
        objective[it] = 1.0;
        let mut problem = LmiProblem::new(objective);
        let mut lin = LinearBlock::new(n_vars);
        match form {
            LmiForm::Dense => {
                let mut c = DMatrix::zeros(m + 1, m + 1);
                for k in 0..m {
                    c[(k, k)] = s[k] * s[k] * lam_p[k];
                    c[(k, m)] = 0.5 * hf[(k, 0)];
                    c[(m, k)] = 0.5 * hf[(k, 0)];
                }
                c[(m, m)] = model.c_p / tau;
                let mut blk = PsdBlock::new(c);
                for i in 0..nw {
                    let h = -hg.column(i).into_owned();
                    let mut u = DVector::zeros(m + 1);
                    u.rows_mut(0, m).copy_from(&h);
                    blk.push(i, Term::arrow(&u, m, -pg[(0, i)]));
                }
                let mut e = DVector::zeros(m + 1);
                e[m] = 1.0;
                blk.push(it, Term::rank_one(e));
                let mut lam_diag = s.map(|v| -v * v).insert_row(m, 0.0);
                lam_diag[m] = 1.0;
                blk.push(il, Term::Diagonal(lam_diag));
                problem.psd_blocks.push(blk);
            }
            LmiForm::Split => {
                // Variables nw + 2 + k are the σ_k.
                let mut batch = Psd2Batch::new();
                for k in 0..m {
                    let mut terms = Vec::with_capacity(nw + 2);
                    for i in 0..nw {
                        terms.push((i, [0.0, -0.5 * hg[(k, i)], 0.0]));
                    }
                    terms.push((il, [-s[k] * s[k], 0.0, 0.0]));
                    terms.push((nw + 2 + k, [0.0, 0.0, -1.0]));
                    batch.push_block([s[k] * s[k] * lam_p[k], 0.5 * hf[(k, 0)], 0.0], terms);
                }
                problem.psd2_batches.push(batch);
                // Σ σ_k + t̃ + λ̃ − Σ w̃ᵢ p̄ᵀg(PEᵢ)/τ ≤ C_P/τ
                let mut row = vec![1.0; n_vars];
                for i in 0..nw {
                    row[i] = -pg[(0, i)];
                }
                lin.push_le(&row, model.c_p / tau);
            }
        }
        problem.psd_blocks.push(basis.psd_block());
        let mut tr = basis.trace_row();
        tr.resize(n_vars, 0.0);
        lin.push_le(&tr, 1.0);
        let mut lam_row = vec![0.0; n_vars];
        lam_row[il] = -1.0;
        lin.push_le(&lam_row, 0.0);
        problem.linear_blocks.push(lin);
        problem.validate()?;
        Ok(Self {
            problem,
            basis,
            tau,
            radius: r,
        })
    }

    pub fn recover(&self, sol: &Solution, scene: &RadarScene) -> Result<RobustSolution> {
        let nw = self.basis.len();
        let power = scene.power_budget;
        let w = clean_covariance(&recover_covariance(&self.basis, &sol.y, power), power);
        let t = sol.y[nw] * self.tau;
        let lambda = (sol.y[nw + 1] * self.tau / (self.radius * self.radius)).max(0.0);
        Ok(RobustSolution {
            w_star: w,
            t_star: t,
            lambda_star: lambda,
            status: sol.status,
            pcrb_star: pcrb_from_information(t).map_or(f64::INFINITY, |v| v.value),
            residuals: Some(sol.residuals),
            iterations: sol.iterations,
        })
    }
}

pub(super) struct EnumerationLp {
    pub problem: LmiProblem,
    basis: HermitianBasis,
    tau: f64,
}

impl EnumerationLp {
    pub fn assemble(
        model: &QuadraticPcrbModel,
        scene: &RadarScene,
        samples: &[ErrorVector],
    ) -> Result<Self> {
        if model.n_tx() != scene.n_tx {
            return Err(Error::InvalidInput(
                "model and scene disagree on N_T".into(),
            ));
        }
        let power = scene.power_budget;
        let basis = HermitianBasis::new(scene.n_tx);
        let nw = basis.len();
        let it = nw;
        let tau = objective_scale(model, power);
        let gcols = sensing_columns(model, &basis, power);
        let r = model.curvature_factor();

        let mut objective = DVector::zeros(nw + 1);
        objective[it] = 1.0;
        let mut problem = LmiProblem::new(objective);
        problem.psd_blocks.push(basis.psd_block());
        let mut lin = LinearBlock::new(nw + 1);
        let mut tr = basis.trace_row();
        tr.push(0.0);
        lin.push_le(&tr, 1.0);
        // t̃ − Σ w̃ᵢ(e + p̄)ᵀg(PEᵢ)/τ ≤ (eᵀQ_Pe + f_Pᵀe + C_P)/τ
        let mut rows = DMatrix::zeros(samples.len(), nw + 1);
        let mut bounds = DVector::zeros(samples.len());
        for (j, s) in samples.iter().enumerate() {
            let shifted = &s.e + model.p_bar.density();
            let coef = gcols.transpose() * shifted / tau;
            for i in 0..nw {
                rows[(j, i)] = -coef[i];
            }
            rows[(j, it)] = 1.0;
            let quad = (r * &s.e).norm_squared();
            bounds[j] = (quad + model.f_p.dot(&s.e) + model.c_p) / tau;
            // Equilibrate; errors reaching the low-density tails give bounds near 1e14.
            let scale = rows.row(j).amax().max(bounds[j].abs()).max(1.0);
            rows.row_mut(j).unscale_mut(scale);
            bounds[j] /= scale;
        }
        lin.coefficients = lin.coefficients.insert_rows(1, samples.len(), 0.0);
        lin.coefficients.rows_mut(1, samples.len()).copy_from(&rows);
        lin.constant = lin.constant.insert_rows(1, samples.len(), 0.0);
        lin.constant.rows_mut(1, samples.len()).copy_from(&bounds);
        problem.linear_blocks.push(lin);
        problem.validate()?;
        Ok(Self {
            problem,
            basis,
            tau,
        })
    }

    pub fn recover(&self, sol: &Solution, scene: &RadarScene) -> Result<RobustSolution> {
        let nw = self.basis.len();
        let power = scene.power_budget;
        let w = clean_covariance(&recover_covariance(&self.basis, &sol.y, power), power);
        let t = sol.y[nw] * self.tau;
        Ok(RobustSolution {
            w_star: w,
            t_star: t,
            lambda_star: 0.0,
            status: sol.status,
            pcrb_star: pcrb_from_information(t).map_or(f64::INFINITY, |v| v.value),
            residuals: Some(sol.residuals),
            iterations: sol.iterations,
        })
    }
}
