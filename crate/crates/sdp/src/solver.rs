//! Infeasible-start primal-dual path following with the HKM search direction
//! and Mehrotra predictor-corrector steps.
//!
//! The primal companion of the LMI problem is
//!
//! ```text
//! minimize    Σ_j ⟨C_j, X_j⟩
//! subject to  Σ_j ⟨A_ij, X_j⟩ = b_i,   X_j ⪰ 0
//! ```
//!
//! and every iterate carries `(X, y, Z)` with `Z_j ≈ C_j − Σ_i y_i A_ij`.
//! The Schur complement `M_ik = Σ_j tr(A_ij X_j A_kj Z_j⁻¹)` is assembled
//! term by term so that low-rank couplings never form `n × n` products.

use std::time::Instant;

use log::{debug, trace};
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::batch2::{self, Batch2Plan};
use crate::plan::BlockPlan;
use crate::problem::{LmiProblem, Sym2};
use crate::SdpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// All residuals below `Settings::tolerance`.
    Optimal,
    /// Stalled, but the best iterate meets `Settings::relaxed_tolerance`.
    NearOptimal,
    /// Iterates diverge in a way consistent with an empty feasible set.
    Infeasible,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::NearOptimal => "near-optimal",
            Status::Infeasible => "infeasible",
            Status::NumericalFailure => "numerical-failure",
        }
    }

    pub fn is_usable(&self) -> bool {
        matches!(self, Status::Optimal | Status::NearOptimal)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Status::Optimal),
            "near-optimal" => Ok(Status::NearOptimal),
            "infeasible" => Ok(Status::Infeasible),
            "numerical-failure" => Ok(Status::NumericalFailure),
            other => Err(format!("unknown solver status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Relative primal/dual infeasibility and duality gap targets.
    pub tolerance: f64,
    /// Accepted (as `NearOptimal`) when the strict target cannot be reached.
    pub relaxed_tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the step to the cone boundary actually taken.
    pub step_fraction: f64,
    /// Growth of `y` or `X`, relative to the data and starting-point scale,
    /// beyond which the problem is declared infeasible.
    pub divergence_bound: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            relaxed_tolerance: 1e-6,
            max_iterations: 120,
            step_fraction: 0.95,
            divergence_bound: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub y: DVector<f64>,
    /// Primal multipliers, one per PSD block.
    pub x_psd: Vec<DMatrix<f64>>,
    /// Primal multipliers of each 2×2 batch.
    pub x_psd2: Vec<Vec<Sym2>>,
    pub x_linear: Vec<DVector<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub seconds: f64,
}

struct Iterate {
    y: DVector<f64>,
    xp: Vec<DMatrix<f64>>,
    zp: Vec<DMatrix<f64>>,
    xb: Vec<Vec<Sym2>>,
    zb: Vec<Vec<Sym2>>,
    xl: Vec<DVector<f64>>,
    zl: Vec<DVector<f64>>,
}

struct Direction {
    dy: DVector<f64>,
    dxp: Vec<DMatrix<f64>>,
    dzp: Vec<DMatrix<f64>>,
    dxb: Vec<Vec<Sym2>>,
    dzb: Vec<Vec<Sym2>>,
    dxl: Vec<DVector<f64>>,
    dzl: Vec<DVector<f64>>,
}

pub fn solve(problem: &LmiProblem, settings: &Settings) -> Result<Solution, SdpError> {
    problem.validate()?;
    let start = Instant::now();
    let b = &problem.objective;
    let n_total: usize = problem.psd_blocks.iter().map(|p| p.dim()).sum::<usize>()
        + problem
            .psd2_batches
            .iter()
            .map(|b| 2 * b.len())
            .sum::<usize>()
        + problem.linear_blocks.iter().map(|l| l.dim()).sum::<usize>();
    if n_total == 0 {
        return Err(SdpError::InvalidProblem("all blocks are empty".into()));
    }

    let plans = Plans {
        psd: problem.psd_blocks.iter().map(BlockPlan::new).collect(),
        batch: problem.psd2_batches.iter().map(Batch2Plan::new).collect(),
    };
    let mut it = initial_point(problem);
    let b_norm = b.norm();
    let c_norm = constant_norm(problem);
    let start_scale = it
        .xp
        .iter()
        .map(|x| x.amax())
        .chain(it.xl.iter().map(|x| x.amax()))
        .chain(it.xb.iter().map(|x| batch2::amax(x)))
        .fold(1.0 + b_norm + c_norm, f64::max);
    let divergence = settings.divergence_bound * start_scale;

    let mut best: Option<(f64, Solution)> = None;
    let mut status = Status::NumericalFailure;
    let mut iterations = 0;

    for iter in 0..settings.max_iterations {
        iterations = iter;
        let rd = dual_residual(problem, &plans, &it);
        let rp = primal_residual(problem, &plans, &it);
        let pobj = primal_objective(problem, &it);
        let dobj = b.dot(&it.y);
        let gap = complementarity(&it);
        let mu = gap / n_total as f64;
        let rd_norm = rd.norm();
        let res = Residuals {
            primal: rp.norm() / (1.0 + b_norm),
            dual: rd_norm / (1.0 + c_norm),
            gap: (pobj - dobj).abs().max(gap.abs()) / (1.0 + pobj.abs() + dobj.abs()),
        };
        trace!(
            "iter {iter:3} pobj {pobj:+.9e} dobj {dobj:+.9e} rp {:.2e} rd {:.2e} gap {:.2e} mu {mu:.2e}",
            res.primal,
            res.dual,
            res.gap
        );

        let snapshot = |status| Solution {
            status,
            y: it.y.clone(),
            x_psd: it.xp.clone(),
            x_psd2: it.xb.clone(),
            x_linear: it.xl.clone(),
            primal_objective: pobj,
            dual_objective: dobj,
            residuals: res,
            iterations: iter,
            seconds: start.elapsed().as_secs_f64(),
        };
        if best.as_ref().is_none_or(|(w, _)| res.worst() < *w) {
            best = Some((res.worst(), snapshot(Status::NumericalFailure)));
        }
        if res.worst() <= settings.tolerance {
            status = Status::Optimal;
            break;
        }
        if it.y.amax() > divergence
            || it.xp.iter().any(|x| x.amax() > divergence)
            || it.xl.iter().any(|x| x.amax() > divergence)
            || it.xb.iter().any(|x| batch2::amax(x) > divergence)
        {
            status = Status::Infeasible;
            break;
        }

        let Some(dir_state) = DirectionSolver::new(problem, &plans, &it) else {
            debug!("iter {iter}: lost positive definiteness");
            break;
        };

        // Predictor.
        let Some(pred) = dir_state.direction(problem, &plans, &it, &rd, 0.0, None) else {
            debug!("iter {iter}: Schur complement solve failed");
            break;
        };
        let ap = max_primal_step(&it, &pred).min(1.0);
        let ad = max_dual_step(&it, &pred).min(1.0);
        let mu_aff = complementarity_after(&it, &pred, ap, ad) / n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let Some(dir) = dir_state.direction(problem, &plans, &it, &rd, sigma * mu, Some(&pred))
        else {
            debug!("iter {iter}: corrector solve failed");
            break;
        };
        let ap = (settings.step_fraction * max_primal_step(&it, &dir)).min(1.0);
        let ad = (settings.step_fraction * max_dual_step(&it, &dir)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            debug!("iter {iter}: step lengths collapsed");
            break;
        }
        apply_step(&mut it, &dir, ap, ad);
    }

    let solution = match status {
        Status::Optimal | Status::Infeasible => {
            let rd = dual_residual(problem, &plans, &it);
            let rp = primal_residual(problem, &plans, &it);
            let pobj = primal_objective(problem, &it);
            let dobj = b.dot(&it.y);
            let gap = complementarity(&it);
            let rd_norm = rd.norm();
            Solution {
                status,
                y: it.y,
                x_psd: it.xp,
                x_psd2: it.xb,
                x_linear: it.xl,
                primal_objective: pobj,
                dual_objective: dobj,
                residuals: Residuals {
                    primal: rp.norm() / (1.0 + b_norm),
                    dual: rd_norm / (1.0 + c_norm),
                    gap: (pobj - dobj).abs().max(gap.abs()) / (1.0 + pobj.abs() + dobj.abs()),
                },
                iterations,
                seconds: start.elapsed().as_secs_f64(),
            }
        }
        _ => {
            let (worst, mut sol) = best.expect("at least one iterate evaluated");
            sol.status = if worst <= settings.relaxed_tolerance {
                Status::NearOptimal
            } else {
                Status::NumericalFailure
            };
            sol.seconds = start.elapsed().as_secs_f64();
            sol
        }
    };
    debug!(
        "sdp finished: {} after {} iterations, dobj {:.9e}, residuals {:?}, {:.3}s",
        solution.status,
        solution.iterations,
        solution.dual_objective,
        solution.residuals,
        solution.seconds
    );
    Ok(solution)
}

struct Plans {
    psd: Vec<BlockPlan>,
    batch: Vec<Batch2Plan>,
}

/// `C − Σ y_i A_i − Z` for every block.
struct DualResidual {
    psd: Vec<DMatrix<f64>>,
    batch: Vec<Vec<Sym2>>,
    lin: Vec<DVector<f64>>,
}

impl DualResidual {
    fn norm(&self) -> f64 {
        (self.psd.iter().map(|r| r.norm_squared()).sum::<f64>()
            + self
                .batch
                .iter()
                .flatten()
                .map(|r| batch2::inner(r, r))
                .sum::<f64>()
            + self.lin.iter().map(|r| r.norm_squared()).sum::<f64>())
        .sqrt()
    }
}

fn constant_norm(problem: &LmiProblem) -> f64 {
    (problem
        .psd_blocks
        .iter()
        .map(|p| p.constant.norm_squared())
        .sum::<f64>()
        + problem
            .psd2_batches
            .iter()
            .flat_map(|b| b.constants.iter())
            .map(|c| batch2::inner(c, c))
            .sum::<f64>()
        + problem
            .linear_blocks
            .iter()
            .map(|l| l.constant.norm_squared())
            .sum::<f64>())
    .sqrt()
}

fn initial_point(problem: &LmiProblem) -> Iterate {
    let m = problem.n_vars();
    let b = &problem.objective;
    let mut xp = Vec::new();
    let mut zp = Vec::new();
    for blk in &problem.psd_blocks {
        let n = blk.dim() as f64;
        let mut xi: f64 = 10.0f64.max(n.sqrt());
        let mut eta: f64 = 10.0f64.max(n.sqrt()).max(blk.constant.norm());
        for (v, t) in &blk.terms {
            let a = t.frobenius_norm();
            xi = xi.max(n * (1.0 + b[*v].abs()) / (1.0 + a));
            eta = eta.max(a);
        }
        let eta = (1.0 + eta) / n.sqrt();
        xp.push(DMatrix::identity(blk.dim(), blk.dim()) * xi);
        zp.push(DMatrix::identity(blk.dim(), blk.dim()) * eta.max(1.0));
    }
    let mut xb = Vec::new();
    let mut zb = Vec::new();
    for batch in &problem.psd2_batches {
        // Each variable's coefficient norm across the whole batch.
        let mut col_sq = vec![0.0; m];
        for terms in &batch.terms {
            for (v, a) in terms {
                col_sq[*v] += batch2::inner(a, a);
            }
        }
        let n = 2.0 * batch.len() as f64;
        let c_norm = batch
            .constants
            .iter()
            .map(|c| batch2::inner(c, c))
            .sum::<f64>()
            .sqrt();
        let mut xi: f64 = 10.0f64.max(n.sqrt());
        let mut eta: f64 = 10.0f64.max(n.sqrt()).max(c_norm);
        for (v, sq) in col_sq.iter().enumerate() {
            if *sq > 0.0 {
                let a = sq.sqrt();
                xi = xi.max(n * (1.0 + b[v].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
        }
        let eta = ((1.0 + eta) / n.sqrt()).max(1.0);
        xb.push(vec![[xi, 0.0, xi]; batch.len()]);
        zb.push(vec![[eta, 0.0, eta]; batch.len()]);
    }
    let mut xl = Vec::new();
    let mut zl = Vec::new();
    for blk in &problem.linear_blocks {
        let n = blk.dim() as f64;
        let mut xi: f64 = 10.0f64.max(n.sqrt());
        let mut eta: f64 = 10.0f64.max(n.sqrt()).max(blk.constant.norm());
        for v in 0..m {
            let a = blk.coefficients.column(v).norm();
            if a > 0.0 {
                xi = xi.max(n * (1.0 + b[v].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
        }
        let eta = (1.0 + eta) / n.sqrt().max(1.0);
        xl.push(DVector::from_element(blk.dim(), xi));
        zl.push(DVector::from_element(blk.dim(), eta.max(1.0)));
    }
    Iterate {
        y: DVector::zeros(m),
        xp,
        zp,
        xb,
        zb,
        xl,
        zl,
    }
}

fn dual_residual(problem: &LmiProblem, plans: &Plans, it: &Iterate) -> DualResidual {
    let psd = problem
        .psd_blocks
        .iter()
        .zip(&plans.psd)
        .zip(&it.zp)
        .map(|((blk, plan), z)| {
            let mut s = blk.constant.clone();
            plan.accumulate(blk, &it.y, -1.0, &mut s);
            s - z
        })
        .collect();
    let batch = problem
        .psd2_batches
        .iter()
        .zip(&plans.batch)
        .zip(&it.zb)
        .map(|((b, plan), z)| {
            plan.slack(&b.constants, &it.y)
                .iter()
                .zip(z)
                .map(|(s, zk)| [s[0] - zk[0], s[1] - zk[1], s[2] - zk[2]])
                .collect()
        })
        .collect();
    let lin = problem
        .linear_blocks
        .iter()
        .zip(&it.zl)
        .map(|(blk, z)| blk.slack(&it.y) - z)
        .collect();
    DualResidual { psd, batch, lin }
}

fn operator_apply(problem: &LmiProblem, plans: &Plans, it: &Iterate) -> DVector<f64> {
    let mut out = DVector::zeros(problem.n_vars());
    for ((blk, plan), x) in problem.psd_blocks.iter().zip(&plans.psd).zip(&it.xp) {
        plan.traces(blk, x, &mut out);
    }
    for (plan, x) in plans.batch.iter().zip(&it.xb) {
        plan.traces(x, &mut out);
    }
    for (blk, x) in problem.linear_blocks.iter().zip(&it.xl) {
        out += blk.coefficients.transpose() * x;
    }
    out
}

fn primal_residual(problem: &LmiProblem, plans: &Plans, it: &Iterate) -> DVector<f64> {
    &problem.objective - operator_apply(problem, plans, it)
}

fn primal_objective(problem: &LmiProblem, it: &Iterate) -> f64 {
    problem
        .psd_blocks
        .iter()
        .zip(&it.xp)
        .map(|(b, x)| b.constant.dot(x))
        .sum::<f64>()
        + problem
            .psd2_batches
            .iter()
            .zip(&it.xb)
            .map(|(b, x)| {
                b.constants
                    .iter()
                    .zip(x)
                    .map(|(c, xk)| batch2::inner(c, xk))
                    .sum::<f64>()
            })
            .sum::<f64>()
        + problem
            .linear_blocks
            .iter()
            .zip(&it.xl)
            .map(|(b, x)| b.constant.dot(x))
            .sum::<f64>()
}

fn batch_inner(x: &[Vec<Sym2>], z: &[Vec<Sym2>]) -> f64 {
    x.iter()
        .flatten()
        .zip(z.iter().flatten())
        .map(|(a, b)| batch2::inner(a, b))
        .sum()
}

fn complementarity(it: &Iterate) -> f64 {
    it.xp.iter().zip(&it.zp).map(|(x, z)| x.dot(z)).sum::<f64>()
        + batch_inner(&it.xb, &it.zb)
        + it.xl.iter().zip(&it.zl).map(|(x, z)| x.dot(z)).sum::<f64>()
}

fn stepped(v: &[Vec<Sym2>], dv: &[Vec<Sym2>], a: f64) -> Vec<Vec<Sym2>> {
    v.iter()
        .zip(dv)
        .map(|(x, dx)| {
            x.iter()
                .zip(dx)
                .map(|(p, d)| [p[0] + a * d[0], p[1] + a * d[1], p[2] + a * d[2]])
                .collect()
        })
        .collect()
}

fn complementarity_after(it: &Iterate, d: &Direction, ap: f64, ad: f64) -> f64 {
    let psd: f64 = (0..it.xp.len())
        .map(|j| {
            let x = &it.xp[j] + &d.dxp[j] * ap;
            let z = &it.zp[j] + &d.dzp[j] * ad;
            x.dot(&z)
        })
        .sum();
    let batch = batch_inner(&stepped(&it.xb, &d.dxb, ap), &stepped(&it.zb, &d.dzb, ad));
    let lin: f64 = (0..it.xl.len())
        .map(|j| {
            let x = &it.xl[j] + &d.dxl[j] * ap;
            let z = &it.zl[j] + &d.dzl[j] * ad;
            x.dot(&z)
        })
        .sum();
    psd + batch + lin
}

fn apply_step(it: &mut Iterate, d: &Direction, ap: f64, ad: f64) {
    it.y.axpy(ad, &d.dy, 1.0);
    for (x, dx) in it.xp.iter_mut().zip(&d.dxp) {
        *x += dx * ap;
        symmetrize(x);
    }
    for (z, dz) in it.zp.iter_mut().zip(&d.dzp) {
        *z += dz * ad;
        symmetrize(z);
    }
    it.xb = stepped(&it.xb, &d.dxb, ap);
    it.zb = stepped(&it.zb, &d.dzb, ad);
    for (x, dx) in it.xl.iter_mut().zip(&d.dxl) {
        x.axpy(ap, dx, 1.0);
    }
    for (z, dz) in it.zl.iter_mut().zip(&d.dzl) {
        z.axpy(ad, dz, 1.0);
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `α` with `S + α dS ⪰ 0`, or `+∞` when the direction never leaves the cone.
pub fn max_psd_step(s: &DMatrix<f64>, ds: &DMatrix<f64>) -> f64 {
    let Some(chol) = Cholesky::new(s.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(left) = l.solve_lower_triangular(ds) else {
        return 0.0;
    };
    let Some(both) = l.solve_lower_triangular(&left.transpose()) else {
        return 0.0;
    };
    let mut sym = both;
    symmetrize(&mut sym);
    let lmin = sym.symmetric_eigenvalues().min();
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn max_orthant_step(s: &DVector<f64>, ds: &DVector<f64>) -> f64 {
    s.iter()
        .zip(ds.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn max_batch_step(s: &[Vec<Sym2>], ds: &[Vec<Sym2>]) -> f64 {
    s.iter()
        .flatten()
        .zip(ds.iter().flatten())
        .map(|(a, d)| batch2::max_step(a, d))
        .fold(f64::INFINITY, f64::min)
}

fn max_primal_step(it: &Iterate, d: &Direction) -> f64 {
    let a = it
        .xp
        .iter()
        .zip(&d.dxp)
        .map(|(x, dx)| max_psd_step(x, dx))
        .fold(f64::INFINITY, f64::min);
    let b = it
        .xl
        .iter()
        .zip(&d.dxl)
        .map(|(x, dx)| max_orthant_step(x, dx))
        .fold(f64::INFINITY, f64::min);
    a.min(b).min(max_batch_step(&it.xb, &d.dxb))
}

fn max_dual_step(it: &Iterate, d: &Direction) -> f64 {
    let a = it
        .zp
        .iter()
        .zip(&d.dzp)
        .map(|(z, dz)| max_psd_step(z, dz))
        .fold(f64::INFINITY, f64::min);
    let b = it
        .zl
        .iter()
        .zip(&d.dzl)
        .map(|(z, dz)| max_orthant_step(z, dz))
        .fold(f64::INFINITY, f64::min);
    a.min(b).min(max_batch_step(&it.zb, &d.dzb))
}

/// Per-iteration factorizations shared by the predictor and corrector solves.
struct DirectionSolver {
    zinv: Vec<DMatrix<f64>>,
    zinv_b: Vec<Vec<Sym2>>,
    schur: Cholesky<f64, nalgebra::Dyn>,
}

impl DirectionSolver {
    fn new(problem: &LmiProblem, plans: &Plans, it: &Iterate) -> Option<Self> {
        let m = problem.n_vars();
        let mut zinv = Vec::with_capacity(it.zp.len());
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for ((blk, plan), (x, z)) in problem
            .psd_blocks
            .iter()
            .zip(&plans.psd)
            .zip(it.xp.iter().zip(&it.zp))
        {
            let zi = Cholesky::new(z.clone())?.inverse();
            let prep = plan.prepare(blk, x, &zi);
            plan.add_schur(blk, &prep, &mut schur);
            zinv.push(zi);
        }
        let mut zinv_b = Vec::with_capacity(it.zb.len());
        for (plan, (x, z)) in plans.batch.iter().zip(it.xb.iter().zip(&it.zb)) {
            let zi = z.iter().map(batch2::inverse).collect::<Option<Vec<_>>>()?;
            plan.add_schur(x, &zi, &mut schur);
            zinv_b.push(zi);
        }
        for (blk, (x, z)) in problem.linear_blocks.iter().zip(it.xl.iter().zip(&it.zl)) {
            let mut scaled = blk.coefficients.clone();
            for (r, mut row) in scaled.row_iter_mut().enumerate() {
                row *= (x[r] / z[r]).sqrt();
            }
            schur.gemm(1.0, &scaled.transpose(), &scaled, 1.0);
        }
        symmetrize(&mut schur);
        let scale = (0..m)
            .map(|i| schur[(i, i)].abs())
            .fold(0.0, f64::max)
            .max(1e-300);
        let chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let mut reg = schur;
                for i in 0..m {
                    reg[(i, i)] += 1e-13 * scale;
                }
                Cholesky::new(reg)?
            }
        };
        Some(Self {
            zinv,
            zinv_b,
            schur: chol,
        })
    }

    /// Solve for the HKM direction targeting `X Z = target · I`, with the
    /// Mehrotra second-order term when `predictor` is given.
    fn direction(
        &self,
        problem: &LmiProblem,
        plans: &Plans,
        it: &Iterate,
        rd: &DualResidual,
        target: f64,
        predictor: Option<&Direction>,
    ) -> Option<Direction> {
        let mut rhs = problem.objective.clone();
        // K = −target Z⁻¹ + X Rd Z⁻¹ + ΔXa ΔZa Z⁻¹, traced against every A_i.
        for j in 0..it.xp.len() {
            let zi = &self.zinv[j];
            let mut inner = &it.xp[j] * &rd.psd[j];
            if let Some(p) = predictor {
                inner += &p.dxp[j] * &p.dzp[j];
            }
            let mut k = inner * zi - zi * target;
            symmetrize(&mut k);
            plans.psd[j].traces(&problem.psd_blocks[j], &k, &mut rhs);
        }
        for j in 0..it.xb.len() {
            let k: Vec<Sym2> = (0..it.xb[j].len())
                .map(|q| {
                    let extra = predictor.map(|p| (&p.dxb[j][q], &p.dzb[j][q]));
                    batch2::hkm_rhs(
                        &it.xb[j][q],
                        &rd.batch[j][q],
                        extra,
                        &self.zinv_b[j][q],
                        target,
                    )
                })
                .collect();
            plans.batch[j].traces(&k, &mut rhs);
        }
        for j in 0..it.xl.len() {
            let x = &it.xl[j];
            let z = &it.zl[j];
            let k = DVector::from_fn(x.len(), |r, _| {
                let mut num = x[r] * rd.lin[j][r] - target;
                if let Some(p) = predictor {
                    num += p.dxl[j][r] * p.dzl[j][r];
                }
                num / z[r]
            });
            rhs += problem.linear_blocks[j].coefficients.transpose() * &k;
        }
        let dy = self.schur.solve(&rhs);
        if dy.iter().any(|v| !v.is_finite()) {
            return None;
        }

        let mut dxp = Vec::with_capacity(it.xp.len());
        let mut dzp = Vec::with_capacity(it.xp.len());
        for (j, blk) in problem.psd_blocks.iter().enumerate() {
            let mut dz = rd.psd[j].clone();
            plans.psd[j].accumulate(blk, &dy, -1.0, &mut dz);
            let zi = &self.zinv[j];
            let x = &it.xp[j];
            // ΔX = −X + target Z⁻¹ − X ΔZ Z⁻¹ − ΔXa ΔZa Z⁻¹
            let mut inner = x * &dz;
            if let Some(p) = predictor {
                inner += &p.dxp[j] * &p.dzp[j];
            }
            let mut dx = zi * target - x - inner * zi;
            symmetrize(&mut dx);
            dxp.push(dx);
            dzp.push(dz);
        }
        let mut dxb = Vec::with_capacity(it.xb.len());
        let mut dzb = Vec::with_capacity(it.xb.len());
        for j in 0..it.xb.len() {
            let mut dz = rd.batch[j].clone();
            plans.batch[j].subtract(&dy, &mut dz);
            let dx = (0..dz.len())
                .map(|q| {
                    let extra = predictor.map(|p| (&p.dxb[j][q], &p.dzb[j][q]));
                    batch2::hkm_dx(&it.xb[j][q], &dz[q], extra, &self.zinv_b[j][q], target)
                })
                .collect();
            dxb.push(dx);
            dzb.push(dz);
        }
        let mut dxl = Vec::with_capacity(it.xl.len());
        let mut dzl = Vec::with_capacity(it.xl.len());
        for (j, blk) in problem.linear_blocks.iter().enumerate() {
            let dz = &rd.lin[j] - &blk.coefficients * &dy;
            let x = &it.xl[j];
            let z = &it.zl[j];
            let dx = DVector::from_fn(x.len(), |r, _| {
                let mut corr = x[r] * dz[r];
                if let Some(p) = predictor {
                    corr += p.dxl[j][r] * p.dzl[j][r];
                }
                -x[r] + (target - corr) / z[r]
            });
            dxl.push(dx);
            dzl.push(dz);
        }
        Some(Direction {
            dy,
            dxp,
            dzp,
            dxb,
            dzb,
            dxl,
            dzl,
        })
    }
}
