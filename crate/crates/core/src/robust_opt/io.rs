//! Plain-text result file for a [`RobustSolution`].
//!
//! ```text
//! # robust-pcrb solution
//! # status = optimal
//! # t_star = 1.2e3
//! # lambda_star = 0.0
//! # pcrb_star = 8.3e-4
//! # power_budget = 1.0
//! # n_tx = 2
//! re00,im00,re01,im01
//! re10,im10,re11,im11
//! ```
//!
//! Scalars are written with round-trip precision, so parsing a written file
//! reproduces the covariance and scalars bit for bit.

use std::collections::BTreeMap;

use super::{RobustSolution, SolverStatus};
use crate::fisher_pcrb::TransmitCovariance;
use crate::{CMatrix, Error, Result, C64};

const MAGIC: &str = "# robust-pcrb solution";
const CTX: &str = "solution file";

pub fn write_solution(sol: &RobustSolution, power_budget: f64) -> String {
    let w = sol.w_star.matrix();
    let n = w.nrows();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("# status = {}\n", sol.status));
    out.push_str(&format!("# t_star = {:e}\n", sol.t_star));
    out.push_str(&format!("# lambda_star = {:e}\n", sol.lambda_star));
    out.push_str(&format!("# pcrb_star = {:e}\n", sol.pcrb_star));
    out.push_str(&format!("# power_budget = {:e}\n", power_budget));
    out.push_str(&format!("# n_tx = {n}\n"));
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .flat_map(|j| [format!("{:e}", w[(i, j)].re), format!("{:e}", w[(i, j)].im)])
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn number(line: usize, key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|e| Error::parse(CTX, line, format!("{key}: `{s}`: {e}")))?;
    if v.is_finite() || key == "pcrb_star" {
        Ok(v)
    } else {
        Err(Error::parse(CTX, line, format!("{key} is not finite")))
    }
}

/// Parse a file produced by [`write_solution`]. The covariance is validated
/// against the recorded power budget.
pub fn parse_solution(text: &str) -> Result<RobustSolution> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(Error::parse(CTX, 1, "missing header line")),
    }
    let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut rows: Vec<(usize, &str)> = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if !rows.is_empty() {
                return Err(Error::parse(CTX, no, "metadata after matrix rows"));
            }
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::parse(CTX, no, "expected `# key = value`"))?;
            let k = k.trim().to_string();
            if meta.insert(k.clone(), (no, v.trim().to_string())).is_some() {
                return Err(Error::parse(CTX, no, format!("duplicate key `{k}`")));
            }
        } else {
            rows.push((no, line));
        }
    }
    let get = |k: &str| -> Result<&(usize, String)> {
        meta.get(k)
            .ok_or_else(|| Error::parse(CTX, 1, format!("missing key `{k}`")))
    };
    let (l, s) = get("status")?;
    let status: SolverStatus = s.parse().map_err(|e: String| Error::parse(CTX, *l, e))?;
    let (l, s) = get("t_star")?;
    let t_star = number(*l, "t_star", s)?;
    let (l, s) = get("lambda_star")?;
    let lambda_star = number(*l, "lambda_star", s)?;
    let (l, s) = get("pcrb_star")?;
    let pcrb_star = number(*l, "pcrb_star", s)?;
    let (l, s) = get("power_budget")?;
    let power = number(*l, "power_budget", s)?;
    if power.is_nan() || power <= 0.0 {
        return Err(Error::parse(CTX, *l, "power_budget must be positive"));
    }
    let (l, s) = get("n_tx")?;
    let n: usize = s
        .parse()
        .map_err(|e| Error::parse(CTX, *l, format!("n_tx: `{s}`: {e}")))?;
    if n == 0 || n > 1024 {
        return Err(Error::parse(CTX, *l, "n_tx out of range"));
    }
    if rows.len() != n {
        let at = rows.last().map_or(*l, |r| r.0);
        return Err(Error::parse(
            CTX,
            at,
            format!("expected {n} matrix rows, found {}", rows.len()),
        ));
    }
    let mut w = CMatrix::zeros(n, n);
    for (i, (no, row)) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 2 * n {
            return Err(Error::parse(CTX, *no, format!("expected {} fields", 2 * n)));
        }
        for j in 0..n {
            let re = number(*no, "entry", fields[2 * j])?;
            let im = number(*no, "entry", fields[2 * j + 1])?;
            w[(i, j)] = C64::new(re, im);
        }
    }
    let w_star = TransmitCovariance::new(w, power)?;
    Ok(RobustSolution {
        w_star,
        t_star,
        lambda_star,
        status,
        pcrb_star,
        residuals: None,
        iterations: 0,
    })
}
