//! Table of the scaling laws over a grid of `lambda`.

use std::fmt::Write as _;

use crate::effective::{lambda_tilde_residual, solve_c_infinity, solve_lambda_tilde, Branch};
use crate::error::{Error, Result};
use crate::soliton::Exponent;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootsRow {
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub c_inf: f64,
    pub kappa: f64,
    pub branch: Branch,
}

/// One row per `lambda` (sorted, with `lambda0` added when missing). Values within
/// `1e-6` of the threshold are rejected.
pub fn roots_table(m: u32, lambdas: &[f64]) -> Result<Vec<RootsRow>> {
    let e = Exponent::new(m)?;
    let lt = solve_lambda_tilde(m)?;
    let l0 = e.lambda0();
    let mut grid: Vec<f64> = lambdas.to_vec();
    if !grid.contains(&l0) {
        grid.push(l0);
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    grid.iter()
        .map(|&lambda| {
            if (lambda - lt).abs() < 1e-6 {
                return Err(Error::DegenerateLambda {
                    lambda,
                    threshold: lt,
                    distance: (lambda - lt).abs(),
                });
            }
            let law = solve_c_infinity(lambda, m)?;
            Ok(RootsRow {
                lambda,
                lambda_tilde: lt,
                c_inf: law.c_inf,
                kappa: law.kappa,
                branch: law.branch,
            })
        })
        .collect()
}

/// `|lambda_tilde residual|` for reporting.
pub fn threshold_residual(m: u32) -> Result<f64> {
    let e = Exponent::new(m)?;
    Ok(lambda_tilde_residual(e, solve_lambda_tilde(m)?).abs())
}

pub fn roots_csv(m: u32, rows: &[RootsRow]) -> String {
    let mut s = format!("# m={m}\nlambda,lambda_tilde,c_inf,kappa,branch\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.lambda, r.lambda_tilde, r.c_inf, r.kappa, r.branch
        );
    }
    s
}

/// Parses `a:b:n` (inclusive, `n` points) or a comma list.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Manifest(format!("cannot parse lambda grid '{spec}'"));
    if let Some((a, rest)) = spec.split_once(':') {
        let (b, n) = rest.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if n < 2 {
            return Err(bad());
        }
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_lambda_grid("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        let g = parse_lambda_grid("0:1:5").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_lambda_grid("0:1").is_err());
        assert!(parse_lambda_grid("x").is_err());
    }
}
