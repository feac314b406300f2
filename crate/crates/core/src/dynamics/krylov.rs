//! Short-time Lanczos propagation of state vectors.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::linalg::{c64, CsrMatrix, ZERO};
use crate::series::check_grid;
use crate::units::natural_time;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Krylov subspace dimension.
    pub order: usize,
    /// Largest step, in units of ħ/‖G‖.
    pub step_factor: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            order: 30,
            step_factor: 0.01,
        }
    }
}

const BREAKDOWN: f64 = 1e-13;
const CONVERGED: f64 = 1e-15;

/// e^{−iG·t/ħ}ψ, split into steps no longer than `step_factor·ħ/‖G‖`.
pub fn krylov_propagate(g: &CsrMatrix, psi: &[c64], t_ps: f64, opts: &KrylovOptions) -> Result<Vec<c64>> {
    check_opts(opts)?;
    if psi.len() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} for generator of dim {}",
            psi.len(),
            g.dim()
        )));
    }
    let mut out = psi.to_vec();
    advance(g, &mut out, natural_time(t_ps), opts)?;
    Ok(out)
}

/// ⟨ψ(t)|A|ψ(t)⟩ along a time grid.
pub(crate) fn expectation_series(
    g: &CsrMatrix,
    psi: &[c64],
    a: &CsrMatrix,
    times_ps: &[f64],
    opts: &KrylovOptions,
) -> Result<Vec<f64>> {
    check_opts(opts)?;
    check_grid(times_ps)?;
    let mut state = psi.to_vec();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times_ps.len());
    for &t_ps in times_ps {
        let t = natural_time(t_ps);
        advance(g, &mut state, t - now, opts)?;
        now = t;
        out.push(a.expectation(&state));
    }
    Ok(out)
}

fn check_opts(opts: &KrylovOptions) -> Result<()> {
    if opts.order < 2 || !(opts.step_factor > 0.0) {
        return Err(Error::domain("Krylov order must be ≥ 2 and step factor > 0"));
    }
    Ok(())
}

fn advance(g: &CsrMatrix, psi: &mut Vec<c64>, dt: f64, opts: &KrylovOptions) -> Result<()> {
    if dt == 0.0 {
        return Ok(());
    }
    let norm = g.norm_bound();
    if norm == 0.0 {
        return Ok(());
    }
    let max_step = opts.step_factor / norm;
    let steps = (dt.abs() / max_step).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    for _ in 0..steps {
        *psi = lanczos_step(g, psi, h, opts.order)?;
    }
    Ok(())
}

fn lanczos_step(g: &CsrMatrix, psi: &[c64], dt: f64, order: usize) -> Result<Vec<c64>> {
    let dim = psi.len();
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return Ok(psi.to_vec());
    }
    let m_max = order.min(dim);
    let mut basis: Vec<Vec<c64>> = vec![psi.iter().map(|x| x / beta0).collect()];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![ZERO; dim];
    for j in 0..m_max {
        g.matvec(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        if j + 1 == m_max {
            break;
        }
        let b = norm(&w);
        if b < BREAKDOWN {
            break;
        }
        // a posteriori error of the order-(j+1) approximation
        let y = small_exp(&alpha, &beta, dt)?;
        if b * y[j].norm() < CONVERGED {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }

    let y = small_exp(&alpha, &beta, dt)?;
    let mut out = vec![ZERO; dim];
    for (v, &c) in basis.iter().zip(&y) {
        let c = c * beta0;
        for (o, vi) in out.iter_mut().zip(v) {
            *o += c * vi;
        }
    }
    Ok(out)
}

/// e^{−iT·dt}e₁ for the tridiagonal T with diagonal `alpha` and
/// off-diagonal `beta[..alpha.len() - 1]`.
fn small_exp(alpha: &[f64], beta: &[f64], dt: f64) -> Result<Vec<c64>> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("tridiagonal eigensolver: {e:?}")))?;
    let s = evd.S();
    let q = evd.U();
    let mut y = vec![ZERO; m];
    for k in 0..m {
        let x = -s[k] * dt;
        let f = c64::new(x.cos(), x.sin()) * q[(0, k)];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += f * q[(i, k)];
        }
    }
    Ok(y)
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
