use super::{ScalarField, SparseSymSystem};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Stop when the reduced residual is below `tol_rel * |f|`.
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol_rel: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients on the system with its
/// Dirichlet dofs eliminated symmetrically. `guess` (full length) seeds
/// the free dofs.
pub fn solve_cg(sys: &SparseSymSystem, opts: CgOptions, guess: Option<&[f64]>) -> Result<(ScalarField, SolveStats)> {
    let n = sys.dofs.len();
    if sys.dirichlet.is_empty() {
        return Err(Error::config("system has no Dirichlet constraint"));
    }
    let mut fixed = vec![false; n];
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut lift = vec![0.0; n];
    for (&d, &v) in &sys.dirichlet {
        fixed[d] = true;
        lift[d] = v;
    }

    // b = f - M g on free dofs
    let mut mg = vec![0.0; n];
    sys.matrix.mul_vec(&lift, &mut mg);
    let b: Vec<f64> = (0..n).map(|i| if fixed[i] { 0.0 } else { sys.rhs[i] - mg[i] }).collect();
    let b_norm = dot(&b, &b).sqrt();

    for i in 0..n {
        if fixed[i] {
            x[i] = 0.0;
        }
    }
    let masked_mul = |v: &[f64], out: &mut [f64]| {
        sys.matrix.mul_vec(v, out);
        for i in 0..n {
            if fixed[i] {
                out[i] = 0.0;
            }
        }
    };

    let finish = |mut x: Vec<f64>, stats: SolveStats| {
        for (&d, &v) in &sys.dirichlet {
            x[d] = v;
        }
        Ok((ScalarField { dofs: sys.dofs.clone(), values: x }, stats))
    };

    if b_norm == 0.0 {
        return finish(vec![0.0; n], SolveStats::default());
    }

    let inv_diag: Vec<f64> = sys
        .matrix
        .diagonal()
        .iter()
        .zip(&fixed)
        .map(|(&d, &f)| if f || d == 0.0 { 0.0 } else { 1.0 / d })
        .collect();

    let mut r = vec![0.0; n];
    masked_mul(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let target = opts.tol_rel * b_norm;

    let mut res = dot(&r, &r).sqrt();
    for it in 0..=opts.max_iter {
        if res <= target {
            return finish(x, SolveStats { iterations: it, residual: res / b_norm });
        }
        if it == opts.max_iter {
            break;
        }
        masked_mul(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = dot(&r, &r).sqrt();
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: res / b_norm })
}
