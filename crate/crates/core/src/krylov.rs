//! Restarted GMRES on flat complex vectors.
//!
//! Orthogonalization is single-pass modified Gram-Schmidt, the residual
//! estimate follows the Givens recurrence, and the true residual is
//! recomputed at every restart boundary.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A linear map on `C^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// Writes `A·x` into `y`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        (**self).apply(x, y)
    }
}

/// Wraps a closure as an operator of the given dimension.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[Complex64], &mut [Complex64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[Complex64], &mut [Complex64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        (self.f)(x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { restart: 10, tol: 1e-6, max_outer: 100 }
    }
}

impl GmresConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::InvalidParameter("GMRES restart length must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!("GMRES tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter("GMRES needs at least one restart cycle".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// Arnoldi steps taken, summed over restart cycles.
    pub iterations: usize,
    /// Operator applications, including residual recomputations.
    pub matvecs: usize,
    pub restarts: usize,
    /// Relative residual before the first step and after every step; the
    /// entry closing a cycle is the recomputed true residual.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl SolveStats {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

#[inline]
pub(crate) fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub(crate) fn norm(u: &[Complex64]) -> f64 {
    u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(op: &impl LinearOperator, b: &[Complex64], x: &[Complex64], r: &mut [Complex64]) {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Complex Givens rotation zeroing `b` against `a`: returns real `c` and
/// complex `s` with `[c s; −s̄ c]·[a; b] = [ρ; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::default());
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let d = na.hypot(nb);
    (na / d, (a / na) * b.conj() / d)
}

/// Solves `A·x = b`, optionally starting from `x0`.
///
/// Running out of restart cycles is not an error: the best iterate is
/// returned with `converged == false`.
pub fn gmres(
    op: &impl LinearOperator,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    cfg: &GmresConfig,
) -> Result<(Vec<Complex64>, SolveStats)> {
    cfg.validate()?;
    let n = op.dim();
    if b.len() != n {
        return Err(Error::Dimension(format!("rhs has length {} for an operator of dimension {n}", b.len())));
    }
    let mut stats = SolveStats::default();
    let bnorm = norm(b);
    if !bnorm.is_finite() {
        return Err(Error::Divergence { iterations: 0 });
    }
    if bnorm == 0.0 {
        stats.residual_history.push(0.0);
        stats.converged = true;
        return Ok((vec![Complex64::default(); n], stats));
    }

    let mut x = match x0 {
        Some(v) if v.len() != n => {
            return Err(Error::Dimension(format!("initial guess has length {} for dimension {n}", v.len())))
        }
        Some(v) => v.to_vec(),
        None => vec![Complex64::default(); n],
    };
    let mut r = vec![Complex64::default(); n];
    if x0.is_some() {
        residual(op, b, &x, &mut r);
        stats.matvecs += 1;
    } else {
        r.copy_from_slice(b);
    }
    let mut beta = norm(&r);
    stats.residual_history.push(beta / bnorm);
    if beta / bnorm <= cfg.tol {
        stats.converged = true;
        return Ok((x, stats));
    }

    let m = cfg.restart;
    let mut basis: Vec<Vec<Complex64>> = (0..=m).map(|_| vec![Complex64::default(); n]).collect();
    // Hessenberg columns, rotated in place into upper-triangular form.
    let mut h = vec![vec![Complex64::default(); m + 1]; m];
    let mut cs = vec![0.0; m];
    let mut sn = vec![Complex64::default(); m];
    let mut g = vec![Complex64::default(); m + 1];

    for cycle in 0..cfg.max_outer {
        if cycle > 0 {
            stats.restarts += 1;
        }
        for (v, ri) in basis[0].iter_mut().zip(&r) {
            *v = ri / beta;
        }
        g.fill(Complex64::default());
        g[0] = Complex64::new(beta, 0.0);
        let mut steps = 0;
        let mut lucky = false;
        for j in 0..m {
            let (head, tail) = basis.split_at_mut(j + 1);
            let w = &mut tail[0];
            op.apply(&head[j], w);
            stats.matvecs += 1;
            let col = &mut h[j];
            for (i, vi) in head.iter().enumerate() {
                let hij = dot(vi, w);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm(w);
            col[j + 1] = Complex64::new(hnext, 0.0);
            for i in 0..j {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * bb;
                col[i + 1] = -sn[i].conj() * a + cs[i] * bb;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            cs[j] = c;
            sn[j] = s;
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = Complex64::default();
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;
            steps = j + 1;
            stats.iterations += 1;
            let est = g[j + 1].norm() / bnorm;
            if !est.is_finite() || !hnext.is_finite() {
                return Err(Error::Divergence { iterations: stats.iterations });
            }
            stats.residual_history.push(est);
            if est <= cfg.tol {
                break;
            }
            if hnext <= 1e-14 * bnorm {
                lucky = true;
                break;
            }
            let inv = 1.0 / hnext;
            for v in w.iter_mut() {
                *v *= inv;
            }
        }

        // Back substitution on the triangular system.
        let mut y = vec![Complex64::default(); steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc -= h[k][i] * y[k];
            }
            if h[i][i].norm() == 0.0 {
                return Err(Error::Breakdown { iterations: stats.iterations, residual: beta / bnorm });
            }
            y[i] = acc / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[i]) {
                *xk += yi * vk;
            }
        }

        residual(op, b, &x, &mut r);
        stats.matvecs += 1;
        beta = norm(&r);
        let rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(Error::Divergence { iterations: stats.iterations });
        }
        *stats.residual_history.last_mut().expect("history is never empty") = rel;
        if rel <= cfg.tol {
            stats.converged = true;
            return Ok((x, stats));
        }
        if lucky {
            return Err(Error::Breakdown { iterations: stats.iterations, residual: rel });
        }
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense {
        n: usize,
        a: Vec<Complex64>,
    }

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.n
        }

        fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
            for i in 0..self.n {
                y[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
            }
        }
    }

    fn test_matrix(n: usize) -> Dense {
        let mut a = vec![Complex64::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                let t = (i * 7 + j * 3) as f64;
                a[i * n + j] = Complex64::new((t * 0.31).sin(), (t * 0.17).cos()) * 0.3;
            }
            a[i * n + i] += Complex64::new(2.0 + i as f64 * 0.05, 0.5);
        }
        Dense { n, a }
    }

    fn rhs(n: usize) -> Vec<Complex64> {
        (0..n).map(|i| Complex64::new((i as f64).cos(), 0.3 * i as f64 / n as f64)).collect()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let op = FnOperator::new(5, |x: &[Complex64], y: &mut [Complex64]| y.copy_from_slice(x));
        let b = rhs(5);
        let (x, stats) = gmres(&op, &b, None, &GmresConfig::default()).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.iterations, 1);
        for (a, c) in x.iter().zip(&b) {
            assert!((a - c).norm() < 1e-14);
        }
    }

    #[test]
    fn exact_initial_guess_needs_no_iterations() {
        let op = test_matrix(12);
        let xs = rhs(12);
        let mut b = vec![Complex64::default(); 12];
        op.apply(&xs, &mut b);
        let (_, stats) = gmres(&op, &b, Some(&xs), &GmresConfig::default()).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.iterations, 0);
        assert_eq!(stats.residual_history.len(), 1);
    }

    #[test]
    fn reported_residual_matches_recomputed() {
        let op = test_matrix(40);
        let b = rhs(40);
        let cfg = GmresConfig { restart: 5, tol: 1e-9, max_outer: 200 };
        let (x, stats) = gmres(&op, &b, None, &cfg).unwrap();
        assert!(stats.converged);
        assert!(stats.restarts > 0);
        let mut r = vec![Complex64::default(); 40];
        residual(&op, &b, &x, &mut r);
        let rel = norm(&r) / norm(&b);
        assert!((rel - stats.final_residual()).abs() <= 10.0 * f64::EPSILON * 40.0 + 1e-3 * rel);
        assert!(stats.final_residual() <= 1e-9);
    }

    #[test]
    fn residual_is_monotone_within_cycles() {
        let op = test_matrix(30);
        let b = rhs(30);
        let cfg = GmresConfig { restart: 8, tol: 1e-12, max_outer: 50 };
        let (_, stats) = gmres(&op, &b, None, &cfg).unwrap();
        let h = &stats.residual_history;
        for cycle in h[1..].chunks(8) {
            for w in cycle.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn arnoldi_basis_is_orthonormal() {
        // One cycle at the default restart length.
        let n = 60;
        let op = test_matrix(n);
        let m = GmresConfig::default().restart;
        let mut v: Vec<Vec<Complex64>> = vec![rhs(n)];
        let b0 = norm(&v[0]);
        v[0].iter_mut().for_each(|e| *e /= b0);
        for j in 0..m {
            let mut w = vec![Complex64::default(); n];
            op.apply(&v[j], &mut w);
            for vi in &v {
                let h = dot(vi, &w);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= h * vk;
                }
            }
            let hn = norm(&w);
            w.iter_mut().for_each(|e| *e /= hn);
            v.push(w);
        }
        for i in 0..v.len() {
            for j in 0..v.len() {
                let d = dot(&v[i], &v[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).norm() < 1e-10, "<v{i}, v{j}> = {d}");
            }
        }
    }

    #[test]
    fn exhausted_cycles_return_unconverged() {
        let op = test_matrix(40);
        let b = rhs(40);
        let cfg = GmresConfig { restart: 2, tol: 1e-14, max_outer: 2 };
        let (_, stats) = gmres(&op, &b, None, &cfg).unwrap();
        assert!(!stats.converged);
        assert_eq!(stats.iterations, 4);
        assert!(stats.final_residual() < 1.0);
    }

    #[test]
    fn non_finite_operator_is_divergence() {
        let op = FnOperator::new(3, |_: &[Complex64], y: &mut [Complex64]| y.fill(Complex64::new(f64::NAN, 0.0)));
        let err = gmres(&op, &rhs(3), None, &GmresConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let op = test_matrix(4);
        let (x, stats) = gmres(&op, &[Complex64::default(); 4], None, &GmresConfig::default()).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
        assert!(stats.converged);
    }

    #[test]
    fn invalid_config_rejected() {
        let op = test_matrix(4);
        let b = rhs(4);
        assert!(gmres(&op, &b, None, &GmresConfig { restart: 0, ..Default::default() }).is_err());
        assert!(gmres(&op, &b, None, &GmresConfig { tol: 1.5, ..Default::default() }).is_err());
    }
}
