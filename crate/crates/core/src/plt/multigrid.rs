//! Weighted graph Laplacians on node grids of the unit square and a
//! multigrid-preconditioned conjugate gradient solver for them.
//!
//! The operator is `(L u)_v = sum over faces (v, w) of c_vw (u_v - u_w)`
//! with `c = kappa * transverse width / h`; it is symmetric positive
//! semidefinite with the constants as kernel. Right-hand sides must sum to
//! zero and solutions are returned with zero mean.

use crate::exec::{ordered_sum, Exec};

const PRE_SWEEPS: usize = 2;
const POST_SWEEPS: usize = 2;
const JACOBI_DAMPING: f64 = 0.8;
/// Largest coarse grid factorized directly.
const DIRECT_MAX_N: usize = 33;

/// Face coefficients `kappa` of a node grid with `n` nodes per side.
#[derive(Clone, Debug)]
pub(crate) struct FaceCoefficients {
    pub n: usize,
    /// Face `(i, j) - (i + 1, j)` at `j * (n - 1) + i`.
    pub along_p: Vec<f64>,
    /// Face `(i, j) - (i, j + 1)` at `j * n + i`.
    pub along_x2: Vec<f64>,
}

impl FaceCoefficients {
    fn coarsen(&self) -> FaceCoefficients {
        let n = self.n;
        let nc = (n - 1) / 2 + 1;
        let mut along_p = vec![0.0; nc * (nc - 1)];
        let mut along_x2 = vec![0.0; (nc - 1) * nc];
        for jc in 0..nc {
            for ic in 0..nc - 1 {
                let row = 2 * jc * (n - 1);
                along_p[jc * (nc - 1) + ic] = 0.5 * (self.along_p[row + 2 * ic] + self.along_p[row + 2 * ic + 1]);
            }
        }
        for jc in 0..nc - 1 {
            for ic in 0..nc {
                let (a, b) = (2 * jc * n + 2 * ic, (2 * jc + 1) * n + 2 * ic);
                along_x2[jc * nc + ic] = 0.5 * (self.along_x2[a] + self.along_x2[b]);
            }
        }
        FaceCoefficients { n: nc, along_p, along_x2 }
    }
}

/// Assembled conductances of one grid level.
struct Level {
    n: usize,
    cp: Vec<f64>,
    cx: Vec<f64>,
    diag: Vec<f64>,
}

impl Level {
    fn new(k: &FaceCoefficients) -> Level {
        let n = k.n;
        let edge = |j: usize| if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        let mut cp = vec![0.0; n * (n - 1)];
        let mut cx = vec![0.0; (n - 1) * n];
        for j in 0..n {
            for i in 0..n - 1 {
                cp[j * (n - 1) + i] = k.along_p[j * (n - 1) + i] * edge(j);
            }
        }
        for j in 0..n - 1 {
            for i in 0..n {
                cx[j * n + i] = k.along_x2[j * n + i] * edge(i);
            }
        }
        let mut diag = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let mut d = 0.0;
                if i > 0 {
                    d += cp[j * (n - 1) + i - 1];
                }
                if i + 1 < n {
                    d += cp[j * (n - 1) + i];
                }
                if j > 0 {
                    d += cx[(j - 1) * n + i];
                }
                if j + 1 < n {
                    d += cx[j * n + i];
                }
                diag[j * n + i] = d;
            }
        }
        Level { n, cp, cx, diag }
    }

    /// Row `j` of `L x`, summed as conductance times difference so the
    /// rounding error scales with the differences rather than with `x`.
    fn apply_row(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate() {
            let v = j * n + i;
            let xv = x[v];
            let mut s = 0.0;
            if i > 0 {
                s += self.cp[j * (n - 1) + i - 1] * (xv - x[v - 1]);
            }
            if i + 1 < n {
                s += self.cp[j * (n - 1) + i] * (xv - x[v + 1]);
            }
            if j > 0 {
                s += self.cx[(j - 1) * n + i] * (xv - x[v - n]);
            }
            if j + 1 < n {
                s += self.cx[j * n + i] * (xv - x[v + n]);
            }
            *o = s;
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64], exec: Exec) {
        exec.for_each_chunk_mut(out, self.n, |j, row| self.apply_row(x, j, row));
    }

    fn residual(&self, b: &[f64], x: &[f64], out: &mut [f64], exec: Exec) {
        self.apply(x, out, exec);
        for (o, bv) in out.iter_mut().zip(b) {
            *o = bv - *o;
        }
    }

    fn jacobi(&self, b: &[f64], x: &mut [f64], sweeps: usize, exec: Exec) {
        let mut r = vec![0.0; x.len()];
        for _ in 0..sweeps {
            self.residual(b, x, &mut r, exec);
            for ((xv, rv), d) in x.iter_mut().zip(&r).zip(&self.diag) {
                *xv += JACOBI_DAMPING * rv / d;
            }
        }
    }
}

/// Bilinear prolongation from `nc` to `2 nc - 1` nodes per side.
fn prolong(nc: usize, xc: &[f64]) -> Vec<f64> {
    let n = 2 * nc - 1;
    let mut x = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (ic, jc) = (i / 2, j / 2);
            let v = match (i % 2, j % 2) {
                (0, 0) => xc[jc * nc + ic],
                (1, 0) => 0.5 * (xc[jc * nc + ic] + xc[jc * nc + ic + 1]),
                (0, 1) => 0.5 * (xc[jc * nc + ic] + xc[(jc + 1) * nc + ic]),
                _ => {
                    0.25 * (xc[jc * nc + ic] + xc[jc * nc + ic + 1] + xc[(jc + 1) * nc + ic] + xc[(jc + 1) * nc + ic + 1])
                }
            };
            x[j * n + i] = v;
        }
    }
    x
}

/// Transpose of [`prolong`].
fn restrict(n: usize, r: &[f64]) -> Vec<f64> {
    let nc = (n - 1) / 2 + 1;
    let mut rc = vec![0.0; nc * nc];
    for j in 0..n {
        for i in 0..n {
            let v = r[j * n + i];
            let (ic, jc) = (i / 2, j / 2);
            match (i % 2, j % 2) {
                (0, 0) => rc[jc * nc + ic] += v,
                (1, 0) => {
                    rc[jc * nc + ic] += 0.5 * v;
                    rc[jc * nc + ic + 1] += 0.5 * v;
                }
                (0, 1) => {
                    rc[jc * nc + ic] += 0.5 * v;
                    rc[(jc + 1) * nc + ic] += 0.5 * v;
                }
                _ => {
                    rc[jc * nc + ic] += 0.25 * v;
                    rc[jc * nc + ic + 1] += 0.25 * v;
                    rc[(jc + 1) * nc + ic] += 0.25 * v;
                    rc[(jc + 1) * nc + ic + 1] += 0.25 * v;
                }
            }
        }
    }
    rc
}

fn project_mean(x: &mut [f64]) {
    let m = ordered_sum(x.iter().copied()) / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    ordered_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Dense LU of the coarsest operator with node 0 pinned.
struct DirectSolver {
    m: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DirectSolver {
    fn new(level: &Level) -> DirectSolver {
        let m = level.n * level.n;
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        let mut e = vec![0.0; m];
        for c in 0..m {
            e[c] = 1.0;
            for j in 0..level.n {
                level.apply_row(&e, j, &mut col[j * level.n..(j + 1) * level.n]);
            }
            for r in 0..m {
                a[r * m + c] = col[r];
            }
            e[c] = 0.0;
        }
        a[..m].fill(0.0);
        a[0] = 1.0;
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let p = (k..m)
                .max_by(|&x, &y| a[x * m + k].abs().total_cmp(&a[y * m + k].abs()))
                .unwrap_or(k);
            if p != k {
                for c in 0..m {
                    a.swap(k * m + c, p * m + c);
                }
                perm.swap(k, p);
            }
            let piv = a[k * m + k];
            for r in k + 1..m {
                let f = a[r * m + k] / piv;
                a[r * m + k] = f;
                if f != 0.0 {
                    for c in k + 1..m {
                        a[r * m + c] -= f * a[k * m + c];
                    }
                }
            }
        }
        DirectSolver { m, lu: a, perm }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut rhs = b.to_vec();
        project_mean(&mut rhs);
        rhs[0] = 0.0;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for r in 0..m {
            for c in 0..r {
                y[r] -= self.lu[r * m + c] * y[c];
            }
        }
        for r in (0..m).rev() {
            for c in r + 1..m {
                y[r] -= self.lu[r * m + c] * y[c];
            }
            y[r] /= self.lu[r * m + r];
        }
        project_mean(&mut y);
        y
    }
}

/// Multigrid hierarchy for one set of face coefficients.
pub(crate) struct Hierarchy {
    levels: Vec<Level>,
    direct: Option<DirectSolver>,
    exec: Exec,
}

/// Outcome of [`Hierarchy::solve`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct LinearSolve {
    pub iterations: usize,
    pub converged: bool,
}

impl Hierarchy {
    pub(crate) fn new(k: &FaceCoefficients, exec: Exec) -> Hierarchy {
        let mut coeffs = vec![k.clone()];
        loop {
            let last = coeffs.last().unwrap();
            if last.n < 5 || (last.n - 1) % 2 != 0 {
                break;
            }
            let c = last.coarsen();
            coeffs.push(c);
        }
        let levels: Vec<Level> = coeffs.iter().map(Level::new).collect();
        let coarsest = levels.last().unwrap();
        let direct = (coarsest.n <= DIRECT_MAX_N).then(|| DirectSolver::new(coarsest));
        Hierarchy { levels, direct, exec }
    }

    pub(crate) fn n(&self) -> usize {
        self.levels[0].n
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.levels[0].apply(x, out, self.exec);
    }

    fn vcycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            return match &self.direct {
                Some(d) => d.solve(b),
                None => {
                    let mut x = vec![0.0; b.len()];
                    level.jacobi(b, &mut x, 4 * level.n, self.exec);
                    project_mean(&mut x);
                    x
                }
            };
        }
        let mut x = vec![0.0; b.len()];
        level.jacobi(b, &mut x, PRE_SWEEPS, self.exec);
        let mut r = vec![0.0; b.len()];
        level.residual(b, &x, &mut r, self.exec);
        let ec = self.vcycle(l + 1, &restrict(level.n, &r));
        let e = prolong(self.levels[l + 1].n, &ec);
        for (xv, ev) in x.iter_mut().zip(&e) {
            *xv += ev;
        }
        level.jacobi(b, &mut x, POST_SWEEPS, self.exec);
        project_mean(&mut x);
        x
    }

    /// Preconditioned CG from the initial guess `x`. Stops when every
    /// `|r_v| / weight_v <= tol` or after `max_iter` iterations.
    pub(crate) fn solve(&self, b: &[f64], x: &mut [f64], weight: &[f64], tol: f64, max_iter: usize) -> LinearSolve {
        let m = b.len();
        let mut r = vec![0.0; m];
        self.levels[0].residual(b, x, &mut r, self.exec);
        project_mean(&mut r);
        let small = |r: &[f64]| r.iter().zip(weight).all(|(rv, w)| rv.abs() <= tol * w);
        if small(&r) {
            return LinearSolve { iterations: 0, converged: true };
        }
        let mut z = self.vcycle(0, &r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; m];
        for it in 1..=max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return LinearSolve { iterations: it, converged: false };
            }
            let alpha = rz / pap;
            for k in 0..m {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if small(&r) {
                return LinearSolve { iterations: it, converged: true };
            }
            z = self.vcycle(0, &r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..m {
                p[k] = z[k] + beta * p[k];
            }
        }
        LinearSolve { iterations: max_iter, converged: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, value: f64) -> FaceCoefficients {
        FaceCoefficients {
            n,
            along_p: vec![value; n * (n - 1)],
            along_x2: vec![value; (n - 1) * n],
        }
    }

    #[test]
    fn restriction_is_the_transpose_of_prolongation() {
        let nc = 5;
        let n = 9;
        let xc: Vec<f64> = (0..nc * nc).map(|k| ((k * 7) % 11) as f64 - 5.0).collect();
        let r: Vec<f64> = (0..n * n).map(|k| ((k * 5) % 13) as f64 * 0.25).collect();
        let lhs = dot(&prolong(nc, &xc), &r);
        let rhs = dot(&xc, &restrict(n, &r));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn operator_annihilates_constants_and_is_symmetric() {
        let mut k = uniform(9, 1.0);
        for (t, v) in k.along_p.iter_mut().enumerate() {
            *v = 1.0 + 0.1 * (t % 5) as f64;
        }
        let h = Hierarchy::new(&k, Exec::Sequential);
        let mut out = vec![0.0; 81];
        h.apply(&[3.0; 81], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-13));
        let a: Vec<f64> = (0..81).map(|t| (t as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..81).map(|t| (t as f64 * 0.91).cos()).collect();
        let (mut la, mut lb) = (vec![0.0; 81], vec![0.0; 81]);
        h.apply(&a, &mut la);
        h.apply(&b, &mut lb);
        assert!((dot(&la, &b) - dot(&a, &lb)).abs() < 1e-12);
    }

    #[test]
    fn solves_a_discrete_poisson_problem() {
        for n in [9, 33, 129, 40] {
            let k = uniform(n, 1.0);
            let hier = Hierarchy::new(&k, Exec::default());
            // Manufactured solution.
            let u: Vec<f64> = (0..n * n)
                .map(|v| {
                    let (i, j) = (v % n, v / n);
                    ((i as f64) * 0.3).sin() + ((j * i) as f64 * 0.01).cos()
                })
                .collect();
            let mut b = vec![0.0; n * n];
            hier.apply(&u, &mut b);
            let mut x = vec![0.0; n * n];
            let w = vec![1.0; n * n];
            let res = hier.solve(&b, &mut x, &w, 1e-11, 400);
            assert!(res.converged, "n = {n}");
            if n.is_power_of_two() || (n - 1).is_power_of_two() {
                assert!(res.iterations < 30, "n = {n}: {} iterations", res.iterations);
            }
            let shift = u[0] - x[0];
            let err = u.iter().zip(&x).map(|(a, b)| (a - b - shift).abs()).fold(0.0, f64::max);
            assert!(err < 1e-7, "n = {n}: err {err}");
        }
    }
}
