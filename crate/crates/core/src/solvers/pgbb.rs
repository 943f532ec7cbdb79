//! Projected gradient with Barzilai-Borwein steps, finished by a primal
//! active-set phase; the mass cap is handled by bisection on its multiplier.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{kkt_residuals, NnqpProblem, NnqpSolution, SolverOptions};
use crate::error::{BestIterate, Error, Result};

/// Consecutive iterations with an unchanged support before handing over to the
/// active-set phase.
const STABLE_SUPPORT_ITERS: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MAX_BISECTIONS: usize = 200;

/// Solves the problem starting from the zero vector.
pub fn solve_nnqp(p: &NnqpProblem, opts: &SolverOptions) -> Result<NnqpSolution> {
    solve_nnqp_from(p, &vec![0.0; p.size()], opts)
}

/// Solves the problem from a given starting point, which is first made feasible.
pub fn solve_nnqp_from(p: &NnqpProblem, start: &[f64], opts: &SolverOptions) -> Result<NnqpSolution> {
    opts.validate()?;
    if start.len() != p.size() {
        return Err(Error::Parameter("starting point has the wrong length".into()));
    }
    let chol = Cholesky::new(p.q.clone())
        .ok_or_else(|| Error::Solver("matrix is not positive definite".into()))?;
    let abs_tol = opts.tol * p.scale();
    let cap = opts.iteration_cap(p.size());
    let mut w0: Vec<f64> = start.iter().map(|v| v.max(0.0)).collect();
    if let Some(h) = p.mass_cap {
        let mass: f64 = w0.iter().sum();
        if mass > h {
            w0.iter_mut().for_each(|v| *v *= h / mass);
        }
    }

    let inner = BoxSolver {
        q: &p.q,
        chol: &chol,
        abs_tol,
        max_iter: cap,
    };
    let free = inner.solve(p.b.clone(), w0)?;
    let free_mass: f64 = free.w.iter().sum();
    let h = match p.mass_cap {
        Some(h) if free_mass > h => h,
        _ => return finish(p, free.w, 0.0, free.iterations, free.history, opts.tol),
    };

    // Cap active: mass(eta) is continuous and nonincreasing, so bisect for mass = H.
    let mut lo = 0.0;
    let mut hi = p.b.max().max(0.0);
    let mut w_lo = free.w;
    let mut w_hi = vec![0.0; p.size()];
    let mut hist_hi = vec![0.0];
    let mut iterations = free.iterations;
    let mut prev_support: Option<Vec<usize>> = None;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let c = p.b.map(|v| v - mid);
        let sol = inner.solve(c, w_lo.clone())?;
        iterations += sol.iterations;
        let support = positive_support(&sol.w);
        let mass: f64 = sol.w.iter().sum();
        let try_polish = prev_support.as_ref() == Some(&support) || p.size() <= 64;
        if try_polish {
            if let Some((w, eta)) = polish_capped(p, &support, h, abs_tol) {
                return finish(p, w, eta, iterations, sol.history, opts.tol);
            }
        }
        prev_support = Some(support);
        if mass > h {
            lo = mid;
            w_lo = sol.w;
        } else {
            hi = mid;
            w_hi = sol.w;
            hist_hi = sol.history;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    finish(p, w_hi, hi, iterations, hist_hi, opts.tol)
}

fn finish(
    p: &NnqpProblem,
    w: Vec<f64>,
    eta: f64,
    iterations: usize,
    history: Vec<f64>,
    tol: f64,
) -> Result<NnqpSolution> {
    let mut report = kkt_residuals(p, &w, eta, tol);
    report.iterations = iterations;
    let mass: f64 = w.iter().sum();
    if report.converged(mass) {
        Ok(NnqpSolution {
            weights: w,
            multiplier: eta,
            report,
            objective_history: history,
        })
    } else {
        Err(Error::Convergence {
            iterations,
            residual: report.stationarity_residual,
            best: Box::new(BestIterate {
                weights: w,
                multiplier: eta,
                report,
            }),
        })
    }
}

fn positive_support(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > 0.0).collect()
}

/// Solves the cap-active KKT system on a fixed support and accepts the result
/// only if it is primal and dual feasible.
fn polish_capped(p: &NnqpProblem, support: &[usize], h: f64, abs_tol: f64) -> Option<(Vec<f64>, f64)> {
    let k = support.len();
    if k == 0 {
        return None;
    }
    let mut a = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = p.q[(i, j)];
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
        rhs[r] = p.b[i];
    }
    rhs[k] = h;
    let sol = a.lu().solve(&rhs)?;
    let eta = sol[k];
    if !(eta >= 0.0) || sol.iter().take(k).any(|v| !(*v > 0.0)) {
        return None;
    }
    let mut w = vec![0.0; p.size()];
    for (r, &i) in support.iter().enumerate() {
        w[i] = sol[r];
    }
    let g = &p.q * DVector::from_column_slice(&w) - &p.b;
    let dual_ok = (0..p.size()).all(|i| g[i] + eta >= -abs_tol);
    dual_ok.then_some((w, eta))
}

struct BoxSolve {
    w: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
}

/// Solver for `min 1/2 w'Qw - c'w, w >= 0`.
struct BoxSolver<'a> {
    q: &'a DMatrix<f64>,
    chol: &'a Cholesky<f64, Dyn>,
    abs_tol: f64,
    max_iter: usize,
}

impl BoxSolver<'_> {
    fn objective(&self, w: &DVector<f64>, qw: &DVector<f64>, c: &DVector<f64>) -> f64 {
        0.5 * w.dot(qw) - c.dot(w)
    }

    fn solve(&self, c: DVector<f64>, start: Vec<f64>) -> Result<BoxSolve> {
        let m = c.len();
        let mut w = DVector::from_vec(start);
        let mut qw = self.q * &w;
        let mut f = self.objective(&w, &qw, &c);
        let mut history = vec![f];
        let mut g = &qw - &c;

        let proj_grad = |w: &DVector<f64>, g: &DVector<f64>| -> DVector<f64> {
            DVector::from_fn(m, |i, _| if w[i] > 0.0 { g[i] } else { g[i].min(0.0) })
        };

        // Cauchy step along the projected gradient for the first iteration.
        let pg = proj_grad(&w, &g);
        let curv = pg.dot(&(self.q * &pg));
        let mut alpha = if curv > 0.0 {
            pg.dot(&pg) / curv
        } else {
            1.0 / self.q.diagonal().max()
        };

        let mut iterations = 0;
        let mut stable = 0;
        let mut support: Vec<bool> = w.iter().map(|v| *v > 0.0).collect();
        while iterations < self.max_iter {
            if proj_grad(&w, &g).amax() <= self.abs_tol {
                break;
            }
            let mut accepted = None;
            let mut step = alpha;
            for _ in 0..MAX_BACKTRACKS {
                let w_new = (&w - &g * step).map(|v| v.max(0.0));
                let d = &w_new - &w;
                if d.amax() == 0.0 {
                    break;
                }
                let qw_new = self.q * &w_new;
                let f_new = self.objective(&w_new, &qw_new, &c);
                if f_new <= f + ARMIJO * g.dot(&d) {
                    accepted = Some((w_new, qw_new, f_new, d));
                    break;
                }
                step *= 0.5;
            }
            let Some((w_new, qw_new, f_new, d)) = accepted else {
                break;
            };
            iterations += 1;
            let y = &qw_new - &qw;
            let sy = d.dot(&y);
            alpha = if sy > 0.0 { d.dot(&d) / sy } else { 2.0 * step };
            w = w_new;
            qw = qw_new;
            f = f_new;
            g = &qw - &c;
            history.push(f);

            let new_support: Vec<bool> = w.iter().map(|v| *v > 0.0).collect();
            if new_support == support {
                stable += 1;
            } else {
                stable = 0;
                support = new_support;
            }
            if stable >= STABLE_SUPPORT_ITERS {
                break;
            }
        }

        let (w, as_iters) = self.active_set(&c, w.as_slice().to_vec(), &mut history)?;
        Ok(BoxSolve {
            w,
            iterations: iterations + as_iters,
            history,
        })
    }

    /// Primal active-set iterations from a feasible point. Each step moves
    /// toward the minimizer on the current face, so the objective never increases.
    fn active_set(
        &self,
        c: &DVector<f64>,
        mut w: Vec<f64>,
        history: &mut Vec<f64>,
    ) -> Result<(Vec<f64>, usize)> {
        let m = w.len();
        let release_tol = 0.1 * self.abs_tol;
        let mut free: Vec<bool> = w.iter().map(|v| *v > 0.0).collect();
        let cap = self.max_iter.max(10 * m + 100);
        for it in 0..cap {
            let idx: Vec<usize> = (0..m).filter(|&i| free[i]).collect();
            let z_free = self.face_minimizer(&idx, c)?;
            let blocking = idx
                .iter()
                .zip(z_free.iter())
                .filter(|(_, z)| **z <= 0.0)
                .map(|(&i, &z)| (i, w[i] / (w[i] - z)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match blocking {
                None => {
                    for v in w.iter_mut() {
                        *v = 0.0;
                    }
                    for (&i, &z) in idx.iter().zip(z_free.iter()) {
                        w[i] = z;
                    }
                    let wv = DVector::from_column_slice(&w);
                    let qw = self.q * &wv;
                    history.push(self.objective(&wv, &qw, c));
                    let g = &qw - c;
                    let release = (0..m)
                        .filter(|&i| !free[i])
                        .map(|i| (i, g[i]))
                        .min_by(|a, b| a.1.total_cmp(&b.1));
                    match release {
                        Some((j, gj)) if gj < -release_tol => free[j] = true,
                        _ => return Ok((w, it + 1)),
                    }
                }
                Some((_, alpha)) => {
                    let alpha = alpha.clamp(0.0, 1.0);
                    for (&i, &z) in idx.iter().zip(z_free.iter()) {
                        w[i] += alpha * (z - w[i]);
                    }
                    // the blocking index always leaves the face
                    let (bi, _) = blocking.unwrap();
                    w[bi] = 0.0;
                    for i in 0..m {
                        if w[i] <= 0.0 {
                            w[i] = 0.0;
                            free[i] = false;
                        }
                    }
                    let wv = DVector::from_column_slice(&w);
                    let qw = self.q * &wv;
                    history.push(self.objective(&wv, &qw, c));
                }
            }
        }
        Err(Error::Convergence {
            iterations: cap,
            residual: f64::NAN,
            best: Box::new(BestIterate {
                weights: w,
                multiplier: 0.0,
                report: Default::default(),
            }),
        })
    }

    fn face_minimizer(&self, idx: &[usize], c: &DVector<f64>) -> Result<Vec<f64>> {
        if idx.is_empty() {
            return Ok(Vec::new());
        }
        let rhs = DVector::from_fn(idx.len(), |r, _| c[idx[r]]);
        let z = if idx.len() == c.len() {
            self.chol.solve(&rhs)
        } else {
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.q[(idx[a], idx[b])]);
            Cholesky::new(sub)
                .ok_or_else(|| Error::Solver("principal submatrix is not positive definite".into()))?
                .solve(&rhs)
        };
        Ok(z.as_slice().to_vec())
    }
}
