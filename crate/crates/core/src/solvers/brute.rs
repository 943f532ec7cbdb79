//! Exhaustive enumeration of faces; an independent oracle for small problems.

use nalgebra::{DMatrix, DVector};

use super::NnqpProblem;
use crate::error::{Error, Result};

/// Largest problem the enumeration accepts (`2^m` faces, twice with a cap).
pub const BRUTE_FORCE_MAX: usize = 14;

/// Minimizes over every face: for each candidate support, solves the
/// equality-constrained system (with and without the cap tight) by LU and keeps
/// the feasible candidate with the smallest objective.
pub fn brute_force_active_set(p: &NnqpProblem) -> Result<Vec<f64>> {
    let m = p.size();
    if m > BRUTE_FORCE_MAX {
        return Err(Error::ResourceCap {
            what: "brute-force problem size",
            value: m,
            cap: BRUTE_FORCE_MAX,
        });
    }
    let mut best = vec![0.0; m];
    let mut best_obj = 0.0;
    for mask in 1u32..(1u32 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if let Some(w) = face_candidate(p, &idx, None) {
            consider(p, w, &mut best, &mut best_obj);
        }
        if let Some(h) = p.mass_cap() {
            if let Some(w) = face_candidate(p, &idx, Some(h)) {
                consider(p, w, &mut best, &mut best_obj);
            }
        }
    }
    Ok(best)
}

fn consider(p: &NnqpProblem, w: Vec<f64>, best: &mut Vec<f64>, best_obj: &mut f64) {
    let obj = p.objective(&w);
    if obj < *best_obj {
        *best_obj = obj;
        *best = w;
    }
}

fn face_candidate(p: &NnqpProblem, idx: &[usize], cap: Option<f64>) -> Option<Vec<f64>> {
    let k = idx.len();
    let n = k + usize::from(cap.is_some());
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            a[(r, c)] = p.q()[(i, j)];
        }
        rhs[r] = p.b()[i];
    }
    if let Some(h) = cap {
        for r in 0..k {
            a[(r, k)] = 1.0;
            a[(k, r)] = 1.0;
        }
        rhs[k] = h;
    }
    let sol = a.lu().solve(&rhs)?;
    let zmax = sol.iter().take(k).fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = -1e-12 * zmax.max(f64::MIN_POSITIVE);
    if sol.iter().take(k).any(|v| !(*v >= floor)) {
        return None;
    }
    let mut w = vec![0.0; p.size()];
    for (r, &i) in idx.iter().enumerate() {
        w[i] = sol[r].max(0.0);
    }
    if let Some(h) = p.mass_cap() {
        let mass: f64 = w.iter().sum();
        if mass > h * (1.0 + 1e-12) {
            return None;
        }
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let p = NnqpProblem::new(
            DMatrix::from_row_slice(1, 1, &[4.0]),
            DVector::from_vec(vec![2.0]),
            None,
        )
        .unwrap();
        assert_eq!(brute_force_active_set(&p).unwrap(), vec![0.5]);
        let p = NnqpProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]),
            DVector::from_vec(vec![2.0, -2.0]),
            None,
        )
        .unwrap();
        assert_eq!(brute_force_active_set(&p).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn refuses_large_problems() {
        let p = NnqpProblem::new(
            DMatrix::identity(15, 15),
            DVector::from_element(15, 1.0),
            None,
        )
        .unwrap();
        assert!(matches!(
            brute_force_active_set(&p),
            Err(Error::ResourceCap { .. })
        ));
    }
}
