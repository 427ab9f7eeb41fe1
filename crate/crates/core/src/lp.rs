//! Revised primal simplex for the packing relaxation
//! `max c.x  s.t.  sum_{j covers i} x_j <= 1,  x >= 0`
//! where every column is a 0/1 vector given by its row list.
//!
//! The solver only feeds bounds to the branch and bound, so it never has to
//! be exact: [`dual_bound`] turns any nonnegative dual vector into a valid
//! upper bound, whatever state the simplex stopped in.

use alloc::vec;
use alloc::vec::Vec;

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 50;

pub(crate) struct LpSolution {
    /// Row duals, clipped at zero.
    pub duals: Vec<f64>,
    /// Primal value per column.
    pub primal: Vec<f64>,
}

/// Upper bound on `c.x` over every 0/1 packing of `cols`, from any `y >= 0`:
/// `sum_i y_i + sum_j max(0, c_j - y(col_j))`, rows counted once if some
/// column touches them.
pub(crate) fn dual_bound<'a>(
    duals: &[f64],
    cols: impl Iterator<Item = (&'a [u32], f64)>,
    seen: &mut [bool],
    touched: &mut Vec<u32>,
) -> f64 {
    let mut total = 0.0;
    for (rows, c) in cols {
        let mut covered = 0.0;
        for &r in rows {
            let y = duals[r as usize].max(0.0);
            covered += y;
            if !seen[r as usize] {
                seen[r as usize] = true;
                touched.push(r);
                total += y;
            }
        }
        if c > covered {
            total += c - covered;
        }
    }
    for r in touched.drain(..) {
        seen[r as usize] = false;
    }
    total
}

/// Solves the relaxation over `cols` (row lists) with costs `c` on `m`
/// rows. Stops after `max_pivots`, returning whatever duals it has.
pub(crate) fn solve_packing(m: usize, cols: &[&[u32]], c: &[f64], max_pivots: usize) -> LpSolution {
    let n = cols.len();
    // basis[i] = variable basic in row position i; variables 0..n are
    // columns, n..n+m slacks
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut in_basis: Vec<Option<usize>> = vec![None; n + m];
    for i in 0..m {
        in_basis[n + i] = Some(i);
    }
    let mut binv = identity(m);
    let mut xb = vec![1.0; m];
    let mut y = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut since_refactor = 0;
    let mut degenerate = 0;

    let cost = |var: usize| if var < n { c[var] } else { 0.0 };

    for _ in 0..max_pivots {
        // y = c_B B^-1
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = (0..m).map(|i| cost(basis[i]) * binv[i * m + j]).sum();
        }
        let bland = degenerate >= DEGENERATE_STREAK;
        let mut entering: Option<(usize, f64)> = None;
        let mut consider = |var: usize, d: f64| {
            if d > PRICE_TOL {
                match entering {
                    None => entering = Some((var, d)),
                    Some((_, best)) if !bland && d > best => entering = Some((var, d)),
                    _ => {}
                }
            }
        };
        for j in 0..n {
            if in_basis[j].is_none() {
                let d = c[j] - cols[j].iter().map(|&r| y[r as usize]).sum::<f64>();
                consider(j, d);
            }
        }
        for i in 0..m {
            if in_basis[n + i].is_none() {
                consider(n + i, -y[i]);
            }
        }
        let Some((enter, _)) = entering else { break };

        // u = B^-1 a_enter
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = if enter < n {
                cols[enter].iter().map(|&r| binv[i * m + r as usize]).sum()
            } else {
                binv[i * m + (enter - n)]
            };
        }
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if u[i] > PIVOT_TOL {
                let ratio = xb[i] / u[i];
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // bounded by construction (every column has a row), so this only
        // triggers on numerical trouble
        let Some((row, step)) = leave else { break };
        degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };

        let pivot = u[row];
        for i in 0..m {
            if i != row {
                xb[i] -= step * u[i];
            }
        }
        xb[row] = step;
        for j in 0..m {
            binv[row * m + j] /= pivot;
        }
        for i in 0..m {
            if i != row && u[i] != 0.0 {
                let f = u[i];
                for j in 0..m {
                    binv[i * m + j] -= f * binv[row * m + j];
                }
            }
        }
        in_basis[basis[row]] = None;
        basis[row] = enter;
        in_basis[enter] = Some(row);

        since_refactor += 1;
        if since_refactor >= REFACTOR_EVERY {
            since_refactor = 0;
            if let Some(fresh) = invert(m, &basis, n, cols) {
                binv = fresh;
                for (i, x) in xb.iter_mut().enumerate() {
                    *x = (0..m).map(|j| binv[i * m + j]).sum::<f64>().max(0.0);
                }
            }
        }
    }

    for (j, yj) in y.iter_mut().enumerate() {
        *yj = (0..m).map(|i| cost(basis[i]) * binv[i * m + j]).sum::<f64>().max(0.0);
    }
    let mut primal = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            primal[basis[i]] = xb[i].max(0.0);
        }
    }
    LpSolution { duals: y, primal }
}

fn identity(m: usize) -> Vec<f64> {
    let mut a = vec![0.0f64; m * m];
    for i in 0..m {
        a[i * m + i] = 1.0;
    }
    a
}

/// Gauss-Jordan inverse of the basis matrix, or `None` if it is numerically
/// singular.
fn invert(m: usize, basis: &[usize], n: usize, cols: &[&[u32]]) -> Option<Vec<f64>> {
    let mut a = vec![0.0f64; m * m];
    for (pos, &var) in basis.iter().enumerate() {
        if var < n {
            for &r in cols[var] {
                a[r as usize * m + pos] = 1.0;
            }
        } else {
            a[(var - n) * m + pos] = 1.0;
        }
    }
    let mut inv = identity(m);
    for col in 0..m {
        let p = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[p * m + col].abs() < 1e-12 {
            return None;
        }
        if p != col {
            for j in 0..m {
                a.swap(p * m + j, col * m + j);
                inv.swap(p * m + j, col * m + j);
            }
        }
        let d = a[col * m + col];
        for j in 0..m {
            a[col * m + j] /= d;
            inv[col * m + j] /= d;
        }
        for i in 0..m {
            if i != col {
                let f = a[i * m + col];
                if f != 0.0 {
                    for j in 0..m {
                        a[i * m + j] -= f * a[col * m + j];
                        inv[i * m + j] -= f * inv[col * m + j];
                    }
                }
            }
        }
    }
    // `a` is indexed (row, basis position), so `inv` is (position, row)
    Some(inv)
}
