//! Exact matrix-game solver via the minimax linear program.

use crate::error::{Error, Result};
use crate::game::{col_payoffs, max_of, min_of, row_payoffs};

pub const NE_GAP_TOL: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 10_000;

/// Equilibrium of a zero-sum matrix game; the row player maximizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSolution {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub value: f64,
    /// `max_a (M col)_a - min_b (M^T row)_b`
    pub gap: f64,
}

/// Solves the row-major `a x b` matrix game `m`.
///
/// After shifting `m` to be strictly positive, the column player's problem is
/// `max 1^T y  s.t.  M y <= 1, y >= 0`; its duals give the row strategy.
pub fn matrix_ne(m: &[f64], a: usize, b: usize) -> Result<MatrixSolution> {
    if a == 0 || b == 0 || m.len() != a * b {
        return Err(Error::Shape(format!("matrix of {} entries is not {a}x{b}", m.len())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix_ne input".into()));
    }
    let lo = min_of(m);
    let hi = max_of(m);
    if lo == hi {
        return Ok(MatrixSolution {
            row: vec![1.0 / a as f64; a],
            col: vec![1.0 / b as f64; b],
            value: lo,
            gap: 0.0,
        });
    }
    let shift = 1.0 - lo;

    // Tableau rows: a constraints, then the objective. Columns: y (b), slacks (a), rhs.
    let width = b + a + 1;
    let mut tab = vec![0.0; (a + 1) * width];
    for i in 0..a {
        for j in 0..b {
            tab[i * width + j] = m[i * b + j] + shift;
        }
        tab[i * width + b + i] = 1.0;
        tab[i * width + width - 1] = 1.0;
    }
    for j in 0..b {
        tab[a * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (b..b + a).collect();

    let mut pivots = 0;
    loop {
        let obj = &tab[a * width..(a + 1) * width];
        let Some(enter) = (0..width - 1).find(|&j| obj[j] < -PIVOT_EPS) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..a {
            let coef = tab[i * width + enter];
            if coef > PIVOT_EPS {
                let ratio = tab[i * width + width - 1] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, r)) if ratio < r || (ratio == r && basis[i] < basis[k]) => Some((i, ratio)),
                    keep => keep,
                };
            }
        }
        // The feasible region is bounded (every entry of M is positive).
        let Some((row, _)) = leave else { return Err(Error::SolverFailure { gap: f64::INFINITY }) };
        pivot(&mut tab, width, row, enter);
        basis[row] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::SolverFailure { gap: f64::INFINITY });
        }
    }

    let mut y = vec![0.0; b];
    for (i, &var) in basis.iter().enumerate() {
        if var < b {
            y[var] = tab[i * width + width - 1].max(0.0);
        }
    }
    let x: Vec<f64> = (0..a).map(|i| tab[a * width + b + i].max(0.0)).collect();
    let col = normalize(y);
    let row = normalize(x);
    let (Some(col), Some(row)) = (col, row) else {
        return Err(Error::SolverFailure { gap: f64::INFINITY });
    };

    let gap = max_of(&row_payoffs(m, &col)) - min_of(&col_payoffs(m, &row));
    if !(gap <= NE_GAP_TOL) {
        return Err(Error::SolverFailure { gap });
    }
    let value = crate::game::bilinear(m, &row, &col);
    Ok(MatrixSolution { row, col, value, gap })
}

fn pivot(tab: &mut [f64], width: usize, row: usize, col: usize) {
    let p = tab[row * width + col];
    for x in &mut tab[row * width..(row + 1) * width] {
        *x /= p;
    }
    let pivot_row: Vec<f64> = tab[row * width..(row + 1) * width].to_vec();
    let rows = tab.len() / width;
    for r in (0..rows).filter(|&r| r != row) {
        let f = tab[r * width + col];
        if f != 0.0 {
            for (x, pr) in tab[r * width..(r + 1) * width].iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            tab[r * width + col] = 0.0;
        }
    }
}

fn normalize(v: Vec<f64>) -> Option<Vec<f64>> {
    let total: f64 = v.iter().sum();
    (total > 0.0).then(|| v.into_iter().map(|x| x / total).collect())
}
