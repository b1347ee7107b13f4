//! Exact Gaussian elimination over [`Rational`].

#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::rational::{height, Rational};

/// Row-major dense matrix.
pub type Matrix = Vec<Vec<Rational>>;

fn pick_pivot(m: &Matrix, col: usize, from: usize) -> Option<usize> {
    (from..m.len()).filter(|&r| !m[r][col].is_zero()).min_by_key(|&r| height(&m[r][col]))
}

/// Solves `a · x = b` for square, nonsingular `a` and any number of
/// right-hand-side columns (`b` is `n × k`). Returns `None` if `a` is singular.
pub fn solve(mut a: Matrix, mut b: Matrix) -> Option<Matrix> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), n);
    let k = b.first().map_or(0, Vec::len);

    for col in 0..n {
        let p = pick_pivot(&a, col, col)?;
        a.swap(col, p);
        b.swap(col, p);
        let inv = Rational::one() / &a[col][col];
        for j in col..n {
            a[col][j] = &a[col][j] * &inv;
        }
        for j in 0..k {
            b[col][j] = &b[col][j] * &inv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in col..n {
                let d = &f * &a[col][j];
                a[r][j] -= d;
            }
            for j in 0..k {
                let d = &f * &b[col][j];
                b[r][j] -= d;
            }
        }
    }
    Some(b)
}

/// Solves a single right-hand side.
pub fn solve_vec(a: Matrix, b: Vec<Rational>) -> Option<Vec<Rational>> {
    let rhs = b.into_iter().map(|v| vec![v]).collect();
    solve(a, rhs).map(|x| x.into_iter().map(|mut row| row.remove(0)).collect())
}

/// Returns a nonzero `x` with `a · x = 0`, or `None` when the columns of `a`
/// are linearly independent. `cols` is the column count (needed when `a` has
/// no rows).
pub fn null_vector(mut a: Matrix, cols: usize) -> Option<Vec<Rational>> {
    let rows = a.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = pick_pivot(&a, col, r) else { continue };
        a.swap(r, p);
        let inv = Rational::one() / &a[r][col];
        for j in col..cols {
            a[r][j] = &a[r][j] * &inv;
        }
        for i in 0..rows {
            if i == r || a[i][col].is_zero() {
                continue;
            }
            let f = a[i][col].clone();
            for j in col..cols {
                let d = &f * &a[r][j];
                a[i][j] -= d;
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c))?;
    let mut x = vec![Rational::zero(); cols];
    x[free] = Rational::one();
    for (row, &pc) in pivot_cols.iter().enumerate() {
        x[pc] = -a[row][free].clone();
    }
    Some(x)
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
