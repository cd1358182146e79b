//! Exact Gaussian elimination over symbolic expressions. Pivoting relies on
//! the complete zero test of the canonical form.

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Reduce `rows` (an augmented or plain matrix) to reduced row echelon form
/// in place; returns the pivot column of each nonzero row, restricted to the
/// first `ncols` columns.
pub fn rref(rows: &mut Vec<Vec<Expr>>, ncols: usize) -> Result<Vec<usize>> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].inverse()?;
        for e in rows[r].iter_mut() {
            *e = e.mul(&inv);
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..rows[i].len() {
                    let delta = f.mul(&rows[r][j]);
                    rows[i][j] = rows[i][j].sub(&delta);
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    Ok(pivots)
}

/// Solve the square system `a x = b` with a unique solution.
pub fn solve(a: &[Vec<Expr>], b: &[Expr]) -> Result<Vec<Expr>> {
    let n = a.len();
    let mut rows: Vec<Vec<Expr>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut v = row.clone();
            v.push(rhs.clone());
            v
        })
        .collect();
    let pivots = rref(&mut rows, n)?;
    if pivots.len() != n {
        return Err(Error::NonInvertible("linear system is singular".into()));
    }
    Ok(rows.into_iter().map(|mut row| row.pop().unwrap()).collect())
}

/// Basis of the null space of `a` (columns indexed 0..ncols). Free columns
/// generate one basis vector each.
pub fn nullspace(a: &[Vec<Expr>], ncols: usize) -> Result<Vec<Vec<Expr>>> {
    let mut rows: Vec<Vec<Expr>> = a.to_vec();
    let pivots = rref(&mut rows, ncols)?;
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![Expr::zero(); ncols];
        v[free] = Expr::one();
        for (row_i, &pc) in pivots.iter().enumerate() {
            v[pc] = rows[row_i][free].neg();
        }
        basis.push(v);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_symbolic_2x2() {
        // [a 1; 0 a] x = [a+1, a] -> x = [1, 1]
        let a = Expr::param("a");
        let m = vec![
            vec![a.clone(), Expr::one()],
            vec![Expr::zero(), a.clone()],
        ];
        let b = vec![a.add(&Expr::one()), a.clone()];
        let x = solve(&m, &b).unwrap();
        assert!(x[0].equivalent(&Expr::one()));
        assert!(x[1].equivalent(&Expr::one()));
    }

    #[test]
    fn singular_rejected() {
        let m = vec![
            vec![Expr::one(), Expr::one()],
            vec![Expr::int(2), Expr::int(2)],
        ];
        let b = vec![Expr::zero(), Expr::zero()];
        assert!(matches!(solve(&m, &b), Err(Error::NonInvertible(_))));
    }

    #[test]
    fn nullspace_of_rank_one() {
        // single row [1, a] -> null space spanned by (-a, 1)
        let m = vec![vec![Expr::one(), Expr::param("a")]];
        let ns = nullspace(&m, 2).unwrap();
        assert_eq!(ns.len(), 1);
        assert!(ns[0][0].equivalent(&Expr::param("a").neg()));
        assert!(ns[0][1].equivalent(&Expr::one()));
    }
}
