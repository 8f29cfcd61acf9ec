//! Damped normal equations, `(JᵀJ + λI) δ = Jᵀr`, solved by Cholesky.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{Error, Result, Scalar};

/// Result of one damped solve. A matrix that is not numerically positive
/// definite is reported as `Singular` so the caller can raise λ and retry.
#[derive(Clone, Debug, PartialEq)]
pub enum LmStep<T: Scalar> {
    Step(Array1<T>),
    Singular,
}

impl<T: Scalar> LmStep<T> {
    pub fn step(self) -> Option<Array1<T>> {
        match self {
            LmStep::Step(d) => Some(d),
            LmStep::Singular => None,
        }
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, or
/// `None` when a pivot is not strictly positive and finite.
fn cholesky<T: Scalar>(a: &Array2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        {
            let row_j = l.row(j);
            for k in 0..j {
                diag -= row_j[k] * row_j[k];
            }
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                v -= ri[k] * rj[k];
            }
            l[[i, j]] = v / ljj;
        }
    }
    Some(l)
}

fn substitute<T: Scalar>(l: &Array2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let row = l.row(i);
        let mut v = y[i];
        for k in 0..i {
            v -= row[k] * y[k];
        }
        y[i] = v / row[i];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[[k, i]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    y
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn cholesky_solve<T: Scalar>(a: &Array2<T>, b: ArrayView1<T>) -> Option<Array1<T>> {
    let l = cholesky(a)?;
    let x = substitute(&l, b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves `(A + λI) δ = g` where `A = JᵀJ` and `g = Jᵀr` were accumulated
/// beforehand.
pub fn solve_damped<T: Scalar>(jtj: &Array2<T>, jtr: ArrayView1<T>, lambda: f64) -> LmStep<T> {
    let mut a = jtj.clone();
    let lam = T::of(lambda);
    for i in 0..a.nrows() {
        a[[i, i]] += lam;
    }
    match cholesky_solve(&a, jtr) {
        Some(d) => LmStep::Step(d),
        None => LmStep::Singular,
    }
}

/// One Levenberg-Marquardt update for residuals `r = y - ŷ` and output
/// Jacobian `J`.
pub fn lm_step<T: Scalar>(j: ArrayView2<T>, r: ArrayView1<T>, lambda: f64) -> Result<LmStep<T>> {
    if r.len() != j.nrows() {
        return Err(Error::DimensionMismatch {
            expected: j.nrows(),
            got: r.len(),
            context: "residual length vs Jacobian rows",
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("damping must be >= 0, got {lambda}")));
    }
    if j.iter().chain(r.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Jacobian or residual entry".into()));
    }
    let jtj = j.t().dot(&j);
    let jtr = j.t().dot(&r);
    Ok(solve_damped(&jtj, jtr.view(), lambda))
}
