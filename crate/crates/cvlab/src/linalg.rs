//! Dense linear algebra kernels (no external BLAS/LAPACK).
//!
//! LU factorization with partial pivoting, real-symmetric Jacobi
//! eigendecomposition, Cholesky, a canonical-branch square-rooted
//! determinant for complex symmetric matrices with positive-definite
//! real part, Padé scaling-and-squaring matrix exponentials, and a
//! Lanczos propagator `e^{−itH}v` for Hermitian operators given as
//! matrix-vector closures.

use crate::error::{CvError, Result};
use crate::numerics::LogComplex;
use crate::scalar::Real;
use ndarray as nd;
use num_complex::Complex;
use num_traits::Zero;

/// Scalar admissible in the generic LU kernels: a field with a real
/// magnitude used for pivoting.
pub trait LinScalar:
    Copy
    + PartialEq
    + num_traits::Zero
    + num_traits::One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// The associated real type.
    type Mag: Real;
    /// Squared magnitude (cheap, no square root).
    fn mag_sq(self) -> Self::Mag;
}

impl<T: Real> LinScalar for T {
    type Mag = T;
    #[inline]
    fn mag_sq(self) -> T {
        self * self
    }
}

impl<T: Real> LinScalar for Complex<T> {
    type Mag = T;
    #[inline]
    fn mag_sq(self) -> T {
        self.norm_sqr()
    }
}

/// LU factorization with partial pivoting, stored packed (L unit-lower).
pub struct Lu<K: LinScalar> {
    lu: nd::Array2<K>,
    perm: Vec<usize>,
    swaps: usize,
}

/// Factor `a` as `P·A = L·U`. Fails on exactly singular pivots.
pub fn lu_factor<K: LinScalar>(a: &nd::Array2<K>) -> Result<Lu<K>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CvError::Input("lu_factor: matrix not square".into()));
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0usize;
    for col in 0..n {
        // Pivot: largest magnitude in column at or below the diagonal.
        let mut best = col;
        let mut best_mag = lu[(col, col)].mag_sq();
        for r in (col + 1)..n {
            let m = lu[(r, col)].mag_sq();
            if m > best_mag {
                best_mag = m;
                best = r;
            }
        }
        if best_mag == K::Mag::zero() {
            return Err(CvError::Numeric("lu_factor: singular matrix".into()));
        }
        if best != col {
            for c in 0..n {
                let tmp = lu[(col, c)];
                lu[(col, c)] = lu[(best, c)];
                lu[(best, c)] = tmp;
            }
            perm.swap(col, best);
            swaps += 1;
        }
        let piv = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / piv;
            lu[(r, col)] = f;
            for c in (col + 1)..n {
                let sub = f * lu[(col, c)];
                lu[(r, c)] = lu[(r, c)] - sub;
            }
        }
    }
    Ok(Lu { lu, perm, swaps })
}

impl<K: LinScalar> Lu<K> {
    /// Solve `A x = b` for one right-hand side.
    pub fn solve_vec(&self, b: &nd::Array1<K>) -> nd::Array1<K> {
        let n = self.lu.nrows();
        let mut x = nd::Array1::from_shape_fn(n, |i| b[self.perm[i]]);
        // Forward: L y = P b (L unit lower).
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &nd::Array2<K>) -> nd::Array2<K> {
        let n = self.lu.nrows();
        let m = b.ncols();
        let mut out = nd::Array2::zeros((n, m));
        for c in 0..m {
            let col = b.column(c).to_owned();
            let x = self.solve_vec(&col);
            out.column_mut(c).assign(&x);
        }
        out
    }

    /// Determinant.
    pub fn det(&self) -> K {
        let n = self.lu.nrows();
        let mut d = if self.swaps % 2 == 0 {
            K::one()
        } else {
            -K::one()
        };
        for i in 0..n {
            d = d * self.lu[(i, i)];
        }
        d
    }
}

/// Solve `A x = b`.
pub fn solve<K: LinScalar>(a: &nd::Array2<K>, b: &nd::Array1<K>) -> Result<nd::Array1<K>> {
    Ok(lu_factor(a)?.solve_vec(b))
}

/// Matrix inverse via LU.
pub fn inverse<K: LinScalar>(a: &nd::Array2<K>) -> Result<nd::Array2<K>> {
    let n = a.nrows();
    let lu = lu_factor(a)?;
    Ok(lu.solve_mat(&nd::Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            K::one()
        } else {
            K::zero()
        }
    })))
}

/// Determinant via LU (0 for singular input).
pub fn det<K: LinScalar>(a: &nd::Array2<K>) -> K {
    match lu_factor(a) {
        Ok(lu) => lu.det(),
        Err(_) => K::zero(),
    }
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi
/// rotations: `A = V · diag(vals) · Vᵀ`, eigenvalues ascending,
/// eigenvectors in the columns of `V`.
pub fn jacobi_eigen<T: Real>(a: &nd::Array2<T>) -> Result<(nd::Array1<T>, nd::Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CvError::Input("jacobi_eigen: matrix not square".into()));
    }
    let mut m = a.clone();
    let mut v: nd::Array2<T> = nd::Array2::eye(n);
    let scale = a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt() + T::min_positive_value();
    let tol = T::epsilon() * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * T::of(1e-3) {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::of(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    s / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        m[(i, i)]
            .partial_cmp(&m[(j, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = nd::Array1::from_shape_fn(n, |k| m[(idx[k], idx[k])]);
    let vecs = nd::Array2::from_shape_fn((n, n), |(i, k)| v[(i, idx[k])]);
    Ok((vals, vecs))
}

/// Cholesky factor `L` (lower) of an SPD matrix: `A = L·Lᵀ`.
pub fn cholesky<T: Real>(a: &nd::Array2<T>) -> Result<nd::Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CvError::Input("cholesky: matrix not square".into()));
    }
    let mut l: nd::Array2<T> = nd::Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc = acc - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if acc <= T::zero() {
                    return Err(CvError::Numeric(
                        "cholesky: matrix not positive definite".into(),
                    ));
                }
                l[(i, i)] = acc.sqrt();
            } else {
                l[(i, j)] = acc / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// `ln det A` for SPD `A`, via Cholesky (never under/overflows).
pub fn log_det_spd<T: Real>(a: &nd::Array2<T>) -> Result<T> {
    let l = cholesky(a)?;
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        acc = acc + l[(i, i)].ln();
    }
    Ok(acc * T::of(2.0))
}

/// Forward-substitute `L y = b` for lower-triangular `L`, column-wise on
/// a matrix right-hand side.
fn solve_lower<T: Real>(l: &nd::Array2<T>, b: &nd::Array2<T>) -> nd::Array2<T> {
    let n = l.nrows();
    let m = b.ncols();
    let mut y = b.clone();
    for c in 0..m {
        for i in 0..n {
            let mut acc = y[(i, c)];
            for k in 0..i {
                acc = acc - l[(i, k)] * y[(k, c)];
            }
            y[(i, c)] = acc / l[(i, i)];
        }
    }
    y
}

/// Square root of the determinant of a complex symmetric matrix whose
/// real part is positive definite, on the canonical branch.
///
/// Writing `Re A = L·Lᵀ` and `M = L⁻¹·(Im A)·L⁻ᵀ` (real symmetric with
/// eigenvalues `λ_k`), the value is
/// `√det A = det(L) · Π_k (1 + iλ_k)^{1/2}` with principal square roots.
/// This branch is continuous in `A` and equals `+√det A` at real SPD
/// matrices; it is the branch picked out by Gaussian integrals
/// `∫ exp(−½ xᵀAx) dx = (2π)^{n/2} / √det A`.
///
/// Returned in log form, so huge/tiny determinants stay exact.
pub fn sqrt_det_complex_symmetric<T: Real>(
    a: &nd::Array2<Complex<T>>,
) -> Result<LogComplex<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CvError::Input("sqrt_det: matrix not square".into()));
    }
    let re = a.mapv(|z| z.re);
    let im = a.mapv(|z| z.im);
    let l = cholesky(&re)?;
    // M = L⁻¹ · Im A · L⁻ᵀ, symmetrized against round-off.
    let y = solve_lower(&l, &im); // y = L⁻¹ Im A
    let yt = y.t().to_owned();
    let m_raw = solve_lower(&l, &yt); // L⁻¹ (L⁻¹ Im A)ᵀ = (L⁻¹ ImA L⁻ᵀ)ᵀ
    let m = (&m_raw + &m_raw.t()).mapv(|x| x / T::of(2.0));
    let (vals, _) = jacobi_eigen(&m)?;
    let mut log_mag = T::zero();
    for i in 0..n {
        log_mag = log_mag + l[(i, i)].ln();
    }
    let mut arg = T::zero();
    for &lam in vals.iter() {
        // (1 + iλ)^{1/2}: log-magnitude ¼·ln(1+λ²), argument ½·atan(λ).
        log_mag = log_mag + (T::one() + lam * lam).ln() * T::of(0.25);
        arg = arg + lam.atan() / T::of(2.0);
    }
    Ok(LogComplex::from_polar(log_mag, arg))
}

fn mat_one_norm<T: Real>(a: &nd::Array2<Complex<T>>) -> T {
    let mut best = T::zero();
    for c in 0..a.ncols() {
        let s = a.column(c).iter().fold(T::zero(), |acc, z| acc + z.norm());
        if s > best {
            best = s;
        }
    }
    best
}

/// Matrix exponential by Padé(13) with scaling and squaring.
pub fn expm<T: Real>(a: &nd::Array2<Complex<T>>) -> Result<nd::Array2<Complex<T>>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CvError::Input("expm: matrix not square".into()));
    }
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let theta13 = T::of(5.371920351148152);
    let norm = mat_one_norm(a);
    let s: u32 = if norm > theta13 {
        (norm / theta13).log2().ceil().to_f64_lossy() as u32
    } else {
        0
    };
    let scale = Complex::new(T::of(0.5f64.powi(s as i32)), T::zero());
    let a = a.mapv(|z| z * scale);
    let b: Vec<Complex<T>> = B.iter().map(|&x| Complex::new(T::of(x), T::zero())).collect();
    let eye: nd::Array2<Complex<T>> = nd::Array2::eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let u_inner = &a6.mapv(|z| z * b[13]) + &a4.mapv(|z| z * b[11]) + &a2.mapv(|z| z * b[9]);
    let u_poly = a6.dot(&u_inner)
        + &a6.mapv(|z| z * b[7])
        + &a4.mapv(|z| z * b[5])
        + &a2.mapv(|z| z * b[3])
        + &eye.mapv(|z| z * b[1]);
    let u = a.dot(&u_poly);
    let v_inner = &a6.mapv(|z| z * b[12]) + &a4.mapv(|z| z * b[10]) + &a2.mapv(|z| z * b[8]);
    let v = a6.dot(&v_inner)
        + &a6.mapv(|z| z * b[6])
        + &a4.mapv(|z| z * b[4])
        + &a2.mapv(|z| z * b[2])
        + &eye.mapv(|z| z * b[0]);
    let lhs = &v - &u;
    let rhs = &v + &u;
    let lu = lu_factor(&lhs)?;
    let mut r = lu.solve_mat(&rhs);
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

fn cdot<T: Real>(a: &nd::Array1<Complex<T>>, b: &nd::Array1<Complex<T>>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + x.conj() * *y;
    }
    acc
}

fn cnorm<T: Real>(a: &nd::Array1<Complex<T>>) -> T {
    a.iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr())
        .sqrt()
}

/// Computes `e^{−i t H} v` for a Hermitian operator given as a closure,
/// by Lanczos iteration with full reorthogonalization.
///
/// The Krylov dimension grows until the Saad residual estimate drops
/// below `tol`; if `m_max` is reached first, the time step is split in
/// half recursively. Errors out only if splitting recurses absurdly deep
/// (non-Hermitian input or NaNs).
pub fn expi_action<T: Real>(
    matvec: &(dyn Fn(&nd::Array1<Complex<T>>) -> nd::Array1<Complex<T>> + Sync),
    v: &nd::Array1<Complex<T>>,
    t: T,
    tol: T,
    m_max: usize,
) -> Result<nd::Array1<Complex<T>>> {
    expi_action_depth(matvec, v, t, tol, m_max, 0)
}

fn expi_action_depth<T: Real>(
    matvec: &(dyn Fn(&nd::Array1<Complex<T>>) -> nd::Array1<Complex<T>> + Sync),
    v: &nd::Array1<Complex<T>>,
    t: T,
    tol: T,
    m_max: usize,
    depth: u32,
) -> Result<nd::Array1<Complex<T>>> {
    if depth > 40 {
        return Err(CvError::Numeric(
            "expi_action: time-step splitting failed to converge".into(),
        ));
    }
    let beta0 = cnorm(v);
    if beta0 == T::zero() || t == T::zero() {
        return Ok(v.clone());
    }
    let dim = v.len();
    let m_cap = m_max.min(dim);
    let mut qs: Vec<nd::Array1<Complex<T>>> = vec![v.mapv(|z| z / beta0)];
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut converged: Option<Vec<Complex<T>>> = None;
    let mut breakdown = false;

    let assemble = |alphas: &[T], betas: &[T], t: T| -> Result<(Vec<Complex<T>>, T)> {
        // Exponential of the tridiagonal Rayleigh matrix applied to e₁.
        let m = alphas.len();
        let mut tri = nd::Array2::<T>::zeros((m, m));
        for i in 0..m {
            tri[(i, i)] = alphas[i];
            if i + 1 < m {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let (vals, vecs) = jacobi_eigen(&tri)?;
        let mut y = vec![Complex::new(T::zero(), T::zero()); m];
        for k in 0..m {
            let phase = Complex::new(T::zero(), -t * vals[k]).exp();
            let w = phase * vecs[(0, k)];
            for i in 0..m {
                y[i] = y[i] + w * vecs[(i, k)];
            }
        }
        let res = y[m - 1].norm();
        Ok((y, res))
    };

    for j in 0..m_cap {
        let mut w = matvec(&qs[j]);
        if j > 0 {
            let b = Complex::new(betas[j - 1], T::zero());
            w.zip_mut_with(&qs[j - 1], |wi, qi| *wi = *wi - b * *qi);
        }
        let alpha = cdot(&qs[j], &w).re;
        let ac = Complex::new(alpha, T::zero());
        w.zip_mut_with(&qs[j], |wi, qi| *wi = *wi - ac * *qi);
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for q in &qs {
                let c = cdot(q, &w);
                w.zip_mut_with(q, |wi, qi| *wi = *wi - c * *qi);
            }
        }
        alphas.push(alpha);
        let beta = cnorm(&w);
        let check_every = 4;
        let do_check = (j + 1) % check_every == 0 || j + 1 == m_cap || beta <= tol;
        if beta <= T::epsilon() * T::of(64.0) * beta0.max(T::one()) {
            // Invariant subspace: the tridiagonal exponential is exact.
            let (y, _) = assemble(&alphas, &betas, t)?;
            converged = Some(y);
            breakdown = true;
            break;
        }
        if do_check {
            let (y, res) = assemble(&alphas, &betas, t)?;
            // Saad-style a-posteriori estimate for the next-subspace leak.
            let err_est = beta * res * t.abs().max(T::one()) * T::of(2.0);
            if err_est <= tol {
                converged = Some(y);
                break;
            }
        }
        if j + 1 < m_cap {
            betas.push(beta);
            qs.push(w.mapv(|z| z / beta));
        }
    }

    match converged {
        Some(y) => {
            let mut out = nd::Array1::from_elem(dim, Complex::new(T::zero(), T::zero()));
            for (j, q) in qs.iter().enumerate().take(y.len()) {
                let c = y[j] * beta0;
                out.zip_mut_with(q, |oi, qi| *oi = *oi + c * *qi);
            }
            let _ = breakdown;
            Ok(out)
        }
        None => {
            // Krylov space exhausted: halve the time step.
            let half = t / T::of(2.0);
            let mid = expi_action_depth(matvec, v, half, tol / T::of(2.0), m_max, depth + 1)?;
            expi_action_depth(matvec, &mid, half, tol / T::of(2.0), m_max, depth + 1)
        }
    }
}

/// Symmetric positive-definite square root via eigendecomposition.
pub fn sqrtm_spd<T: Real>(a: &nd::Array2<T>) -> Result<nd::Array2<T>> {
    let (vals, vecs) = jacobi_eigen(a)?;
    let n = a.nrows();
    if vals.iter().any(|&l| l <= T::zero()) {
        return Err(CvError::Numeric("sqrtm_spd: matrix not PD".into()));
    }
    let mut out = nd::Array2::zeros((n, n));
    for k in 0..n {
        let s = vals[k].sqrt();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = out[(i, j)] + s * vecs[(i, k)] * vecs[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Polar decomposition `S = W·P` of a real invertible matrix, with `W`
/// orthogonal and `P = (SᵀS)^{1/2}` SPD.
pub fn polar_decompose<T: Real>(s: &nd::Array2<T>) -> Result<(nd::Array2<T>, nd::Array2<T>)> {
    let sts = s.t().dot(s);
    let (vals, vecs) = jacobi_eigen(&sts)?;
    let n = s.nrows();
    if vals.iter().any(|&l| l <= T::zero()) {
        return Err(CvError::Numeric("polar_decompose: singular input".into()));
    }
    let mut p = nd::Array2::zeros((n, n));
    let mut p_inv = nd::Array2::zeros((n, n));
    for k in 0..n {
        let r = vals[k].sqrt();
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] = p[(i, j)] + r * vecs[(i, k)] * vecs[(j, k)];
                p_inv[(i, j)] = p_inv[(i, j)] + (T::one() / r) * vecs[(i, k)] * vecs[(j, k)];
            }
        }
    }
    let w = s.dot(&p_inv);
    Ok((w, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lu_solves_and_det() {
        let a: nd::Array2<f64> = nd::array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let b: nd::Array1<f64> = nd::array![1.0, 2.0, 3.0];
        let x = solve(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        // det by cofactor: 2(12-1) - 1(4-0) = 18.
        assert!((det(&a) - 18.0).abs() < 1e-12);
        let inv = inverse(&a).unwrap();
        let eye = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((eye[(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lu_complex() {
        let a = nd::array![[c(1.0, 1.0), c(0.0, 2.0)], [c(3.0, 0.0), c(1.0, -1.0)]];
        // det = (1+i)(1-i) - (2i)(3) = 2 - 6i.
        let d = det(&a);
        assert!((d - c(2.0, -6.0)).norm() < 1e-12);
        let b = nd::array![c(1.0, 0.0), c(0.0, 1.0)];
        let x = solve(&a, &b).unwrap();
        let r0 = a[(0, 0)] * x[0] + a[(0, 1)] * x[1] - b[0];
        let r1 = a[(1, 0)] * x[0] + a[(1, 1)] * x[1] - b[1];
        assert!(r0.norm() < 1e-12 && r1.norm() < 1e-12);
    }

    #[test]
    fn jacobi_small_known() {
        let a: nd::Array2<f64> = nd::array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigen(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // Reconstruct.
        let lam = nd::Array2::from_diag(&vals);
        let rec = vecs.dot(&lam).dot(&vecs.t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_random_reconstruction() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 8;
        let mut a = nd::Array2::<f64>::zeros((n, n));
        let mut s = 1234567u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let v = rnd();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let (vals, vecs) = jacobi_eigen(&a).unwrap();
        let lam = nd::Array2::from_diag(&vals);
        let rec = vecs.dot(&lam).dot(&vecs.t());
        let err = (&rec - &a).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10, "reconstruction error {err}");
        let vtv = vecs.t().dot(&vecs);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - e).abs() < 1e-10);
            }
        }
        for k in 1..n {
            assert!(vals[k] >= vals[k - 1]);
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a: nd::Array2<f64> = nd::array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let rec = l.dot(&l.t());
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
        let ld = log_det_spd(&a).unwrap();
        assert!((ld - det(&a).ln()).abs() < 1e-12);
    }

    #[test]
    fn sqrt_det_real_spd_case() {
        let a = nd::array![
            [c(4.0, 0.0), c(2.0, 0.0)],
            [c(2.0, 0.0), c(5.0, 0.0)]
        ];
        let s = sqrt_det_complex_symmetric(&a).unwrap().to_complex();
        assert!((s - c(4.0, 0.0)).norm() < 1e-12); // det = 16
    }

    #[test]
    fn sqrt_det_complex_matches_principal_on_mild_matrix() {
        let a = nd::array![
            [c(2.0, 0.5), c(0.3, 0.2)],
            [c(0.3, 0.2), c(1.5, -0.3)]
        ];
        let d = det(&a);
        let s = sqrt_det_complex_symmetric(&a).unwrap().to_complex();
        assert!((s * s - d).norm() < 1e-12);
        // det here lies in the right half plane, so the canonical branch
        // agrees with the principal square root.
        assert!((s - d.sqrt()).norm() < 1e-12);
    }

    #[test]
    fn sqrt_det_branch_continuity() {
        // Follow A(t) = (1+it)·I₃, whose determinant (1+it)³ crosses the
        // negative real axis as t grows. The canonical branch evolves
        // continuously through the crossing; the principal square root of
        // det A jumps there.
        let mut prev = c(1.0, 0.0);
        let steps = 400;
        let mut final_a = None;
        for k in 1..=steps {
            let t = 4.0 * (k as f64) / (steps as f64);
            let mut a = nd::Array2::<C64>::zeros((3, 3));
            for i in 0..3 {
                a[(i, i)] = c(1.0, t);
            }
            let s = sqrt_det_complex_symmetric(&a).unwrap().to_complex();
            assert!((s - prev).norm() < 0.3, "jump at t={t}: {s} vs {prev}");
            prev = s;
            final_a = Some(a);
        }
        // Endpoint: (1+4i)^{3/2} on the continuous branch.
        let r = (17.0f64).sqrt();
        let arg = 4.0f64.atan();
        let expect = C64::from_polar(r.powf(1.5), 1.5 * arg);
        assert!((prev - expect).norm() < 1e-9, "{prev} vs {expect}");
        // The principal root of det disagrees here (arg det > π).
        let d = det(&final_a.unwrap());
        assert!((prev - d.sqrt()).norm() > 1.0);
        assert!((prev * prev - d).norm() < 1e-9);
    }

    #[test]
    fn expm_nilpotent_and_rotation() {
        let a = nd::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((e[(0, 1)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((e[(1, 0)]).norm() < 1e-14);

        let th = 0.7f64;
        let g = nd::array![
            [c(0.0, 0.0), c(-th, 0.0)],
            [c(th, 0.0), c(0.0, 0.0)]
        ];
        let r = expm(&g).unwrap();
        assert!((r[(0, 0)] - c(th.cos(), 0.0)).norm() < 1e-13);
        assert!((r[(0, 1)] - c(-th.sin(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_large_norm_scaling() {
        // exp(i·θ·σ_x) = cos θ·I + i sin θ·σ_x, with θ = 30 forcing many
        // squaring steps.
        let th = 30.0f64;
        let a = nd::array![
            [c(0.0, 0.0), c(0.0, th)],
            [c(0.0, th), c(0.0, 0.0)]
        ];
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - c(th.cos(), 0.0)).norm() < 1e-10);
        assert!((e[(0, 1)] - c(0.0, th.sin())).norm() < 1e-10);
    }

    #[test]
    fn expi_action_matches_dense() {
        // Deterministic Hermitian 12x12.
        let n = 12;
        let mut h = nd::Array2::<C64>::zeros((n, n));
        let mut s = 42u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let re = rnd();
                let im = if i == j { 0.0 } else { rnd() };
                h[(i, j)] = c(re, im);
                h[(j, i)] = c(re, -im);
            }
        }
        let t = 2.3;
        let mih = h.mapv(|z| z * c(0.0, -t));
        let dense = expm(&mih).unwrap();
        let mut v = nd::Array1::<C64>::zeros(n);
        for i in 0..n {
            v[i] = c(rnd(), rnd());
        }
        let expect = dense.dot(&v);
        let hm = h.clone();
        let got = expi_action(
            &move |x: &nd::Array1<C64>| hm.dot(x),
            &v,
            t,
            1e-12,
            200,
        )
        .unwrap();
        let err = (&got - &expect).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn expi_action_eigenvector_breakdown() {
        // v an eigenvector → Krylov breaks down after one step; result is
        // the exact phase.
        let h = nd::array![[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(3.0, 0.0)]];
        let v = nd::array![c(1.0, 0.0), c(0.0, 0.0)];
        let got = expi_action(&move |x: &nd::Array1<C64>| h.dot(x), &v, 1.5, 1e-12, 50).unwrap();
        let expect = c(0.0, -3.0).exp(); // e^{-i·1.5·2}
        assert!((got[0] - expect).norm() < 1e-12);
        assert!(got[1].norm() < 1e-14);
    }

    #[test]
    fn expi_action_splits_long_times() {
        // Small Krylov cap forces segment splitting; unitarity must hold.
        let n = 16;
        let mut h = nd::Array2::<C64>::zeros((n, n));
        for i in 0..n {
            h[(i, i)] = c(i as f64, 0.0);
            if i + 1 < n {
                h[(i, i + 1)] = c(0.5, 0.0);
                h[(i + 1, i)] = c(0.5, 0.0);
            }
        }
        let mut v = nd::Array1::<C64>::zeros(n);
        v[0] = c(1.0, 0.0);
        let hm = h.clone();
        let got = expi_action(&move |x: &nd::Array1<C64>| hm.dot(x), &v, 50.0, 1e-10, 8).unwrap();
        assert!((cnorm(&got) - 1.0).abs() < 1e-8);
        let mih = h.mapv(|z| z * c(0.0, -50.0));
        let expect = expm(&mih).unwrap().dot(&v);
        let err = (&got - &expect).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn polar_reconstructs() {
        let s: nd::Array2<f64> = nd::array![[1.2, 0.3], [-0.5, 0.9]];
        let (w, p) = polar_decompose(&s).unwrap();
        let rec = w.dot(&p);
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec[(i, j)] - s[(i, j)]).abs() < 1e-12);
            }
        }
        let wtw = w.t().dot(&w);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((wtw[(i, j)] - e).abs() < 1e-12);
            }
        }
        // P SPD.
        let (vals, _) = jacobi_eigen(&p).unwrap();
        assert!(vals.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn sqrtm_spd_squares_back() {
        let a: nd::Array2<f64> = nd::array![[4.0, 1.0], [1.0, 3.0]];
        let r = sqrtm_spd(&a).unwrap();
        let rec = r.dot(&r);
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
