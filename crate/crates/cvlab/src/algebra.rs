//! Normal-ordered polynomials in bosonic ladder operators.
//!
//! A [`PolyOp`] stores an operator `Σ k_{μν} · a†^μ a^ν` over `m` modes
//! as a sorted map from exponent pairs `(μ, ν)` to coefficients, always
//! in normal order (all creations left of all annihilations). Products
//! re-normal-order on the fly using the closed-form identity
//!
//! ```text
//! a^n a†^m = Σ_k k!·C(n,k)·C(m,k) · a†^(m−k) a^(n−k)       ([a,a†]=1)
//! ```
//!
//! applied independently per mode. The same kernel, parametrized by the
//! commutator constant, also reorders the position/momentum algebra
//! `[P, X] = −i` used by the path-sum estimator.
//!
//! Coefficients are any [`Coeff`] ring: complex floats for numerics, or
//! exact Gaussian rationals ([`crate::scalar::Exact`]) when identities
//! should hold on the nose.

use crate::error::{CvError, Result};
use crate::numerics::binomial;
use crate::scalar::{Coeff, Real};
use ndarray as nd;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default cap on dense matrix dimension produced by [`PolyOp::to_matrix`].
pub const DEFAULT_DIM_CAP: usize = 4096;

/// A normal-ordered ladder polynomial over a fixed number of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyOp<K: Coeff> {
    num_modes: usize,
    terms: BTreeMap<(Vec<u32>, Vec<u32>), K>,
}

/// One serialized term of a [`PolyOp`] with `f64` coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermRecord {
    /// Creation exponents per mode.
    pub mu: Vec<u32>,
    /// Annihilation exponents per mode.
    pub nu: Vec<u32>,
    /// Real part of the coefficient.
    pub re: f64,
    /// Imaginary part of the coefficient.
    pub im: f64,
}

impl<K: Coeff> PolyOp<K> {
    /// The zero operator on `num_modes` modes.
    pub fn zero_op(num_modes: usize) -> Self {
        PolyOp {
            num_modes,
            terms: BTreeMap::new(),
        }
    }

    /// The identity operator.
    pub fn identity(num_modes: usize) -> Self {
        let mut p = Self::zero_op(num_modes);
        p.add_term(vec![0; num_modes], vec![0; num_modes], K::one());
        p
    }

    /// A single term `k · a†^μ a^ν`.
    pub fn from_term(num_modes: usize, mu: Vec<u32>, nu: Vec<u32>, k: K) -> Self {
        let mut p = Self::zero_op(num_modes);
        p.add_term(mu, nu, k);
        p
    }

    /// `a†_mode`.
    pub fn creation(num_modes: usize, mode: usize) -> Self {
        let mut mu = vec![0; num_modes];
        mu[mode] = 1;
        Self::from_term(num_modes, mu, vec![0; num_modes], K::one())
    }

    /// `a_mode`.
    pub fn annihilation(num_modes: usize, mode: usize) -> Self {
        let mut nu = vec![0; num_modes];
        nu[mode] = 1;
        Self::from_term(num_modes, vec![0; num_modes], nu, K::one())
    }

    /// `N_mode = a†_mode a_mode`.
    pub fn number(num_modes: usize, mode: usize) -> Self {
        let mut mu = vec![0; num_modes];
        mu[mode] = 1;
        Self::from_term(num_modes, mu.clone(), mu, K::one())
    }

    /// Number of modes this operator acts on.
    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    /// Number of stored (nonzero) terms.
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterate over terms as `((μ, ν), coefficient)` in stable order.
    pub fn terms(&self) -> impl Iterator<Item = (&(Vec<u32>, Vec<u32>), &K)> {
        self.terms.iter()
    }

    /// Total degree `max_terms (|μ| + |ν|)`.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(mu, nu)| mu.iter().sum::<u32>() + nu.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Add `k · a†^μ a^ν` into the polynomial, dropping exact zeros.
    pub fn add_term(&mut self, mu: Vec<u32>, nu: Vec<u32>, k: K) {
        assert_eq!(mu.len(), self.num_modes, "exponent arity mismatch");
        assert_eq!(nu.len(), self.num_modes, "exponent arity mismatch");
        if k.is_zero() {
            return;
        }
        let key = (mu, nu);
        match self.terms.remove(&key) {
            None => {
                self.terms.insert(key, k);
            }
            Some(old) => {
                let sum = old + k;
                if !sum.is_zero() {
                    self.terms.insert(key, sum);
                }
            }
        }
    }

    /// Coefficient of `a†^μ a^ν` (zero if absent).
    pub fn coefficient(&self, mu: &[u32], nu: &[u32]) -> K {
        self.terms
            .get(&(mu.to_vec(), nu.to_vec()))
            .cloned()
            .unwrap_or_else(K::zero)
    }

    /// Multiply every coefficient by `k`.
    pub fn scale(&self, k: &K) -> Self {
        let mut out = Self::zero_op(self.num_modes);
        for ((mu, nu), c) in &self.terms {
            out.add_term(mu.clone(), nu.clone(), c.clone() * k.clone());
        }
        out
    }

    /// Hermitian adjoint: `(k · a†^μ a^ν)† = conj(k) · a†^ν a^μ`.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero_op(self.num_modes);
        for ((mu, nu), c) in &self.terms {
            out.add_term(nu.clone(), mu.clone(), c.conjugate());
        }
        out
    }

    /// Whether `self = self†` (exact coefficient equality).
    pub fn is_hermitian(&self) -> bool {
        *self == self.adjoint()
    }

    /// Drop terms with `|coefficient| ≤ eps` (no-op for exact rings,
    /// which never accumulate round-off dust).
    pub fn chop(&self, eps: f64) -> Self {
        let mut out = Self::zero_op(self.num_modes);
        for ((mu, nu), c) in &self.terms {
            if let Some(m) = c.approx_mag() {
                if m <= eps {
                    continue;
                }
            }
            out.add_term(mu.clone(), nu.clone(), c.clone());
        }
        out
    }

    /// Product re-normal-ordered with the bosonic commutator `[a,a†]=1`.
    pub fn mul_op(&self, rhs: &Self) -> Self {
        self.mul_with_commutator(rhs, &K::one())
    }

    /// Product re-normal-ordered with a custom central commutator: the
    /// "lowering" symbols of the left factor are moved past the
    /// "raising" symbols of the right factor using `[lower, raise] = c`.
    ///
    /// With `c = 1` this is the bosonic ladder algebra; with `c = −i` it
    /// is the `(X, P)` quadrature algebra with `X` in the raising slot
    /// and `P` in the lowering slot (`[P, X] = −i`).
    pub fn mul_with_commutator(&self, rhs: &Self, c: &K) -> Self {
        assert_eq!(self.num_modes, rhs.num_modes, "mode count mismatch");
        let m = self.num_modes;
        let mut out = Self::zero_op(m);
        for ((mu1, nu1), k1) in &self.terms {
            for ((mu2, nu2), k2) in &rhs.terms {
                // Reorder a^{ν1} a†^{μ2} per mode; each mode contributes
                // Σ_k k!·C(ν1,k)·C(μ2,k)·c^k shifting exponents down by k.
                // Accumulate the cross product over modes iteratively.
                let base = k1.clone() * k2.clone();
                let mut partial: Vec<(Vec<u32>, Vec<u32>, K)> =
                    vec![(Vec::with_capacity(m), Vec::with_capacity(m), base)];
                for mode in 0..m {
                    let n1 = nu1[mode];
                    let m2 = mu2[mode];
                    let kmax = n1.min(m2);
                    let mut next = Vec::with_capacity(partial.len() * (kmax as usize + 1));
                    for k in 0..=kmax {
                        let factor_int = (1..=k as u64).product::<u64>() as u128
                            * binomial(n1 as u64, k as u64)
                            * binomial(m2 as u64, k as u64);
                        assert!(
                            factor_int <= i64::MAX as u128,
                            "combinatorial overflow: reduce operator degree"
                        );
                        let mut factor = K::from_integer(factor_int as i64);
                        for _ in 0..k {
                            factor = factor * c.clone();
                        }
                        let mu_out = mu1[mode] + (m2 - k);
                        let nu_out = (n1 - k) + nu2[mode];
                        for (pm, pn, pk) in &partial {
                            let mut pm2 = pm.clone();
                            let mut pn2 = pn.clone();
                            pm2.push(mu_out);
                            pn2.push(nu_out);
                            next.push((pm2, pn2, pk.clone() * factor.clone()));
                        }
                    }
                    partial = next;
                }
                for (mu, nu, k) in partial {
                    out.add_term(mu, nu, k);
                }
            }
        }
        out
    }

    /// Commutator `[self, rhs]` in the ladder algebra.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.mul_op(rhs) - &rhs.mul_op(self)
    }

    /// Normal-order an abstract ladder expression.
    pub fn normal_order(num_modes: usize, expr: &LadderExpr<K>) -> Self {
        match expr {
            LadderExpr::One => Self::identity(num_modes),
            LadderExpr::A(mode) => Self::annihilation(num_modes, *mode),
            LadderExpr::Ad(mode) => Self::creation(num_modes, *mode),
            LadderExpr::Scale(k, e) => Self::normal_order(num_modes, e).scale(k),
            LadderExpr::Sum(es) => {
                let mut acc = Self::zero_op(num_modes);
                for e in es {
                    acc = &acc + &Self::normal_order(num_modes, e);
                }
                acc
            }
            LadderExpr::Prod(es) => {
                let mut acc = Self::identity(num_modes);
                for e in es {
                    acc = acc.mul_op(&Self::normal_order(num_modes, e));
                }
                acc
            }
            LadderExpr::Pow(e, n) => {
                let base = Self::normal_order(num_modes, e);
                let mut acc = Self::identity(num_modes);
                for _ in 0..*n {
                    acc = acc.mul_op(&base);
                }
                acc
            }
        }
    }
}

impl<K: Coeff> std::ops::Add for &PolyOp<K> {
    type Output = PolyOp<K>;
    fn add(self, rhs: &PolyOp<K>) -> PolyOp<K> {
        assert_eq!(self.num_modes, rhs.num_modes, "mode count mismatch");
        let mut out = self.clone();
        for ((mu, nu), k) in &rhs.terms {
            out.add_term(mu.clone(), nu.clone(), k.clone());
        }
        out
    }
}

impl<K: Coeff> std::ops::Sub for &PolyOp<K> {
    type Output = PolyOp<K>;
    fn sub(self, rhs: &PolyOp<K>) -> PolyOp<K> {
        assert_eq!(self.num_modes, rhs.num_modes, "mode count mismatch");
        let mut out = self.clone();
        for ((mu, nu), k) in &rhs.terms {
            out.add_term(mu.clone(), nu.clone(), -k.clone());
        }
        out
    }
}

impl<K: Coeff> std::ops::Neg for &PolyOp<K> {
    type Output = PolyOp<K>;
    fn neg(self) -> PolyOp<K> {
        self.scale(&(-K::one()))
    }
}

impl<K: Coeff> std::ops::Mul for &PolyOp<K> {
    type Output = PolyOp<K>;
    fn mul(self, rhs: &PolyOp<K>) -> PolyOp<K> {
        self.mul_op(rhs)
    }
}

/// Abstract (not yet normal-ordered) ladder expression.
///
/// The constructors mirror how Hamiltonians are written on paper; call
/// [`PolyOp::normal_order`] to reduce to canonical form.
#[derive(Debug, Clone)]
pub enum LadderExpr<K> {
    /// The identity.
    One,
    /// Annihilation `a_mode`.
    A(usize),
    /// Creation `a†_mode`.
    Ad(usize),
    /// Scalar multiple.
    Scale(K, Box<LadderExpr<K>>),
    /// Sum of expressions.
    Sum(Vec<LadderExpr<K>>),
    /// Ordered product of expressions.
    Prod(Vec<LadderExpr<K>>),
    /// Integer power.
    Pow(Box<LadderExpr<K>>, u32),
}

impl<T: Real> PolyOp<Complex<T>> {
    /// Quadrature `X_mode = (a + a†)/√2`.
    pub fn x(num_modes: usize, mode: usize) -> Self {
        let s = Complex::new(T::one() / T::SQRT_2(), T::zero());
        (&Self::creation(num_modes, mode) + &Self::annihilation(num_modes, mode)).scale(&s)
    }

    /// Quadrature `P_mode = (a − a†)/(i√2)`.
    pub fn p(num_modes: usize, mode: usize) -> Self {
        let s = Complex::new(T::zero(), -T::one() / T::SQRT_2());
        (&Self::annihilation(num_modes, mode) - &Self::creation(num_modes, mode)).scale(&s)
    }

    /// Sum of the absolute values of the coefficients in the
    /// anti-normal-ordered expansion `Σ h_{μν} a^μ a†^ν`.
    ///
    /// This is the constant controlling photon-number leakage rates of
    /// polynomial Hamiltonians (matrix elements between number shells
    /// are bounded by this times the shell-dependent √-factors).
    pub fn anti_normal_one_norm(&self) -> T {
        // a†^μ a^ν = Σ_k k!·C(μ,k)·C(ν,k)·(−1)^k · a^{ν−k} a†^{μ−k},
        // from the same reordering identity with [a†, a] = −1.
        let mut anti: BTreeMap<(Vec<u32>, Vec<u32>), Complex<T>> = BTreeMap::new();
        for ((mu, nu), coeff) in &self.terms {
            let m = self.num_modes;
            let mut partial: Vec<(Vec<u32>, Vec<u32>, Complex<T>)> =
                vec![(Vec::with_capacity(m), Vec::with_capacity(m), *coeff)];
            for mode in 0..m {
                let mu_m = mu[mode];
                let nu_m = nu[mode];
                let kmax = mu_m.min(nu_m);
                let mut next = Vec::with_capacity(partial.len() * (kmax as usize + 1));
                for k in 0..=kmax {
                    let f = (1..=k as u64).product::<u64>() as u128
                        * binomial(mu_m as u64, k as u64)
                        * binomial(nu_m as u64, k as u64);
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let factor = Complex::new(T::of(sign * f as f64), T::zero());
                    for (pm, pn, pk) in &partial {
                        let mut pm2 = pm.clone();
                        let mut pn2 = pn.clone();
                        pm2.push(nu_m - k); // annihilation exponent (left)
                        pn2.push(mu_m - k); // creation exponent (right)
                        next.push((pm2, pn2, *pk * factor));
                    }
                }
                partial = next;
            }
            for (a_exp, ad_exp, k) in partial {
                let e = anti
                    .entry((a_exp, ad_exp))
                    .or_insert_with(|| Complex::new(T::zero(), T::zero()));
                *e = *e + k;
            }
        }
        anti.values().fold(T::zero(), |acc, z| acc + z.norm())
    }

    /// Serialize to stable term records (sorted by exponents).
    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|((mu, nu), k)| TermRecord {
                mu: mu.clone(),
                nu: nu.clone(),
                re: k.re.to_f64_lossy(),
                im: k.im.to_f64_lossy(),
            })
            .collect()
    }

    /// Rebuild from term records.
    pub fn from_records(num_modes: usize, records: &[TermRecord]) -> Result<Self> {
        let mut p = Self::zero_op(num_modes);
        for r in records {
            if r.mu.len() != num_modes || r.nu.len() != num_modes {
                return Err(CvError::Input(format!(
                    "term record arity {} does not match {num_modes} modes",
                    r.mu.len()
                )));
            }
            p.add_term(
                r.mu.clone(),
                r.nu.clone(),
                Complex::new(T::of(r.re), T::of(r.im)),
            );
        }
        Ok(p)
    }

    /// Dense matrix of the operator compressed to the truncated Fock box
    /// `{ |n⟩ : n_m ≤ cutoffs[m] }`, i.e. `Π T Π`. Uses the default
    /// dimension cap of [`DEFAULT_DIM_CAP`].
    pub fn to_matrix(&self, cutoffs: &[u32]) -> Result<TruncatedMatrix<T>> {
        self.to_matrix_capped(cutoffs, DEFAULT_DIM_CAP)
    }

    /// Same as [`PolyOp::to_matrix`] with an explicit dimension cap.
    pub fn to_matrix_capped(&self, cutoffs: &[u32], cap: usize) -> Result<TruncatedMatrix<T>> {
        if cutoffs.len() != self.num_modes {
            return Err(CvError::Input(format!(
                "{} cutoffs given for {} modes",
                cutoffs.len(),
                self.num_modes
            )));
        }
        let dim: usize = cutoffs.iter().map(|&c| c as usize + 1).product();
        if dim > cap {
            return Err(CvError::DimCap {
                requested: dim,
                cap,
            });
        }
        let strides = strides_for(cutoffs);
        let mut mat = nd::Array2::<Complex<T>>::zeros((dim, dim));
        let mut ns = vec![0u32; self.num_modes];
        for col in 0..dim {
            for ((mu, nu), k) in &self.terms {
                // a†^μ a^ν |n⟩: requires n_m ≥ ν_m; lands on n − ν + μ.
                let mut amp = T::one();
                let mut ok = true;
                let mut row = 0usize;
                for m in 0..self.num_modes {
                    let n = ns[m];
                    if n < nu[m] {
                        ok = false;
                        break;
                    }
                    let down = n - nu[m];
                    let up = down + mu[m];
                    if up > cutoffs[m] {
                        ok = false;
                        break;
                    }
                    // √(n·(n−1)···(n−ν+1)) from a^ν, then
                    // √((down+1)···(down+μ)) from a†^μ.
                    let mut f = T::one();
                    for j in 0..nu[m] {
                        f = f * T::of((n - j) as f64);
                    }
                    for j in 0..mu[m] {
                        f = f * T::of((down + j + 1) as f64);
                    }
                    amp = amp * f.sqrt();
                    row += up as usize * strides[m];
                }
                if ok {
                    mat[(row, col)] = mat[(row, col)] + *k * amp;
                }
            }
            // Advance the mode-0-fastest odometer.
            for m in 0..self.num_modes {
                if ns[m] < cutoffs[m] {
                    ns[m] += 1;
                    break;
                }
                ns[m] = 0;
            }
        }
        Ok(TruncatedMatrix {
            cutoffs: cutoffs.to_vec(),
            mat,
        })
    }
}

/// Flattening strides for a truncated Fock box, mode 0 fastest:
/// `index = Σ_m n_m · strides[m]`.
pub fn strides_for(cutoffs: &[u32]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(cutoffs.len());
    let mut acc = 1usize;
    for &c in cutoffs {
        strides.push(acc);
        acc *= c as usize + 1;
    }
    strides
}

/// A dense operator matrix on a truncated Fock box.
#[derive(Debug, Clone)]
pub struct TruncatedMatrix<T: Real> {
    /// Per-mode occupation cutoffs (inclusive).
    pub cutoffs: Vec<u32>,
    /// The matrix, indexed mode-0-fastest.
    pub mat: nd::Array2<Complex<T>>,
}

impl<T: Real> TruncatedMatrix<T> {
    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Flat index of the occupation vector `ns`.
    pub fn index_of(&self, ns: &[u32]) -> usize {
        let strides = strides_for(&self.cutoffs);
        ns.iter()
            .zip(strides.iter())
            .map(|(&n, &s)| n as usize * s)
            .sum()
    }

    /// Max-norm Hermiticity defect `max |M − M†|`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let d = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}
