//! Pure Gaussian states in wavefunction (K-matrix) form, with exact
//! global phases.
//!
//! A [`Wavepacket`] is the normalized n-mode Gaussian
//!
//! ```text
//! ψ(x) = amp · (det Re K / πⁿ)^{1/4}
//!        · exp( −½ (x−x̄)ᵀ K (x−x̄) + i p̄ᵀ(x−x̄) )
//! ```
//!
//! with `K` complex symmetric, `Re K ≻ 0`, and `|amp| = 1`. Every gate
//! keeps the phase exact:
//!
//! * displacements and the SUM gate act by closed-form substitution,
//! * single-mode squeezing is an exact dilation,
//! * passive (number-conserving) unitaries fix their phase through a
//!   coherent-probe ratio — a passive is uniquely determined by its
//!   mode-space matrix `V`, and `U_V†|β⟩ = |V†β⟩` exactly,
//! * a general symplectic gate factors through an Euler decomposition
//!   (passive · squeezers · passive) of exact pieces.
//!
//! Projections (coherent, partial, homodyne conditioning) reduce to
//! multivariate Gaussian integrals evaluated on the canonical branch of
//! `√det`, so branch amplitudes keep globally consistent phases.
//! [`GaussianSum`] layers linear combinations of wavepackets on top,
//! which is the substrate for cubic-state decompositions.

use crate::error::{CvError, Result};
use crate::linalg;
use crate::numerics::{logcomplex_sum, LogComplex};
use crate::scalar::Real;
use ndarray as nd;
use num_complex::Complex;
use num_traits::Zero;

/// Symplectic form Ω = [[0, I], [−I, 0]] in (X₁..X_n, P₁..P_n) order.
pub fn symplectic_form<T: Real>(n: usize) -> nd::Array2<T> {
    let mut w = nd::Array2::<T>::zeros((2 * n, 2 * n));
    for i in 0..n {
        w[(i, n + i)] = T::one();
        w[(n + i, i)] = -T::one();
    }
    w
}

/// Check `SᵀΩS = Ω` within `tol` (Frobenius, relative to ‖S‖²).
pub fn is_symplectic<T: Real>(s: &nd::Array2<T>, tol: T) -> bool {
    let n2 = s.nrows();
    if n2 % 2 != 0 || s.ncols() != n2 {
        return false;
    }
    let w = symplectic_form::<T>(n2 / 2);
    let d = s.t().dot(&w).dot(s) - &w;
    let defect = d.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    let scale = s.iter().fold(T::zero(), |a, &x| a + x * x).max(T::one());
    defect <= tol * scale
}

/// Symplectic (state-map) matrix of the passive with mode matrix `V`:
/// `[[Re V, −Im V], [Im V, Re V]]`.
pub fn passive_symplectic<T: Real>(v: &nd::Array2<Complex<T>>) -> nd::Array2<T> {
    let n = v.nrows();
    let mut s = nd::Array2::<T>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = v[(i, j)].re;
            s[(i, n + j)] = -v[(i, j)].im;
            s[(n + i, j)] = v[(i, j)].im;
            s[(n + i, n + j)] = v[(i, j)].re;
        }
    }
    s
}

/// Symplectic matrix of `SUM_{i→j}(t) = e^{−it X_i P_j}`:
/// `X_j ← X_j + t X_i`, `P_i ← P_i − t P_j`.
pub fn sum_gate_symplectic<T: Real>(n: usize, i: usize, j: usize, t: T) -> nd::Array2<T> {
    let mut s = nd::Array2::<T>::eye(2 * n);
    s[(j, i)] = t;
    s[(n + i, n + j)] = -t;
    s
}

/// Euler factors of a symplectic matrix: `S = S_L · Z · S_R` with
/// `S_L, S_R` passive and `Z` per-mode squeezers.
///
/// The associated canonical unitary is
/// `U_S = U_{V_left} · ⊗_j S(r_j) · U_{V_right}` with
/// `S(r) = exp(r(a²−a†²)/2)`.
#[derive(Debug, Clone)]
pub struct EulerFactors<T: Real> {
    /// Left passive mode matrix.
    pub v_left: nd::Array2<Complex<T>>,
    /// Squeeze parameters per mode (`r_j`; X-width scales by `e^{r_j}`
    /// under `S(r_j)` … i.e. X-variance shrinks for `r_j > 0`).
    pub squeezes: Vec<T>,
    /// Right passive mode matrix.
    pub v_right: nd::Array2<Complex<T>>,
}

fn passive_v_of_orthosymplectic<T: Real>(o: &nd::Array2<T>) -> nd::Array2<Complex<T>> {
    let n = o.nrows() / 2;
    let mut v = nd::Array2::<Complex<T>>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            v[(i, j)] = Complex::new(o[(i, j)], o[(n + i, j)]);
        }
    }
    v
}

/// Euler (Bloch–Messiah) decomposition of a symplectic matrix.
pub fn euler_decompose<T: Real>(s: &nd::Array2<T>) -> Result<EulerFactors<T>> {
    let n2 = s.nrows();
    if n2 % 2 != 0 || s.ncols() != n2 {
        return Err(CvError::Input("euler_decompose: not 2n×2n".into()));
    }
    let n = n2 / 2;
    if !is_symplectic(s, T::of(1e-8)) {
        return Err(CvError::Input("euler_decompose: matrix not symplectic".into()));
    }
    let (w, p) = linalg::polar_decompose(s)?;
    let (lam, vecs) = linalg::jacobi_eigen(&p)?;
    let omega = symplectic_form::<T>(n);
    let tol_one = T::of(1e-8) * lam[n2 - 1].max(T::one());

    let mut us: Vec<nd::Array1<T>> = Vec::new();
    let mut zs: Vec<T> = Vec::new();
    let mut ones: Vec<nd::Array1<T>> = Vec::new();
    for k in 0..n2 {
        let l = lam[k];
        if l > T::one() + tol_one {
            us.push(vecs.column(k).to_owned());
            zs.push(l.ln());
        } else if (l - T::one()).abs() <= tol_one {
            ones.push(vecs.column(k).to_owned());
        }
    }
    // Pair the λ=1 subspace symplectically: choose u, set w = −Ωu,
    // remove both directions, repeat.
    while !ones.is_empty() {
        let u = {
            let mut u = ones[0].clone();
            let nu = u.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
            u.mapv_inplace(|x| x / nu);
            u
        };
        let wvec = omega.dot(&u).mapv(|x| -x);
        let mut next: Vec<nd::Array1<T>> = Vec::new();
        for b in ones.iter().skip(1) {
            let cu = b.dot(&u);
            let cw = b.dot(&wvec);
            let mut r = b - &u.mapv(|x| x * cu) - &wvec.mapv(|x| x * cw);
            let nr = r.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
            if nr > T::of(1e-7) {
                r.mapv_inplace(|x| x / nr);
                next.push(r);
            }
        }
        us.push(u);
        zs.push(T::zero());
        ones = next;
    }
    if us.len() != n {
        return Err(CvError::Numeric(format!(
            "euler_decompose: found {} mode pairs, expected {}",
            us.len(),
            n
        )));
    }
    // O = [u₁…u_n | −Ωu₁…−Ωu_n] is orthogonal and symplectic, and
    // P = O · diag(e^{z}, e^{−z}) · Oᵀ.
    let mut o = nd::Array2::<T>::zeros((n2, n2));
    for (j, u) in us.iter().enumerate() {
        let wv = omega.dot(u).mapv(|x| -x);
        for i in 0..n2 {
            o[(i, j)] = u[i];
            o[(i, n + j)] = wv[i];
        }
    }
    let wo = w.dot(&o);
    let v_left = passive_v_of_orthosymplectic(&wo);
    let v_right = {
        let vo = passive_v_of_orthosymplectic(&o);
        // S_right = Oᵀ = O⁻¹ ⇒ V_right = V_O†.
        let mut vr = nd::Array2::<Complex<T>>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                vr[(i, j)] = vo[(j, i)].conj();
            }
        }
        vr
    };
    // Z scales X by e^{z_j}; S(r) scales X by e^{−r}, so r_j = −z_j.
    let squeezes = zs.iter().map(|&z| -z).collect();
    Ok(EulerFactors {
        v_left,
        squeezes,
        v_right,
    })
}

/// One step of an interferometer realization of a passive unitary.
#[derive(Debug, Clone)]
pub enum InterferometerStep<T: Real> {
    /// `e^{iφ N_mode}` (mode matrix `V_kk = e^{iφ}`).
    Phase { mode: usize, phi: T },
    /// Real rotation by θ on a mode pair,
    /// `exp(θ(a†_j a_i − a†_i a_j))`; mode matrix
    /// `[[cos θ, −sin θ], [sin θ, cos θ]]` on (i, j).
    Rotation { modes: (usize, usize), theta: T },
}

impl<T: Real> InterferometerStep<T> {
    /// The step's full mode matrix on `n` modes.
    pub fn mode_matrix(&self, n: usize) -> nd::Array2<Complex<T>> {
        let mut v = nd::Array2::<Complex<T>>::eye(n);
        match *self {
            InterferometerStep::Phase { mode, phi } => {
                v[(mode, mode)] = Complex::new(phi.cos(), phi.sin());
            }
            InterferometerStep::Rotation { modes: (i, j), theta } => {
                let (c, s) = (theta.cos(), theta.sin());
                v[(i, i)] = Complex::new(c, T::zero());
                v[(j, j)] = Complex::new(c, T::zero());
                v[(i, j)] = Complex::new(-s, T::zero());
                v[(j, i)] = Complex::new(s, T::zero());
            }
        }
        v
    }
}

/// Factor a unitary mode matrix into phase and rotation steps, such
/// that applying the returned steps in order realizes `U_V` exactly
/// (passives are uniquely determined by their mode matrices, so the
/// factorization carries no phase ambiguity).
pub fn passive_to_interferometer<T: Real>(
    v: &nd::Array2<Complex<T>>,
) -> Result<Vec<InterferometerStep<T>>> {
    let n = v.nrows();
    if v.ncols() != n {
        return Err(CvError::Input("passive_to_interferometer: not square".into()));
    }
    // Unitarity check.
    let mut defect = T::zero();
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::<T>::zero();
            for k in 0..n {
                acc = acc + v[(k, i)].conj() * v[(k, j)];
            }
            let target = if i == j { T::one() } else { T::zero() };
            defect = defect + (acc - Complex::new(target, T::zero())).norm_sqr();
        }
    }
    if defect.sqrt() > T::of(1e-8) {
        return Err(CvError::Input(
            "passive_to_interferometer: matrix not unitary".into(),
        ));
    }
    let mut m = v.clone();
    // Eliminate below-diagonal entries: T_k = R(θ)·P_r(φ) acting on
    // rows (c, r) turns m into a diagonal of phases D, recording
    // m ← T_k m. Then V = T₁⁻¹ … T_K⁻¹ D, and U_V = (T₁⁻¹) ∘ … ∘ D
    // applied right-to-left, i.e. steps = [D, T_K⁻¹, …, T₁⁻¹].
    let mut inv_steps: Vec<InterferometerStep<T>> = Vec::new();
    for c in 0..n {
        for r in (c + 1)..n {
            let a = m[(c, c)];
            let b = m[(r, c)];
            if b.norm() <= T::of(1e-15) {
                continue;
            }
            // Phase on row r aligning arg(b) with arg(a).
            let phi = a.im.atan2(a.re) - b.im.atan2(b.re);
            let ph = Complex::new(phi.cos(), phi.sin());
            for col in 0..n {
                m[(r, col)] = m[(r, col)] * ph;
            }
            // θ with sinθ·|a| + cosθ·|b| = 0.
            let theta = -b.norm().atan2(a.norm());
            let (ct, st) = (theta.cos(), theta.sin());
            for col in 0..n {
                let mc = m[(c, col)];
                let mr = m[(r, col)];
                m[(c, col)] = mc * ct - mr * st;
                m[(r, col)] = mc * st + mr * ct;
            }
            // Inverse factors, to be applied after D (reverse order
            // overall): T⁻¹ = P_r(−φ)·R(−θ).
            inv_steps.push(InterferometerStep::Phase { mode: r, phi: -phi });
            inv_steps.push(InterferometerStep::Rotation {
                modes: (c, r),
                theta: -theta,
            });
        }
    }
    let mut steps: Vec<InterferometerStep<T>> = Vec::new();
    for k in 0..n {
        let d = m[(k, k)];
        let phi = d.im.atan2(d.re);
        if phi.abs() > T::of(1e-15) {
            steps.push(InterferometerStep::Phase { mode: k, phi });
        }
    }
    // inv_steps were recorded T₁, T₂, … but compose as
    // U = T₁⁻¹ T₂⁻¹ … D: rightmost acts first, so after D apply the
    // recorded pairs in reverse. Each pair (Phase, Rotation) is itself
    // ordered: T⁻¹ = P(−φ)·R(−θ) means R acts first.
    for pair in inv_steps.chunks(2).rev() {
        if let [p, r] = pair {
            steps.push(r.clone());
            steps.push(p.clone());
        }
    }
    Ok(steps)
}

/// Result of a multivariate Gaussian integral,
/// `∫ exp(−½ xᵀMx + Jᵀx) dⁿx = √((2π)ⁿ/det M) exp(½ JᵀM⁻¹J)`,
/// on the canonical √det branch.
fn mvg<T: Real>(
    m: &nd::Array2<Complex<T>>,
    j: &nd::Array1<Complex<T>>,
) -> Result<LogComplex<T>> {
    let n = m.nrows();
    let sd = linalg::sqrt_det_complex_symmetric(m)?;
    let lu = linalg::lu_factor(m)?;
    let minv_j = lu.solve_vec(j);
    let mut q = Complex::<T>::zero();
    for i in 0..n {
        q = q + j[i] * minv_j[i];
    }
    q = q * Complex::new(T::of(0.5), T::zero());
    let tau = T::of(2.0) * T::PI();
    Ok(LogComplex::from_polar(T::of(n as f64) / T::of(2.0) * tau.ln() + q.re, q.im).div(sd))
}

/// A normalized pure Gaussian wavepacket (see module docs).
#[derive(Debug, Clone)]
pub struct Wavepacket<T: Real> {
    k: nd::Array2<Complex<T>>,
    xbar: nd::Array1<T>,
    pbar: nd::Array1<T>,
    amp: LogComplex<T>,
}

impl<T: Real> Wavepacket<T> {
    /// n-mode vacuum.
    pub fn vacuum(n: usize) -> Self {
        Wavepacket {
            k: nd::Array2::eye(n),
            xbar: nd::Array1::zeros(n),
            pbar: nd::Array1::zeros(n),
            amp: LogComplex::one(),
        }
    }

    /// Single-mode coherent state `|α⟩ = D(α)|0⟩`
    /// (`x̄ = √2 Re α`, `p̄ = √2 Im α`, phase `e^{i x̄ p̄ / 2}`).
    pub fn coherent(alpha: Complex<T>) -> Self {
        Self::coherent_multi(&[alpha])
    }

    /// Multi-mode coherent state `⊗_j |α_j⟩`.
    pub fn coherent_multi(alphas: &[Complex<T>]) -> Self {
        let n = alphas.len();
        let rt2 = T::of(2.0).sqrt();
        let xbar: nd::Array1<T> = alphas.iter().map(|a| rt2 * a.re).collect();
        let pbar: nd::Array1<T> = alphas.iter().map(|a| rt2 * a.im).collect();
        let half_xp = (0..n).fold(T::zero(), |acc, j| acc + xbar[j] * pbar[j] / T::of(2.0));
        Wavepacket {
            k: nd::Array2::eye(n),
            xbar,
            pbar,
            amp: LogComplex::from_polar(T::zero(), half_xp),
        }
    }

    /// Single-mode squeezed vacuum `S(r)|0⟩`, `S(r) = exp(r(a²−a†²)/2)`.
    pub fn squeezed_vacuum(r: T) -> Self {
        let mut s = Self::vacuum(1);
        s.squeeze(0, r);
        s
    }

    /// Squeezed vacuum in the width convention: `|S_ξ⟩ = S(−ln ξ)|0⟩`
    /// with position wavefunction `∝ e^{−x²/(2ξ²)}`.
    pub fn squeezed_vacuum_width(xi: T) -> Result<Self> {
        if xi <= T::zero() {
            return Err(CvError::Input("width must be positive".into()));
        }
        Ok(Self::squeezed_vacuum(-xi.ln()))
    }

    /// Build a normalized wavepacket from a raw quadratic exponent,
    /// `ψ_raw(x) = logc · exp(−½ xᵀKx + Jᵀx)`.
    ///
    /// Returns `(A, ψ)` with `A = ‖ψ_raw‖` real-positive in log form
    /// and `ψ` normalized, so `ψ_raw = A·ψ` exactly (the branch phase
    /// lives in ψ's amplitude).
    pub fn from_quadratic(
        k: &nd::Array2<Complex<T>>,
        j: &nd::Array1<Complex<T>>,
        logc: LogComplex<T>,
    ) -> Result<(LogComplex<T>, Self)> {
        let n = k.nrows();
        if k.ncols() != n || j.len() != n {
            return Err(CvError::Input("from_quadratic: shape mismatch".into()));
        }
        let k = symmetrize_c(k);
        let re_k = k.mapv(|z| z.re);
        let im_k = k.mapv(|z| z.im);
        // Re K must be positive definite for normalizability.
        linalg::cholesky(&re_k).map_err(|_| {
            CvError::Input("from_quadratic: Re K not positive definite".into())
        })?;
        let re_j: nd::Array1<T> = j.mapv(|z| z.re);
        let im_j: nd::Array1<T> = j.mapv(|z| z.im);
        let xbar = linalg::solve(&re_k, &re_j)?;
        let pbar = &im_j - &im_k.dot(&xbar);
        if logc.is_zero() {
            return Ok((
                LogComplex::zero(),
                Wavepacket {
                    k,
                    xbar,
                    pbar,
                    amp: LogComplex::one(),
                },
            ));
        }
        // ‖ψ_raw‖² = |logc|² ∫ exp(−xᵀ(Re K)x + 2(Re J)ᵀx).
        let m2 = re_k.mapv(|x| Complex::new(x * T::of(2.0), T::zero()));
        let j2 = re_j.mapv(|x| Complex::new(x * T::of(2.0), T::zero()));
        let norm2 = mvg(&m2, &j2)?;
        let a_log = logc.log_mag + norm2.log_mag / T::of(2.0);
        // amp = logc · e^{c₂} / (A · |c|), c₂ = ½ x̄ᵀKx̄ + i p̄ᵀx̄.
        let kxbar = k.dot(&xbar.mapv(|x| Complex::new(x, T::zero())));
        let mut c2 = Complex::<T>::zero();
        for i in 0..n {
            c2 = c2 + Complex::new(xbar[i], T::zero()) * kxbar[i];
        }
        c2 = c2 * Complex::new(T::of(0.5), T::zero());
        let px = (0..n).fold(T::zero(), |acc, i| acc + pbar[i] * xbar[i]);
        let log_c_norm = (linalg::log_det_spd(&re_k)? - T::of(n as f64) * T::PI().ln())
            / T::of(4.0);
        let mut amp = logc
            .mul(LogComplex::from_polar(c2.re, c2.im + px))
            .scale_log(-a_log - log_c_norm);
        if amp.log_mag.abs() > T::of(1e-6) {
            return Err(CvError::Numeric(format!(
                "from_quadratic: non-unit residual amplitude (log {})",
                amp.log_mag.to_f64_lossy()
            )));
        }
        amp.log_mag = T::zero();
        Ok((
            LogComplex::from_polar(a_log, T::zero()),
            Wavepacket {
                k,
                xbar,
                pbar,
                amp,
            },
        ))
    }

    /// Number of modes.
    pub fn num_modes(&self) -> usize {
        self.k.nrows()
    }

    /// The K matrix.
    pub fn k_matrix(&self) -> &nd::Array2<Complex<T>> {
        &self.k
    }

    /// Position centers x̄.
    pub fn x_center(&self) -> &nd::Array1<T> {
        &self.xbar
    }

    /// Momentum centers p̄.
    pub fn p_center(&self) -> &nd::Array1<T> {
        &self.pbar
    }

    /// Global amplitude (unit modulus).
    pub fn amplitude(&self) -> LogComplex<T> {
        self.amp
    }

    /// Multiply the global amplitude by a unit-modulus factor.
    pub fn mul_amplitude(&mut self, z: LogComplex<T>) {
        self.amp = self.amp.mul(z);
    }

    /// Tensor product; `self`'s modes come first.
    pub fn tensor(&self, other: &Self) -> Self {
        let (na, nb) = (self.num_modes(), other.num_modes());
        let n = na + nb;
        let mut k = nd::Array2::<Complex<T>>::zeros((n, n));
        for i in 0..na {
            for j in 0..na {
                k[(i, j)] = self.k[(i, j)];
            }
        }
        for i in 0..nb {
            for j in 0..nb {
                k[(na + i, na + j)] = other.k[(i, j)];
            }
        }
        let mut xbar = nd::Array1::<T>::zeros(n);
        let mut pbar = nd::Array1::<T>::zeros(n);
        for i in 0..na {
            xbar[i] = self.xbar[i];
            pbar[i] = self.pbar[i];
        }
        for i in 0..nb {
            xbar[na + i] = other.xbar[i];
            pbar[na + i] = other.pbar[i];
        }
        Wavepacket {
            k,
            xbar,
            pbar,
            amp: self.amp.mul(other.amp),
        }
    }

    /// Mean vector `μ = (x̄, p̄)` and covariance `Γ` in
    /// (X₁..X_n, P₁..P_n) ordering. For this convention the vacuum has
    /// `Γ = I/2` and pure states satisfy `det(2Γ) = 1`.
    pub fn mean_and_covariance(&self) -> (nd::Array1<T>, nd::Array2<T>) {
        let n = self.num_modes();
        let re_k = self.k.mapv(|z| z.re);
        let im_k = self.k.mapv(|z| z.im);
        let re2 = re_k.mapv(|x| x * T::of(2.0));
        let a = linalg::inverse(&re2).expect("Re K positive definite");
        let c = a.dot(&im_k).mapv(|x| -x);
        // B = ¼ A⁻¹ + Cᵀ A⁻¹ C with A⁻¹ = 2 Re K.
        let ainv = re2;
        let b = ainv.mapv(|x| x / T::of(4.0)) + c.t().dot(&ainv).dot(&c);
        let mut gamma = nd::Array2::<T>::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                gamma[(i, j)] = a[(i, j)];
                gamma[(i, n + j)] = c[(i, j)];
                gamma[(n + i, j)] = c[(j, i)];
                gamma[(n + i, n + j)] = b[(i, j)];
            }
        }
        let mut mu = nd::Array1::<T>::zeros(2 * n);
        for i in 0..n {
            mu[i] = self.xbar[i];
            mu[n + i] = self.pbar[i];
        }
        (mu, gamma)
    }

    /// Overlap `⟨self|other⟩` in log form, exact phase included.
    pub fn overlap(&self, other: &Self) -> Result<LogComplex<T>> {
        let n = self.num_modes();
        if other.num_modes() != n {
            return Err(CvError::Input("overlap: mode count mismatch".into()));
        }
        let ka = self.k.mapv(|z| z.conj());
        let kb = &other.k;
        let m = &ka + kb;
        let xa = self.xbar.mapv(|x| Complex::new(x, T::zero()));
        let xb = other.xbar.mapv(|x| Complex::new(x, T::zero()));
        let mut j = ka.dot(&xa) + kb.dot(&xb);
        for i in 0..n {
            j[i] = j[i] + Complex::new(T::zero(), other.pbar[i] - self.pbar[i]);
        }
        // s = −½x̄_aᵀK̄_a x̄_a − ½x̄_bᵀK_b x̄_b + i(p̄_aᵀx̄_a − p̄_bᵀx̄_b)
        let mut s = Complex::<T>::zero();
        let kaxa = ka.dot(&xa);
        let kbxb = kb.dot(&xb);
        for i in 0..n {
            s = s - (xa[i] * kaxa[i] + xb[i] * kbxb[i]) * Complex::new(T::of(0.5), T::zero());
        }
        let mut pxdiff = T::zero();
        for i in 0..n {
            pxdiff = pxdiff + self.pbar[i] * self.xbar[i] - other.pbar[i] * other.xbar[i];
        }
        s = s + Complex::new(T::zero(), pxdiff);
        let ld_a = linalg::log_det_spd(&self.k.mapv(|z| z.re))?;
        let ld_b = linalg::log_det_spd(&other.k.mapv(|z| z.re))?;
        let log_cc = (ld_a + ld_b) / T::of(4.0) - T::of(n as f64) / T::of(2.0) * T::PI().ln();
        Ok(self
            .amp
            .conj()
            .mul(other.amp)
            .scale_log(log_cc)
            .mul(LogComplex::from_polar(s.re, s.im))
            .mul(mvg(&m, &j)?))
    }

    /// Coherent projection `⟨β|ψ⟩`.
    pub fn project_coherent(&self, betas: &[Complex<T>]) -> Result<LogComplex<T>> {
        Self::coherent_multi(betas).overlap(self)
    }

    /// Scalar fast path for single-mode overlaps `⟨self|other⟩`.
    ///
    /// Same value as [`Wavepacket::overlap`] (canonical √ branch, exact
    /// phase) with no matrix factorizations; branch-heavy Gram sums call
    /// this in their inner loop. Both states must be single-mode.
    pub(crate) fn overlap_scalar(&self, other: &Self) -> LogComplex<T> {
        debug_assert!(self.num_modes() == 1 && other.num_modes() == 1);
        let half = T::of(0.5);
        let ka = self.k[(0, 0)].conj();
        let kb = other.k[(0, 0)];
        let m = ka + kb;
        let (xa, xb) = (self.xbar[0], other.xbar[0]);
        let (pa, pb) = (self.pbar[0], other.pbar[0]);
        let j = ka * Complex::new(xa, T::zero())
            + kb * Complex::new(xb, T::zero())
            + Complex::new(T::zero(), pb - pa);
        let s = (ka * Complex::new(xa * xa, T::zero()) + kb * Complex::new(xb * xb, T::zero()))
            * Complex::new(-half, T::zero())
            + Complex::new(T::zero(), pa * xa - pb * xb);
        let log_cc = (ka.re.ln() + kb.re.ln()) / T::of(4.0) - half * T::PI().ln();
        // mvg for 1×1: √(2π)·m^{−1/2}·e^{j²/(2m)}, principal √ (Re m > 0).
        let q = j * j / (m * Complex::new(T::of(2.0), T::zero()));
        let sd_log = m.norm_sqr().ln() / T::of(4.0);
        let sd_arg = m.im.atan2(m.re) / T::of(2.0);
        let tau = T::of(2.0) * T::PI();
        self.amp.conj().mul(other.amp).mul(LogComplex::from_polar(
            log_cc + s.re + half * tau.ln() + q.re - sd_log,
            s.im + q.im - sd_arg,
        ))
    }

    /// Raw-exponent view: `(K, J, logc)` with
    /// `ψ(x) = logc·exp(−½xᵀKx + Jᵀx)`.
    fn raw_quadratic(&self) -> (nd::Array2<Complex<T>>, nd::Array1<Complex<T>>, LogComplex<T>) {
        let n = self.num_modes();
        let xc = self.xbar.mapv(|x| Complex::new(x, T::zero()));
        let kx = self.k.dot(&xc);
        let mut j = kx.clone();
        for i in 0..n {
            j[i] = j[i] + Complex::new(T::zero(), self.pbar[i]);
        }
        // c₀ = −½x̄ᵀKx̄ − ip̄ᵀx̄
        let mut c0 = Complex::<T>::zero();
        for i in 0..n {
            c0 = c0 - xc[i] * kx[i] * Complex::new(T::of(0.5), T::zero());
        }
        let px = (0..n).fold(T::zero(), |acc, i| acc + self.pbar[i] * self.xbar[i]);
        let c0 = Complex::new(c0.re, c0.im - px);
        let ld = linalg::log_det_spd(&self.k.mapv(|z| z.re)).expect("Re K SPD");
        let log_c_norm = (ld - T::of(n as f64) * T::PI().ln()) / T::of(4.0);
        let logc = self
            .amp
            .scale_log(log_c_norm)
            .mul(LogComplex::from_polar(c0.re, c0.im));
        (self.k.clone(), j, logc)
    }

    /// Condition on a homodyne outcome `x_mode = q`.
    ///
    /// Returns `(A(q), ψ')`: the normalized conditional state on the
    /// remaining modes and the branch amplitude, with
    /// `|A(q)|² = p(q)` the homodyne density.
    pub fn condition_on_x(&self, mode: usize, q: T) -> Result<(LogComplex<T>, Self)> {
        let n = self.num_modes();
        if n < 2 {
            return Err(CvError::Input(
                "condition_on_x: need at least two modes".into(),
            ));
        }
        if mode >= n {
            return Err(CvError::Input("condition_on_x: mode out of range".into()));
        }
        let (k, j, logc) = self.raw_quadratic();
        let keep: Vec<usize> = (0..n).filter(|&i| i != mode).collect();
        let qc = Complex::new(q, T::zero());
        let mut k2 = nd::Array2::<Complex<T>>::zeros((n - 1, n - 1));
        let mut j2 = nd::Array1::<Complex<T>>::zeros(n - 1);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &l) in keep.iter().enumerate() {
                k2[(a, b)] = k[(i, l)];
            }
            j2[a] = j[i] - k[(i, mode)] * qc;
        }
        let extra = -k[(mode, mode)] * qc * qc * Complex::new(T::of(0.5), T::zero())
            + j[mode] * qc;
        let logc2 = logc.mul(LogComplex::from_polar(extra.re, extra.im));
        Wavepacket::from_quadratic(&k2, &j2, logc2)
    }

    /// Project a subset of modes onto a bra wavepacket:
    /// `φ(x_A) = ∫ bra*(x_B) ψ(x_A, x_B) dx_B` with `B = modes`
    /// (bra mode `t` pairs with `modes[t]`).
    ///
    /// Returns `(A, ψ')` with `ψ'` normalized on the remaining modes
    /// and `A` the branch amplitude.
    pub fn partial_project(
        &self,
        modes: &[usize],
        bra: &Wavepacket<T>,
    ) -> Result<(LogComplex<T>, Self)> {
        let n = self.num_modes();
        let nb = modes.len();
        if bra.num_modes() != nb {
            return Err(CvError::Input("partial_project: bra mode mismatch".into()));
        }
        if nb >= n {
            return Err(CvError::Input(
                "partial_project: must keep at least one mode (use overlap)".into(),
            ));
        }
        let mut seen = vec![false; n];
        for &m in modes {
            if m >= n || seen[m] {
                return Err(CvError::Input("partial_project: bad mode list".into()));
            }
            seen[m] = true;
        }
        let keep: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
        let (mut k, mut j, mut logc) = self.raw_quadratic();
        // Fold in conj(bra) on the projected block.
        let (kb, jb, logcb) = bra.raw_quadratic();
        for (s, &ms) in modes.iter().enumerate() {
            for (t, &mt) in modes.iter().enumerate() {
                k[(ms, mt)] = k[(ms, mt)] + kb[(s, t)].conj();
            }
            j[ms] = j[ms] + jb[s].conj();
        }
        logc = logc.mul(logcb.conj());
        // Integrate out the B block.
        let mut mbb = nd::Array2::<Complex<T>>::zeros((nb, nb));
        let mut jb2 = nd::Array1::<Complex<T>>::zeros(nb);
        for (s, &ms) in modes.iter().enumerate() {
            for (t, &mt) in modes.iter().enumerate() {
                mbb[(s, t)] = k[(ms, mt)];
            }
            jb2[s] = j[ms];
        }
        let lu = linalg::lu_factor(&mbb)?;
        let minv_jb = lu.solve_vec(&jb2);
        let na = keep.len();
        let mut kab = nd::Array2::<Complex<T>>::zeros((na, nb));
        for (a, &ia) in keep.iter().enumerate() {
            for (s, &ms) in modes.iter().enumerate() {
                kab[(a, s)] = k[(ia, ms)];
            }
        }
        let minv_kba = lu.solve_mat(&kab.t().to_owned());
        let mut k2 = nd::Array2::<Complex<T>>::zeros((na, na));
        for (a, &ia) in keep.iter().enumerate() {
            for (b, &ib) in keep.iter().enumerate() {
                let mut acc = Complex::<T>::zero();
                for s in 0..nb {
                    acc = acc + kab[(a, s)] * minv_kba[(s, b)];
                }
                k2[(a, b)] = k[(ia, ib)] - acc;
            }
        }
        let mut j2 = nd::Array1::<Complex<T>>::zeros(na);
        for (a, &ia) in keep.iter().enumerate() {
            let mut acc = Complex::<T>::zero();
            for s in 0..nb {
                acc = acc + kab[(a, s)] * minv_jb[s];
            }
            j2[a] = j[ia] - acc;
        }
        // Gaussian-integral constants over x_B.
        let sd = linalg::sqrt_det_complex_symmetric(&mbb)?;
        let mut qq = Complex::<T>::zero();
        for s in 0..nb {
            qq = qq + jb2[s] * minv_jb[s];
        }
        qq = qq * Complex::new(T::of(0.5), T::zero());
        let tau = T::of(2.0) * T::PI();
        let const_b = LogComplex::from_polar(
            T::of(nb as f64) / T::of(2.0) * tau.ln() + qq.re,
            qq.im,
        )
        .div(sd);
        logc = logc.mul(const_b);
        Wavepacket::from_quadratic(&k2, &j2, logc)
    }

    /// Mean and variance of the X marginal of one mode.
    pub fn x_marginal(&self, mode: usize) -> (T, T) {
        let (_, gamma) = self.mean_and_covariance();
        (self.xbar[mode], gamma[(mode, mode)])
    }

    /// Homodyne density `p(q)` for measuring X on one mode.
    pub fn homodyne_density(&self, mode: usize, q: T) -> T {
        let (mean, var) = self.x_marginal(mode);
        let tau = T::of(2.0) * T::PI();
        (-(q - mean) * (q - mean) / (T::of(2.0) * var)).exp() / (tau * var).sqrt()
    }

    /// Displace by `(dx, dp)`:
    /// `amp ← amp·e^{i(dpᵀx̄ + dpᵀdx/2)}`, `x̄ += dx`, `p̄ += dp`.
    pub fn displace(&mut self, dx: &[T], dp: &[T]) {
        let n = self.num_modes();
        assert_eq!(dx.len(), n);
        assert_eq!(dp.len(), n);
        let mut phase = T::zero();
        for i in 0..n {
            phase = phase + dp[i] * (self.xbar[i] + dx[i] / T::of(2.0));
        }
        self.amp = self.amp.mul(LogComplex::from_polar(T::zero(), phase));
        for i in 0..n {
            self.xbar[i] = self.xbar[i] + dx[i];
            self.pbar[i] = self.pbar[i] + dp[i];
        }
    }

    /// Displace one mode by `α`: `D(α)` on that mode.
    pub fn displace_mode(&mut self, mode: usize, alpha: Complex<T>) {
        let n = self.num_modes();
        let rt2 = T::of(2.0).sqrt();
        let mut dx = vec![T::zero(); n];
        let mut dp = vec![T::zero(); n];
        dx[mode] = rt2 * alpha.re;
        dp[mode] = rt2 * alpha.im;
        self.displace(&dx, &dp);
    }

    /// Exact squeeze `S(r) = exp(r(a²−a†²)/2)` on one mode
    /// (X-variance shrinks by `e^{−2r}`; no phase is acquired).
    pub fn squeeze(&mut self, mode: usize, r: T) {
        let n = self.num_modes();
        let er = r.exp();
        for i in 0..n {
            for j in 0..n {
                let mut f = T::one();
                if i == mode {
                    f = f * er;
                }
                if j == mode {
                    f = f * er;
                }
                if i == mode || j == mode {
                    self.k[(i, j)] = self.k[(i, j)] * Complex::new(f, T::zero());
                }
            }
        }
        self.xbar[mode] = self.xbar[mode] / er;
        self.pbar[mode] = self.pbar[mode] * er;
    }

    /// Exact quadratic phase gate `e^{i r X_mode²}` — pointwise
    /// multiplication by `e^{i r x²}` on one mode (a shear; the
    /// envelope, and hence normalization, is untouched).
    pub fn quadratic_phase(&mut self, mode: usize, r: T) {
        let n = self.num_modes();
        assert!(mode < n, "quadratic_phase: mode out of range");
        let x = self.xbar[mode];
        // irx² = ir(x−x̄)² + 2irx̄(x−x̄) + irx̄².
        self.k[(mode, mode)] = self.k[(mode, mode)] - Complex::new(T::zero(), T::of(2.0) * r);
        self.pbar[mode] = self.pbar[mode] + T::of(2.0) * r * x;
        self.amp = self.amp.mul(LogComplex::from_polar(T::zero(), r * x * x));
    }

    /// Exact SUM gate `e^{−it X_i P_j}`:
    /// `(Uψ)(x) = ψ(…, x_j − t·x_i, …)` — a pure substitution.
    pub fn apply_sum_gate(&mut self, i: usize, j: usize, t: T) {
        let n = self.num_modes();
        assert!(i < n && j < n && i != j, "bad SUM gate modes");
        // y = Mx with y_j = x_j − t x_i: K ← MᵀKM, x̄ ← M⁻¹x̄, p̄ ← Mᵀp̄.
        let tc = Complex::new(t, T::zero());
        // K ← MᵀKM: col_i += −t·col_j then row_i += −t·row_j (M adds
        // −t·x_i into slot j): work it explicitly.
        let ki = self.k.column(j).to_owned();
        for rr in 0..n {
            self.k[(rr, i)] = self.k[(rr, i)] - tc * ki[rr];
        }
        let kr = self.k.row(j).to_owned();
        for cc in 0..n {
            self.k[(i, cc)] = self.k[(i, cc)] - tc * kr[cc];
        }
        self.xbar[j] = self.xbar[j] + t * self.xbar[i];
        self.pbar[i] = self.pbar[i] - t * self.pbar[j];
    }

    /// Apply the passive unitary with mode matrix `V`
    /// (`U_V |α⟩ = |Vα⟩`, `U_V |0⟩ = |0⟩`). The shape transforms
    /// symplectically; the exact phase is pinned by a coherent-probe
    /// ratio.
    pub fn apply_passive(&mut self, v: &nd::Array2<Complex<T>>) -> Result<()> {
        let n = self.num_modes();
        if v.nrows() != n || v.ncols() != n {
            return Err(CvError::Input("apply_passive: V shape mismatch".into()));
        }
        // Shape update by the Möbius action of the state map
        // S = [[A, B], [C, D]] on M = iK:
        // M' = (C + D·M)(A + B·M)⁻¹ — one solve, no Γ round-trip.
        // For a passive, A = D = Re V, B = −Im V, C = Im V.
        let m_mat = self.k.mapv(|z| z * Complex::new(T::zero(), T::one()));
        let re_v = v.mapv(|z| Complex::new(z.re, T::zero()));
        let im_v = v.mapv(|z| Complex::new(z.im, T::zero()));
        let n1 = &im_v + &re_v.dot(&m_mat); // C + D·M
        let n2 = &re_v - &im_v.dot(&m_mat); // A + B·M
        // K' = −i·N1·N2⁻¹: solve N2ᵀYᵀ = N1ᵀ, then K' = −i·Y.
        let lu = linalg::lu_factor(&n2.t().to_owned())?;
        let yt = lu.solve_mat(&n1.t().to_owned());
        let mut k2 = nd::Array2::<Complex<T>>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                k2[(i, j)] = yt[(j, i)] * Complex::new(T::zero(), -T::one());
            }
        }
        let k2 = symmetrize_c(&k2);
        // Means: μ' = S μ.
        let s = passive_symplectic(v);
        let mut mu = nd::Array1::<T>::zeros(2 * n);
        for i in 0..n {
            mu[i] = self.xbar[i];
            mu[n + i] = self.pbar[i];
        }
        let mu2 = s.dot(&mu);
        let mut xbar2 = nd::Array1::<T>::zeros(n);
        let mut pbar2 = nd::Array1::<T>::zeros(n);
        for i in 0..n {
            xbar2[i] = mu2[i];
            pbar2[i] = mu2[n + i];
        }
        let candidate = Wavepacket {
            k: k2,
            xbar: xbar2,
            pbar: pbar2,
            amp: LogComplex::one(),
        };
        // Probe at the candidate's own center (never orthogonal).
        let rt2inv = T::one() / T::of(2.0).sqrt();
        let beta: Vec<Complex<T>> = (0..n)
            .map(|i| Complex::new(candidate.xbar[i] * rt2inv, candidate.pbar[i] * rt2inv))
            .collect();
        // V†β
        let mut beta_old = vec![Complex::<T>::zero(); n];
        for i in 0..n {
            for l in 0..n {
                beta_old[i] = beta_old[i] + v[(l, i)].conj() * beta[l];
            }
        }
        let num = Wavepacket::coherent_multi(&beta_old).overlap(self)?;
        let den = Wavepacket::coherent_multi(&beta).overlap(&candidate)?;
        let mut z = num.div(den);
        // Guard against genuinely broken states; small magnitude drift
        // (accumulated representation error over long gate chains) is
        // renormalized away. Accuracy itself is pinned by the
        // cross-engine oracle tests.
        if z.log_mag.abs() > T::of(1e-4) {
            return Err(CvError::Numeric(format!(
                "apply_passive: probe ratio magnitude off unit (log {})",
                z.log_mag.to_f64_lossy()
            )));
        }
        z.log_mag = T::zero();
        *self = Wavepacket { amp: z, ..candidate };
        Ok(())
    }

    /// Apply the canonical Gaussian unitary with symplectic action
    /// `(S, d)`: the Euler factorization
    /// `U = D(d)·U_{V_L}·(⊗S(r_j))·U_{V_R}` of exact atomic gates.
    pub fn apply_symplectic(&mut self, s: &nd::Array2<T>, d: &nd::Array1<T>) -> Result<()> {
        let n = self.num_modes();
        if s.nrows() != 2 * n || s.ncols() != 2 * n || d.len() != 2 * n {
            return Err(CvError::Input("apply_symplectic: shape mismatch".into()));
        }
        let f = euler_decompose(s)?;
        self.apply_passive(&f.v_right)?;
        for (m, &r) in f.squeezes.iter().enumerate() {
            if r != T::zero() {
                self.squeeze(m, r);
            }
        }
        self.apply_passive(&f.v_left)?;
        let dx: Vec<T> = (0..n).map(|i| d[i]).collect();
        let dp: Vec<T> = (0..n).map(|i| d[n + i]).collect();
        self.displace(&dx, &dp);
        Ok(())
    }

    /// The canonical symplectic data of this state: `(S, d)` with
    /// `Γ = S(I/2)Sᵀ` (`S = √(2Γ)`, symplectic positive) and `d = μ`.
    pub fn canonical_form(&self) -> Result<(nd::Array2<T>, nd::Array1<T>)> {
        let (mu, gamma) = self.mean_and_covariance();
        let two_gamma = gamma.mapv(|x| x * T::of(2.0));
        let s = linalg::sqrtm_spd(&two_gamma)?;
        if !is_symplectic(&s, T::of(1e-6)) {
            return Err(CvError::Certificate(
                "canonical_form: covariance is not pure-Gaussian".into(),
            ));
        }
        Ok((s, mu))
    }

    /// Full description: covariance, mean, and the reference-coherent
    /// amplitude `r = ⟨α_ref|ψ⟩` that pins the global phase.
    pub fn to_desc(&self) -> Result<GaussianDesc<T>> {
        let (mu, gamma) = self.mean_and_covariance();
        let n = self.num_modes();
        let rt2inv = T::one() / T::of(2.0).sqrt();
        let ref_alpha: Vec<Complex<T>> = (0..n)
            .map(|i| Complex::new(mu[i] * rt2inv, mu[n + i] * rt2inv))
            .collect();
        let r = self.project_coherent(&ref_alpha)?;
        Ok(GaussianDesc {
            gamma,
            mu,
            ref_alpha,
            r,
        })
    }

    /// Rebuild a wavepacket from a description, validating purity and
    /// the amplitude magnitude.
    pub fn from_desc(desc: &GaussianDesc<T>) -> Result<Self> {
        let n2 = desc.gamma.nrows();
        if n2 % 2 != 0 || desc.mu.len() != n2 {
            return Err(CvError::Input("from_desc: shape mismatch".into()));
        }
        let n = n2 / 2;
        let two_gamma = desc.gamma.mapv(|x| x * T::of(2.0));
        let s = linalg::sqrtm_spd(&two_gamma)?;
        if !is_symplectic(&s, T::of(1e-6)) {
            return Err(CvError::Certificate(
                "from_desc: covariance is not pure-Gaussian".into(),
            ));
        }
        let mut state = Wavepacket::vacuum(n);
        state.apply_symplectic(&s, &desc.mu)?;
        let r0 = state.project_coherent(&desc.ref_alpha)?;
        let mut ratio = desc.r.div(r0);
        if ratio.log_mag.abs() > T::of(1e-6) {
            return Err(CvError::Certificate(format!(
                "from_desc: amplitude magnitude mismatch (log {}); description is not a \
                 normalized pure Gaussian",
                ratio.log_mag.to_f64_lossy()
            )));
        }
        ratio.log_mag = T::zero();
        state.amp = state.amp.mul(ratio);
        Ok(state)
    }
}

fn symmetrize_c<T: Real>(k: &nd::Array2<Complex<T>>) -> nd::Array2<Complex<T>> {
    let n = k.nrows();
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..n {
            let avg = (k[(i, j)] + k[(j, i)]) * Complex::new(T::of(0.5), T::zero());
            out[(i, j)] = avg;
        }
    }
    out
}

/// Covariance + mean + reference amplitude description of a pure
/// Gaussian state. `r = ⟨α_ref|ψ⟩` pins the global phase; its
/// magnitude doubles as a purity/consistency certificate.
#[derive(Debug, Clone)]
pub struct GaussianDesc<T: Real> {
    /// Covariance matrix (X.., P.. ordering).
    pub gamma: nd::Array2<T>,
    /// Mean vector.
    pub mu: nd::Array1<T>,
    /// Reference coherent amplitudes (the state's own centers).
    pub ref_alpha: Vec<Complex<T>>,
    /// `⟨α_ref|ψ⟩` in log form.
    pub r: LogComplex<T>,
}

/// A Gaussian unitary in symplectic form: `μ → Sμ + d`, `Γ → SΓSᵀ`.
#[derive(Debug, Clone)]
pub struct SymplecticGate<T: Real> {
    /// Symplectic matrix (2m×2m, X..P ordering).
    pub s: nd::Array2<T>,
    /// Displacement (length 2m).
    pub d: nd::Array1<T>,
}

impl<T: Real> SymplecticGate<T> {
    /// Validate and build; rejects non-symplectic `S`.
    pub fn new(s: nd::Array2<T>, d: nd::Array1<T>) -> Result<Self> {
        if !is_symplectic(&s, T::of(1e-10)) {
            return Err(CvError::Input("SymplecticGate: S is not symplectic".into()));
        }
        if d.len() != s.nrows() {
            return Err(CvError::Input("SymplecticGate: d length mismatch".into()));
        }
        Ok(SymplecticGate { s, d })
    }

    /// Identity gate on `m` modes.
    pub fn identity(m: usize) -> Self {
        SymplecticGate {
            s: nd::Array2::eye(2 * m),
            d: nd::Array1::zeros(2 * m),
        }
    }

    /// Phase-space rotation `X → cosθ·X + sinθ·P` on one mode of `m`.
    pub fn rotation(m: usize, mode: usize, theta: T) -> Self {
        let mut s = nd::Array2::<T>::eye(2 * m);
        let (c, sn) = (theta.cos(), theta.sin());
        s[(mode, mode)] = c;
        s[(mode, m + mode)] = sn;
        s[(m + mode, mode)] = -sn;
        s[(m + mode, m + mode)] = c;
        SymplecticGate {
            s,
            d: nd::Array1::zeros(2 * m),
        }
    }
}

/// Apply a symplectic gate at the description level; `r` is recomputed
/// exactly through the wavepacket engine.
pub fn apply_gaussian<T: Real>(
    state: &GaussianDesc<T>,
    gate: &SymplecticGate<T>,
) -> Result<GaussianDesc<T>> {
    if !is_symplectic(&gate.s, T::of(1e-10)) {
        return Err(CvError::Input("apply_gaussian: S is not symplectic".into()));
    }
    let mut w = Wavepacket::from_desc(state)?;
    w.apply_symplectic(&gate.s, &gate.d)?;
    w.to_desc()
}

/// Apply per-mode squeezers `S(z_j)` in one shot at the description
/// level (for vacuum input, `⟨N⟩_j = sinh² z_j`).
pub fn blocksqueezing<T: Real>(state: &GaussianDesc<T>, z: &[T]) -> Result<GaussianDesc<T>> {
    let mut w = Wavepacket::from_desc(state)?;
    if z.len() != w.num_modes() {
        return Err(CvError::Input("blocksqueezing: z length mismatch".into()));
    }
    for (m, &zj) in z.iter().enumerate() {
        if !zj.is_finite() {
            return Err(CvError::Input("blocksqueezing: non-finite z".into()));
        }
        w.squeeze(m, zj);
    }
    w.to_desc()
}

/// Homodyne post-selection `X_mode = q` at the description level.
///
/// Returns the conditional description on the remaining modes, the
/// marginal density `p(q)`, and the unit branch phase (so that the
/// unnormalized branch amplitude `√p(q)·phase` is reproducible).
pub fn homodyne_postselect<T: Real>(
    state: &GaussianDesc<T>,
    mode: usize,
    q: T,
) -> Result<(GaussianDesc<T>, T, Complex<T>)> {
    let w = Wavepacket::from_desc(state)?;
    let (a, cond) = w.condition_on_x(mode, q)?;
    let density = a.mag() * a.mag();
    Ok((cond.to_desc()?, density, a.phase))
}

/// Overlap `⟨a|b⟩` at the description level, global phase included.
pub fn overlap_desc<T: Real>(a: &GaussianDesc<T>, b: &GaussianDesc<T>) -> Result<Complex<T>> {
    let wa = Wavepacket::from_desc(a)?;
    let wb = Wavepacket::from_desc(b)?;
    Ok(wa.overlap(&wb)?.to_complex())
}

/// Single-mode dyad sandwich `⟨b| (|ket⟩⟨bra| ⊗ I_{n−1}) |a⟩`, with
/// the dyad acting on mode 0.
pub fn sandwich<T: Real>(
    a: &GaussianDesc<T>,
    b: &GaussianDesc<T>,
    ket: &GaussianDesc<T>,
    bra: &GaussianDesc<T>,
) -> Result<Complex<T>> {
    let wa = Wavepacket::from_desc(a)?;
    let wb = Wavepacket::from_desc(b)?;
    let wk = Wavepacket::from_desc(ket)?;
    let wbr = Wavepacket::from_desc(bra)?;
    if wk.num_modes() != 1 || wbr.num_modes() != 1 {
        return Err(CvError::Input("sandwich: bra/ket must be single-mode".into()));
    }
    let n = wa.num_modes();
    if wb.num_modes() != n {
        return Err(CvError::Input("sandwich: mode count mismatch".into()));
    }
    if n == 1 {
        // ⟨b|k⟩⟨br|a⟩.
        let left = wb.overlap(&wk)?;
        let right = wbr.overlap(&wa)?;
        return Ok(left.mul(right).to_complex());
    }
    // (|k⟩⟨br|⊗I)|a⟩ = A·|k⟩⊗|red⟩ with (A, red) = ⟨br|a⟩ on mode 0.
    let (amp, red) = wa.partial_project(&[0], &wbr)?;
    let full = wk.tensor(&red);
    Ok(wb.overlap(&full)?.mul(amp).to_complex())
}

/// Build a phase-pinned description from covariance data `(Γ, μ)`: the
/// preparation is factored as `D(μ)·U_L·(⊗S)·U_R|0⟩` and `r` computed
/// exactly.
pub fn canonical_desc<T: Real>(
    gamma: &nd::Array2<T>,
    mu: &nd::Array1<T>,
) -> Result<GaussianDesc<T>> {
    let n2 = gamma.nrows();
    if n2 % 2 != 0 || gamma.ncols() != n2 || mu.len() != n2 {
        return Err(CvError::Input("canonical_desc: shape mismatch".into()));
    }
    let two_gamma = gamma.mapv(|x| x * T::of(2.0));
    let s = linalg::sqrtm_spd(&two_gamma)?;
    if !is_symplectic(&s, T::of(1e-6)) {
        return Err(CvError::Certificate(
            "canonical_desc: covariance is not pure-Gaussian".into(),
        ));
    }
    let mut w = Wavepacket::vacuum(n2 / 2);
    w.apply_symplectic(&s, mu)?;
    w.to_desc()
}

/// A finite linear combination of Gaussian wavepackets,
/// `|Ψ⟩ = Σ_j c_j |ψ_j⟩` with log-domain coefficients.
#[derive(Debug, Clone)]
pub struct GaussianSum<T: Real> {
    num_modes: usize,
    branches: Vec<(LogComplex<T>, Wavepacket<T>)>,
}

impl<T: Real> GaussianSum<T> {
    /// Empty sum on `n` modes.
    pub fn new(num_modes: usize) -> Self {
        GaussianSum {
            num_modes,
            branches: Vec::new(),
        }
    }

    /// A single wavepacket as a sum.
    pub fn from_wavepacket(w: Wavepacket<T>) -> Self {
        GaussianSum {
            num_modes: w.num_modes(),
            branches: vec![(LogComplex::one(), w)],
        }
    }

    /// Append a branch.
    pub fn push(&mut self, coeff: LogComplex<T>, w: Wavepacket<T>) {
        assert_eq!(w.num_modes(), self.num_modes, "branch mode mismatch");
        self.branches.push((coeff, w));
    }

    /// Number of branches.
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    /// True when there are no branches.
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Number of modes.
    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    /// Branch view.
    pub fn branches(&self) -> &[(LogComplex<T>, Wavepacket<T>)] {
        &self.branches
    }

    /// Tensor a fixed wavepacket onto every branch (its modes appended).
    pub fn tensor_wavepacket(&self, w: &Wavepacket<T>) -> Self {
        GaussianSum {
            num_modes: self.num_modes + w.num_modes(),
            branches: self
                .branches
                .iter()
                .map(|(c, b)| (*c, b.tensor(w)))
                .collect(),
        }
    }

    /// Apply a displacement to every branch.
    pub fn displace(&mut self, dx: &[T], dp: &[T]) {
        for (_, b) in &mut self.branches {
            b.displace(dx, dp);
        }
    }

    /// Apply an exact squeeze to every branch.
    pub fn squeeze(&mut self, mode: usize, r: T) {
        for (_, b) in &mut self.branches {
            b.squeeze(mode, r);
        }
    }

    /// Apply a SUM gate to every branch.
    pub fn apply_sum_gate(&mut self, i: usize, j: usize, t: T) {
        for (_, b) in &mut self.branches {
            b.apply_sum_gate(i, j, t);
        }
    }

    /// Apply a quadratic phase gate `e^{i r X_mode²}` to every branch.
    pub fn quadratic_phase(&mut self, mode: usize, r: T) {
        for (_, b) in &mut self.branches {
            b.quadratic_phase(mode, r);
        }
    }

    /// Multiply every coefficient by `z` (e.g. a global phase or a
    /// normalization factor in log form).
    pub fn scale(&mut self, z: LogComplex<T>) {
        for (c, _) in &mut self.branches {
            *c = c.mul(z);
        }
    }

    /// Apply a passive to every branch.
    pub fn apply_passive(&mut self, v: &nd::Array2<Complex<T>>) -> Result<()> {
        for (_, b) in &mut self.branches {
            b.apply_passive(v)?;
        }
        Ok(())
    }

    /// Apply a canonical symplectic gate to every branch.
    pub fn apply_symplectic(&mut self, s: &nd::Array2<T>, d: &nd::Array1<T>) -> Result<()> {
        for (_, b) in &mut self.branches {
            b.apply_symplectic(s, d)?;
        }
        Ok(())
    }

    /// Condition every branch on `x_mode = q`; branch amplitudes fold
    /// into the coefficients.
    pub fn condition_on_x(&self, mode: usize, q: T) -> Result<Self> {
        let mut out = GaussianSum::new(self.num_modes - 1);
        for (c, b) in &self.branches {
            let (a, w) = b.condition_on_x(mode, q)?;
            out.push(c.mul(a), w);
        }
        Ok(out)
    }

    /// Project a subset of modes of every branch onto a bra wavepacket.
    pub fn partial_project(&self, modes: &[usize], bra: &Wavepacket<T>) -> Result<Self> {
        let mut out = GaussianSum::new(self.num_modes - modes.len());
        for (c, b) in &self.branches {
            let (a, w) = b.partial_project(modes, bra)?;
            out.push(c.mul(a), w);
        }
        Ok(out)
    }

    /// Inner product `⟨self|other⟩` via the full Gram double sum.
    pub fn inner(&self, other: &Self) -> Result<LogComplex<T>> {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for (ca, wa) in &self.branches {
            for (cb, wb) in &other.branches {
                terms.push(ca.conj().mul(*cb).mul(wa.overlap(wb)?));
            }
        }
        Ok(logcomplex_sum(&terms))
    }

    /// Squared norm `‖Σ c_j ψ_j‖²`.
    pub fn norm_sq(&self) -> Result<T> {
        let g = self.inner(self)?;
        Ok(g.mag() * g.phase.re.max(T::zero()))
    }

    /// Overlap `⟨w|Σ c_j ψ_j⟩` against a single wavepacket.
    pub fn overlap_with(&self, w: &Wavepacket<T>) -> Result<LogComplex<T>> {
        let mut terms = Vec::with_capacity(self.len());
        for (c, b) in &self.branches {
            terms.push(c.mul(w.overlap(b)?));
        }
        Ok(logcomplex_sum(&terms))
    }

    /// Drop branches whose |coefficient| falls below `floor` (an
    /// absolute magnitude); returns the summed magnitude of dropped
    /// coefficients (an L² loss bound for unit-norm branches).
    pub fn prune(&mut self, floor: T) -> T {
        let mut dropped = T::zero();
        self.branches.retain(|(c, _)| {
            if c.mag() < floor {
                dropped = dropped + c.mag();
                false
            } else {
                true
            }
        });
        dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PolyOp;
    use crate::focksim::FockState;
    use crate::numerics::hermite_functions;
    use num_complex::Complex64 as C64;

    type W = Wavepacket<f64>;
    type P = PolyOp<C64>;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// ⟨β|ψ⟩ on the Fock side, with |β⟩ built at the state's box.
    fn fock_probe(state: &FockState<f64>, betas: &[C64]) -> C64 {
        let mut probe = FockState::<f64>::coherent(betas[0], state.cutoffs()[0]);
        for (m, &b) in betas.iter().enumerate().skip(1) {
            probe = probe.tensor(&FockState::<f64>::coherent(b, state.cutoffs()[m]));
        }
        probe.inner(state)
    }

    #[test]
    fn coherent_overlap_closed_form() {
        // ⟨α|β⟩ = exp(−|α|²/2 − |β|²/2 + ᾱβ), phase included.
        let alpha = c(0.7, -0.3);
        let beta = c(-0.2, 0.5);
        let got = W::coherent(alpha).overlap(&W::coherent(beta)).unwrap();
        let expect = (-alpha.norm_sqr() / 2.0 - beta.norm_sqr() / 2.0 + alpha.conj() * beta).exp();
        assert!((got.to_complex() - expect).norm() < 1e-12, "{got:?}");
        // Norms.
        let s = W::coherent(alpha);
        let n = s.overlap(&s).unwrap().to_complex();
        assert!((n - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn squeezed_width_covariance() {
        let xi = 1.8f64;
        let s = W::squeezed_vacuum_width(xi).unwrap();
        let (mu, gamma) = s.mean_and_covariance();
        assert!(mu.iter().all(|&m| m.abs() < 1e-14));
        assert!((gamma[(0, 0)] - xi * xi / 2.0).abs() < 1e-12);
        assert!((gamma[(1, 1)] - 1.0 / (2.0 * xi * xi)).abs() < 1e-12);
        assert!(gamma[(0, 1)].abs() < 1e-14);
        // Purity: det(2Γ) = 1.
        let det = 4.0 * (gamma[(0, 0)] * gamma[(1, 1)] - gamma[(0, 1)] * gamma[(1, 0)]);
        assert!((det - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_phases_match_focksim() {
        // Compose two displacements; the cross phase Im(δ₂ δ̄₁) must
        // match the Fock engine exactly.
        let d1 = c(0.4, 0.3);
        let d2 = c(-0.2, 0.6);
        let mut g = W::vacuum(1);
        g.displace_mode(0, d1);
        g.displace_mode(0, d2);

        let mut f = FockState::<f64>::vacuum(&[40]);
        for d in [d1, d2] {
            // D(δ) = e^{−iH}, H = −(p̄X − x̄P), x̄=√2 Re δ, p̄=√2 Im δ.
            let h = &P::x(1, 0).scale(&c(-2.0f64.sqrt() * d.im, 0.0))
                + &P::p(1, 0).scale(&c(2.0f64.sqrt() * d.re, 0.0));
            f.evolve_poly(&h, 1.0, 1e-13).unwrap();
        }
        for beta in [c(0.0, 0.0), c(0.3, -0.2), c(-0.5, 0.1)] {
            let want = fock_probe(&f, &[beta]);
            let got = g.project_coherent(&[beta]).unwrap().to_complex();
            assert!((want - got).norm() < 1e-9, "beta={beta}: {want} vs {got}");
        }
    }

    #[test]
    fn squeeze_phases_match_focksim() {
        // S(r) on a displaced state, cross-validated with probes.
        let r = 0.55f64;
        let alpha = c(0.6, -0.25);
        let mut g = W::coherent(alpha);
        g.squeeze(0, r);

        let mut f = FockState::<f64>::coherent(alpha, 60);
        // S(r) = e^{−iH} with H = (ir/2)(a² − a†²).
        let a2 = P::annihilation(1, 0).mul_op(&P::annihilation(1, 0));
        let ad2 = P::creation(1, 0).mul_op(&P::creation(1, 0));
        let h = &a2.scale(&c(0.0, r / 2.0)) + &ad2.scale(&c(0.0, -r / 2.0));
        f.evolve_poly(&h, 1.0, 1e-13).unwrap();
        for beta in [c(0.1, 0.0), c(-0.3, 0.4), c(0.5, 0.2)] {
            let want = fock_probe(&f, &[beta]);
            let got = g.project_coherent(&[beta]).unwrap().to_complex();
            assert!((want - got).norm() < 1e-9, "beta={beta}: {want} vs {got}");
        }
        // And the no-displacement case matches the Fock constructor.
        let gs = W::squeezed_vacuum(r);
        let fs = FockState::<f64>::squeezed_vacuum(r, 60);
        for beta in [c(0.2, 0.1), c(-0.4, 0.3)] {
            let want = fock_probe(&fs, &[beta]);
            let got = gs.project_coherent(&[beta]).unwrap().to_complex();
            assert!((want - got).norm() < 1e-10);
        }
    }

    #[test]
    fn passive_beamsplitter_matches_focksim() {
        // V = exp(−ih) with a non-trivial 2×2 Hermitian h, applied to a
        // coherent pair; probes must agree in magnitude and phase.
        let h_mat = nd::array![
            [c(0.10, 0.0), c(0.30, -0.20)],
            [c(0.30, 0.20), c(-0.15, 0.0)]
        ];
        let minus_ih = h_mat.mapv(|z| z * c(0.0, -1.0));
        let v = linalg::expm(&minus_ih).unwrap();

        let alphas = [c(0.5, 0.2), c(-0.3, 0.4)];
        let mut g = W::coherent_multi(&alphas);
        g.apply_passive(&v).unwrap();

        // Coherent states map to coherent states: U_V|α⟩ = |Vα⟩.
        let v_alpha: Vec<C64> = (0..2)
            .map(|i| (0..2).map(|j| v[(i, j)] * alphas[j]).sum())
            .collect();
        let direct = W::coherent_multi(&v_alpha);
        let ov = direct.overlap(&g).unwrap().to_complex();
        assert!((ov - c(1.0, 0.0)).norm() < 1e-10, "{ov}");

        // Fock side: H = Σ h_ij a†_i a_j.
        let mut hop = P::zero_op(2);
        for i in 0..2 {
            for j in 0..2 {
                hop = &hop + &P::creation(2, i).mul_op(&P::annihilation(2, j)).scale(&h_mat[(i, j)]);
            }
        }
        let f0 = FockState::<f64>::coherent(alphas[0], 24);
        let f1 = FockState::<f64>::coherent(alphas[1], 24);
        let mut f = f0.tensor(&f1);
        f.evolve_poly(&hop, 1.0, 1e-12).unwrap();
        for betas in [
            [c(0.3, 0.0), c(0.0, 0.2)],
            [c(-0.1, 0.4), c(0.5, -0.3)],
        ] {
            let want = fock_probe(&f, &betas);
            let got = g.project_coherent(&betas).unwrap().to_complex();
            assert!((want - got).norm() < 1e-8, "{want} vs {got}");
        }
    }

    #[test]
    fn sum_gate_matches_focksim() {
        let t = 0.8f64;
        let xi = 1.5f64;
        let mut g = W::squeezed_vacuum_width(xi)
            .unwrap()
            .tensor(&W::coherent(c(0.4, -0.3)));
        g.apply_sum_gate(0, 1, t);

        let fs = FockState::<f64>::squeezed_vacuum_width(xi, 30);
        let fc = FockState::<f64>::coherent(c(0.4, -0.3), 30);
        let mut f = fs.tensor(&fc);
        let h = P::x(2, 0).mul_op(&P::p(2, 1));
        f.evolve_poly(&h, t, 1e-12).unwrap();
        for betas in [
            [c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.25, -0.1), c(-0.2, 0.35)],
        ] {
            let want = fock_probe(&f, &betas);
            let got = g.project_coherent(&betas).unwrap().to_complex();
            assert!((want - got).norm() < 1e-8, "{want} vs {got}");
        }
        // Symplectic action on means: X₁ += tX₀, P₀ −= tP₁.
        let (mu, _) = g.mean_and_covariance();
        let x0 = 0.0;
        let x1 = 2.0f64.sqrt() * 0.4;
        let p1 = 2.0f64.sqrt() * (-0.3);
        assert!((mu[1] - (x1 + t * x0)).abs() < 1e-12);
        assert!((mu[2] - (0.0 - t * p1)).abs() < 1e-12);
    }

    #[test]
    fn interferometer_factorization_exact() {
        // A 3×3 unitary from a Hermitian generator, reassembled from
        // Givens steps: the two passives must agree including phase.
        let h = nd::array![
            [c(0.20, 0.0), c(0.11, 0.31), c(-0.24, 0.05)],
            [c(0.11, -0.31), c(-0.40, 0.0), c(0.17, -0.12)],
            [c(-0.24, -0.05), c(0.17, 0.12), c(0.33, 0.0)]
        ];
        let v = linalg::expm(&h.mapv(|z| z * c(0.0, -1.0))).unwrap();
        let steps = passive_to_interferometer(&v).unwrap();
        // Matrix check: product of step matrices equals V.
        let mut prod = nd::Array2::<C64>::eye(3);
        for s in &steps {
            prod = s.mode_matrix(3).dot(&prod);
        }
        let defect: f64 = (&prod - &v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(defect < 1e-10, "defect {defect}");
        // State check: stepwise application equals one-shot passive.
        let alphas = [c(0.4, -0.2), c(-0.1, 0.3), c(0.25, 0.15)];
        let mut one_shot = W::coherent_multi(&alphas);
        one_shot.apply_passive(&v).unwrap();
        let mut stepped = W::coherent_multi(&alphas);
        for s in &steps {
            stepped.apply_passive(&s.mode_matrix(3)).unwrap();
        }
        let ov = one_shot.overlap(&stepped).unwrap().to_complex();
        assert!((ov - c(1.0, 0.0)).norm() < 1e-9, "{ov}");
    }

    #[test]
    fn euler_decomposition_reassembles() {
        // Compose a non-trivial symplectic from parts, decompose, and
        // verify the matrix identity S = S_L · Z · S_R.
        let n = 2usize;
        let v = {
            let h = nd::array![[c(0.0, 0.0), c(0.4, 0.1)], [c(0.4, -0.1), c(0.2, 0.0)]];
            linalg::expm(&h.mapv(|z| z * c(0.0, -1.0))).unwrap()
        };
        let sv = passive_symplectic(&v);
        let mut s = sum_gate_symplectic(n, 0, 1, 0.7).dot(&sv);
        // Mix in single-mode squeezing.
        let mut zmat = nd::Array2::<f64>::eye(2 * n);
        zmat[(0, 0)] = 0.6f64.exp();
        zmat[(n, n)] = (-0.6f64).exp();
        s = s.dot(&zmat);
        assert!(is_symplectic(&s, 1e-10));

        let f = euler_decompose(&s).unwrap();
        let sl = passive_symplectic(&f.v_left);
        let sr = passive_symplectic(&f.v_right);
        let mut z = nd::Array2::<f64>::eye(2 * n);
        for (j, &r) in f.squeezes.iter().enumerate() {
            z[(j, j)] = (-r).exp();
            z[(n + j, n + j)] = r.exp();
        }
        let rebuilt = sl.dot(&z).dot(&sr);
        let defect: f64 = (&rebuilt - &s).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(defect < 1e-9, "defect {defect}");
    }

    #[test]
    fn apply_symplectic_shape_and_norm() {
        let n = 2usize;
        let s = {
            let v = {
                let h = nd::array![[c(0.1, 0.0), c(0.2, -0.3)], [c(0.2, 0.3), c(-0.1, 0.0)]];
                linalg::expm(&h.mapv(|z| z * c(0.0, -1.0))).unwrap()
            };
            let mut zmat = nd::Array2::<f64>::eye(2 * n);
            zmat[(1, 1)] = 0.5f64.exp();
            zmat[(n + 1, n + 1)] = (-0.5f64).exp();
            passive_symplectic(&v).dot(&zmat).dot(&sum_gate_symplectic(n, 1, 0, -0.4))
        };
        let d = nd::array![0.3, -0.2, 0.1, 0.5];
        let mut g = W::vacuum(n);
        g.apply_symplectic(&s, &d).unwrap();
        let (mu, gamma) = g.mean_and_covariance();
        // μ = S·0 + d, Γ = S(I/2)Sᵀ.
        for i in 0..2 * n {
            assert!((mu[i] - d[i]).abs() < 1e-9);
        }
        let expect = s.dot(&s.t()).mapv(|x| x / 2.0);
        for i in 0..2 * n {
            for j in 0..2 * n {
                assert!((gamma[(i, j)] - expect[(i, j)]).abs() < 1e-9);
            }
        }
        // Norm stays exactly one.
        let nrm = g.overlap(&g).unwrap().to_complex();
        assert!((nrm - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn condition_on_x_matches_fock_oracle() {
        // State: SUM(1) on (S_ξ ⊗ vacuum); condition mode 0 at q.
        let xi = 1.6f64;
        let q = 0.4f64;
        let mut g = W::squeezed_vacuum_width(xi).unwrap().tensor(&W::vacuum(1));
        g.apply_sum_gate(0, 1, 1.0);
        let (a_branch, cond) = g.condition_on_x(0, q).unwrap();

        // Fock oracle on a 46×46 box: ψ(q, x₁) via Hermite functions.
        let cut = 45u32;
        let fs = FockState::<f64>::squeezed_vacuum_width(xi, cut);
        let f0 = fs.tensor(&FockState::<f64>::vacuum(&[cut]));
        let mut f = f0;
        f.evolve_poly(&P::x(2, 0).mul_op(&P::p(2, 1)), 1.0, 1e-12)
            .unwrap();
        // Evaluate the conditional wavefunction on a grid in x₁.
        let h_q = hermite_functions(cut as usize, q);
        let npts = 1601usize;
        let (lo, hi) = (-8.0f64, 8.0f64);
        let dx = (hi - lo) / (npts - 1) as f64;
        let mut dens = vec![0.0f64; npts];
        let mut xmean = 0.0f64;
        let mut x2 = 0.0f64;
        for (k, d) in dens.iter_mut().enumerate() {
            let x1 = lo + k as f64 * dx;
            let h_x = hermite_functions(cut as usize, x1);
            let mut amp = c(0.0, 0.0);
            for n0 in 0..=cut as usize {
                for n1 in 0..=cut as usize {
                    let a = f.amp(&[n0 as u32, n1 as u32]);
                    if a.norm_sqr() > 1e-40 {
                        amp += a * h_q[n0] * h_x[n1];
                    }
                }
            }
            *d = amp.norm_sqr();
        }
        let simpson_w = |k: usize| {
            if k == 0 || k == npts - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut p_q = 0.0f64;
        for k in 0..npts {
            let x1 = lo + k as f64 * dx;
            let w = simpson_w(k) * dx / 3.0;
            p_q += w * dens[k];
            xmean += w * x1 * dens[k];
            x2 += w * x1 * x1 * dens[k];
        }
        xmean /= p_q;
        x2 /= p_q;
        let var = x2 - xmean * xmean;

        // Branch amplitude squared = homodyne density = oracle p(q).
        let a2 = (a_branch.mag()).powi(2);
        assert!((a2 - p_q).abs() < 1e-6 * p_q.max(1e-3), "{a2} vs {p_q}");
        assert!((g.homodyne_density(0, q) - p_q).abs() < 1e-6 * p_q);
        // Conditional moments.
        let (mu_c, gamma_c) = cond.mean_and_covariance();
        assert!((mu_c[0] - xmean).abs() < 1e-6, "{} vs {xmean}", mu_c[0]);
        assert!((gamma_c[(0, 0)] - var).abs() < 1e-6, "{} vs {var}", gamma_c[(0, 0)]);
    }

    #[test]
    fn partial_project_consistent_with_overlap() {
        // ⟨φ_B|ψ⟩ then ⟨w_A|·⟩ must equal the full overlap ⟨w_A ⊗ φ_B|ψ⟩.
        let mut psi = W::squeezed_vacuum_width(1.4)
            .unwrap()
            .tensor(&W::coherent(c(0.3, 0.5)));
        psi.apply_sum_gate(0, 1, 0.6);
        let bra_b = W::coherent(c(-0.2, 0.1));
        let (a, red) = psi.partial_project(&[1], &bra_b).unwrap();
        let bra_a = W::squeezed_vacuum(0.3);
        let part = bra_a.overlap(&red).unwrap().mul(a);
        let full = bra_a.tensor(&bra_b).overlap(&psi).unwrap();
        assert!(
            (part.to_complex() - full.to_complex()).norm() < 1e-10,
            "{:?} vs {:?}",
            part.to_complex(),
            full.to_complex()
        );
    }

    #[test]
    fn desc_roundtrip_preserves_phase() {
        let mut psi = W::vacuum(2);
        psi.squeeze(0, 0.5);
        psi.squeeze(1, -0.3);
        let v = {
            let h = nd::array![[c(0.0, 0.0), c(0.3, -0.1)], [c(0.3, 0.1), c(0.1, 0.0)]];
            linalg::expm(&h.mapv(|z| z * c(0.0, -1.0))).unwrap()
        };
        psi.apply_passive(&v).unwrap();
        psi.apply_sum_gate(1, 0, 0.45);
        psi.displace(&[0.2, -0.4], &[0.1, 0.3]);

        let desc = psi.to_desc().unwrap();
        let rebuilt = W::from_desc(&desc).unwrap();
        let ov = rebuilt.overlap(&psi).unwrap().to_complex();
        assert!((ov - c(1.0, 0.0)).norm() < 1e-8, "{ov}");
    }

    #[test]
    fn from_desc_rejects_mixed_covariance() {
        let psi = W::vacuum(1);
        let mut desc = psi.to_desc().unwrap();
        // Thermal-ish covariance: still symmetric positive, not pure.
        desc.gamma[(0, 0)] = 1.3;
        desc.gamma[(1, 1)] = 1.3;
        assert!(matches!(
            W::from_desc(&desc),
            Err(CvError::Certificate(_))
        ));
    }

    #[test]
    fn gaussian_sum_inner_and_prune() {
        // Cat-like sum: N² = 2 + 2Re⟨−α|α⟩.
        let alpha = c(0.9, 0.0);
        let mut s = GaussianSum::<f64>::new(1);
        s.push(LogComplex::one(), W::coherent(alpha));
        s.push(LogComplex::one(), W::coherent(-alpha));
        let n2 = s.norm_sq().unwrap();
        let expect = 2.0 + 2.0 * (-2.0 * alpha.norm_sqr()).exp();
        assert!((n2 - expect).abs() < 1e-12, "{n2} vs {expect}");
        // Overlap with vacuum: 2·e^{−|α|²/2}.
        let ov = s.overlap_with(&W::vacuum(1)).unwrap().to_complex();
        assert!((ov.re - 2.0 * (-alpha.norm_sqr() / 2.0).exp()).abs() < 1e-12);
        // Prune drops nothing above floor, everything below.
        let mut s2 = s.clone();
        let dropped = s2.prune(1e-3);
        assert_eq!(s2.len(), 2);
        assert_eq!(dropped, 0.0);
        s2.push(LogComplex::from_polar((1e-9f64).ln(), 0.2), W::vacuum(1));
        let dropped2 = s2.prune(1e-6);
        assert_eq!(s2.len(), 2);
        assert!((dropped2 - 1e-9).abs() < 1e-22);
    }

    #[test]
    fn apply_gaussian_desc_level() {
        // Identity leaves the description fixed, r included.
        let psi = W::coherent(c(0.3, -0.2));
        let desc = psi.to_desc().unwrap();
        let out = apply_gaussian(&desc, &SymplecticGate::identity(1)).unwrap();
        assert!((out.r.to_complex() - desc.r.to_complex()).norm() < 1e-9);
        // Squeezing gate S = diag(1/ξ, ξ) on vacuum: X-variance ½ → ½ξ⁻².
        let xi = 1.7f64;
        let s = nd::array![[1.0 / xi, 0.0], [0.0, xi]];
        let gate = SymplecticGate::new(s, nd::array![0.0, 0.0]).unwrap();
        let out = apply_gaussian(&W::vacuum(1).to_desc().unwrap(), &gate).unwrap();
        assert!((out.gamma[(0, 0)] - 0.5 / (xi * xi)).abs() < 1e-10);
        // Rotation gate mixes X into P on the mean.
        let mut disp = W::vacuum(1);
        disp.displace(&[1.0], &[0.0]);
        let th = 0.6f64;
        let rot = SymplecticGate::rotation(1, 0, th);
        let out = apply_gaussian(&disp.to_desc().unwrap(), &rot).unwrap();
        assert!((out.mu[0] - th.cos()).abs() < 1e-10);
        assert!((out.mu[1] + th.sin()).abs() < 1e-10);
        // Non-symplectic S rejected.
        let bad = nd::array![[2.0, 0.0], [0.0, 2.0]];
        assert!(SymplecticGate::new(bad, nd::array![0.0, 0.0]).is_err());
    }

    #[test]
    fn blocksqueezing_reference_amplitude() {
        // Vacuum, z = (0.3, 0.7): ⟨N_j⟩ = sinh² z_j and
        // r' = ∏ 1/√cosh z_j, checked against the Fock engine.
        let z = [0.3f64, 0.7];
        let desc0 = W::vacuum(2).to_desc().unwrap();
        let out = blocksqueezing(&desc0, &z).unwrap();
        for (j, &zj) in z.iter().enumerate() {
            let nj = (out.gamma[(j, j)] + out.gamma[(2 + j, 2 + j)] - 1.0) / 2.0;
            assert!((nj - zj.sinh().powi(2)).abs() < 1e-10);
        }
        let expect_r = 1.0 / (z[0].cosh() * z[1].cosh()).sqrt();
        assert!((out.r.to_complex() - c(expect_r, 0.0)).norm() < 1e-10);
        let f = FockState::<f64>::squeezed_vacuum(z[0], 40)
            .tensor(&FockState::<f64>::squeezed_vacuum(z[1], 40));
        let oracle = FockState::<f64>::vacuum(&[40, 40]).inner(&f);
        assert!((out.r.to_complex() - oracle).norm() < 1e-8);
    }

    #[test]
    fn homodyne_postselect_desc_level() {
        // Uncorrelated vacuum mode at q=0: density 1/√π, partner fixed.
        let psi = W::coherent(c(0.4, 0.1)).tensor(&W::vacuum(1));
        let desc = psi.to_desc().unwrap();
        let (red, dens, _phase) = homodyne_postselect(&desc, 1, 0.0).unwrap();
        assert!((dens - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let partner = W::coherent(c(0.4, 0.1)).to_desc().unwrap();
        let ov = overlap_desc(&red, &partner).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-9);

        // TMSV: condition mode 0 and check the Schur-complement moments.
        let r = 0.5f64;
        let q = 0.4f64;
        let mut tm = W::vacuum(2);
        tm.squeeze(0, r);
        tm.squeeze(1, -r);
        let bs = nd::array![
            [
                c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                c(-std::f64::consts::FRAC_1_SQRT_2, 0.0)
            ],
            [
                c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                c(std::f64::consts::FRAC_1_SQRT_2, 0.0)
            ]
        ];
        tm.apply_passive(&bs).unwrap();
        let (mu0, g0) = tm.mean_and_covariance();
        let (red, dens, _) = homodyne_postselect(&tm.to_desc().unwrap(), 0, q).unwrap();
        // Conditional X-covariance: Schur complement onto {X₂,P₂}.
        let sxx = g0[(0, 0)];
        let idx = [1usize, 3usize]; // X₂, P₂ in the (X₁,X₂,P₁,P₂) ordering
        let cond_mean: Vec<f64> = idx
            .iter()
            .map(|&i| mu0[i] + g0[(i, 0)] / sxx * (q - mu0[0]))
            .collect();
        assert!((red.mu[0] - cond_mean[0]).abs() < 1e-9);
        assert!((red.mu[1] - cond_mean[1]).abs() < 1e-9);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                let want = g0[(ia, ib)] - g0[(ia, 0)] * g0[(0, ib)] / sxx;
                assert!((red.gamma[(a, b)] - want).abs() < 1e-9);
            }
        }
        // Density is the X₁ marginal at q and sits below the marginal
        // maximum 1/√(2π σ_xx).
        let pdf = (-(q - mu0[0]) * (q - mu0[0]) / (2.0 * sxx)).exp()
            / (2.0 * std::f64::consts::PI * sxx).sqrt();
        assert!((dens - pdf).abs() < 1e-12);
        let norm_bound = (1.0 / (2.0 * sxx)).sqrt() / std::f64::consts::PI.sqrt();
        assert!(dens <= norm_bound + 1e-12);
    }

    #[test]
    fn sandwich_closed_forms() {
        // All-vacuum: 1. Coherent dyad on vacuum: e^{−|α|²}.
        let v1 = W::vacuum(1).to_desc().unwrap();
        let s = sandwich(&v1, &v1, &v1, &v1).unwrap();
        assert!((s - c(1.0, 0.0)).norm() < 1e-12);
        let alpha = c(0.6, -0.3);
        let coh = W::coherent(alpha).to_desc().unwrap();
        let s = sandwich(&v1, &v1, &coh, &coh).unwrap();
        assert!((s - c((-alpha.norm_sqr()).exp(), 0.0)).norm() < 1e-12);
        // Two-mode: ⟨b|(|k⟩⟨br|⊗I)|a⟩ against explicit factorization
        // for product states a = a₀⊗a₁, b = b₀⊗b₁:
        // = ⟨b₀|k⟩⟨br|a₀⟩·⟨b₁|a₁⟩.
        let a0 = W::coherent(c(0.2, 0.3));
        let a1 = W::squeezed_vacuum(0.4);
        let b0 = W::coherent(c(-0.1, 0.2));
        let b1 = W::coherent(c(0.5, 0.0));
        let k = W::squeezed_vacuum(-0.2);
        let br = W::coherent(c(0.3, -0.4));
        let got = sandwich(
            &a0.tensor(&a1).to_desc().unwrap(),
            &b0.tensor(&b1).to_desc().unwrap(),
            &k.to_desc().unwrap(),
            &br.to_desc().unwrap(),
        )
        .unwrap();
        let want = b0.overlap(&k).unwrap().to_complex()
            * br.overlap(&a0).unwrap().to_complex()
            * b1.overlap(&a1).unwrap().to_complex();
        assert!((got - want).norm() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn canonical_desc_examples() {
        // Vacuum: r = 1.
        let d = canonical_desc(
            &nd::Array2::<f64>::eye(2).mapv(|x| x * 0.5),
            &nd::Array1::zeros(2),
        )
        .unwrap();
        assert!((d.r.to_complex() - c(1.0, 0.0)).norm() < 1e-10);
        // Squeezed: Γ = diag(e^{−2z}, e^{2z})/2 → r = 1/√cosh z.
        let z = 0.8f64;
        let gamma = nd::array![[(-2.0 * z).exp() / 2.0, 0.0], [0.0, (2.0 * z).exp() / 2.0]];
        let d = canonical_desc(&gamma, &nd::Array1::zeros(2)).unwrap();
        assert!((d.r.to_complex() - c(1.0 / z.cosh().sqrt(), 0.0)).norm() < 1e-9);
        // Mixed covariance rejected.
        let bad = nd::Array2::<f64>::eye(2);
        assert!(matches!(
            canonical_desc(&bad, &nd::Array1::zeros(2)),
            Err(CvError::Certificate(_))
        ));
    }

    #[test]
    fn overlap_scalar_matches_general_overlap() {
        // Random-ish single-mode pairs: squeezed, displaced, chirped.
        let mut st = 0x2545f4914f6cdd1du64;
        let mut next = || {
            st ^= st << 13;
            st ^= st >> 7;
            st ^= st << 17;
            (st >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..40 {
            let mk = |n: &mut dyn FnMut() -> f64| {
                let k = nd::array![[C64::new(0.3 + 2.0 * n().abs(), 1.5 * n())]];
                let j = nd::array![C64::new(2.0 * n(), 2.0 * n())];
                Wavepacket::from_quadratic(&k, &j, LogComplex::from_polar(0.0, n()))
                    .unwrap()
                    .1
            };
            let a = mk(&mut next);
            let b = mk(&mut next);
            let slow = a.overlap(&b).unwrap().to_complex();
            let fast = a.overlap_scalar(&b).to_complex();
            assert!((slow - fast).norm() <= 1e-12 * (1.0 + slow.norm()));
        }
    }

    #[test]
    fn quadratic_phase_is_pointwise_chirp() {
        // e^{irx²}ψ must equal the wavepacket rebuilt from the chirped
        // quadratic data, including the exact global phase.
        let k = nd::array![[c(1.4, -0.6), c(0.2, 0.1)], [c(0.2, 0.1), c(2.0, 0.9)]];
        let j = nd::array![c(0.5, -0.3), c(-1.1, 0.8)];
        let (_, mut w) = Wavepacket::from_quadratic(&k, &j, LogComplex::one()).unwrap();
        let r = 0.73;
        let mut chirped_k = k.clone();
        chirped_k[(1, 1)] -= c(0.0, 2.0 * r);
        let (a0, w0) = Wavepacket::from_quadratic(&k, &j, LogComplex::one()).unwrap();
        let (a1, w1) = Wavepacket::from_quadratic(&chirped_k, &j, LogComplex::one()).unwrap();
        w.quadratic_phase(1, r);
        // Same raw function: a0·(chirp∘w0) = a1·w1, and |a0| = |a1|.
        assert!((a0.log_mag - a1.log_mag).abs() < 1e-12);
        let ov = w.overlap(&w1).unwrap().to_complex();
        let expect = a1.div(a0).to_complex();
        assert!((ov - expect).norm() < 1e-11, "{ov} vs {expect}");
        assert!((ov.norm() - 1.0).abs() < 1e-11);
        // Norm-preserving: amp stays unit-modulus.
        assert!((w.amplitude().mag() - 1.0).abs() < 1e-12);
        let _ = w0;
    }

    #[test]
    fn purity_preserved_over_many_gates() {
        // Deterministic pseudo-random gate chain; purity det(2Γ) = 1
        // and unit norm must hold throughout.
        let mut st = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            st ^= st << 13;
            st ^= st >> 7;
            st ^= st << 17;
            (st >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut g = W::vacuum(2);
        for step in 0..1000 {
            match step % 4 {
                0 => g.squeeze(step % 2, 0.5 * next()),
                1 => g.apply_sum_gate((step / 2) % 2, 1 - (step / 2) % 2, next()),
                2 => {
                    let th = next();
                    let v = nd::array![
                        [c(th.cos(), 0.0), c(-th.sin(), 0.0)],
                        [c(th.sin(), 0.0), c(th.cos(), 0.0)]
                    ];
                    g.apply_passive(&v).unwrap();
                }
                _ => g.displace(&[next(), next()], &[next(), next()]),
            }
        }
        let (_, gamma) = g.mean_and_covariance();
        let two_gamma = gamma.mapv(|x| 2.0 * x);
        let det = linalg::det(&two_gamma);
        assert!((det - 1.0).abs() < 1e-8, "det(2Γ) = {det}");
        let n = g.overlap(&g).unwrap().to_complex();
        assert!((n - c(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn fourier_on_coherent() {
        // F = e^{iπ/4}·U_{V=i}: U_V|α⟩ = |iα⟩ with no extra phase.
        let alpha = c(0.45, -0.35);
        let mut g = W::coherent(alpha);
        let v = nd::array![[c(0.0, 1.0)]];
        g.apply_passive(&v).unwrap();
        let ov = W::coherent(alpha * c(0.0, 1.0)).overlap(&g).unwrap();
        assert!((ov.to_complex() - c(1.0, 0.0)).norm() < 1e-10);
    }
}
