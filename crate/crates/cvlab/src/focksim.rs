//! Truncated Fock-space simulation.
//!
//! [`FockState`] is a dense state vector on a rectangular occupation box
//! `{ |n⟩ : n_m ≤ cutoffs[m] }`, flattened mode-0-fastest. On top of it:
//!
//! * exact constructors (Fock, coherent, squeezed vacuum) and gates
//!   (dense local unitaries, polynomial Hamiltonian evolution via a
//!   Krylov propagator),
//! * [`evolve_adaptive`](FockState::evolve_adaptive) — Trotter-free
//!   evolution under a polynomial Hamiltonian with an *a posteriori*
//!   truncation certificate, doubling the photon cutoff until the
//!   accumulated leakage estimate meets the target,
//! * [`leakage_bound`] — the *a priori* photon-leakage bound for
//!   polynomial Hamiltonians,
//! * amplitude damping: exact Heisenberg-picture maps on normal-ordered
//!   polynomials, and an RK4 + Richardson density-matrix integrator.

use crate::algebra::{strides_for, PolyOp};
use crate::error::{CvError, Result};
use crate::linalg;
use crate::scalar::Real;
use ndarray as nd;
use num_complex::Complex;
use num_traits::Zero;

/// Default cap on the flattened dimension of a Fock box.
pub const DEFAULT_FOCK_DIM_CAP: usize = 1 << 22;

/// Dense state vector on a truncated Fock box.
#[derive(Debug, Clone)]
pub struct FockState<T: Real> {
    cutoffs: Vec<u32>,
    strides: Vec<usize>,
    /// Flat amplitudes, mode-0-fastest; the physical amplitude is
    /// `amps[i] · exp(log_scale)`.
    amps: Vec<Complex<T>>,
    log_scale: T,
}

impl<T: Real> FockState<T> {
    fn empty(cutoffs: &[u32]) -> Self {
        let strides = strides_for(cutoffs);
        let dim: usize = cutoffs.iter().map(|&c| c as usize + 1).product();
        FockState {
            cutoffs: cutoffs.to_vec(),
            strides,
            amps: vec![Complex::zero(); dim],
            log_scale: T::zero(),
        }
    }

    /// The vacuum `|0…0⟩`.
    pub fn vacuum(cutoffs: &[u32]) -> Self {
        let mut s = Self::empty(cutoffs);
        s.amps[0] = Complex::new(T::one(), T::zero());
        s
    }

    /// A Fock basis state `|ns⟩`.
    pub fn fock(cutoffs: &[u32], ns: &[u32]) -> Result<Self> {
        if ns.len() != cutoffs.len() || ns.iter().zip(cutoffs).any(|(&n, &c)| n > c) {
            return Err(CvError::Input("fock: occupation outside box".into()));
        }
        let mut s = Self::empty(cutoffs);
        let idx = s.index_of(ns);
        s.amps[idx] = Complex::new(T::one(), T::zero());
        Ok(s)
    }

    /// Single-mode coherent state `|α⟩` truncated at `cutoff`.
    ///
    /// Amplitudes `c_n = e^{−|α|²/2} αⁿ/√n!`; the truncated tail weight
    /// is whatever the box cannot hold (check [`FockState::norm`]).
    pub fn coherent(alpha: Complex<T>, cutoff: u32) -> Self {
        let mut s = Self::empty(&[cutoff]);
        let pref = (-alpha.norm_sqr() / T::of(2.0)).exp();
        let mut c = Complex::new(pref, T::zero());
        s.amps[0] = c;
        for n in 1..=cutoff as usize {
            c = c * alpha / Complex::new(T::of(n as f64).sqrt(), T::zero());
            s.amps[n] = c;
        }
        s
    }

    /// Single-mode squeezed vacuum `S(r)|0⟩`, `S(r) = exp(r(a²−a†²)/2)`,
    /// truncated at `cutoff`. Even amplitudes
    /// `c_{2n} = (cosh r)^{−1/2}·(−tanh r)ⁿ·√((2n)!)/(2ⁿ n!)`.
    pub fn squeezed_vacuum(r: T, cutoff: u32) -> Self {
        let mut s = Self::empty(&[cutoff]);
        let t = r.tanh();
        let mut c = Complex::new(T::one() / r.cosh().sqrt(), T::zero());
        s.amps[0] = c;
        let mut n = 1u32;
        while 2 * n <= cutoff {
            let two_n = T::of((2 * n) as f64);
            let f = (-t) * (two_n * (two_n - T::one())).sqrt() / two_n;
            c = c * Complex::new(f, T::zero());
            s.amps[2 * n as usize] = c;
            n += 1;
        }
        s
    }

    /// Squeezed vacuum in the width convention: `|S_ξ⟩ = S(−ln ξ)|0⟩`,
    /// position wavefunction `∝ e^{−x²/(2ξ²)}`.
    pub fn squeezed_vacuum_width(xi: T, cutoff: u32) -> Self {
        Self::squeezed_vacuum(-xi.ln(), cutoff)
    }

    /// Tensor product; `self`'s modes come first (and stay fastest).
    pub fn tensor(&self, other: &Self) -> Self {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        let mut out = Self::empty(&cutoffs);
        let da = self.amps.len();
        for (j, &b) in other.amps.iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            for (i, &a) in self.amps.iter().enumerate() {
                out.amps[j * da + i] = a * b;
            }
        }
        out.log_scale = self.log_scale + other.log_scale;
        out
    }

    /// Number of modes.
    pub fn num_modes(&self) -> usize {
        self.cutoffs.len()
    }

    /// Per-mode cutoffs.
    pub fn cutoffs(&self) -> &[u32] {
        &self.cutoffs
    }

    /// Flattened dimension.
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// Flat index of `ns`.
    pub fn index_of(&self, ns: &[u32]) -> usize {
        ns.iter()
            .zip(&self.strides)
            .map(|(&n, &s)| n as usize * s)
            .sum()
    }

    /// Amplitude `⟨ns|ψ⟩` (including the log scale).
    pub fn amp(&self, ns: &[u32]) -> Complex<T> {
        self.amps[self.index_of(ns)] * self.log_scale.exp()
    }

    /// Raw flat amplitudes (excluding the log scale).
    pub fn amps_raw(&self) -> &[Complex<T>] {
        &self.amps
    }

    /// Log of the global scale factored out of the amplitudes.
    pub fn log_scale(&self) -> T {
        self.log_scale
    }

    /// State norm `‖ψ‖` (including the log scale).
    pub fn norm(&self) -> T {
        self.raw_norm() * self.log_scale.exp()
    }

    fn raw_norm(&self) -> T {
        self.amps
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// Normalize to unit norm; returns the prior norm.
    pub fn normalize(&mut self) -> T {
        let n = self.raw_norm();
        let prior = n * self.log_scale.exp();
        if n > T::zero() {
            let inv = T::one() / n;
            for a in &mut self.amps {
                *a = *a * inv;
            }
        }
        self.log_scale = T::zero();
        prior
    }

    /// Multiply the global log-scale (keeps tiny branches exact).
    pub fn scale_log(&mut self, dlog: T) {
        self.log_scale = self.log_scale + dlog;
    }

    /// Inner product `⟨self|other⟩`; boxes must match.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.cutoffs, other.cutoffs, "box mismatch in inner()");
        let mut acc = Complex::zero();
        for (a, b) in self.amps.iter().zip(&other.amps) {
            acc = acc + a.conj() * *b;
        }
        acc * (self.log_scale + other.log_scale).exp()
    }

    /// Add `c · other` into `self` (same box; log scales folded in).
    pub fn add_scaled(&mut self, other: &Self, c: Complex<T>) {
        assert_eq!(self.cutoffs, other.cutoffs, "box mismatch in add_scaled()");
        let f = c * (other.log_scale - self.log_scale).exp();
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a = *a + f * *b;
        }
    }

    /// Iterate occupation vectors in flat order.
    fn for_each_ns(&self, mut f: impl FnMut(usize, &[u32])) {
        let mut ns = vec![0u32; self.cutoffs.len()];
        for idx in 0..self.amps.len() {
            f(idx, &ns);
            for m in 0..ns.len() {
                if ns[m] < self.cutoffs[m] {
                    ns[m] += 1;
                    break;
                }
                ns[m] = 0;
            }
        }
    }

    /// Apply the (normal-ordered) polynomial `op`, compressed to the
    /// box: `ψ ← Π T Π ψ`. Exact whenever the result stays inside.
    pub fn apply_poly(&self, op: &PolyOp<Complex<T>>) -> Self {
        assert_eq!(op.num_modes(), self.num_modes(), "mode count mismatch");
        let mut out = Self::empty(&self.cutoffs);
        out.log_scale = self.log_scale;
        let terms: Vec<_> = op
            .terms()
            .map(|((mu, nu), k)| (mu.clone(), nu.clone(), *k))
            .collect();
        self.for_each_ns(|idx, ns| {
            let src = self.amps[idx];
            if src.is_zero() {
                return;
            }
            'term: for (mu, nu, k) in &terms {
                let mut factor = T::one();
                let mut row = 0usize;
                for m in 0..ns.len() {
                    let n = ns[m];
                    if n < nu[m] {
                        continue 'term;
                    }
                    let down = n - nu[m];
                    let up = down + mu[m];
                    if up > self.cutoffs[m] {
                        continue 'term;
                    }
                    let mut f = T::one();
                    for j in 0..nu[m] {
                        f = f * T::of((n - j) as f64);
                    }
                    for j in 0..mu[m] {
                        f = f * T::of((down + j + 1) as f64);
                    }
                    factor = factor * f.sqrt();
                    row += up as usize * self.strides[m];
                }
                out.amps[row] = out.amps[row] + *k * factor * src;
            }
        });
        out
    }

    /// Expectation `⟨ψ|T|ψ⟩ / ‖ψ‖²` of a polynomial observable
    /// (compressed to the box).
    pub fn expect_poly(&self, op: &PolyOp<Complex<T>>) -> Complex<T> {
        let tv = self.apply_poly(op);
        let n2 = self.norm();
        self.inner(&tv) / (n2 * n2)
    }

    /// Mean photon number of one mode.
    pub fn mean_photon(&self, mode: usize) -> T {
        self.expect_poly(&PolyOp::number(self.num_modes(), mode)).re
    }

    /// Total mean photon number.
    pub fn total_mean_photon(&self) -> T {
        (0..self.num_modes()).map(|m| self.mean_photon(m)).sum()
    }

    /// `(⟨X⟩, ⟨P⟩)` per mode.
    pub fn quadrature_means(&self) -> Vec<(T, T)> {
        (0..self.num_modes())
            .map(|m| {
                let x = self.expect_poly(&PolyOp::x(self.num_modes(), m)).re;
                let p = self.expect_poly(&PolyOp::p(self.num_modes(), m)).re;
                (x, p)
            })
            .collect()
    }

    /// Apply a dense one-mode operator (matrix dim `cutoff+1`).
    pub fn apply_one_mode_matrix(&mut self, mode: usize, u: &nd::Array2<Complex<T>>) {
        let d = self.cutoffs[mode] as usize + 1;
        assert_eq!(u.nrows(), d, "gate dimension mismatch");
        let stride = self.strides[mode];
        let dim = self.amps.len();
        let mut fiber = vec![Complex::zero(); d];
        let block = stride * d;
        let mut base = 0usize;
        while base < dim {
            for off in 0..stride {
                let start = base + off;
                for n in 0..d {
                    fiber[n] = self.amps[start + n * stride];
                }
                for r in 0..d {
                    let mut acc = Complex::zero();
                    for c in 0..d {
                        acc = acc + u[(r, c)] * fiber[c];
                    }
                    self.amps[start + r * stride] = acc;
                }
            }
            base += block;
        }
    }

    /// Apply a dense two-mode operator. The matrix is indexed with
    /// `modes[0]` fastest: `idx = n_{modes[0]} + (c_0+1)·n_{modes[1]}`.
    pub fn apply_two_mode_matrix(
        &mut self,
        modes: (usize, usize),
        u: &nd::Array2<Complex<T>>,
    ) {
        let (ma, mb) = modes;
        assert_ne!(ma, mb, "two-mode gate needs distinct modes");
        let da = self.cutoffs[ma] as usize + 1;
        let db = self.cutoffs[mb] as usize + 1;
        let d = da * db;
        assert_eq!(u.nrows(), d, "gate dimension mismatch");
        let sa = self.strides[ma];
        let sb = self.strides[mb];
        let mut fiber = vec![Complex::zero(); d];
        // Enumerate base indices with n_ma = n_mb = 0 by walking all
        // indices and skipping those with nonzero gate-mode occupation.
        let mut ns = vec![0u32; self.cutoffs.len()];
        let dim = self.amps.len();
        for idx in 0..dim {
            if ns[ma] == 0 && ns[mb] == 0 {
                for nb in 0..db {
                    for na in 0..da {
                        fiber[na + da * nb] = self.amps[idx + na * sa + nb * sb];
                    }
                }
                for r in 0..d {
                    let mut acc = Complex::zero();
                    for c in 0..d {
                        acc = acc + u[(r, c)] * fiber[c];
                    }
                    let (na, nb) = (r % da, r / da);
                    self.amps[idx + na * sa + nb * sb] = acc;
                }
            }
            for m in 0..ns.len() {
                if ns[m] < self.cutoffs[m] {
                    ns[m] += 1;
                    break;
                }
                ns[m] = 0;
            }
        }
    }

    /// Evolve under `e^{−itH}` for a Hermitian polynomial `H`
    /// *compressed to the box* (`H_box = Π H Π`), via dense
    /// exponentiation for small boxes and a Lanczos propagator above.
    ///
    /// The result is exactly `e^{−it·H_box}ψ` up to `tol`; how well
    /// `H_box` represents `H` on ψ is the caller's concern (see
    /// [`FockState::evolve_adaptive`] for certified truncation).
    pub fn evolve_poly(&mut self, h: &PolyOp<Complex<T>>, t: T, tol: T) -> Result<()> {
        check_hermitian(h)?;
        let dim = self.amps.len();
        if dim <= 64 {
            let m = h.to_matrix_capped(&self.cutoffs, dim)?;
            let scaled = m.mat.mapv(|z| z * Complex::new(T::zero(), -t));
            let u = linalg::expm(&scaled)?;
            let v = nd::Array1::from_vec(self.amps.clone());
            let w = u.dot(&v);
            self.amps = w.to_vec();
            return Ok(());
        }
        let v0 = nd::Array1::from_vec(self.amps.clone());
        let this = self.clone();
        let hh = h.clone();
        let matvec = move |x: &nd::Array1<Complex<T>>| -> nd::Array1<Complex<T>> {
            let mut tmp = this.clone();
            tmp.amps = x.to_vec();
            tmp.log_scale = T::zero();
            nd::Array1::from_vec(tmp.apply_poly(&hh).amps)
        };
        let w = linalg::expi_action(&matvec, &v0, t, tol, 220)?;
        self.amps = w.to_vec();
        Ok(())
    }

    /// Weight-preserving projection onto total photon number ≤ `e`;
    /// returns the removed squared weight (relative to the raw norm).
    pub fn project_total_photon(&mut self, e: u32) -> T {
        let mut removed = T::zero();
        let cuts = self.cutoffs.clone();
        let mut ns = vec![0u32; cuts.len()];
        for idx in 0..self.amps.len() {
            let total: u32 = ns.iter().sum();
            if total > e {
                removed = removed + self.amps[idx].norm_sqr();
                self.amps[idx] = Complex::zero();
            }
            for m in 0..ns.len() {
                if ns[m] < cuts[m] {
                    ns[m] += 1;
                    break;
                }
                ns[m] = 0;
            }
        }
        removed
    }

    /// Largest total photon number carried by any nonzero amplitude.
    pub fn support_max_total_photon(&self) -> u32 {
        let mut best = 0u32;
        self.for_each_ns(|idx, ns| {
            if !self.amps[idx].is_zero() {
                best = best.max(ns.iter().sum());
            }
        });
        best
    }

    /// Embed into a larger box (amplitudes copied, rest zero).
    pub fn embed(&self, cutoffs: &[u32]) -> Result<Self> {
        if cutoffs.len() != self.cutoffs.len()
            || cutoffs.iter().zip(&self.cutoffs).any(|(&b, &a)| b < a)
        {
            return Err(CvError::Input("embed: target box smaller".into()));
        }
        let mut out = Self::empty(cutoffs);
        out.log_scale = self.log_scale;
        self.for_each_ns(|idx, ns| {
            let j = out.index_of(ns);
            out.amps[j] = self.amps[idx];
        });
        Ok(out)
    }

    /// Truncate to a smaller box, dropping outside amplitudes.
    pub fn truncate(&self, cutoffs: &[u32]) -> Result<Self> {
        if cutoffs.len() != self.cutoffs.len() {
            return Err(CvError::Input("truncate: mode count mismatch".into()));
        }
        let mut out = Self::empty(cutoffs);
        out.log_scale = self.log_scale;
        self.for_each_ns(|idx, ns| {
            if ns.iter().zip(cutoffs).all(|(&n, &c)| n <= c) {
                let j = out.index_of(ns);
                out.amps[j] = self.amps[idx];
            }
        });
        Ok(out)
    }

    /// Probability of observing `n` photons in `mode`.
    pub fn photon_number_probability(&self, mode: usize, n: u32) -> T {
        if n > self.cutoffs[mode] {
            return T::zero();
        }
        let mut p = T::zero();
        self.for_each_ns(|idx, ns| {
            if ns[mode] == n {
                p = p + self.amps[idx].norm_sqr();
            }
        });
        let total = self.raw_norm();
        p / (total * total)
    }

    /// Post-select `mode` on outcome `n`: returns the outcome
    /// probability and the normalized reduced state on the remaining
    /// modes. Errors on (numerically) zero probability.
    pub fn measure_photon_postselect(&self, mode: usize, n: u32) -> Result<(T, Self)> {
        let p = self.photon_number_probability(mode, n);
        if p <= T::zero() {
            return Err(CvError::Numeric(
                "postselection on zero-probability outcome".into(),
            ));
        }
        let rem_cut: Vec<u32> = self
            .cutoffs
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, &c)| c)
            .collect();
        let mut out = Self::empty(&rem_cut);
        self.for_each_ns(|idx, ns| {
            if ns[mode] == n {
                let rem: Vec<u32> = ns
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != mode)
                    .map(|(_, &v)| v)
                    .collect();
                let j = out.index_of(&rem);
                out.amps[j] = self.amps[idx];
            }
        });
        out.normalize();
        Ok((p, out))
    }

    /// Certified evolution `e^{−iTH}ψ₀` under a Hermitian polynomial
    /// Hamiltonian, with adaptive photon-cutoff doubling.
    ///
    /// For each candidate cutoff `E`, the state is evolved in `R`
    /// slices of length `t = max(1, E)^{−d}` (`d` the polynomial
    /// degree) on the enlarged box `N = E + 8d`, projecting back onto
    /// total photon ≤ `E` after each slice. The certified defect is
    ///
    /// ```text
    /// δ_E = √(1 − ‖Π_E ψ₀‖²) + Σ_{l=1..R} √(‖φ_{l−1}‖² − ‖φ_l‖²)
    /// ```
    ///
    /// (each slice's leaked weight, plus the initial truncation). `E`
    /// doubles until `δ_E ≤ delta` or the box would exceed `dim_cap`.
    /// The returned state is sub-normalized; its norm deficit is part of
    /// the certificate.
    pub fn evolve_adaptive(
        &self,
        h: &PolyOp<Complex<T>>,
        t_total: T,
        delta: T,
        dim_cap: usize,
    ) -> Result<AdaptiveRun<T>> {
        check_hermitian(h)?;
        let d = h.degree().max(1);
        let m = self.num_modes();
        let mut e = self.support_max_total_photon();
        loop {
            let n_box = e + 8 * d;
            let dim = (n_box as usize + 1).pow(m as u32);
            if dim > dim_cap {
                return Err(CvError::DimCap {
                    requested: dim,
                    cap: dim_cap,
                });
            }
            let t_slice_f = (e.max(1) as f64).powi(-(d as i32));
            let t_slice = T::of(t_slice_f);
            let r = (t_total / t_slice).ceil().to_f64_lossy() as usize;
            let r = r.max(1);
            let cuts = vec![n_box; m];
            let mut phi = mixed_rebox(self, &cuts);
            phi.log_scale = T::zero();
            let norm0 = self.raw_norm();
            if norm0 > T::zero() {
                let inv = T::one() / norm0;
                for a in &mut phi.amps {
                    *a = *a * inv;
                }
            }
            phi.project_total_photon(e);
            let n0 = phi.raw_norm();
            // Initial truncation: box re-boxing and the photon-shell
            // projection both show up in 1 − ‖Π_E ψ₀‖².
            let mut delta_acc = (T::one() - n0 * n0).max(T::zero()).sqrt();

            // Propagator for one slice on the N-box.
            let use_dense = phi.amps.len() <= 600;
            let dense_u = if use_dense {
                let hm = h.to_matrix_capped(&cuts, phi.amps.len())?;
                let scaled = hm
                    .mat
                    .mapv(|z| z * Complex::new(T::zero(), -t_slice));
                Some(linalg::expm(&scaled)?)
            } else {
                None
            };
            let actual_last = t_total - t_slice * T::of((r - 1) as f64);
            let dense_u_last = match (&dense_u, r) {
                (Some(_), _) if (actual_last - t_slice).abs() > T::epsilon() => {
                    let hm = h.to_matrix_capped(&cuts, phi.amps.len())?;
                    let scaled = hm
                        .mat
                        .mapv(|z| z * Complex::new(T::zero(), -actual_last));
                    Some(linalg::expm(&scaled)?)
                }
                _ => None,
            };
            // Per-slice propagator error budget for the Krylov path;
            // it is added to the certificate alongside the leakage.
            let slice_tol = (delta / T::of(10.0 * r as f64)).max(T::of(1e-13));
            let mut ok = true;
            for l in 0..r {
                let step_u = if l == r - 1 {
                    dense_u_last.as_ref().or(dense_u.as_ref())
                } else {
                    dense_u.as_ref()
                };
                let dt = if l == r - 1 { actual_last } else { t_slice };
                match step_u {
                    Some(u) => {
                        let v = nd::Array1::from_vec(phi.amps.clone());
                        phi.amps = u.dot(&v).to_vec();
                    }
                    None => {
                        phi.evolve_poly(h, dt, slice_tol)?;
                        delta_acc = delta_acc + slice_tol;
                    }
                }
                // Leaked weight, summed directly over the projected-out
                // amplitudes (a norm² difference would cancel away).
                let removed = phi.project_total_photon(e);
                delta_acc = delta_acc + removed.max(T::zero()).sqrt();
                if delta_acc > delta {
                    ok = false;
                    break;
                }
            }
            if ok && delta_acc <= delta {
                return Ok(AdaptiveRun {
                    state: phi,
                    e_cutoff: e,
                    n_box,
                    slices: r,
                    delta_achieved: delta_acc,
                });
            }
            e = (e * 2).max(2);
        }
    }
}

/// Rebox helper for mixed grow/shrink per mode.
fn mixed_rebox<T: Real>(s: &FockState<T>, cutoffs: &[u32]) -> FockState<T> {
    let mut out = FockState::empty(cutoffs);
    out.log_scale = s.log_scale;
    let mut ns = vec![0u32; s.cutoffs.len()];
    for idx in 0..s.amps.len() {
        if ns.iter().zip(cutoffs).all(|(&n, &c)| n <= c) {
            let j = out.index_of(&ns);
            out.amps[j] = s.amps[idx];
        }
        for m in 0..ns.len() {
            if ns[m] < s.cutoffs[m] {
                ns[m] += 1;
                break;
            }
            ns[m] = 0;
        }
    }
    out
}

/// Result of an adaptive evolution run.
#[derive(Debug, Clone)]
pub struct AdaptiveRun<T: Real> {
    /// Final (sub-normalized) state on the `N = E + 8d` box.
    pub state: FockState<T>,
    /// Certified photon cutoff `E`.
    pub e_cutoff: u32,
    /// Enlarged box size `N = E + 8d`.
    pub n_box: u32,
    /// Number of time slices used.
    pub slices: usize,
    /// The certified truncation defect `δ_E`.
    pub delta_achieved: T,
}

fn check_hermitian<T: Real>(h: &PolyOp<Complex<T>>) -> Result<()> {
    let diff = &h.adjoint() - h;
    let defect: T = diff
        .terms()
        .fold(T::zero(), |acc, (_, k)| acc + k.norm());
    let scale: T = h.terms().fold(T::zero(), |acc, (_, k)| acc + k.norm());
    if defect > T::of(1e-10) * scale.max(T::one()) {
        return Err(CvError::Precondition(
            "Hamiltonian is not Hermitian".into(),
        ));
    }
    Ok(())
}

/// A-priori photon-leakage bound for degree-`d` polynomial evolution.
///
/// For `‖Π_E^⊥ ψ(0)‖ = 0` and evolution time `s` under a Hamiltonian
/// whose anti-normal-ordered coefficient 1-norm is `h_norm`,
///
/// ```text
/// ‖Π_{E+kd}^⊥ e^{−isH} ψ‖ ≤ √( K_d^k · s^k/k! · Π_{j=1..k} (E+jd)^{d/2} )
/// ```
///
/// with `K_d = h_norm`. Computed in log space; returns `+∞` on overflow.
pub fn leakage_bound(e: u32, k: u32, d: u32, s: f64, h_norm: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if s <= 0.0 || h_norm <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let mut log_q = kf * h_norm.ln() + kf * s.ln() - crate::numerics::ln_factorial(k as u64);
    for j in 1..=k {
        log_q += (d as f64 / 2.0) * ((e + j * d) as f64).ln();
    }
    (0.5 * log_q).exp()
}

/// Amplitude-damping input for [`lindblad_step`].
pub enum LindbladInput<T: Real> {
    /// A density matrix on a single-mode box (dim = cutoff+1), evolved
    /// forward (Schrödinger picture) by RK4 with Richardson
    /// extrapolation.
    Density(nd::Array2<Complex<T>>),
    /// A normal-ordered observable, evolved in the Heisenberg picture
    /// by the exact eigenoperator map (pure damping only).
    Observable(PolyOp<Complex<T>>),
}

/// Amplitude-damping output of [`lindblad_step`].
pub enum LindbladOutput<T: Real> {
    /// Evolved density matrix.
    Density(nd::Array2<Complex<T>>),
    /// Evolved observable.
    Observable(PolyOp<Complex<T>>),
}

/// One amplitude-damping evolution, `dρ/dt = −i[H,ρ] + γ D[a]ρ` with
/// `D[a]ρ = aρa† − ½{a†a, ρ}`.
///
/// * `Density`: fourth-order Runge-Kutta with `steps` substeps and a
///   Richardson half-step extrapolation (effective order 5).
/// * `Observable`: requires `hamiltonian = None`; uses the exact
///   identity that normal-ordered monomials are eigenoperators of the
///   adjoint damping semigroup, `E†_t[a†^μ a^ν] = e^{−γt(μ+ν)/2} a†^μ a^ν`.
pub fn lindblad_step<T: Real>(
    input: LindbladInput<T>,
    hamiltonian: Option<&PolyOp<Complex<T>>>,
    gamma: T,
    t: T,
    steps: usize,
) -> Result<LindbladOutput<T>> {
    match input {
        LindbladInput::Observable(op) => {
            if hamiltonian.is_some() {
                return Err(CvError::Unsupported(
                    "exact Heisenberg damping map is only available without a Hamiltonian"
                        .into(),
                ));
            }
            let mut out = PolyOp::zero_op(op.num_modes());
            for ((mu, nu), k) in op.terms() {
                let w: u32 = mu.iter().sum::<u32>() + nu.iter().sum::<u32>();
                let f = (-gamma * t * T::of(w as f64) / T::of(2.0)).exp();
                out.add_term(mu.clone(), nu.clone(), *k * f);
            }
            Ok(LindbladOutput::Observable(out))
        }
        LindbladInput::Density(rho) => {
            let dim = rho.nrows();
            if rho.ncols() != dim {
                return Err(CvError::Input("density matrix not square".into()));
            }
            let cutoff = dim as u32 - 1;
            let hmat = match hamiltonian {
                Some(h) => Some(h.to_matrix_capped(&[cutoff], dim)?.mat),
                None => None,
            };
            let coarse = rk4_lindblad(&rho, hmat.as_ref(), gamma, t, steps);
            let fine = rk4_lindblad(&rho, hmat.as_ref(), gamma, t, steps * 2);
            // Richardson for a 4th-order scheme.
            let out = fine.mapv(|z| z * Complex::new(T::of(16.0 / 15.0), T::zero()))
                - coarse.mapv(|z| z * Complex::new(T::of(1.0 / 15.0), T::zero()));
            Ok(LindbladOutput::Density(out))
        }
    }
}

fn lindblad_rhs<T: Real>(
    rho: &nd::Array2<Complex<T>>,
    h: Option<&nd::Array2<Complex<T>>>,
    gamma: T,
) -> nd::Array2<Complex<T>> {
    let dim = rho.nrows();
    let mut out = nd::Array2::<Complex<T>>::zeros((dim, dim));
    if let Some(h) = h {
        let hr = h.dot(rho);
        let rh = rho.dot(h);
        let mi = Complex::new(T::zero(), -T::one());
        out = out + (hr - rh).mapv(|z| z * mi);
    }
    // a ρ a†: (aρa†)_{mn} = √(m+1)√(n+1) ρ_{m+1,n+1};
    // {a†a, ρ}_{mn} = (m+n) ρ_{mn}.
    for mm in 0..dim {
        for nn in 0..dim {
            let mut v = Complex::zero();
            if mm + 1 < dim && nn + 1 < dim {
                let f = T::of(((mm + 1) * (nn + 1)) as f64).sqrt();
                v = v + rho[(mm + 1, nn + 1)] * f;
            }
            let anti = T::of((mm + nn) as f64) / T::of(2.0);
            v = v - rho[(mm, nn)] * anti;
            out[(mm, nn)] = out[(mm, nn)] + v * gamma;
        }
    }
    out
}

fn rk4_lindblad<T: Real>(
    rho0: &nd::Array2<Complex<T>>,
    h: Option<&nd::Array2<Complex<T>>>,
    gamma: T,
    t: T,
    steps: usize,
) -> nd::Array2<Complex<T>> {
    let steps = steps.max(1);
    let dt = t / T::of(steps as f64);
    let half = Complex::new(dt / T::of(2.0), T::zero());
    let sixth = Complex::new(dt / T::of(6.0), T::zero());
    let two = Complex::new(T::of(2.0), T::zero());
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = lindblad_rhs(&rho, h, gamma);
        let r2 = &rho + &k1.mapv(|z| z * half);
        let k2 = lindblad_rhs(&r2, h, gamma);
        let r3 = &rho + &k2.mapv(|z| z * half);
        let k3 = lindblad_rhs(&r3, h, gamma);
        let r4 = &rho + &k3.mapv(|z| z * Complex::new(dt, T::zero()));
        let k4 = lindblad_rhs(&r4, h, gamma);
        let incr = (k1 + k2.mapv(|z| z * two) + k3.mapv(|z| z * two) + k4)
            .mapv(|z| z * sixth);
        rho = rho + incr;
    }
    rho
}
