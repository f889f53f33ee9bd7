//! Small numerical utilities shared across the engines.
//!
//! Pairwise (cascade) summation, log-domain complex arithmetic for
//! exponentially scaled amplitudes, Hermite functions, Simpson
//! quadrature, Gaussian tail bounds, and a deterministic parallel
//! reduction whose result is independent of thread count.

use crate::scalar::Real;
use num_complex::Complex;
use rayon::prelude::*;

/// Pairwise summation of a slice (cascade summation).
///
/// Error grows like `O(log n)` in ulps instead of `O(n)`, and the result
/// is a deterministic function of the input order.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + std::ops::Add<Output = T> + num_traits::Zero,
{
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n if n <= 32 => {
            let mut acc = xs[0];
            for x in &xs[1..] {
                acc = acc + *x;
            }
            acc
        }
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// `log(Σ exp(x_i))`, computed stably. Returns `-inf` on an empty slice.
pub fn logsumexp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().cloned().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// A complex number in log-magnitude form: `exp(log_mag) · phase`,
/// with `|phase| = 1` (or `phase = 0` for an exact zero).
///
/// Keeps exponentially small or large amplitudes exact in the exponent;
/// products add exponents and multiply unit phases, so long gate chains
/// never overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex<T: Real> {
    /// Natural log of the magnitude (`-inf` encodes zero).
    pub log_mag: T,
    /// Unit-modulus phase factor (zero iff the value is zero).
    pub phase: Complex<T>,
}

impl<T: Real> LogComplex<T> {
    /// Exact zero.
    pub fn zero() -> Self {
        LogComplex {
            log_mag: T::neg_infinity(),
            phase: Complex::new(T::zero(), T::zero()),
        }
    }

    /// One.
    pub fn one() -> Self {
        LogComplex {
            log_mag: T::zero(),
            phase: Complex::new(T::one(), T::zero()),
        }
    }

    /// From an ordinary complex value.
    pub fn from_complex(z: Complex<T>) -> Self {
        let r = z.norm();
        if r == T::zero() {
            Self::zero()
        } else {
            LogComplex {
                log_mag: r.ln(),
                phase: z / r,
            }
        }
    }

    /// From polar data `exp(log_mag) · e^{i·arg}`.
    pub fn from_polar(log_mag: T, arg: T) -> Self {
        LogComplex {
            log_mag,
            phase: Complex::new(arg.cos(), arg.sin()),
        }
    }

    /// Collapse to an ordinary complex number (may under/overflow).
    pub fn to_complex(self) -> Complex<T> {
        if self.log_mag == T::neg_infinity() {
            Complex::new(T::zero(), T::zero())
        } else {
            self.phase * self.log_mag.exp()
        }
    }

    /// Multiply two log-domain values.
    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let phase = self.phase * other.phase;
        // Renormalize the unit phase to stop drift over long products.
        let n = phase.norm();
        LogComplex {
            log_mag: self.log_mag + other.log_mag + n.ln(),
            phase: phase / n,
        }
    }

    /// Scale by a real log-magnitude increment.
    pub fn scale_log(mut self, dlog: T) -> Self {
        if !self.is_zero() {
            self.log_mag = self.log_mag + dlog;
        }
        self
    }

    /// True for the exact zero.
    pub fn is_zero(&self) -> bool {
        self.log_mag == T::neg_infinity()
    }

    /// Magnitude `exp(log_mag)`.
    pub fn mag(&self) -> T {
        self.log_mag.exp()
    }

    /// Complex conjugate.
    pub fn conj(self) -> Self {
        LogComplex {
            log_mag: self.log_mag,
            phase: self.phase.conj(),
        }
    }

    /// Multiplicative inverse (phase is unit-modulus, so conjugate).
    pub fn inv(self) -> Self {
        LogComplex {
            log_mag: -self.log_mag,
            phase: self.phase.conj(),
        }
    }

    /// Divide two log-domain values.
    pub fn div(self, other: Self) -> Self {
        self.mul(other.inv())
    }

    /// Argument of the phase factor.
    pub fn arg(&self) -> T {
        self.phase.im.atan2(self.phase.re)
    }
}

/// Sum a slice of log-domain complex values stably.
///
/// Factors out the maximal exponent, accumulates the rescaled values by
/// pairwise summation, and re-expresses the total in log form.
pub fn logcomplex_sum<T: Real>(xs: &[LogComplex<T>]) -> LogComplex<T> {
    let m = xs
        .iter()
        .map(|x| x.log_mag)
        .fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return LogComplex::zero();
    }
    let scaled: Vec<Complex<T>> = xs
        .iter()
        .map(|x| {
            if x.is_zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                x.phase * (x.log_mag - m).exp()
            }
        })
        .collect();
    let s = pairwise_sum(&scaled);
    LogComplex::from_complex(s).scale_log(m)
}

/// Hermite functions `h_0(x), …, h_n(x)` (orthonormal on the line,
/// `∫ h_m h_n = δ_{mn}`), via the stable recurrence
/// `h_{k+1} = x·√(2/(k+1))·h_k − √(k/(k+1))·h_{k−1}`.
///
/// Underflows to zero for `x² ≫ 1400`; intended for moderate arguments
/// (oracles and quadrature grids), not asymptotic regimes.
pub fn hermite_functions<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut h = Vec::with_capacity(n + 1);
    let h0 = (-x * x / T::of(2.0)).exp() / T::PI().powf(T::of(0.25));
    h.push(h0);
    if n == 0 {
        return h;
    }
    h.push(x * T::SQRT_2() * h0);
    for k in 1..n {
        let kp1 = T::of((k + 1) as f64);
        let next = x * (T::of(2.0) / kp1).sqrt() * h[k] - (T::of(k as f64) / kp1).sqrt() * h[k - 1];
        h.push(next);
    }
    h
}

/// Composite Simpson rule on `[a, b]` with `n` (even) subintervals.
pub fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, n: usize) -> T {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / T::of(n as f64);
    let mut odd = T::zero();
    let mut even = T::zero();
    for k in 1..n {
        let x = a + h * T::of(k as f64);
        if k % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    (f(a) + f(b) + T::of(4.0) * odd + T::of(2.0) * even) * h / T::of(3.0)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    fn simpson3<T: Real>(fa: T, fm: T, fb: T, h: T) -> T {
        (fa + T::of(4.0) * fm + fb) * h / T::of(6.0)
    }
    fn rec<T: Real>(
        f: &impl Fn(T) -> T,
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: u32,
    ) -> T {
        let m = (a + b) / T::of(2.0);
        let lm = (a + m) / T::of(2.0);
        let rm = (m + b) / T::of(2.0);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson3(fa, flm, fm, m - a);
        let right = simpson3(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= T::of(15.0) * tol {
            left + right + delta / T::of(15.0)
        } else {
            let half = tol / T::of(2.0);
            rec(f, a, m, fa, flm, fm, left, half, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, half, depth - 1)
        }
    }
    let m = (a + b) / T::of(2.0);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson3(fa, fm, fb, b - a);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Upper bound on the standard Gaussian upper tail
/// `Q(z) = P[N(0,1) > z]`, valid for `z ≥ 0`:
/// `Q(z) ≤ min(e^{−z²/2}/2, φ(z)/z)`.
pub fn gauss_tail_upper<T: Real>(z: T) -> T {
    let half_exp = (-z * z / T::of(2.0)).exp() / T::of(2.0);
    if z <= T::zero() {
        return T::one();
    }
    let phi = (-z * z / T::of(2.0)).exp() / (T::of(2.0) * T::PI()).sqrt();
    half_exp.min(phi / z)
}

/// Deterministic parallel map-reduce over `0..n`.
///
/// Splits the index range into fixed-size chunks, maps each chunk to a
/// sequential partial sum (in index order), then combines the partials
/// with a sequential pairwise tree. The result is bit-identical for any
/// thread count, including 1.
pub fn det_par_sum<T, F>(n: usize, chunk: usize, f: F) -> T
where
    T: Send + Copy + std::ops::Add<Output = T> + num_traits::Zero,
    F: Fn(usize) -> T + Sync,
{
    let chunk = chunk.max(1);
    let nchunks = n.div_ceil(chunk);
    let partials: Vec<T> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(n);
            let mut acc = T::zero();
            for i in lo..hi {
                acc = acc + f(i);
            }
            acc
        })
        .collect();
    pairwise_sum(&partials)
}

/// `ln(n!)` via direct accumulation (exact for the small `n` we need,
/// stable for large `n`).
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Binomial coefficient as u128 (panics on overflow; inputs stay small).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}
