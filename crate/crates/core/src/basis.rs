//! Spherical Bessel / spherical harmonic evaluation and the RBF/SBF/TBF
//! edge-feature encoders.
//!
//! Encoders follow
//!   e_RBF,n(d)      = sqrt(2/c) sin(n pi d / c) / d
//!   e_SBF,ln(d, a)  = sqrt(2 / (c^3 j_{l+1}^2(z_ln))) j_l(z_ln d / c) Y_l^0(a)
//!   e_TBF,lmn(d, theta, phi) = same radial factor times Y_l^m(theta, phi)
//! with an optional polynomial envelope applied to the radial factor.
//! Real spherical harmonics are used throughout.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    /// Cutoff radius c, Angstrom.
    pub cutoff: f64,
    /// Number of radial basis functions N.
    pub num_radial: usize,
    /// Number of spherical orders M (l ranges over 0..M).
    pub num_spherical: usize,
    /// Envelope polynomial exponent p.
    pub envelope_exponent: u32,
    pub envelope_enabled: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            cutoff: 10.0,
            num_radial: 6,
            num_spherical: 7,
            envelope_exponent: 6,
            envelope_enabled: true,
        }
    }
}

impl BasisConfig {
    pub fn rbf_len(&self) -> usize {
        self.num_radial
    }
    pub fn sbf_len(&self) -> usize {
        self.num_radial * self.num_spherical
    }
    pub fn tbf_len(&self) -> usize {
        self.num_radial * self.num_spherical * self.num_spherical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisError {
    /// Distance beyond the cutoff radius.
    OutOfCutoff,
}

impl core::fmt::Display for BasisError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "distance beyond cutoff")
    }
}

/// sin(x)/x with a series branch below 1e-4 to avoid cancellation.
fn sinc(x: f64) -> f64 {
    if fmath::abs(x) < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        fmath::sin(x) / x
    }
}

/// Spherical Bessel function j_l(x) for x >= 0.
///
/// Uses the closed forms for l = 0, 1; upward recurrence when x > l (stable
/// there); downward Miller recurrence normalized by j_0 otherwise. Small
/// arguments take the leading-order series x^l / (2l+1)!!.
pub fn spherical_bessel(l: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if l == 0 {
        return sinc(x);
    }
    if x < 1e-6 {
        // j_l(x) ~ x^l / (2l+1)!! for small x.
        let mut dfact = 1.0;
        let mut k = 1u32;
        while k <= 2 * l + 1 {
            dfact *= k as f64;
            k += 2;
        }
        return fmath::powi(x, l as i32) / dfact;
    }
    let j0 = sinc(x);
    let j1 = sinc(x) / x - fmath::cos(x) / x;
    if l == 1 {
        return j1;
    }
    if x > l as f64 {
        // Upward: j_{n+1} = (2n+1)/x j_n - j_{n-1}.
        let (mut jm, mut j) = (j0, j1);
        for n in 1..l {
            let next = (2 * n + 1) as f64 / x * j - jm;
            jm = j;
            j = next;
        }
        j
    } else {
        // Downward from well above l, normalized against j_0.
        let start = l + 16 + (x as u32);
        let (mut jp, mut j) = (0.0f64, 1e-30f64);
        let mut out = 0.0;
        for n in (0..=start).rev() {
            let prev = (2 * n + 3) as f64 / x * j - jp;
            jp = j;
            j = prev;
            if n == l {
                out = j;
            }
            // Rescale to dodge overflow on long recurrences.
            if fmath::abs(j) > 1e250 {
                j *= 1e-250;
                jp *= 1e-250;
                out *= 1e-250;
            }
        }
        out * j0 / j
    }
}

/// First `count` positive roots z_{l,1..count} of j_l, each to 1e-12.
///
/// l = 0 roots are exactly n*pi; higher orders are bracketed by the
/// interlacing property z_{l-1,n} < z_{l,n} < z_{l-1,n+1} and bisected.
pub fn bessel_roots(l: u32, count: usize) -> Vec<f64> {
    let mut roots: Vec<f64> = (1..=(count + l as usize)).map(|n| n as f64 * fmath::PI).collect();
    for order in 1..=l {
        let need = count + (l - order) as usize;
        let mut next = Vec::with_capacity(need);
        for n in 0..need {
            let (mut lo, mut hi) = (roots[n], roots[n + 1]);
            let flo = spherical_bessel(order, lo);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fmid = spherical_bessel(order, mid);
                if (fmid >= 0.0) == (flo >= 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            next.push(0.5 * (lo + hi));
        }
        roots = next;
    }
    roots.truncate(count);
    roots
}

/// Associated Legendre P_l^m(x) for m >= 0, without the Condon-Shortley
/// phase folded into the normalization (standard recurrence, includes it).
fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    debug_assert!(m <= l);
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let mut pmm = 1.0;
    if m > 0 {
        let somx2 = fmath::sqrt((1.0 - x) * (1.0 + x));
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = ((2 * ll - 1) as f64 * x * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn factorial_ratio(l: u32, m: u32) -> f64 {
    // (l - m)! / (l + m)!
    let mut r = 1.0;
    for k in (l - m + 1)..=(l + m) {
        r /= k as f64;
    }
    r
}

/// Real spherical harmonic Y_l^m(theta, phi) with theta the azimuth and phi
/// the polar angle:
///   m > 0: sqrt(2) K cos(m theta) P_l^m(cos phi)
///   m = 0:            K            P_l^0(cos phi)
///   m < 0: sqrt(2) K sin(|m| theta) P_l^|m|(cos phi)
/// where K = sqrt((2l+1)/(4 pi) (l-|m|)!/(l+|m|)!).
pub fn spherical_harmonic(l: u32, m: i32, theta: f64, phi: f64) -> f64 {
    debug_assert!(m.unsigned_abs() <= l);
    let ma = m.unsigned_abs();
    let k = fmath::sqrt((2 * l + 1) as f64 / (4.0 * fmath::PI) * factorial_ratio(l, ma));
    let p = assoc_legendre(l, ma, fmath::cos(phi));
    match m.cmp(&0) {
        core::cmp::Ordering::Greater => core::f64::consts::SQRT_2 * k * fmath::cos(ma as f64 * theta) * p,
        core::cmp::Ordering::Equal => k * p,
        core::cmp::Ordering::Less => core::f64::consts::SQRT_2 * k * fmath::sin(ma as f64 * theta) * p,
    }
}

/// Smooth polynomial cutoff: u(x) = 1 - (p+1)(p+2)/2 x^p + p(p+2) x^{p+1}
/// - p(p+1)/2 x^{p+2} for x < 1, else 0.
pub fn envelope(d_scaled: f64, p: u32) -> f64 {
    if d_scaled >= 1.0 {
        return 0.0;
    }
    let pf = p as f64;
    let xp = fmath::powi(d_scaled, p as i32);
    1.0 - (pf + 1.0) * (pf + 2.0) / 2.0 * xp + pf * (pf + 2.0) * xp * d_scaled
        - pf * (pf + 1.0) / 2.0 * xp * d_scaled * d_scaled
}

fn envelope_factor(d: f64, cfg: &BasisConfig) -> f64 {
    if cfg.envelope_enabled {
        envelope(d / cfg.cutoff, cfg.envelope_exponent)
    } else {
        1.0
    }
}

/// Radial Fourier-Bessel encoding of a distance, length N.
pub fn encode_rbf(d: f64, cfg: &BasisConfig) -> Result<Vec<f64>, BasisError> {
    if d > cfg.cutoff {
        return Err(BasisError::OutOfCutoff);
    }
    let c = cfg.cutoff;
    let env = envelope_factor(d, cfg);
    let norm = fmath::sqrt(2.0 / c);
    let out = (1..=cfg.num_radial)
        .map(|n| {
            let k = n as f64 * fmath::PI / c;
            // sin(kd)/d = k * sinc(kd): finite down to d = 0.
            env * norm * k * sinc(k * d)
        })
        .collect();
    Ok(out)
}

/// Precomputed roots and normalization constants for SBF/TBF evaluation.
#[derive(Debug, Clone)]
pub struct SphericalTable {
    /// roots[l][n-1] = z_{l,n}
    roots: Vec<Vec<f64>>,
    /// norm[l][n-1] = sqrt(2 / (c^3 j_{l+1}^2(z_{l,n})))
    norm: Vec<Vec<f64>>,
}

impl SphericalTable {
    pub fn new(cfg: &BasisConfig) -> SphericalTable {
        let mut roots = Vec::with_capacity(cfg.num_spherical);
        let mut norm = Vec::with_capacity(cfg.num_spherical);
        for l in 0..cfg.num_spherical as u32 {
            let r = bessel_roots(l, cfg.num_radial);
            let n = r
                .iter()
                .map(|&z| {
                    let j = spherical_bessel(l + 1, z);
                    fmath::sqrt(2.0 / (fmath::powi(cfg.cutoff, 3) * j * j))
                })
                .collect();
            roots.push(r);
            norm.push(n);
        }
        SphericalTable { roots, norm }
    }

    fn radial(&self, l: usize, n: usize, d: f64, cfg: &BasisConfig) -> f64 {
        let z = self.roots[l][n];
        self.norm[l][n] * spherical_bessel(l as u32, z * d / cfg.cutoff)
    }
}

/// Spherical basis over (distance, one angle), length M*N, layout l-major:
/// index = l*N + (n-1).
pub fn encode_sbf(
    d: f64,
    a: f64,
    cfg: &BasisConfig,
    table: &SphericalTable,
) -> Result<Vec<f64>, BasisError> {
    if d > cfg.cutoff {
        return Err(BasisError::OutOfCutoff);
    }
    let env = envelope_factor(d, cfg);
    let mut out = vec![0.0; cfg.sbf_len()];
    for l in 0..cfg.num_spherical {
        let y = spherical_harmonic(l as u32, 0, 0.0, a);
        for n in 0..cfg.num_radial {
            out[l * cfg.num_radial + n] = env * table.radial(l, n, d, cfg) * y;
        }
    }
    Ok(out)
}

/// Two-angle spherical basis over (distance, azimuth, polar), length N*M^2,
/// layout: index = (l^2 + (m + l)) * N + (n-1).
pub fn encode_tbf(
    d: f64,
    theta: f64,
    phi: f64,
    cfg: &BasisConfig,
    table: &SphericalTable,
) -> Result<Vec<f64>, BasisError> {
    if d > cfg.cutoff {
        return Err(BasisError::OutOfCutoff);
    }
    let env = envelope_factor(d, cfg);
    let mut out = vec![0.0; cfg.tbf_len()];
    for l in 0..cfg.num_spherical {
        let radials: Vec<f64> =
            (0..cfg.num_radial).map(|n| env * table.radial(l, n, d, cfg)).collect();
        for m in -(l as i32)..=(l as i32) {
            let y = spherical_harmonic(l as u32, m, theta, phi);
            let base = (l * l + (m + l as i32) as usize) * cfg.num_radial;
            for n in 0..cfg.num_radial {
                out[base + n] = radials[n] * y;
            }
        }
    }
    Ok(out)
}
