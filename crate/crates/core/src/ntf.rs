//! Noise transfer function synthesis.
//!
//! Low-pass NTFs are built from a maximally-flat high-pass pole prototype whose
//! corner is tuned until the out-of-band peak gain meets the Lee bound `gamma`.
//! In-band zeros sit at DC, or at optimized positions that minimize the in-band
//! noise integral. [`make_mux_ntf`] turns a low-pass design into the band-pass
//! NTF used by the two-channel multiplexer.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::quad;

/// Tolerance used when pairing complex conjugate roots.
const CONJ_TOL: f64 = 1e-9;

/// Rational discrete-time transfer function in zero-pole-gain form:
/// `H(z) = gain · ∏(z − zₖ) / ∏(z − pₖ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

impl TransferFunction {
    /// Checks finiteness and conjugate symmetry of the roots.
    pub fn new(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> Result<Self> {
        if !gain.is_finite() {
            return Err(Error::InvalidTransferFunction(format!("gain {gain} is not finite")));
        }
        for (what, roots) in [("zero", &zeros), ("pole", &poles)] {
            if roots.iter().any(|r| !(r.re.is_finite() && r.im.is_finite())) {
                return Err(Error::InvalidTransferFunction(format!("non-finite {what}")));
            }
            if !conjugate_closed(roots) {
                return Err(Error::InvalidTransferFunction(format!(
                    "{what}s do not come in conjugate pairs"
                )));
            }
        }
        Ok(Self { zeros, poles, gain })
    }

    /// Builds an NTF: unit gain, biproper, poles strictly inside the unit circle.
    pub fn ntf(zeros: Vec<Complex64>, poles: Vec<Complex64>) -> Result<Self> {
        let tf = Self::new(zeros, poles, 1.0)?;
        tf.validate_ntf()?;
        Ok(tf)
    }

    pub fn validate_ntf(&self) -> Result<()> {
        if self.gain != 1.0 {
            return Err(Error::InvalidTransferFunction(format!(
                "NTF gain must be 1, got {}",
                self.gain
            )));
        }
        if self.zeros.len() != self.poles.len() {
            return Err(Error::InvalidTransferFunction(format!(
                "NTF must be biproper: {} zeros vs {} poles",
                self.zeros.len(),
                self.poles.len()
            )));
        }
        if let Some(p) = self.poles.iter().find(|p| p.norm() >= 1.0) {
            return Err(Error::InvalidTransferFunction(format!(
                "NTF pole {p} is not strictly inside the unit circle"
            )));
        }
        Ok(())
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn order(&self) -> usize {
        self.zeros.len().max(self.poles.len())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let num: Complex64 = self.zeros.iter().map(|r| z - r).product();
        let den: Complex64 = self.poles.iter().map(|r| z - r).product();
        num / den * self.gain
    }

    /// `|H(e^{j2πf})|` with no check for unit-circle poles.
    pub(crate) fn magnitude_at(&self, fhat: f64) -> f64 {
        self.eval(Complex64::from_polar(1.0, 2.0 * PI * fhat)).norm()
    }

    /// `|H(e^{j2πf})|`; a pole at the evaluation point is reported as degenerate.
    pub fn magnitude(&self, fhat: f64) -> Result<f64> {
        let z = Complex64::from_polar(1.0, 2.0 * PI * fhat);
        if self.poles.iter().any(|p| (z - p).norm() < 1e-12) {
            return Err(Error::PoleOnUnitCircle(fhat));
        }
        Ok(self.eval(z).norm())
    }

    /// Largest magnitude over `[0, 1/2]`: a `grid`-point search refined by
    /// golden-section around the best grid point. Returns `(fhat, magnitude)`.
    pub fn peak_gain(&self, grid: usize) -> (f64, f64) {
        let grid = grid.max(2);
        let step = 0.5 / (grid - 1) as f64;
        let (best_i, _) = (0..grid)
            .map(|i| (i, self.magnitude_at(i as f64 * step)))
            .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let lo = ((best_i as f64 - 1.0) * step).max(0.0);
        let hi = ((best_i as f64 + 1.0) * step).min(0.5);
        golden_max(|f| self.magnitude_at(f), lo, hi)
    }

    /// Numerator coefficients in ascending powers of `z⁻¹`, gain included.
    pub fn numerator(&self) -> Vec<f64> {
        poly_from_roots(&self.zeros)
            .into_iter()
            .map(|c| c * self.gain)
            .collect()
    }

    /// Monic denominator coefficients in ascending powers of `z⁻¹`.
    pub fn denominator(&self) -> Vec<f64> {
        poly_from_roots(&self.poles)
    }

    /// First `len` samples of the impulse response (causal realization).
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut b = self.numerator();
        let mut a = self.denominator();
        // Align both polynomials to the same power of z so the leading terms match.
        let n = b.len().max(a.len());
        b.resize(n, 0.0);
        a.resize(n, 0.0);
        let mut h = vec![0.0; len];
        for i in 0..len {
            let mut acc = if i < b.len() { b[i] } else { 0.0 };
            for k in 1..a.len().min(i + 1) {
                acc -= a[k] * h[i - k];
            }
            h[i] = acc;
        }
        h
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TfDocument {
    zeros: Vec<[f64; 2]>,
    poles: Vec<[f64; 2]>,
    gain: f64,
}

impl Serialize for TransferFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs = |v: &[Complex64]| v.iter().map(|c| [c.re, c.im]).collect();
        TfDocument {
            zeros: pairs(&self.zeros),
            poles: pairs(&self.poles),
            gain: self.gain,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransferFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = TfDocument::deserialize(d)?;
        let roots = |v: Vec<[f64; 2]>| v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        TransferFunction::new(roots(doc.zeros), roots(doc.poles), doc.gain)
            .map_err(serde::de::Error::custom)
    }
}

/// Modulator design parameters for a low-pass NTF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    order: usize,
    osr: f64,
    gamma: f64,
    optimize_zeros: bool,
    lee_limit: f64,
}

impl DesignSpec {
    /// Lee bound on the NTF peak gain for a binary quantizer.
    pub const BINARY_LEE_LIMIT: f64 = 2.0;
    pub const MIN_OSR: f64 = 8.0;

    /// Design for a binary quantizer (`gamma < 2`).
    pub fn new(order: usize, osr: f64, gamma: f64, optimize_zeros: bool) -> Result<Self> {
        Self::with_lee_limit(order, osr, gamma, optimize_zeros, Self::BINARY_LEE_LIMIT)
    }

    /// Design with a caller-supplied Lee bound, e.g. for multi-bit quantizers
    /// or noise-floor studies that start above the binary limit.
    pub fn with_lee_limit(
        order: usize,
        osr: f64,
        gamma: f64,
        optimize_zeros: bool,
        lee_limit: f64,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidSpec("order must be positive".into()));
        }
        if !(osr.is_finite() && osr >= Self::MIN_OSR) {
            return Err(Error::InvalidSpec(format!(
                "osr must be at least {}, got {osr}",
                Self::MIN_OSR
            )));
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must exceed 1, got {gamma}")));
        }
        if gamma >= lee_limit {
            return Err(Error::LeeCriterion {
                gamma,
                limit: lee_limit,
            });
        }
        Ok(Self {
            order,
            osr,
            gamma,
            optimize_zeros,
            lee_limit,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn osr(&self) -> f64 {
        self.osr
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn optimize_zeros(&self) -> bool {
        self.optimize_zeros
    }

    pub fn lee_limit(&self) -> f64 {
        self.lee_limit
    }

    /// Band edge `B/f_Φ = 1/(2·OSR)`.
    pub fn normalized_band(&self) -> f64 {
        0.5 / self.osr
    }

    /// The low-pass design feeding a multiplexed modulator equivalent to this
    /// conventional one: twice the OSR and the square root of the Lee coefficient.
    pub fn mux_baseband(&self) -> Result<Self> {
        Self::with_lee_limit(
            self.order,
            2.0 * self.osr,
            self.gamma.sqrt(),
            self.optimize_zeros,
            self.lee_limit.sqrt(),
        )
    }
}

/// Synthesizes a low-pass (high-pass shaped) NTF meeting `spec`.
pub fn synthesize_ntf_lp(spec: &DesignSpec) -> Result<TransferFunction> {
    let order = spec.order;
    let band_angle = 2.0 * PI * spec.normalized_band();
    let zeros = if spec.optimize_zeros {
        let offsets = optimal_zero_offsets(order, spec.normalized_band());
        zeros_from_offsets(&offsets, band_angle)
    } else {
        vec![Complex64::new(1.0, 0.0); order]
    };

    let fail = |reason: String| Error::NotConverged {
        order,
        osr: spec.osr,
        gamma: spec.gamma,
        reason,
    };
    // Gain at z = −1, where the maximally-flat high-pass peaks. Unlike the
    // grid maximum it grows monotonically with the corner parameter.
    let peak_for = |x: f64| -> f64 {
        let z = Complex64::new(-1.0, 0.0);
        let num: Complex64 = zeros.iter().map(|q| z - q).product();
        let den: Complex64 = prototype_poles(order, x).iter().map(|p| z - p).product();
        (num / den).norm()
    };

    let mut lo = 1e-12;
    let mut hi = 0.3f64.powi(order as i32 - 1).max(1e-6);
    while peak_for(hi) < spec.gamma {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(fail(format!(
                "peak gain cannot reach {} (limit for this order is {:.3})",
                spec.gamma,
                peak_for(1e6)
            )));
        }
    }
    if peak_for(lo) > spec.gamma {
        return Err(fail("peak gain exceeds gamma for every pole placement".into()));
    }
    let mut converged = false;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let peak = peak_for(mid);
        if peak < spec.gamma {
            lo = mid;
        } else {
            hi = mid;
        }
        if (peak / spec.gamma - 1.0).abs() < 1e-10 || hi / lo - 1.0 < 1e-14 {
            converged = true;
            break;
        }
    }
    let x = (lo * hi).sqrt();
    let poles = prototype_poles(order, x);
    let tf = TransferFunction::ntf(zeros, poles)?;
    let peak = tf.peak_gain(1 << 14).1;
    if !converged || (peak / spec.gamma - 1.0).abs() > 0.01 {
        return Err(fail(format!("peak gain settled at {peak:.6}")));
    }
    Ok(tf)
}

/// Poles of the maximally-flat high-pass prototype of `order` with corner
/// parameter `x`, reflected inside the unit circle and conjugate-paired.
fn prototype_poles(order: usize, x: f64) -> Vec<Complex64> {
    let n = order as f64;
    let me2 = -0.5 * x.powf(2.0 / n);
    let mut poles: Vec<Complex64> = (1..=order)
        .map(|k| {
            let w = (2.0 * k as f64 - 1.0) * PI / n;
            let mb2 = Complex64::new(1.0, 0.0) + Complex64::from_polar(me2, w);
            let p = mb2 - (mb2 * mb2 - 1.0).sqrt();
            if p.norm() > 1.0 {
                1.0 / p
            } else {
                p
            }
        })
        .collect();
    make_conjugate_exact(&mut poles);
    poles
}

fn zeros_from_offsets(offsets: &[f64], band_angle: f64) -> Vec<Complex64> {
    let mut zeros = Vec::with_capacity(offsets.len() * 2);
    for &x in offsets {
        if x == 0.0 {
            zeros.push(Complex64::new(1.0, 0.0));
        } else {
            let z = Complex64::from_polar(1.0, x * band_angle);
            zeros.push(z);
            zeros.push(z.conj());
        }
    }
    zeros
}

/// In-band zero positions as fractions of the band edge, one entry per real
/// zero or conjugate pair, ascending. Odd orders keep a zero at DC.
///
/// Positions minimize `∫₀^B̂ ∏|e^{j2πf} − zₖ|² df`, the in-band noise integral
/// with the nearly flat in-band pole factor left out.
pub fn optimal_zero_offsets(order: usize, normalized_band: f64) -> Vec<f64> {
    let pairs = order / 2;
    let odd = order % 2 == 1;
    let band_angle = 2.0 * PI * normalized_band;

    let objective = |xs: &[f64]| -> f64 {
        if xs.iter().any(|&x| !(0.0..=1.5).contains(&x)) {
            return f64::INFINITY;
        }
        // Integrate over the band edge-normalized variable t = f / B̂.
        let integrand = |t: f64| {
            let w = t * band_angle;
            // |e^{jw} − e^{jθ}|² = 4 sin²((w − θ)/2), cancellation-free at small angles.
            let chord2 = |d: f64| {
                let s = (0.5 * d).sin();
                4.0 * s * s
            };
            let mut v = if odd { chord2(w) } else { 1.0 };
            for &x in xs {
                let wz = x * band_angle;
                v *= chord2(w - wz) * chord2(w + wz);
            }
            v
        };
        match quad::integrate(integrand, 0.0, 1.0, 1e-12) {
            Ok(v) if v > 0.0 => v.ln(),
            _ => f64::INFINITY,
        }
    };

    let start: Vec<f64> = (0..pairs)
        .map(|k| (k as f64 + 0.5 + if odd { 0.5 } else { 0.0 }) / (pairs as f64 + 0.5))
        .collect();
    let mut best = nelder_mead(objective, &start, 0.05, 4000, 1e-15);
    // Restart once from the result to shake off a collapsed simplex.
    best = nelder_mead(objective, &best, 0.01, 4000, 1e-16);
    best.sort_by(f64::total_cmp);
    let mut offsets = Vec::with_capacity(pairs + odd as usize);
    if odd {
        offsets.push(0.0);
    }
    offsets.extend(best);
    offsets
}

/// Band-pass NTF for two-way multiplexing: `NTF(z) = L(z)·L(−z)`.
pub fn make_mux_ntf(ntf_lp: &TransferFunction) -> Result<TransferFunction> {
    ntf_lp.validate_ntf()?;
    let mirror = |v: &[Complex64]| -> Vec<Complex64> {
        v.iter().copied().chain(v.iter().map(|r| -r)).collect()
    };
    TransferFunction::ntf(mirror(&ntf_lp.zeros), mirror(&ntf_lp.poles))
}

/// `|tf(e^{j2π·fhat})|`.
pub fn evaluate_magnitude(tf: &TransferFunction, fhat: f64) -> Result<f64> {
    tf.magnitude(fhat)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if b - a < 1e-13 {
            break;
        }
    }
    // The endpoints may beat the interior (peak at DC or Nyquist).
    [(a, f(a)), (b, f(b)), (c, fc), (d, fd)]
        .into_iter()
        .fold((a, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc })
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

fn conjugate_closed(roots: &[Complex64]) -> bool {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let r = roots[i];
        let scale = r.norm().max(1.0);
        if r.im.abs() <= CONJ_TOL * scale {
            used[i] = true;
            continue;
        }
        let mate = (0..roots.len())
            .find(|&j| j != i && !used[j] && (roots[j] - r.conj()).norm() <= CONJ_TOL * scale);
        match mate {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// Snaps near-conjugate pairs to exact conjugates and near-real roots to real.
fn make_conjugate_exact(roots: &mut [Complex64]) {
    let mut done = vec![false; roots.len()];
    for i in 0..roots.len() {
        if done[i] {
            continue;
        }
        let r = roots[i];
        if r.im.abs() <= 1e-12 * r.norm().max(1.0) {
            roots[i] = Complex64::new(r.re, 0.0);
            done[i] = true;
            continue;
        }
        let mate = (0..roots.len())
            .filter(|&j| j != i && !done[j])
            .min_by(|&a, &b| {
                (roots[a] - r.conj())
                    .norm()
                    .total_cmp(&(roots[b] - r.conj()).norm())
            });
        if let Some(j) = mate {
            let avg = 0.5 * (r + roots[j].conj());
            roots[i] = avg;
            roots[j] = avg.conj();
            done[j] = true;
        }
        done[i] = true;
    }
}
