//! RIS phase-shift representations and policies.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;

use crate::channel::uniform_phase;
use crate::error::{domain, Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x - TWO_PI * ((x + PI) / TWO_PI).floor();
    // floor can land exactly on the upper edge after rounding
    if w >= PI {
        w - TWO_PI
    } else {
        w
    }
}

/// Phases and amplitudes of a passive RIS, reflection coefficient
/// `η_n·e^{jθ_n}` per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    theta: Vec<f64>,
    eta: Vec<f64>,
}

impl PhaseVector {
    pub fn new(theta: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if theta.len() != eta.len() {
            return Err(Error::LengthMismatch {
                what: "PhaseVector eta",
                expected: theta.len(),
                found: eta.len(),
            });
        }
        for &e in &eta {
            check_amplitude(e)?;
        }
        for &t in &theta {
            if !(-PI..=PI).contains(&t) {
                return Err(domain("PhaseVector", "theta", t, "-pi <= theta <= pi"));
            }
        }
        Ok(Self { theta, eta })
    }

    /// All elements share amplitude `eta`.
    pub fn with_uniform_amplitude(theta: Vec<f64>, eta: f64) -> Result<Self> {
        let n = theta.len();
        Self::new(theta, alloc::vec![eta; n])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn coefficient(&self, n: usize) -> Complex64 {
        Complex64::from_polar(self.eta[n], self.theta[n])
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        (0..self.len()).map(|n| self.coefficient(n)).collect()
    }
}

fn check_amplitude(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(domain("PhaseVector", "eta", eta, "0 < eta <= 1"));
    }
    Ok(())
}

/// How the RIS phases are chosen for a channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePolicy {
    /// Co-phasing every cascaded path with the direct path.
    OptimalContinuous,
    /// Co-phasing rounded to a `bits`-bit uniform grid.
    Quantized { bits: u32 },
    /// i.i.d. uniform phases.
    Random,
    /// No surface; only the direct path.
    NoRis,
}

impl PhasePolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PhasePolicy::Quantized { bits } if bits == 0 || bits > 52 => {
                Err(domain("PhasePolicy", "bits", bits as f64, "1 <= D <= 52"))
            }
            _ => Ok(()),
        }
    }
}

/// Co-phasing angles `θ_n = θ_f − θ_{g_n} − θ_{h_n}`, wrapped into `[-π, π)`.
pub fn optimal_phases(theta_f: f64, theta_g: &[f64], theta_h: &[f64]) -> Result<Vec<f64>> {
    if theta_g.len() != theta_h.len() {
        return Err(Error::LengthMismatch {
            what: "optimal_phases theta_h",
            expected: theta_g.len(),
            found: theta_h.len(),
        });
    }
    Ok(theta_g
        .iter()
        .zip(theta_h)
        .map(|(g, h)| wrap_angle(theta_f - g - h))
        .collect())
}

/// Half-width `τ = π/2^D` of the quantization error.
pub fn quantization_half_width(bits: u32) -> f64 {
    PI / 2f64.powi(bits as i32)
}

/// Nearest point of the grid `{κ·2π/2^D}`. The result lies in `[-π, π]`
/// (`±π` denote the same phase) and is within `π/2^D` of `theta`.
pub fn quantize_phase(theta: f64, bits: u32) -> f64 {
    let step = 2.0 * quantization_half_width(bits);
    let q = (theta / step).round() * step;
    q.clamp(-PI, PI)
}

/// One draw of the quantization-error model `ε ~ U[-τ, τ)`.
pub fn sample_quant_error<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> f64 {
    let tau = quantization_half_width(bits);
    (2.0 * rng.random::<f64>() - 1.0) * tau
}

/// `n` i.i.d. phases, uniform on `[-π, π)`.
pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| uniform_phase(rng)).collect()
}

/// Effective emitter-to-tag channel `f + Σ_n η_n e^{jθ_n} g_n h_n`.
pub fn effective_channel(
    f: Complex64,
    g: &[Complex64],
    h: &[Complex64],
    phases: &PhaseVector,
) -> Result<Complex64> {
    if g.len() != phases.len() || h.len() != phases.len() {
        return Err(Error::LengthMismatch {
            what: "effective_channel g/h",
            expected: phases.len(),
            found: if g.len() != phases.len() {
                g.len()
            } else {
                h.len()
            },
        });
    }
    Ok(g.iter().zip(h).enumerate().fold(f, |acc, (n, (gn, hn))| {
        acc + phases.coefficient(n) * gn * hn
    }))
}
