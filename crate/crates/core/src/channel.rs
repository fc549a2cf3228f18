//! Large-scale path loss and Nakagami-m small-scale fading.

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{domain, Error, Result};
use crate::specfun::lgamma;

/// Smallest distance for which the path-loss model is used.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Shape below which a Nakagami-m law is not defined.
pub const MIN_SHAPE: f64 = 0.5;

/// UMi line-of-sight path loss in dB: `22·log10(d) + 28 + 20·log10(fc/1 GHz)`.
pub fn pathloss_db(distance_m: f64, carrier_hz: f64) -> Result<f64> {
    if !(distance_m >= MIN_DISTANCE_M) || !distance_m.is_finite() {
        return Err(domain("pathloss", "distance", distance_m, "d >= 1 m"));
    }
    if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
        return Err(domain("pathloss", "carrier", carrier_hz, "fc > 0"));
    }
    Ok(22.0 * distance_m.log10() + 28.0 + 20.0 * (carrier_hz / 1e9).log10())
}

/// Linear path-loss scale `ζ = 10^(-PL/10)`.
pub fn pathloss(distance_m: f64, carrier_hz: f64) -> Result<f64> {
    Ok(10f64.powf(-pathloss_db(distance_m, carrier_hz)? / 10.0))
}

/// One fading link: Nakagami shape and large-scale attenuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    m: f64,
    zeta: f64,
    distance: Option<f64>,
    carrier_hz: Option<f64>,
}

impl LinkParams {
    /// Link whose attenuation follows [`pathloss`].
    pub fn new(m: f64, distance_m: f64, carrier_hz: f64) -> Result<Self> {
        check_shape(m)?;
        let zeta = pathloss(distance_m, carrier_hz)?;
        if zeta > 1.0 {
            return Err(domain("LinkParams", "zeta", zeta, "0 < zeta <= 1"));
        }
        Ok(Self {
            m,
            zeta,
            distance: Some(distance_m),
            carrier_hz: Some(carrier_hz),
        })
    }

    /// Link with an explicit linear attenuation `ζ ∈ (0, 1]`.
    pub fn from_zeta(m: f64, zeta: f64) -> Result<Self> {
        check_shape(m)?;
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(domain("LinkParams", "zeta", zeta, "0 < zeta <= 1"));
        }
        Ok(Self {
            m,
            zeta,
            distance: None,
            carrier_hz: None,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Spread `Ω = m·ζ`, equal to `E{α²}`.
    pub fn omega(&self) -> f64 {
        self.m * self.zeta
    }

    pub fn distance(&self) -> Option<f64> {
        self.distance
    }

    pub fn carrier_hz(&self) -> Option<f64> {
        self.carrier_hz
    }

    pub fn moments(&self) -> Moments {
        Moments::nakagami_unchecked(self.m, self.omega())
    }
}

fn check_shape(m: f64) -> Result<()> {
    if !(m >= MIN_SHAPE) || !m.is_finite() {
        return Err(domain("nakagami", "m", m, "m >= 0.5"));
    }
    Ok(())
}

fn check_spread(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(domain("nakagami", "omega", omega, "omega > 0"));
    }
    Ok(())
}

/// First four moments of a nonnegative random variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub raw2: f64,
    pub raw4: f64,
}

impl Moments {
    /// Moments of a Nakagami-m amplitude.
    pub fn nakagami(m: f64, omega: f64) -> Result<Self> {
        check_shape(m)?;
        check_spread(omega)?;
        Ok(Self::nakagami_unchecked(m, omega))
    }

    fn nakagami_unchecked(m: f64, omega: f64) -> Self {
        let mean = raw_moment(m, omega, 1);
        let var = variance(m, omega);
        Self {
            mean,
            var,
            raw2: var + mean * mean,
            raw4: raw_moment(m, omega, 4),
        }
    }
}

/// `E{α^order} = Γ(m + order/2)/Γ(m) · (Ω/m)^(order/2)`.
pub fn nakagami_raw_moment(m: f64, omega: f64, order: u32) -> Result<f64> {
    check_shape(m)?;
    check_spread(omega)?;
    Ok(raw_moment(m, omega, order))
}

fn raw_moment(m: f64, omega: f64, order: u32) -> f64 {
    let half = order as f64 / 2.0;
    (lgamma(m + half) - lgamma(m) + half * (omega / m).ln()).exp()
}

/// `Var{α} = Ω·(1 - (Γ(m+½)/Γ(m))²/m)`.
pub fn nakagami_variance(m: f64, omega: f64) -> Result<f64> {
    check_shape(m)?;
    check_spread(omega)?;
    Ok(variance(m, omega))
}

fn variance(m: f64, omega: f64) -> f64 {
    let ratio = (lgamma(m + 0.5) - lgamma(m)).exp();
    omega * (1.0 - ratio * ratio / m)
}

/// Draws Nakagami-m amplitudes as the square root of `Gamma(m, Ω/m)` variates.
#[derive(Debug, Clone, Copy)]
pub struct NakagamiSampler {
    power: Gamma<f64>,
}

impl NakagamiSampler {
    pub fn new(m: f64, omega: f64) -> Result<Self> {
        check_shape(m)?;
        check_spread(omega)?;
        let power = Gamma::new(m, omega / m).map_err(|_| Error::Domain {
            func: "NakagamiSampler",
            arg: "m",
            value: m,
            expected: "valid gamma parameters",
        })?;
        Ok(Self { power })
    }

    pub fn for_link(link: &LinkParams) -> Self {
        // LinkParams construction already validated (m, Ω).
        Self::new(link.m(), link.omega()).expect("validated link")
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.power.sample(rng).sqrt()
    }

    /// Amplitude and a phase uniform on `[-π, π)`, in that draw order.
    #[inline]
    pub fn sample_polar<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let amp = self.sample(rng);
        let phase = uniform_phase(rng);
        (amp, phase)
    }

    #[inline]
    pub fn sample_complex<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let (amp, phase) = self.sample_polar(rng);
        Complex64::from_polar(amp, phase)
    }
}

/// Uniform angle on `[-π, π)`.
#[inline]
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * 2.0 * PI - PI
}

/// One Nakagami-m amplitude. Builds a sampler per call; reuse a
/// [`NakagamiSampler`] in loops.
pub fn sample_amplitude<R: Rng + ?Sized>(m: f64, omega: f64, rng: &mut R) -> Result<f64> {
    Ok(NakagamiSampler::new(m, omega)?.sample(rng))
}

/// One complex coefficient `α·e^{jθ}` of the link, `θ ~ U[-π, π)`.
pub fn sample_link<R: Rng + ?Sized>(link: &LinkParams, rng: &mut R) -> Complex64 {
    NakagamiSampler::for_link(link).sample_complex(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const GHZ3: f64 = 3e9;

    #[test]
    fn pathloss_reference_points() {
        let pl1 = pathloss_db(1.0, GHZ3).unwrap();
        assert!((pl1 - (28.0 + 20.0 * 3f64.log10())).abs() < 1e-12);
        assert!((pl1 - 37.542).abs() < 1e-3);
        let pl10 = pathloss_db(10.0, GHZ3).unwrap();
        assert!((pl10 - (pl1 + 22.0)).abs() < 1e-12);
        assert!(pathloss(20.0, GHZ3).unwrap() < pathloss(10.0, GHZ3).unwrap());
        assert!(pathloss(10.0, 5e9).unwrap() < pathloss(10.0, GHZ3).unwrap());
        assert!(pathloss(0.5, GHZ3).is_err());
    }

    #[test]
    fn pathloss_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let z = pathloss(1.0 + i as f64 * 0.37, GHZ3).unwrap();
            assert!(z < prev && z > 0.0 && z <= 1.0);
            prev = z;
        }
    }

    #[test]
    fn rayleigh_moments() {
        let mean = nakagami_raw_moment(1.0, 1.0, 1).unwrap();
        assert!((mean - PI.sqrt() / 2.0).abs() < 1e-14);
        let var = nakagami_variance(1.0, 1.0).unwrap();
        assert!((var - (4.0 - PI) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn second_moment_is_spread() {
        for (m, omega) in [(0.5, 2.0), (1.0, 1e-6), (3.0, 0.5), (7.5, 3.0)] {
            let r2 = nakagami_raw_moment(m, omega, 2).unwrap();
            assert!((r2 - omega).abs() < 1e-13 * omega);
            let mean = nakagami_raw_moment(m, omega, 1).unwrap();
            let var = nakagami_variance(m, omega).unwrap();
            assert!((var - (r2 - mean * mean)).abs() < 1e-12 * omega);
        }
    }

    #[test]
    fn shape_three_mean() {
        // Γ(3.5)/Γ(3)·(1/3)^{1/2}, Γ(3.5) = 2.5·1.5·0.5·√π
        let expect = 2.5 * 1.5 * 0.5 * PI.sqrt() / 2.0 / 3f64.sqrt();
        let got = nakagami_raw_moment(3.0, 1.0, 1).unwrap();
        assert!((got - expect).abs() < 1e-14);
        assert!((got - 0.9594).abs() < 1e-4);
    }

    #[test]
    fn moments_struct_is_consistent() {
        let mo = Moments::nakagami(3.0, 0.5).unwrap();
        assert_eq!(mo.raw2, mo.var + mo.mean * mo.mean);
        assert!(mo.raw4 >= mo.raw2 * mo.raw2);
        assert!(Moments::nakagami(0.4, 1.0).is_err());
        assert!(Moments::nakagami(1.0, 0.0).is_err());
    }

    #[test]
    fn sampled_variance_matches() {
        let (m, omega) = (3.0, 0.5);
        let s = NakagamiSampler::new(m, omega).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let a = s.sample(&mut rng);
            s1 += a;
            s2 += a * a;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let expect = nakagami_variance(m, omega).unwrap();
        assert!(((var - expect) / expect).abs() < 0.01, "{var} vs {expect}");
    }

    #[test]
    fn no_fading_limit() {
        let s = NakagamiSampler::new(1e5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: alloc::vec::Vec<f64> = (0..10_000).map(|_| s.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / draws.len() as f64;
        assert!(var < 1e-5);
    }

    #[test]
    fn sampling_is_deterministic() {
        let link = LinkParams::new(3.0, 10.0, GHZ3).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            assert_eq!(sample_link(&link, &mut a), sample_link(&link, &mut b));
        }
        assert_eq!(
            sample_amplitude(1.0, 1.0, &mut a).unwrap(),
            sample_amplitude(1.0, 1.0, &mut b).unwrap()
        );
    }

    #[test]
    fn link_power_and_phase() {
        let link = LinkParams::from_zeta(2.0, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let bins = 16;
        let mut hist = [0usize; 16];
        let mut power = 0.0;
        for _ in 0..n {
            let c = sample_link(&link, &mut rng);
            power += c.norm_sqr();
            let b = ((c.arg() + PI) / (2.0 * PI) * bins as f64) as usize;
            hist[b.min(bins - 1)] += 1;
        }
        let mean_power = power / n as f64;
        assert!((mean_power / link.omega() - 1.0).abs() < 0.01);
        // χ² with 15 dof, 1% critical value 30.58
        let e = n as f64 / bins as f64;
        let chi2: f64 = hist.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 30.58, "chi2 = {chi2}");
    }
}
