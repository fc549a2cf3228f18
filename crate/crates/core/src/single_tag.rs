//! Closed-form analysis of one passive tag powered through a co-phased RIS.
//!
//! The optimal SNR is `γ* = γ̄Λ²` with `Λ = α_u·Y`, `Y = α_f + X` and
//! `X = Σ_n η·α_{g_n}·α_{h_n}`. `Y` and `Λ` are moment-matched to Gamma (the
//! default) or truncated-Gaussian laws, from which every metric follows.

use core::f64::consts::LN_2;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::channel::{LinkParams, Moments};
use crate::error::{domain, Error, Result};
use crate::quad;
use crate::specfun::{self, lgamma, q_function, Q_APPROX};
use crate::units::{dbm_to_watts, thermal_noise_watts};

/// BPSK conditional error `λ·Q(√(νγ))`.
pub const BPSK_LAMBDA: f64 = 1.0;
pub const BPSK_NU: f64 = 2.0;

/// Scenario-wide parameters. Powers are in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Emitter transmit power `P`.
    pub power: f64,
    /// Fraction `β` of incident power the tag reflects.
    pub beta: f64,
    /// Energy-harvesting conversion efficiency `φ`.
    pub phi: f64,
    /// Common RIS amplitude `η`.
    pub eta: f64,
    /// Number of RIS elements; 0 is the no-RIS baseline.
    pub n: usize,
    /// Receiver noise power `σ_z²`.
    pub noise: f64,
    /// Tag activation threshold `P_b`.
    pub p_b: f64,
}

impl Default for SystemParams {
    /// 10 dBm, β = 0.6, φ = 0.8, η = 0.8, N = 100, noise over 10 MHz with a
    /// 10 dB noise figure, P_b = −20 dBm.
    fn default() -> Self {
        Self {
            power: dbm_to_watts(10.0),
            beta: 0.6,
            phi: 0.8,
            eta: 0.8,
            n: 100,
            noise: thermal_noise_watts(-174.0, 10e6, 10.0),
            p_b: dbm_to_watts(-20.0),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(domain("SystemParams", "power", self.power, "P >= 0"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(domain("SystemParams", "beta", self.beta, "0 < beta < 1"));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(domain("SystemParams", "phi", self.phi, "0 < phi <= 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(domain("SystemParams", "eta", self.eta, "0 < eta <= 1"));
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(domain("SystemParams", "noise", self.noise, "noise > 0"));
        }
        if !(self.p_b >= 0.0) || !self.p_b.is_finite() {
            return Err(domain("SystemParams", "p_b", self.p_b, "P_b >= 0"));
        }
        Ok(())
    }

    /// `γ̄ = Pβ/σ_z²`.
    pub fn avg_snr(&self) -> f64 {
        self.power * self.beta / self.noise
    }

    /// Efficiency-adjusted threshold `P_b' = P_b/φ`.
    pub fn p_b_prime(&self) -> f64 {
        self.p_b / self.phi
    }

    pub fn with_power(self, power: f64) -> Self {
        Self { power, ..self }
    }

    pub fn with_elements(self, n: usize) -> Self {
        Self { n, ..self }
    }
}

/// The four links of the single-tag geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleTagLinks {
    /// Emitter to tag.
    pub f: LinkParams,
    /// Tag to reader.
    pub u: LinkParams,
    /// RIS to tag (per element, i.i.d.).
    pub g: LinkParams,
    /// Emitter to RIS (per element, i.i.d.).
    pub h: LinkParams,
}

impl SingleTagLinks {
    /// Links with a common shape `m` and distances `[d_f, d_u, d_g, d_h]`.
    pub fn uniform(m: f64, distances: [f64; 4], carrier_hz: f64) -> Result<Self> {
        Self::with_shapes([m; 4], distances, carrier_hz)
    }

    /// Shapes and distances both ordered `[f, u, g, h]`.
    pub fn with_shapes(m: [f64; 4], d: [f64; 4], carrier_hz: f64) -> Result<Self> {
        Ok(Self {
            f: LinkParams::new(m[0], d[0], carrier_hz)?,
            u: LinkParams::new(m[1], d[1], carrier_hz)?,
            g: LinkParams::new(m[2], d[2], carrier_hz)?,
            h: LinkParams::new(m[3], d[3], carrier_hz)?,
        })
    }
}

/// Gamma law fitted to a mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub k: f64,
    pub lambda: f64,
}

impl GammaFit {
    /// `k = μ²/σ²`, `λ = σ²/μ`.
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        check_fit_inputs("GammaFit", mean, var)?;
        Ok(Self {
            k: mean * mean / var,
            lambda: var / mean,
        })
    }

    pub fn mean(&self) -> f64 {
        self.k * self.lambda
    }

    pub fn var(&self) -> f64 {
        self.k * self.lambda * self.lambda
    }

    /// `E{V^m} = λ^m Γ(k+m)/Γ(k)`.
    pub fn raw_moment(&self, m: f64) -> f64 {
        (m * self.lambda.ln() + lgamma(self.k + m) - lgamma(self.k)).exp()
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if !r.is_finite() {
            return 1.0;
        }
        specfun::incgamma(self.k, r / self.lambda).0
    }

    pub fn ln_pdf(&self, r: f64) -> f64 {
        (self.k - 1.0) * r.ln() - r / self.lambda - lgamma(self.k) - self.k * self.lambda.ln()
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        self.ln_pdf(r).exp()
    }
}

/// Gaussian fitted to a mean and variance, truncated to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncGaussFit {
    pub mu: f64,
    pub var: f64,
    /// Normaliser `Ψ = 1/Q(−μ/σ)`.
    pub psi: f64,
}

impl TruncGaussFit {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        check_fit_inputs("TruncGaussFit", mean, var)?;
        Ok(Self {
            mu: mean,
            var,
            psi: 1.0 / q_function(-mean / var.sqrt()),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.var.sqrt()
    }

    /// `1 − Ψ·Q((r−μ)/σ)` for `r ≥ 0`.
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        (1.0 - self.psi * q_function((r - self.mu) / self.sigma())).clamp(0.0, 1.0)
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let z = (r - self.mu) / self.sigma();
        self.psi * (-z * z / 2.0).exp() / (2.0 * core::f64::consts::PI * self.var).sqrt()
    }
}

fn check_fit_inputs(what: &'static str, mean: f64, var: f64) -> Result<()> {
    if !(mean > 0.0 && var > 0.0) || !mean.is_finite() || !var.is_finite() {
        return Err(Error::Degenerate { what, mean, var });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitKind {
    #[default]
    Gamma,
    TruncGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fit {
    Gamma(GammaFit),
    TruncGaussian(TruncGaussFit),
}

impl Fit {
    pub fn new(kind: FitKind, mean: f64, var: f64) -> Result<Self> {
        Ok(match kind {
            FitKind::Gamma => Fit::Gamma(GammaFit::new(mean, var)?),
            FitKind::TruncGaussian => Fit::TruncGaussian(TruncGaussFit::new(mean, var)?),
        })
    }

    pub fn cdf(&self, r: f64) -> f64 {
        match self {
            Fit::Gamma(g) => g.cdf(r),
            Fit::TruncGaussian(t) => t.cdf(r),
        }
    }

    pub fn pdf(&self, r: f64) -> f64 {
        match self {
            Fit::Gamma(g) => g.pdf(r),
            Fit::TruncGaussian(t) => t.pdf(r),
        }
    }
}

/// First and second moments of `X`, `Y` and `Λ`, plus the link moments
/// they are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeStats {
    pub n: usize,
    pub eta: f64,
    pub f: Moments,
    pub u: Moments,
    pub g: Moments,
    pub h: Moments,
    pub mu_x: f64,
    pub var_x: f64,
    pub mu_y: f64,
    pub var_y: f64,
    pub mu_lambda: f64,
    pub var_lambda: f64,
    /// `E{Λ²}` under the Gamma fit (equal to `σ²_Λ + μ_Λ²`).
    pub raw2_lambda: f64,
    /// `E{Λ⁴}` under the Gamma fit.
    pub raw4_lambda: f64,
}

pub fn cascade_moments(links: &SingleTagLinks, sys: &SystemParams) -> Result<CascadeStats> {
    sys.validate()?;
    let f = links.f.moments();
    let u = links.u.moments();
    let g = links.g.moments();
    let h = links.h.moments();
    let n = sys.n as f64;
    let eta = sys.eta;
    let mu_xn = eta * g.mean * h.mean;
    let raw2_xn = eta * eta * g.raw2 * h.raw2;
    let mu_x = n * mu_xn;
    let var_x = n * (raw2_xn - mu_xn * mu_xn);
    let mu_y = f.mean + mu_x;
    let var_y = f.var + var_x;
    let mu_lambda = u.mean * mu_y;
    let var_lambda = u.raw2 * (var_y + mu_y * mu_y) - u.mean * u.mean * mu_y * mu_y;
    let fit = GammaFit::new(mu_lambda, var_lambda)?;
    Ok(CascadeStats {
        n: sys.n,
        eta,
        f,
        u,
        g,
        h,
        mu_x,
        var_x,
        mu_y,
        var_y,
        mu_lambda,
        var_lambda,
        raw2_lambda: var_lambda + mu_lambda * mu_lambda,
        raw4_lambda: fit.raw_moment(4.0),
    })
}

impl CascadeStats {
    pub fn y_fit(&self, kind: FitKind) -> Result<Fit> {
        Fit::new(kind, self.mu_y, self.var_y)
    }

    pub fn lambda_fit(&self, kind: FitKind) -> Result<Fit> {
        Fit::new(kind, self.mu_lambda, self.var_lambda)
    }

    pub fn lambda_gamma(&self) -> Result<GammaFit> {
        GammaFit::new(self.mu_lambda, self.var_lambda)
    }

    /// `E{Y²}`, the received power per watt transmitted.
    pub fn raw2_y(&self) -> f64 {
        self.var_y + self.mu_y * self.mu_y
    }
}

/// `F_{γ*}(r) = F_Λ(√(r/γ̄))`.
pub fn cdf_snr(sys: &SystemParams, stats: &CascadeStats, kind: FitKind, r: f64) -> Result<f64> {
    Ok(stats.lambda_fit(kind)?.cdf((r / sys.avg_snr()).sqrt()))
}

/// `F_{P_T*}(r) = F_Y(√(r/P))`.
pub fn cdf_received_power(
    sys: &SystemParams,
    stats: &CascadeStats,
    kind: FitKind,
    r: f64,
) -> Result<f64> {
    Ok(stats.y_fit(kind)?.cdf((r / sys.power).sqrt()))
}

/// `E{P_T*} = P·(σ²_f + μ_f² + σ²_X + μ_X² + 2μ_f μ_X)`.
pub fn avg_received_power(sys: &SystemParams, stats: &CascadeStats) -> f64 {
    sys.power * stats.raw2_y()
}

/// `P̄_h = φ(1−β)·E{P_T*}`.
pub fn avg_harvested_power(sys: &SystemParams, stats: &CascadeStats) -> f64 {
    sys.phi * (1.0 - sys.beta) * avg_received_power(sys, stats)
}

/// Energy-outage probability `Pr{(1−β)P_T* ≤ P_b'}`.
pub fn eo_probability(sys: &SystemParams, stats: &CascadeStats, kind: FitKind) -> Result<f64> {
    cdf_received_power(sys, stats, kind, sys.p_b_prime() / (1.0 - sys.beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Jensen bounds on `E{log2(1+γ*)}` in bit/s/Hz.
///
/// The lower bound uses `E{1/γ*} ≈ 1/E{γ*} + σ²_{γ*}/E{γ*}³`, i.e. an
/// effective SNR of `γ̄·(μ_Λ^{(2)})³/μ_Λ^{(4)}`.
pub fn rate_bounds(sys: &SystemParams, stats: &CascadeStats) -> RateBounds {
    let g = sys.avg_snr();
    let r2 = stats.raw2_lambda;
    let r4 = stats.raw4_lambda;
    RateBounds {
        lower: (g * r2 * (r2 * r2 / r4)).ln_1p() / LN_2,
        upper: (g * r2).ln_1p() / LN_2,
    }
}

/// Per-element mean `μ̄_X = η·μ_g·μ_h` of the cascade.
pub fn cascade_element_mean(stats: &CascadeStats) -> f64 {
    stats.eta * stats.g.mean * stats.h.mean
}

/// Limit of both rate bounds when `P = P_A/N²` and `N → ∞`.
pub fn asymptotic_rate(sys: &SystemParams, stats: &CascadeStats, p_a: f64) -> f64 {
    let gamma_a = sys.beta * p_a / sys.noise;
    let mx = cascade_element_mean(stats);
    (gamma_a * stats.u.raw2 * mx * mx).ln_1p() / LN_2
}

/// Outage probability at SNR threshold `γ_th`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outage {
    /// `F_{P_T*}(γ_th) + (1 − F_{P_T*}(γ_th))·F_{γ*}(γ_th)`, the composition
    /// with the power CDF evaluated at the SNR threshold.
    pub printed: f64,
    /// `F_EO + (1 − F_EO)·F_{γ*}(γ_th)` with the energy outage taken at the
    /// activation threshold `P_b'/(1−β)`.
    pub physical: f64,
    pub energy: f64,
    pub snr: f64,
}

pub fn outage_probability(
    sys: &SystemParams,
    stats: &CascadeStats,
    kind: FitKind,
    gamma_th: f64,
) -> Result<Outage> {
    if !(gamma_th >= 0.0) {
        return Err(domain(
            "outage_probability",
            "gamma_th",
            gamma_th,
            "gamma_th >= 0",
        ));
    }
    let snr = cdf_snr(sys, stats, kind, gamma_th)?;
    let power_at_th = cdf_received_power(sys, stats, kind, gamma_th)?;
    let energy = eo_probability(sys, stats, kind)?;
    Ok(Outage {
        printed: power_at_th + (1.0 - power_at_th) * snr,
        physical: energy + (1.0 - energy) * snr,
        energy,
        snr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BerMethod {
    /// Parabolic-cylinder closed form.
    ClosedForm,
    /// Quadrature of the same integral; used outside the `D_v` accuracy box.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub value: f64,
    pub method: BerMethod,
}

/// Average BPSK bit error rate under the Gamma fit of `Λ`, with `Q`
/// replaced by `exp(−Ax² − Bx − C)`.
pub fn avg_ber(sys: &SystemParams, stats: &CascadeStats) -> Result<BerEstimate> {
    let fit = stats.lambda_gamma()?;
    ber_gamma(&fit, sys.avg_snr())
}

/// [`avg_ber`] for a given fit and `γ̄`.
pub fn ber_gamma(fit: &GammaFit, avg_snr: f64) -> Result<BerEstimate> {
    match ber_closed_form(fit, avg_snr) {
        Ok(value) => Ok(BerEstimate {
            value,
            method: BerMethod::ClosedForm,
        }),
        Err(Error::Domain { .. }) => Ok(BerEstimate {
            value: ber_approx_quadrature(fit, avg_snr),
            method: BerMethod::Quadrature,
        }),
        Err(e) => Err(e),
    }
}

/// `λe^{−C}λ_Λ^{−k}(2Ā)^{−k/2}·e^{z²/4}D_{−k}(z)` with `Ā = Aνγ̄`,
/// `B̂ = B√(νγ̄) + 1/λ_Λ` and `z = B̂/√(2Ā)`.
///
/// Fails with a domain error when `(−k, z)` leaves the `D_v` box.
pub fn ber_closed_form(fit: &GammaFit, avg_snr: f64) -> Result<f64> {
    if !(avg_snr >= 0.0) {
        return Err(domain(
            "ber_closed_form",
            "avg_snr",
            avg_snr,
            "avg_snr >= 0",
        ));
    }
    let c = Q_APPROX;
    if avg_snr == 0.0 {
        return Ok(BPSK_LAMBDA * (-c.c).exp());
    }
    let a_bar = c.a * BPSK_NU * avg_snr;
    let b_hat = c.b * (BPSK_NU * avg_snr).sqrt() + 1.0 / fit.lambda;
    let z = b_hat / (2.0 * a_bar).sqrt();
    let ln_d = specfun::ln_parabolic_cylinder_d_scaled(-fit.k, z)?;
    let k = fit.k;
    Ok((BPSK_LAMBDA.ln() - c.c - k * fit.lambda.ln() - 0.5 * k * (2.0 * a_bar).ln() + ln_d).exp())
}

/// Quadrature of `∫ λ·exp(−Aνγ̄x² − B√(νγ̄)x − C)·f_Λ(x) dx`.
pub fn ber_approx_quadrature(fit: &GammaFit, avg_snr: f64) -> f64 {
    let c = Q_APPROX;
    let a_bar = c.a * BPSK_NU * avg_snr;
    let b_hat = c.b * (BPSK_NU * avg_snr).sqrt() + 1.0 / fit.lambda;
    let k = fit.k;
    let scale = if k > 1.0 {
        2.0 * (k - 1.0) / (b_hat + (b_hat * b_hat + 8.0 * a_bar * (k - 1.0)).sqrt())
    } else {
        1.0 / (b_hat + (2.0 * a_bar).sqrt())
    };
    let ln_norm = BPSK_LAMBDA.ln() - c.c - lgamma(k) - k * fit.lambda.ln();
    let q = quad::exp_sinh_ln(
        |x| (k - 1.0) * x.ln() - a_bar * x * x - b_hat * x,
        scale,
        1e-13,
    );
    (q.ln_value + ln_norm).exp()
}

/// High-SNR behaviour at the current `N`, plus its `N → ∞` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotics {
    /// `G_d = k_Λ/2`.
    pub diversity_order: f64,
    /// `O_c = 1/(Γ(k_Λ+1)λ_Λ^{k_Λ})`.
    pub coding_gain: f64,
    /// `G_a = λ_E`.
    pub array_gain: f64,
    /// `O_c·(γ_th/γ̄)^{G_d}`.
    pub outage: f64,
    /// `(λ_E·γ̄)^{−G_d}`.
    pub ber: f64,
    /// `lim_{N→∞} G_d`, a function of the tag-to-reader shape only.
    pub diversity_limit: f64,
}

pub fn asymptotics(sys: &SystemParams, stats: &CascadeStats, gamma_th: f64) -> Result<Asymptotics> {
    let fit = stats.lambda_gamma()?;
    let g = sys.avg_snr();
    let gd = fit.k / 2.0;
    let ln_oc = ln_coding_gain(&fit);
    let ln_ge = ln_array_gain(&fit);
    Ok(Asymptotics {
        diversity_order: gd,
        coding_gain: ln_oc.exp(),
        array_gain: ln_ge.exp(),
        outage: (ln_oc + gd * (gamma_th / g).ln()).exp(),
        ber: (-gd * (ln_ge + g.ln())).exp(),
        diversity_limit: diversity_limit_moments(&stats.u),
    })
}

fn ln_coding_gain(fit: &GammaFit) -> f64 {
    -lgamma(fit.k + 1.0) - fit.k * fit.lambda.ln()
}

/// `ln λ_E` with `λ_E = ν[(2^{k/2}/3 + (3/2)^{k/2})·C₁]^{−2/k}` and
/// `C₁ = λΓ(k/2)/(8Γ(k)λ_Λ^k)`, so that `P̄_BER^∞ = (λ_E γ̄)^{−k/2}`.
fn ln_array_gain(fit: &GammaFit) -> f64 {
    let k = fit.k;
    let ln_c1 = BPSK_LAMBDA.ln() + lgamma(k / 2.0) - 8f64.ln() - lgamma(k) - k * fit.lambda.ln();
    let h = k / 2.0;
    let ln_sum = ln_add_exp(h * 2f64.ln() - 3f64.ln(), h * 1.5f64.ln());
    BPSK_NU.ln() - (2.0 / k) * (ln_sum + ln_c1)
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn diversity_limit_moments(u: &Moments) -> f64 {
    0.5 * u.mean * u.mean / u.var
}

/// `lim_{N→∞} G_d = ½·(m_u(Γ(m_u)/Γ(m_u+½))² − 1)^{−1}`.
pub fn diversity_limit(m_u: f64) -> Result<f64> {
    if !(m_u >= crate::channel::MIN_SHAPE) {
        return Err(domain("diversity_limit", "m_u", m_u, "m_u >= 0.5"));
    }
    let r = (lgamma(m_u) - lgamma(m_u + 0.5)).exp();
    Ok(0.5 / (m_u * r * r - 1.0))
}

/// Large-`N` forms of the Gamma fit and the gains derived from it:
/// `k_Λ → μ_u²/σ_u²` and `λ_Λ ≈ N·μ̄_X·σ_u²/μ_u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeArray {
    pub k: f64,
    pub lambda: f64,
    pub coding_gain: f64,
    pub array_gain: f64,
}

pub fn large_array_limits(stats: &CascadeStats) -> LargeArray {
    let u = &stats.u;
    let k = u.mean * u.mean / u.var;
    let lambda = stats.n as f64 * cascade_element_mean(stats) * u.var / u.mean;
    let fit = GammaFit { k, lambda };
    LargeArray {
        k,
        lambda,
        coding_gain: ln_coding_gain(&fit).exp(),
        array_gain: ln_array_gain(&fit).exp(),
    }
}

/// Moments of the real and imaginary cascade parts under uniform phase
/// errors `ε_n ~ U[−τ, τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedCascade {
    pub tau: f64,
    pub mu_xr: f64,
    pub var_xr: f64,
    pub var_xi: f64,
}

pub fn quantized_moments(stats: &CascadeStats, bits: u32) -> Result<QuantizedCascade> {
    if bits == 0 {
        return Err(domain("quantized_moments", "bits", 0.0, "D >= 1"));
    }
    let tau = crate::ris::quantization_half_width(bits);
    let sinc = tau.sin() / tau;
    let half_sinc2 = (2.0 * tau).sin() / (4.0 * tau);
    let n = stats.n as f64;
    let mu_xn = stats.eta * stats.g.mean * stats.h.mean;
    let raw2_xn = stats.eta * stats.eta * stats.g.raw2 * stats.h.raw2;
    let mu_r = mu_xn * sinc;
    Ok(QuantizedCascade {
        tau,
        mu_xr: n * mu_r,
        var_xr: n * (raw2_xn * (0.5 + half_sinc2) - mu_r * mu_r),
        var_xi: n * raw2_xn * (0.5 - half_sinc2),
    })
}

/// Upper rate bound with `bits`-bit phase quantization.
pub fn quantized_rate_ub(sys: &SystemParams, stats: &CascadeStats, bits: u32) -> Result<f64> {
    let q = quantized_moments(stats, bits)?;
    let power =
        stats.f.raw2 + q.var_xr + q.mu_xr * q.mu_xr + 2.0 * stats.f.mean * q.mu_xr + q.var_xi;
    Ok((sys.avg_snr() * stats.u.raw2 * power).ln_1p() / LN_2)
}
