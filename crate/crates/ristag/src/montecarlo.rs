//! Brute-force Monte-Carlo oracle.
//!
//! Trials are split into fixed-size chunks; chunk `c` draws from the ChaCha8
//! stream `c` of the generator seeded with `seed`. Chunks are evaluated in
//! parallel and reassembled in chunk order, so every result is a pure
//! function of its inputs and the seed, independent of the worker count.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ristag_core::channel::{sample_link, uniform_phase, NakagamiSampler};
use ristag_core::multi_tag::{
    self, optimize_phases, MultiTagInstance, MultiTagLinks, SolverOptions,
};
use ristag_core::quad;
use ristag_core::ris::{quantize_phase, wrap_angle, PhasePolicy};
use ristag_core::single_tag::{GammaFit, SingleTagLinks, SystemParams, BPSK_LAMBDA, BPSK_NU};
use ristag_core::specfun::{erfcx, q_function};

use crate::error::{Error, Result};

/// Trials per chunk of a single-tag run.
pub const CHUNK: usize = 4096;
/// Trials per chunk of a multi-tag run; each trial may run the optimizer.
pub const MULTI_CHUNK: usize = 16;
/// Bin cap of the SNR histogram.
pub const MAX_BINS: usize = 10_000;

/// Generator for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunked<T: Send>(
    trials: usize,
    chunk: usize,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng) -> T + Sync,
) -> Vec<T> {
    let chunks = trials.div_ceil(chunk);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = chunk.min(trials - c * chunk);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// One single-tag channel realization, reduced to what every metric needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    /// `|f + Σ η e^{jθ_n} g_n h_n|²`.
    pub y2: f64,
    /// `|u|²`.
    pub u2: f64,
}

impl ChannelDraw {
    /// `Λ² = |u|²·|f + …|²`, so that `γ = γ̄Λ²`.
    pub fn lambda2(&self) -> f64 {
        self.u2 * self.y2
    }
}

/// Draws `f`, `u`, then `(g_n, h_n)` per element, and applies `policy`.
fn draw_single<R: rand::Rng + ?Sized>(
    links: &SingleTagLinks,
    n: usize,
    eta: f64,
    policy: PhasePolicy,
    gs: &NakagamiSampler,
    hs: &NakagamiSampler,
    rng: &mut R,
) -> ChannelDraw {
    let f = sample_link(&links.f, rng);
    let u = sample_link(&links.u, rng);
    let tf = f.arg();
    let acc = match policy {
        PhasePolicy::NoRis => f,
        PhasePolicy::OptimalContinuous => {
            // every path arrives with the direct path's phase
            let mut cascade = 0.0;
            for _ in 0..n {
                let (ag, _) = gs.sample_polar(rng);
                let (ah, _) = hs.sample_polar(rng);
                cascade += ag * ah;
            }
            f + Complex64::from_polar(eta * cascade, tf)
        }
        PhasePolicy::Quantized { bits } => {
            let mut acc = f;
            for _ in 0..n {
                let (ag, pg) = gs.sample_polar(rng);
                let (ah, ph) = hs.sample_polar(rng);
                let theta = quantize_phase(wrap_angle(tf - pg - ph), bits);
                acc += Complex64::from_polar(eta * ag * ah, theta + pg + ph);
            }
            acc
        }
        PhasePolicy::Random => {
            let mut acc = f;
            for _ in 0..n {
                let (ag, pg) = gs.sample_polar(rng);
                let (ah, ph) = hs.sample_polar(rng);
                let theta = uniform_phase(rng);
                acc += Complex64::from_polar(eta * ag * ah, theta + pg + ph);
            }
            acc
        }
    };
    ChannelDraw {
        y2: acc.norm_sqr(),
        u2: u.norm_sqr(),
    }
}

/// `trials` channel realizations under `policy` with `sys.n` elements.
pub fn sample_single_tag(
    links: &SingleTagLinks,
    sys: &SystemParams,
    policy: PhasePolicy,
    trials: usize,
    seed: u64,
) -> Result<Vec<ChannelDraw>> {
    sys.validate()?;
    policy.validate()?;
    let gs = NakagamiSampler::for_link(&links.g);
    let hs = NakagamiSampler::for_link(&links.h);
    let (n, eta) = (sys.n, sys.eta);
    Ok(chunked(trials, CHUNK, seed, |rng| {
        draw_single(links, n, eta, policy, &gs, &hs, rng)
    }))
}

/// Sample mean and unbiased variance, accumulated in input order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub var: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        Self {
            count: n,
            mean,
            var: if n > 1 { m2 / (n - 1) as f64 } else { 0.0 },
        }
    }

    /// `σ/√n`.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.var / self.count as f64).sqrt()
    }
}

/// Fixed-edge histogram; `counts[i]` covers `[edges[i], edges[i+1])`, with
/// the last bin closed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

impl Histogram {
    /// Freedman–Diaconis bins: width `2·IQR·n^{−1/3}`, at most [`MAX_BINS`].
    pub fn freedman_diaconis(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let (lo, hi) = (s[0], s[s.len() - 1]);
        let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
        let width = 2.0 * iqr / (s.len() as f64).cbrt();
        let bins = if hi > lo && width > 0.0 {
            (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
        } else {
            1
        };
        let step = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + step * i as f64).collect();
        edges.push(hi);
        let mut counts = vec![0u64; bins];
        for x in &s {
            let i = if step > 0.0 {
                (((x - lo) / step) as usize).min(bins - 1)
            } else {
                0
            };
            counts[i] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Empirical statistics of a single-tag run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trials: usize,
    /// `P_T = P·|f + …|²` in watts.
    pub received_power: Summary,
    /// `φ(1−β)P_T` in watts.
    pub harvested_power: Summary,
    /// `log2(1 + γ)`.
    pub rate: Summary,
    pub snr: Summary,
    /// Fraction with `(1−β)P_T ≤ P_b'`.
    pub energy_outage: f64,
    /// Fraction with `γ ≤ γ_th`.
    pub snr_outage: f64,
    /// Fraction in energy outage or, while active, below `γ_th`.
    pub outage: f64,
    /// Mean of `λQ(√(νγ))`.
    pub ber: f64,
    pub snr_histogram: Histogram,
}

impl TrialReport {
    pub fn from_draws(draws: &[ChannelDraw], sys: &SystemParams, gamma_th: f64) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::EmptySample);
        }
        let gbar = sys.avg_snr();
        let threshold = sys.p_b_prime();
        let n = draws.len() as f64;
        let snr: Vec<f64> = draws.iter().map(|d| gbar * d.lambda2()).collect();
        let power = |d: &ChannelDraw| sys.power * d.y2;
        let mut eo = 0usize;
        let mut so = 0usize;
        let mut out = 0usize;
        let mut ber = 0.0;
        for (d, &g) in draws.iter().zip(&snr) {
            let e = (1.0 - sys.beta) * power(d) <= threshold;
            let s = g <= gamma_th;
            eo += e as usize;
            so += s as usize;
            out += (e || s) as usize;
            ber += BPSK_LAMBDA * q_function((BPSK_NU * g).sqrt());
        }
        let harvest = sys.phi * (1.0 - sys.beta);
        Ok(Self {
            trials: draws.len(),
            received_power: Summary::of(draws.iter().map(power)),
            harvested_power: Summary::of(draws.iter().map(|d| harvest * power(d))),
            rate: Summary::of(snr.iter().map(|g| g.ln_1p() / LN_2)),
            snr: Summary::of(snr.iter().copied()),
            energy_outage: eo as f64 / n,
            snr_outage: so as f64 / n,
            outage: out as f64 / n,
            ber: ber / n,
            snr_histogram: Histogram::freedman_diaconis(&snr),
        })
    }
}

/// Single-tag run: draw the links, set phases per `policy`, and measure.
pub fn run_single_tag(
    links: &SingleTagLinks,
    sys: &SystemParams,
    policy: PhasePolicy,
    gamma_th: f64,
    trials: usize,
    seed: u64,
) -> Result<TrialReport> {
    let draws = sample_single_tag(links, sys, policy, trials, seed)?;
    TrialReport::from_draws(&draws, sys, gamma_th)
}

/// [`run_single_tag`] at several transmit powers on common channel draws.
pub fn run_single_tag_powers(
    links: &SingleTagLinks,
    sys: &SystemParams,
    policy: PhasePolicy,
    gamma_th: f64,
    powers: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialReport>> {
    let draws = sample_single_tag(links, sys, policy, trials, seed)?;
    powers
        .iter()
        .map(|&p| TrialReport::from_draws(&draws, &sys.with_power(p), gamma_th))
        .collect()
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(index) = samples.iter().position(|x| x.is_nan()) {
        return Err(Error::NanSample { index });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

impl Ecdf {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p.clamp(0.0, 1.0))
    }

    /// `sup_x |F̂(x) − F(x)|` for a continuous `F`.
    pub fn sup_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            let f = cdf(x);
            d = d
                .max((j as f64 / n - f).abs())
                .max((f - i as f64 / n).abs());
            i = j;
        }
        d
    }
}

/// `ln Q(t)` for `t ≥ 0`, exact to rounding via `erfcx`.
fn ln_q(t: f64) -> f64 {
    let y = t / std::f64::consts::SQRT_2;
    (0.5 * erfcx(y)).ln() - y * y
}

/// `∫₀^∞ λQ(x√(νγ̄)) f_Λ(x) dx` with the exact `Q`, by double-exponential
/// quadrature.
pub fn ber_quadrature_oracle(fit: &GammaFit, avg_snr: f64) -> f64 {
    if avg_snr <= 0.0 {
        return BPSK_LAMBDA * 0.5;
    }
    let s = (BPSK_NU * avg_snr).sqrt();
    let k = fit.k;
    // peak of x^{k−1}·e^{−x/λ}·e^{−s²x²/2}
    let a = 0.5 * s * s;
    let b = 1.0 / fit.lambda;
    let scale = if k > 1.0 {
        2.0 * (k - 1.0) / (b + (b * b + 8.0 * a * (k - 1.0)).sqrt())
    } else {
        1.0 / (b + s)
    };
    let q = quad::exp_sinh_ln(|x| ln_q(s * x) + fit.ln_pdf(x), scale, 1e-12);
    BPSK_LAMBDA * q.ln_value.exp()
}

/// Multi-tag phase choice per draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiPolicy {
    Optimized,
    Random,
    NoRis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagReport {
    pub sinr: Summary,
    pub rate: Summary,
    /// Fraction with the tag inactive or its SINR `≤ γ_th`.
    pub outage: f64,
    pub energy_outage: f64,
    /// Mean of `λQ(√(νγ_k))`.
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTagReport {
    pub trials: usize,
    pub tags: Vec<TagReport>,
    pub sum_rate: Summary,
    /// Draws where the activation constraints admitted no starting point;
    /// these were optimized without them.
    pub infeasible: usize,
    /// Draws where the outer loop hit its iteration cap.
    pub unconverged: usize,
    /// Largest decrease between consecutive optimizer trace entries.
    pub max_trace_drop: f64,
}

struct MultiTrial {
    sinr: Vec<f64>,
    active: Vec<bool>,
    infeasible: bool,
    converged: bool,
    trace_drop: f64,
}

fn multi_trial(
    links: &MultiTagLinks,
    sys: &SystemParams,
    policy: MultiPolicy,
    opts: &SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Result<MultiTrial> {
    let inst = MultiTagInstance::sample(links, *sys, rng)?;
    let n = inst.elements();
    let mut infeasible = false;
    let mut converged = true;
    let mut trace_drop: f64 = 0.0;
    let theta = match policy {
        MultiPolicy::NoRis => vec![Complex64::new(0.0, 0.0); n],
        MultiPolicy::Random => (0..n)
            .map(|_| Complex64::from_polar(sys.eta, uniform_phase(rng)))
            .collect(),
        MultiPolicy::Optimized => {
            let state = match optimize_phases(&inst, opts) {
                Err(ristag_core::Error::Infeasible { .. }) if opts.energy_constraints => {
                    infeasible = true;
                    let relaxed = SolverOptions {
                        energy_constraints: false,
                        ..*opts
                    };
                    optimize_phases(&inst, &relaxed)?
                }
                other => other?,
            };
            converged = state.converged;
            for w in state.trace.windows(2) {
                trace_drop = trace_drop.max(w[0] - w[1]);
            }
            state.theta
        }
    };
    let threshold = inst.power_threshold();
    Ok(MultiTrial {
        sinr: (0..inst.tags())
            .map(|k| multi_tag::sinr(&inst, &theta, k))
            .collect(),
        active: (0..inst.tags())
            .map(|k| inst.received_power(&theta, k) > threshold)
            .collect(),
        infeasible,
        converged,
        trace_drop,
    })
}

/// Multi-tag run: per draw, choose phases per `policy` and measure per-tag
/// SINR outage, BPSK BER and the sum rate.
pub fn run_multi_tag(
    links: &MultiTagLinks,
    sys: &SystemParams,
    policy: MultiPolicy,
    gamma_th: f64,
    opts: &SolverOptions,
    trials: usize,
    seed: u64,
) -> Result<MultiTagReport> {
    sys.validate()?;
    if trials == 0 {
        return Err(Error::EmptySample);
    }
    let results: Vec<Result<MultiTrial>> = chunked(trials, MULTI_CHUNK, seed, |rng| {
        multi_trial(links, sys, policy, opts, rng)
    });
    let results: Vec<MultiTrial> = results.into_iter().collect::<Result<_>>()?;
    let n = trials as f64;
    let k = links.tags.len();
    let tags = (0..k)
        .map(|t| {
            let mut outage = 0usize;
            let mut eo = 0usize;
            let mut ber = 0.0;
            for r in &results {
                let g = r.sinr[t];
                eo += (!r.active[t]) as usize;
                outage += (!r.active[t] || g <= gamma_th) as usize;
                ber += BPSK_LAMBDA * q_function((BPSK_NU * g).sqrt());
            }
            TagReport {
                sinr: Summary::of(results.iter().map(|r| r.sinr[t])),
                rate: Summary::of(results.iter().map(|r| r.sinr[t].ln_1p() / LN_2)),
                outage: outage as f64 / n,
                energy_outage: eo as f64 / n,
                ber: ber / n,
            }
        })
        .collect();
    Ok(MultiTagReport {
        trials,
        tags,
        sum_rate: Summary::of(
            results
                .iter()
                .map(|r| r.sinr.iter().map(|g| g.ln_1p() / LN_2).sum::<f64>()),
        ),
        infeasible: results.iter().filter(|r| r.infeasible).count(),
        unconverged: results.iter().filter(|r| !r.converged).count(),
        max_trace_drop: results.iter().map(|r| r.trace_drop).fold(0.0, f64::max),
    })
}
