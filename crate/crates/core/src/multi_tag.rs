//! Multi-tag SINR model and the alternating quadratic-transform optimizer.
//!
//! The optimisation variable is `θ ∈ ℂ^N`; element `n` of the surface
//! applies the reflection coefficient `conj(θ_n)`, so the signal of tag `k`
//! at the reader is `b_k + θᴴa_k` with `a_k = u_k·(g_k ∘ h)` and
//! `b_k = u_k·f_k`. Each `|θ_n|` is capped by the surface amplitude `η`.
//!
//! The quadratic transform is applied to the real part of the desired
//! signal measured against a per-tag phase reference `φ_k`, i.e. to
//! `Re{e^{−jφ_k}(b_k + θᴴa_k)}`. With `φ_k = 0` this is the textbook form;
//! the outer loop sets `φ_k = arg(b_k + θᴴa_k)` at the current iterate, which
//! makes the surrogate tight and the sum rate nondecreasing.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;

use crate::channel::{LinkParams, NakagamiSampler};
use crate::error::{Error, Result};
use crate::ris::wrap_angle;
use crate::single_tag::SystemParams;

type C = Complex64;

/// Links of one tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagLinks {
    /// Emitter to tag.
    pub f: LinkParams,
    /// Tag to reader.
    pub u: LinkParams,
    /// RIS to tag.
    pub g: LinkParams,
}

/// All links of a `K`-tag scenario sharing one emitter-to-RIS link `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTagLinks {
    pub tags: Vec<TagLinks>,
    pub h: LinkParams,
}

/// One channel realization of the multi-tag system.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTagInstance {
    sys: SystemParams,
    f: Vec<C>,
    u: Vec<C>,
    g: Vec<Vec<C>>,
    h: Vec<C>,
    a: Vec<Vec<C>>,
    a_bar: Vec<Vec<C>>,
}

impl MultiTagInstance {
    /// `g[k]` and `h` must have length `sys.n`.
    pub fn new(sys: SystemParams, f: Vec<C>, u: Vec<C>, g: Vec<Vec<C>>, h: Vec<C>) -> Result<Self> {
        sys.validate()?;
        let k = f.len();
        for (what, len) in [("u", u.len()), ("g", g.len())] {
            if len != k {
                return Err(Error::LengthMismatch {
                    what,
                    expected: k,
                    found: len,
                });
            }
        }
        if h.len() != sys.n {
            return Err(Error::LengthMismatch {
                what: "h",
                expected: sys.n,
                found: h.len(),
            });
        }
        for gk in &g {
            if gk.len() != sys.n {
                return Err(Error::LengthMismatch {
                    what: "g_k",
                    expected: sys.n,
                    found: gk.len(),
                });
            }
        }
        let a_bar: Vec<Vec<C>> = g
            .iter()
            .map(|gk| gk.iter().zip(&h).map(|(x, y)| x * y).collect())
            .collect();
        let a = a_bar
            .iter()
            .zip(&u)
            .map(|(ab, uk)| ab.iter().map(|x| uk * x).collect())
            .collect();
        Ok(Self {
            sys,
            f,
            u,
            g,
            h,
            a,
            a_bar,
        })
    }

    /// Draws `h`, then `f_k`, `u_k`, `g_k` for each tag in order.
    pub fn sample<R: Rng + ?Sized>(
        links: &MultiTagLinks,
        sys: SystemParams,
        rng: &mut R,
    ) -> Result<Self> {
        let n = sys.n;
        let hs = NakagamiSampler::for_link(&links.h);
        let h = (0..n).map(|_| hs.sample_complex(rng)).collect();
        let mut f = Vec::with_capacity(links.tags.len());
        let mut u = Vec::with_capacity(links.tags.len());
        let mut g = Vec::with_capacity(links.tags.len());
        for t in &links.tags {
            f.push(NakagamiSampler::for_link(&t.f).sample_complex(rng));
            u.push(NakagamiSampler::for_link(&t.u).sample_complex(rng));
            let gs = NakagamiSampler::for_link(&t.g);
            g.push((0..n).map(|_| gs.sample_complex(rng)).collect());
        }
        Self::new(sys, f, u, g, h)
    }

    pub fn sys(&self) -> &SystemParams {
        &self.sys
    }

    pub fn tags(&self) -> usize {
        self.f.len()
    }

    pub fn elements(&self) -> usize {
        self.h.len()
    }

    pub fn f(&self) -> &[C] {
        &self.f
    }

    pub fn u(&self) -> &[C] {
        &self.u
    }

    pub fn g(&self, k: usize) -> &[C] {
        &self.g[k]
    }

    pub fn h(&self) -> &[C] {
        &self.h
    }

    /// `a_k = u_k·(g_k ∘ h)`.
    pub fn a(&self, k: usize) -> &[C] {
        &self.a[k]
    }

    /// `b_k = u_k·f_k`.
    pub fn b(&self, k: usize) -> C {
        self.u[k] * self.f[k]
    }

    /// `ā_k = g_k ∘ h`.
    pub fn a_bar(&self, k: usize) -> &[C] {
        &self.a_bar[k]
    }

    /// Desired-signal amplitude `b_k + θᴴa_k` at the reader.
    pub fn signal(&self, theta: &[C], k: usize) -> C {
        self.b(k) + dot(theta, &self.a[k])
    }

    /// Emitter-to-tag channel `f_k + θᴴā_k`.
    pub fn tag_channel(&self, theta: &[C], k: usize) -> C {
        self.f[k] + dot(theta, &self.a_bar[k])
    }

    /// `P_{T,k} = P|f_k + θᴴā_k|²`.
    pub fn received_power(&self, theta: &[C], k: usize) -> f64 {
        self.sys.power * self.tag_channel(theta, k).norm_sqr()
    }

    /// Minimum received power that keeps a tag active, `P_b'/(1−β)`.
    pub fn power_threshold(&self) -> f64 {
        self.sys.p_b_prime() / (1.0 - self.sys.beta)
    }

    fn interference(&self, theta: &[C], k: usize) -> f64 {
        (0..self.tags())
            .filter(|&i| i != k)
            .map(|i| self.signal(theta, i).norm_sqr())
            .sum::<f64>()
            * self.sys.beta
            * self.sys.power
    }
}

/// `aᴴb`.
fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// SINR of tag `k` in the compact form
/// `βP|b_k + θᴴa_k|² / (Σ_{i≠k} βP|b_i + θᴴa_i|² + σ²)`.
pub fn sinr(inst: &MultiTagInstance, theta: &[C], k: usize) -> f64 {
    let s = &inst.sys;
    s.beta * s.power * inst.signal(theta, k).norm_sqr() / (inst.interference(theta, k) + s.noise)
}

/// SINR of tag `k` evaluated from the raw channels with
/// `Θ = diag(conj(θ))`: `βP|u_k(f_k + g_kᵀΘh)|² / (…)`.
pub fn sinr_from_channels(inst: &MultiTagInstance, theta: &[C], k: usize) -> f64 {
    let s = &inst.sys;
    let path = |i: usize| -> f64 {
        let cascade: C = inst.g[i]
            .iter()
            .zip(theta)
            .zip(&inst.h)
            .map(|((g, t), h)| g * t.conj() * h)
            .sum();
        s.beta * s.power * (inst.u[i] * (inst.f[i] + cascade)).norm_sqr()
    };
    let interference: f64 = (0..inst.tags()).filter(|&i| i != k).map(path).sum();
    path(k) / (interference + s.noise)
}

/// `Σ_k log2(1 + γ_k)`.
pub fn sum_rate(inst: &MultiTagInstance, theta: &[C]) -> f64 {
    (0..inst.tags())
        .map(|k| sinr(inst, theta, k).ln_1p() / LN_2)
        .sum()
}

/// `φ_k = arg(b_k + θᴴa_k)`.
pub fn phase_reference(inst: &MultiTagInstance, theta: &[C]) -> Vec<f64> {
    (0..inst.tags())
        .map(|k| inst.signal(theta, k).arg())
        .collect()
}

fn rotated_re(inst: &MultiTagInstance, theta: &[C], k: usize, phase: f64) -> f64 {
    (C::from_polar(1.0, -phase) * inst.signal(theta, k)).re
}

/// Maximiser of the surrogate over `λ` for fixed `θ`:
/// `λ_k = √(βP)·Re{e^{−jφ_k}s_k} / (βP·Σ_{i≠k}|s_i|² + σ²)`.
pub fn optimal_lambda(inst: &MultiTagInstance, theta: &[C], phase_ref: &[f64]) -> Vec<f64> {
    let s = &inst.sys;
    let sq = (s.beta * s.power).sqrt();
    (0..inst.tags())
        .map(|k| {
            sq * rotated_re(inst, theta, k, phase_ref[k]) / (inst.interference(theta, k) + s.noise)
        })
        .collect()
}

/// Quadratic-transform surrogate
/// `Σ_k log2(1 + 2λ_k√(βP)Re{e^{−jφ_k}s_k} − λ_k²(βP·Σ_{i≠k}|s_i|² + σ²))`.
pub fn surrogate_objective(
    inst: &MultiTagInstance,
    theta: &[C],
    lambda: &[f64],
    phase_ref: &[f64],
) -> Result<f64> {
    let s = &inst.sys;
    let sq = (s.beta * s.power).sqrt();
    let mut total = 0.0;
    for k in 0..inst.tags() {
        let l = lambda[k];
        let arg = 1.0 + 2.0 * l * sq * rotated_re(inst, theta, k, phase_ref[k])
            - l * l * (inst.interference(theta, k) + s.noise);
        if !(arg > 0.0) {
            return Err(Error::NonPositiveLog { tag: k, value: arg });
        }
        total += arg.log2();
    }
    Ok(total)
}

/// The surrogate written as `Σ_k log2(1 − θᴴU_kθ + 2Re{θᴴv_k} + c_k)` with
/// `U_k = λ_k²βP·Σ_{i≠k} a_i a_iᴴ`,
/// `v_k = λ_k√(βP)e^{−jφ_k}a_k − λ_k²βP·Σ_{i≠k} b_i* a_i` and
/// `c_k = 2λ_k√(βP)Re{e^{−jφ_k}b_k} − λ_k²(βP·Σ_{i≠k}|b_i|² + σ²)`.
///
/// `U_k` is kept as the scalar `λ_k²βP` times a sum of rank-one terms.
#[derive(Debug, Clone)]
pub struct QuadraticSurrogate<'a> {
    inst: &'a MultiTagInstance,
    u_scale: Vec<f64>,
    v: Vec<Vec<C>>,
    c: Vec<f64>,
}

impl<'a> QuadraticSurrogate<'a> {
    pub fn new(inst: &'a MultiTagInstance, lambda: &[f64], phase_ref: &[f64]) -> Self {
        let s = &inst.sys;
        let bp = s.beta * s.power;
        let sq = bp.sqrt();
        let kk = inst.tags();
        let n = inst.elements();
        let mut u_scale = Vec::with_capacity(kk);
        let mut v = Vec::with_capacity(kk);
        let mut c = Vec::with_capacity(kk);
        for k in 0..kk {
            let l = lambda[k];
            let rot = C::from_polar(1.0, -phase_ref[k]);
            let mut vk: Vec<C> = inst.a[k].iter().map(|x| x * rot * (l * sq)).collect();
            let mut b_int = 0.0;
            for i in (0..kk).filter(|&i| i != k) {
                let w = inst.b(i).conj() * (l * l * bp);
                for (vn, an) in vk.iter_mut().zip(&inst.a[i]) {
                    *vn -= w * an;
                }
                b_int += inst.b(i).norm_sqr();
            }
            debug_assert_eq!(vk.len(), n);
            u_scale.push(l * l * bp);
            v.push(vk);
            c.push(2.0 * l * sq * (rot * inst.b(k)).re - l * l * (bp * b_int + s.noise));
        }
        Self {
            inst,
            u_scale,
            v,
            c,
        }
    }

    /// `θᴴU_kθ`.
    pub fn quad_term(&self, theta: &[C], k: usize) -> f64 {
        let inst = self.inst;
        (0..inst.tags())
            .filter(|&i| i != k)
            .map(|i| dot(&inst.a[i], theta).norm_sqr())
            .sum::<f64>()
            * self.u_scale[k]
    }

    pub fn v(&self, k: usize) -> &[C] {
        &self.v[k]
    }

    pub fn c(&self, k: usize) -> f64 {
        self.c[k]
    }

    /// Argument of the `k`-th logarithm.
    pub fn log_argument(&self, theta: &[C], k: usize) -> f64 {
        1.0 - self.quad_term(theta, k) + 2.0 * dot(theta, &self.v[k]).re + self.c[k]
    }

    pub fn value(&self, theta: &[C]) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.inst.tags() {
            let q = self.log_argument(theta, k);
            if !(q > 0.0) {
                return Err(Error::NonPositiveLog { tag: k, value: q });
            }
            total += q.log2();
        }
        Ok(total)
    }

    /// Ascent direction `2·∂f/∂θ* = Σ_k 2(v_k − U_kθ)/(q_k ln 2)`; the real
    /// gradient of `f` when `ℂ^N` is read as `ℝ^{2N}`.
    pub fn gradient(&self, theta: &[C]) -> Vec<C> {
        let inst = self.inst;
        let kk = inst.tags();
        let proj: Vec<C> = (0..kk).map(|i| dot(&inst.a[i], theta)).collect();
        let mut grad = vec![C::new(0.0, 0.0); theta.len()];
        for k in 0..kk {
            let w = 2.0 / (self.log_argument(theta, k) * LN_2);
            for (gn, vn) in grad.iter_mut().zip(&self.v[k]) {
                *gn += vn * w;
            }
            for i in (0..kk).filter(|&i| i != k) {
                let coef = proj[i] * (-w * self.u_scale[k]);
                for (gn, an) in grad.iter_mut().zip(&inst.a[i]) {
                    *gn += an * coef;
                }
            }
        }
        grad
    }
}

/// First-order expansion of `P_{T,k}(θ)` around `θ_prev`:
/// `P_{T,k}(θ_prev) + 2Re{(Ū_kθ_prev + v̄_k)ᴴ(θ − θ_prev)}` with
/// `Ū_k = P·ā_kā_kᴴ`, `v̄_k = P·f_k*·ā_k`.
pub fn linearized_power(inst: &MultiTagInstance, theta_prev: &[C], theta: &[C], k: usize) -> f64 {
    let q = power_gradient(inst, theta_prev, k);
    let diff: Vec<C> = theta.iter().zip(theta_prev).map(|(x, y)| x - y).collect();
    inst.received_power(theta_prev, k) + 2.0 * dot(&q, &diff).re
}

/// `Ū_kθ + v̄_k = P·ā_k·conj(f_k + θᴴā_k)`.
pub fn power_gradient(inst: &MultiTagInstance, theta: &[C], k: usize) -> Vec<C> {
    let w = inst.tag_channel(theta, k).conj() * inst.sys.power;
    inst.a_bar[k].iter().map(|x| x * w).collect()
}

/// Real half-space `Re{qᴴθ} ≥ d`.
#[derive(Debug, Clone)]
struct HalfSpace {
    q: Vec<C>,
    q_norm_sqr: f64,
    d: f64,
}

impl HalfSpace {
    fn slack(&self, x: &[C]) -> f64 {
        dot(&self.q, x).re - self.d
    }

    fn tolerance(&self, x: &[C]) -> f64 {
        1e-9 * (self.d.abs() + (self.q_norm_sqr * norm_sqr(x)).sqrt())
    }
}

/// `{|θ_n| ≤ η} ∩ {linearised EH half-spaces}`.
#[derive(Debug, Clone)]
struct FeasibleSet {
    eta: f64,
    halves: Vec<HalfSpace>,
}

/// Sweeps of the dual coordinate ascent in [`FeasibleSet::project`].
const PROJECTION_MAX_SWEEPS: usize = 500;
/// Bisection steps of one multiplier update.
const MULTIPLIER_STEPS: usize = 200;

impl FeasibleSet {
    fn project_disk(&self, x: &mut [C]) {
        for xn in x.iter_mut() {
            let r = xn.norm();
            if r > self.eta {
                *xn *= self.eta / r;
            }
        }
    }

    fn contains(&self, x: &[C]) -> bool {
        x.iter().all(|xn| xn.norm() <= self.eta * (1.0 + 1e-12))
            && self.halves.iter().all(|h| h.slack(x) >= -h.tolerance(x))
    }

    /// `P_disk(z + Σ_k μ_k q_k)`.
    fn primal(&self, z: &[C], mu: &[f64], out: &mut [C]) {
        out.copy_from_slice(z);
        for (h, &m) in self.halves.iter().zip(mu) {
            if m != 0.0 {
                for (o, q) in out.iter_mut().zip(&h.q) {
                    *o += q * m;
                }
            }
        }
        self.project_disk(out);
    }

    /// Euclidean projection by cyclic coordinate ascent on the dual.
    ///
    /// For multipliers `μ ≥ 0` the minimiser over the disks is
    /// `x(μ) = P_disk(z + Σ μ_k q_k)`, and the slack of half-space `k` is
    /// nondecreasing in `μ_k`; each sweep sets every `μ_k` in turn to the
    /// smallest value that makes its own slack nonnegative.
    fn project(&self, z: &[C]) -> Vec<C> {
        let mut y = z.to_vec();
        self.project_disk(&mut y);
        // a projection onto a superset that lands inside the set is exact
        if self.halves.iter().all(|h| h.slack(&y) >= 0.0) {
            return y;
        }
        let mut mu = vec![0.0; self.halves.len()];
        let mut x = y.clone();
        for _ in 0..PROJECTION_MAX_SWEEPS {
            let mut changed = false;
            for k in 0..self.halves.len() {
                let old = mu[k];
                mu[k] = 0.0;
                self.primal(z, &mu, &mut x);
                let h = &self.halves[k];
                if h.slack(&x) >= 0.0 || h.q_norm_sqr == 0.0 {
                    changed |= old != 0.0;
                    continue;
                }
                // bracket the root of the slack in μ_k, then bisect
                let mut lo = 0.0;
                let mut hi = (-h.slack(&x) / h.q_norm_sqr).max(old);
                let mut grow = 0;
                loop {
                    mu[k] = hi;
                    self.primal(z, &mu, &mut x);
                    if h.slack(&x) >= 0.0 || grow > 60 {
                        break;
                    }
                    lo = hi;
                    hi *= 2.0;
                    grow += 1;
                }
                for _ in 0..MULTIPLIER_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    mu[k] = mid;
                    self.primal(z, &mu, &mut x);
                    if h.slack(&x) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                mu[k] = hi;
                changed |= (hi - old).abs() > 1e-12 * hi.max(old);
            }
            self.primal(z, &mu, &mut x);
            if !changed && self.contains(&x) {
                break;
            }
        }
        x
    }
}

fn feasible_set(inst: &MultiTagInstance, theta_prev: &[C], energy: bool) -> FeasibleSet {
    let mut halves = Vec::new();
    if energy {
        let target = inst.power_threshold();
        for k in 0..inst.tags() {
            let q = power_gradient(inst, theta_prev, k);
            // linearised power ≥ target  ⇔  Re{qᴴθ} ≥ Re{qᴴθ_prev} + (target − P(θ_prev))/2
            let d = dot(&q, theta_prev).re + 0.5 * (target - inst.received_power(theta_prev, k));
            halves.push(HalfSpace {
                q_norm_sqr: norm_sqr(&q),
                q,
                d,
            });
        }
    }
    FeasibleSet {
        eta: inst.sys.eta,
        halves,
    }
}

/// Controls for [`optimize_phases`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Enforce `(1−β)P_{T,k} ≥ P_b'` for every tag.
    pub energy_constraints: bool,
    /// Stop when the relative sum-rate gain of an outer step falls below this.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative surrogate gain that ends the inner ascent.
    pub inner_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            energy_constraints: true,
            tol: 1e-4,
            max_outer: 200,
            max_inner: 500,
            inner_tol: 1e-7,
        }
    }
}

/// Whether the tags meet their activation threshold at `θ`, with a relative
/// slack for rounding.
pub fn energy_feasible(inst: &MultiTagInstance, theta: &[C]) -> bool {
    let t = inst.power_threshold();
    (0..inst.tags()).all(|k| inst.received_power(theta, k) >= t * (1.0 - 1e-9))
}

fn check_start(inst: &MultiTagInstance, theta: &[C], energy: bool) -> Result<()> {
    if theta.len() != inst.elements() {
        return Err(Error::LengthMismatch {
            what: "theta",
            expected: inst.elements(),
            found: theta.len(),
        });
    }
    if let Some(n) = theta
        .iter()
        .position(|t| t.norm() > inst.sys.eta * (1.0 + 1e-9))
    {
        return Err(Error::Infeasible {
            tag: 0,
            detail: format!("|theta_{n}| exceeds eta"),
        });
    }
    if energy {
        let t = inst.power_threshold();
        if let Some(k) =
            (0..inst.tags()).find(|&k| inst.received_power(theta, k) < t * (1.0 - 1e-9))
        {
            return Err(Error::Infeasible {
                tag: k,
                detail: format!(
                    "received power {:e} W below {:e} W at the starting point",
                    inst.received_power(theta, k),
                    t
                ),
            });
        }
    }
    Ok(())
}

/// Maximises the surrogate for fixed `(λ, φ)` over the disks and, when
/// `energy` is set, the EH half-spaces linearised at `theta_prev`, by
/// projected gradient ascent with Armijo backtracking.
///
/// `theta_prev` must be feasible; the result never scores below it.
pub fn solve_theta(
    inst: &MultiTagInstance,
    lambda: &[f64],
    phase_ref: &[f64],
    theta_prev: &[C],
    energy: bool,
    max_iter: usize,
    rel_tol: f64,
) -> Result<Vec<C>> {
    check_start(inst, theta_prev, energy)?;
    let sur = QuadraticSurrogate::new(inst, lambda, phase_ref);
    let set = feasible_set(inst, theta_prev, energy);
    let mut x = theta_prev.to_vec();
    let mut fx = sur.value(&x)?;
    let mut step: Option<f64> = None;
    for _ in 0..max_iter {
        let g = sur.gradient(&x);
        let g_max = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(g_max > 0.0) {
            break;
        }
        let mut t = step.unwrap_or(inst.sys.eta / g_max);
        let mut next = None;
        for _ in 0..60 {
            let trial: Vec<C> = x.iter().zip(&g).map(|(a, b)| a + b * t).collect();
            let cand = set.project(&trial);
            let ascent: f64 = cand
                .iter()
                .zip(&x)
                .zip(&g)
                .map(|((c, a), b)| dot(&[*b], &[c - a]).re)
                .sum();
            if set.contains(&cand) {
                if let Ok(fc) = sur.value(&cand) {
                    if fc >= fx + 1e-4 * ascent && fc >= fx {
                        next = Some((cand, fc));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = next else { break };
        let gain = fc - fx;
        x = cand;
        fx = fc;
        step = Some(2.0 * t);
        if gain <= rel_tol * fx.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(x)
}

/// Which starting point [`optimize_phases`] used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitChoice {
    /// Co-phasing for the given tag, at amplitude `η`.
    CoPhased(usize),
    Zero,
    /// Caller-supplied.
    Given,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub theta: Vec<C>,
    pub lambda: Vec<f64>,
    /// Sum rate at the start and after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub init: InitChoice,
}

impl SolverState {
    pub fn sum_rate(&self) -> f64 {
        *self.trace.last().unwrap_or(&0.0)
    }
}

/// Co-phasing point for tag `k`: `conj(θ_n) = η·e^{j(arg f_k − arg g_{k,n} − arg h_n)}`.
pub fn co_phased(inst: &MultiTagInstance, k: usize) -> Vec<C> {
    let tf = inst.f[k].arg();
    inst.g[k]
        .iter()
        .zip(&inst.h)
        .map(|(g, h)| C::from_polar(inst.sys.eta, -wrap_angle(tf - g.arg() - h.arg())))
        .collect()
}

/// Feasible start: co-phasing for tag 0, then for the other tags, then
/// `θ = 0`.
pub fn initial_point(inst: &MultiTagInstance, energy: bool) -> Result<(Vec<C>, InitChoice)> {
    for k in 0..inst.tags() {
        let t = co_phased(inst, k);
        if !energy || energy_feasible(inst, &t) {
            return Ok((t, InitChoice::CoPhased(k)));
        }
    }
    let zero = vec![C::new(0.0, 0.0); inst.elements()];
    if !energy || energy_feasible(inst, &zero) {
        return Ok((zero, InitChoice::Zero));
    }
    let worst = (0..inst.tags())
        .min_by(|&a, &b| {
            inst.received_power(&co_phased(inst, a), a)
                .total_cmp(&inst.received_power(&co_phased(inst, b), b))
        })
        .unwrap_or(0);
    Err(Error::Infeasible {
        tag: worst,
        detail: format!(
            "no feasible starting point among {} candidates",
            inst.tags() + 1
        ),
    })
}

/// Alternating `λ`/`θ` updates from [`initial_point`].
pub fn optimize_phases(inst: &MultiTagInstance, opts: &SolverOptions) -> Result<SolverState> {
    let (theta, init) = initial_point(inst, opts.energy_constraints)?;
    run(inst, theta, init, opts)
}

/// Alternating `λ`/`θ` updates from a caller-supplied feasible point.
pub fn optimize_phases_from(
    inst: &MultiTagInstance,
    theta0: Vec<C>,
    opts: &SolverOptions,
) -> Result<SolverState> {
    check_start(inst, &theta0, opts.energy_constraints)?;
    run(inst, theta0, InitChoice::Given, opts)
}

fn run(
    inst: &MultiTagInstance,
    mut theta: Vec<C>,
    init: InitChoice,
    opts: &SolverOptions,
) -> Result<SolverState> {
    let mut trace = vec![sum_rate(inst, &theta)];
    let mut lambda = vec![0.0; inst.tags()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_outer {
        iterations += 1;
        let phase = phase_reference(inst, &theta);
        lambda = optimal_lambda(inst, &theta, &phase);
        theta = solve_theta(
            inst,
            &lambda,
            &phase,
            &theta,
            opts.energy_constraints,
            opts.max_inner,
            opts.inner_tol,
        )?;
        let prev = *trace.last().unwrap_or(&0.0);
        let obj = sum_rate(inst, &theta);
        trace.push(obj);
        if obj - prev <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(SolverState {
        theta,
        lambda,
        trace,
        iterations,
        converged,
        init,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::dbm_to_watts;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng, scale: f64) -> C {
        C::from_polar(
            scale * (0.2 + rng.random::<f64>()),
            (rng.random::<f64>() * 2.0 - 1.0) * PI,
        )
    }

    fn random_instance(rng: &mut ChaCha8Rng, k: usize, n: usize) -> MultiTagInstance {
        let sys = SystemParams::default()
            .with_elements(n)
            .with_power(dbm_to_watts(30.0));
        let f = (0..k).map(|_| rc(rng, 1e-3)).collect();
        let u = (0..k).map(|_| rc(rng, 3e-3)).collect();
        let g = (0..k)
            .map(|_| (0..n).map(|_| rc(rng, 3e-3)).collect())
            .collect();
        let h = (0..n).map(|_| rc(rng, 2e-2)).collect();
        MultiTagInstance::new(sys, f, u, g, h).unwrap()
    }

    fn random_theta(rng: &mut ChaCha8Rng, n: usize, eta: f64) -> Vec<C> {
        (0..n).map(|_| rc(rng, eta / 1.2)).collect()
    }

    fn fig11_links() -> MultiTagLinks {
        let fc = 3e9;
        let tag = |df: f64, du: f64, dg: f64| TagLinks {
            f: LinkParams::new(3.0, df, fc).unwrap(),
            u: LinkParams::new(3.0, du, fc).unwrap(),
            g: LinkParams::new(3.0, dg, fc).unwrap(),
        };
        MultiTagLinks {
            tags: vec![tag(4.0, 5.0, 4.5), tag(5.0, 5.0, 5.4)],
            h: LinkParams::new(3.0, 2.0, fc).unwrap(),
        }
    }

    #[test]
    fn sinr_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let inst = random_instance(&mut rng, 3, 16);
            let th = random_theta(&mut rng, 16, 0.8);
            for k in 0..3 {
                let a = sinr(&inst, &th, k);
                let b = sinr_from_channels(&inst, &th, k);
                assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} {b}");
            }
        }
    }

    #[test]
    fn sinr_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let one = random_instance(&mut rng, 1, 8);
        let th = random_theta(&mut rng, 8, 0.8);
        let s = one.sys();
        let expect = s.beta * s.power * one.signal(&th, 0).norm_sqr() / s.noise;
        assert!((sinr(&one, &th, 0) / expect - 1.0).abs() < 1e-14);
        assert!((sum_rate(&one, &th) - expect.ln_1p() / LN_2).abs() < 1e-12);
        let two = random_instance(&mut rng, 2, 8);
        let zero = vec![C::new(0.0, 0.0); 8];
        let direct = s.beta * s.power * two.b(0).norm_sqr()
            / (s.beta * s.power * two.b(1).norm_sqr() + s.noise);
        assert!((sinr(&two, &zero, 0) / direct - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sum_rate_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 3, 12);
        let th = random_theta(&mut rng, 12, 0.8);
        let perm = [2, 0, 1];
        let p = MultiTagInstance::new(
            *inst.sys(),
            perm.iter().map(|&i| inst.f()[i]).collect(),
            perm.iter().map(|&i| inst.u()[i]).collect(),
            perm.iter().map(|&i| inst.g(i).to_vec()).collect(),
            inst.h().to_vec(),
        )
        .unwrap();
        assert!((sum_rate(&inst, &th) - sum_rate(&p, &th)).abs() < 1e-12);
    }

    #[test]
    fn expanded_surrogate_matches_direct_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for trial in 0..100 {
            let inst = random_instance(&mut rng, 1 + trial % 4, 16);
            let th = random_theta(&mut rng, 16, 0.8);
            let th0 = random_theta(&mut rng, 16, 0.8);
            let phase: Vec<f64> = if trial % 2 == 0 {
                vec![0.0; inst.tags()]
            } else {
                phase_reference(&inst, &th0)
            };
            // λ near the optimum keeps the log arguments positive
            let lambda: Vec<f64> = optimal_lambda(&inst, &th0, &phase_reference(&inst, &th0))
                .iter()
                .map(|l| l * (0.5 + 0.5 * rng.random::<f64>()))
                .collect();
            let direct = surrogate_objective(&inst, &th, &lambda, &phase);
            let expanded = QuadraticSurrogate::new(&inst, &lambda, &phase).value(&th);
            match (direct, expanded) {
                (Ok(a), Ok(b)) => {
                    assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} {b}");
                    checked += 1;
                }
                (Err(_), Err(_)) => {}
                (a, b) => panic!("disagree on feasibility: {a:?} {b:?}"),
            }
            let sur = QuadraticSurrogate::new(&inst, &lambda, &phase);
            for k in 0..inst.tags() {
                let l = lambda[k];
                let s = inst.sys();
                let direct_arg = 1.0
                    + 2.0 * l * (s.beta * s.power).sqrt() * rotated_re(&inst, &th, k, phase[k])
                    - l * l * (inst.interference(&th, k) + s.noise);
                assert!(
                    (sur.log_argument(&th, k) - direct_arg).abs()
                        <= 1e-10 * (1.0 + direct_arg.abs())
                );
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn surrogate_at_zero_by_substitution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(&mut rng, 3, 10);
        let zero = vec![C::new(0.0, 0.0); 10];
        let ph = vec![0.0; 3];
        let lam = optimal_lambda(&inst, &zero, &ph);
        let s = inst.sys();
        let sq = (s.beta * s.power).sqrt();
        let expect: f64 = (0..3)
            .map(|k| {
                let int: f64 = (0..3)
                    .filter(|&i| i != k)
                    .map(|i| inst.b(i).norm_sqr())
                    .sum();
                (1.0 + 2.0 * lam[k] * sq * inst.b(k).re
                    - lam[k] * lam[k] * (s.beta * s.power * int + s.noise))
                    .log2()
            })
            .sum();
        let got = surrogate_objective(&inst, &zero, &lam, &ph).unwrap();
        assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn optimal_lambda_recovers_real_part_rate_and_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 3, 12);
            let th = random_theta(&mut rng, 12, 0.8);
            let ph = vec![0.0; 3];
            let lam = optimal_lambda(&inst, &th, &ph);
            let s = inst.sys();
            let real_rate: f64 = (0..3)
                .map(|k| {
                    let re = inst.signal(&th, k).re;
                    let g = s.beta * s.power * re * re / (inst.interference(&th, k) + s.noise);
                    g.ln_1p() / LN_2
                })
                .sum();
            let at = surrogate_objective(&inst, &th, &lam, &ph).unwrap();
            assert!((at - real_rate).abs() < 1e-10 * (1.0 + real_rate));
            for k in 0..3 {
                for d in [-1e-4, 1e-4] {
                    let mut l = lam.clone();
                    l[k] *= 1.0 + d;
                    if let Ok(v) = surrogate_objective(&inst, &th, &l, &ph) {
                        assert!(v <= at + 1e-12);
                    }
                }
            }
            // with the phase reference the surrogate is tight on the true rate
            let phr = phase_reference(&inst, &th);
            let lam_r = optimal_lambda(&inst, &th, &phr);
            let tight = surrogate_objective(&inst, &th, &lam_r, &phr).unwrap();
            assert!((tight - sum_rate(&inst, &th)).abs() < 1e-10 * (1.0 + tight));
        }
    }

    #[test]
    fn surrogate_is_concave_along_chords() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = random_instance(&mut rng, 3, 16);
        let th0 = random_theta(&mut rng, 16, 0.8);
        let ph = phase_reference(&inst, &th0);
        let lam = optimal_lambda(&inst, &th0, &ph);
        let sur = QuadraticSurrogate::new(&inst, &lam, &ph);
        let mut chords = 0;
        while chords < 100 {
            let x = random_theta(&mut rng, 16, 0.8);
            let y = random_theta(&mut rng, 16, 0.8);
            let mid: Vec<C> = x.iter().zip(&y).map(|(a, b)| (a + b) * 0.5).collect();
            if let (Ok(fx), Ok(fy), Ok(fm)) = (sur.value(&x), sur.value(&y), sur.value(&mid)) {
                assert!(fm >= 0.5 * (fx + fy) - 1e-12);
                chords += 1;
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(&mut rng, 2, 6);
        let th = random_theta(&mut rng, 6, 0.8);
        let ph = phase_reference(&inst, &th);
        let lam = optimal_lambda(&inst, &th, &ph);
        let sur = QuadraticSurrogate::new(&inst, &lam, &ph);
        let g = sur.gradient(&th);
        let h = 1e-6;
        for n in 0..6 {
            for (dir, part) in [(C::new(1.0, 0.0), 0), (C::new(0.0, 1.0), 1)] {
                let mut p = th.clone();
                let mut m = th.clone();
                p[n] += dir * h;
                m[n] -= dir * h;
                let fd = (sur.value(&p).unwrap() - sur.value(&m).unwrap()) / (2.0 * h);
                let an = if part == 0 { g[n].re } else { g[n].im };
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{fd} {an}");
            }
        }
    }

    #[test]
    fn linearized_power_is_a_minorant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = random_instance(&mut rng, 2, 12);
        let th0 = random_theta(&mut rng, 12, 0.8);
        for k in 0..2 {
            let exact = inst.received_power(&th0, k);
            assert!(
                (linearized_power(&inst, &th0, &th0, k) - exact).abs() < 1e-15 * exact.max(1.0)
            );
            for _ in 0..200 {
                let th = random_theta(&mut rng, 12, 0.8);
                assert!(
                    inst.received_power(&th, k) >= linearized_power(&inst, &th0, &th, k) - 1e-18
                );
            }
            let q = power_gradient(&inst, &th0, k);
            // central differences are exact on a quadratic
            let h = 1e-2;
            for n in 0..12 {
                for (dir, part) in [(C::new(1.0, 0.0), 0), (C::new(0.0, 1.0), 1)] {
                    let mut p = th0.clone();
                    let mut m = th0.clone();
                    p[n] += dir * h;
                    m[n] -= dir * h;
                    let fd = (inst.received_power(&p, k) - inst.received_power(&m, k)) / (2.0 * h);
                    let an = 2.0 * if part == 0 { q[n].re } else { q[n].im };
                    assert!((fd - an).abs() <= 1e-6 * (an.abs() + 1e-12), "{fd} {an}");
                }
            }
        }
    }

    #[test]
    fn projection_satisfies_variational_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 12;
        let mut checked = 0;
        while checked < 20 {
            let inst = random_instance(&mut rng, 3, n);
            let anchor = random_theta(&mut rng, n, 0.8);
            // half-spaces through points near the anchor so the anchor is feasible
            let halves: Vec<HalfSpace> = (0..3)
                .map(|_| {
                    let q: Vec<C> = (0..n).map(|_| rc(&mut rng, 1.0)).collect();
                    let d = dot(&q, &anchor).re - 0.05 * rng.random::<f64>();
                    HalfSpace {
                        q_norm_sqr: norm_sqr(&q),
                        q,
                        d,
                    }
                })
                .collect();
            let set = FeasibleSet {
                eta: inst.sys().eta,
                halves,
            };
            let z: Vec<C> = (0..n).map(|_| rc(&mut rng, 2.0)).collect();
            let x = set.project(&z);
            assert!(set.contains(&x));
            let dir: Vec<C> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
            let scale = norm_sqr(&dir).sqrt();
            // feasible comparison points: convex combinations with the anchor
            for t in [0.0, 0.3, 0.7, 1.0] {
                let y: Vec<C> = x
                    .iter()
                    .zip(&anchor)
                    .map(|(a, b)| a * (1.0 - t) + b * t)
                    .collect();
                let diff: Vec<C> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                let v = dot(&dir, &diff).re;
                assert!(v <= 1e-6 * scale * (1.0 + norm_sqr(&diff).sqrt()), "{v}");
            }
            for _ in 0..50 {
                let y = random_theta(&mut rng, n, 0.8);
                if set.contains(&y) {
                    let diff: Vec<C> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                    assert!(dot(&dir, &diff).re <= 1e-6 * scale * (1.0 + norm_sqr(&diff).sqrt()));
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn single_tag_reaches_co_phasing_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let fc = 3e9;
        let links = MultiTagLinks {
            tags: vec![TagLinks {
                f: LinkParams::new(3.0, 10.0, fc).unwrap(),
                u: LinkParams::new(3.0, 5.0, fc).unwrap(),
                g: LinkParams::new(3.0, 3.0, fc).unwrap(),
            }],
            h: LinkParams::new(3.0, 8.0, fc).unwrap(),
        };
        let sys = SystemParams::default().with_elements(64);
        let opts = SolverOptions {
            energy_constraints: false,
            ..Default::default()
        };
        for _ in 0..5 {
            let inst = MultiTagInstance::sample(&links, sys, &mut rng).unwrap();
            let s = inst.sys();
            let amp = inst.f()[0].norm()
                + inst
                    .g(0)
                    .iter()
                    .zip(inst.h())
                    .map(|(g, h)| s.eta * g.norm() * h.norm())
                    .sum::<f64>();
            let best = s.beta * s.power * inst.u()[0].norm_sqr() * amp * amp / s.noise;
            let best_rate = best.ln_1p() / LN_2;
            let zero = vec![C::new(0.0, 0.0); 64];
            let st = optimize_phases_from(&inst, zero, &opts).unwrap();
            assert!(st.converged);
            assert!(
                (st.sum_rate() / best_rate - 1.0).abs() < 0.01,
                "{} {best_rate}",
                st.sum_rate()
            );
            for w in st.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            assert!(st.theta.iter().all(|t| t.norm() <= s.eta + 1e-9));
            let warm = optimize_phases(&inst, &opts).unwrap();
            assert_eq!(warm.init, InitChoice::CoPhased(0));
            assert!((warm.sum_rate() / best_rate - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn interior_stationary_point_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = random_instance(&mut rng, 1, 4);
        // a single tag with zero cascade has zero gradient everywhere
        let sys = *inst.sys();
        let flat = MultiTagInstance::new(
            sys.with_elements(4),
            inst.f().to_vec(),
            inst.u().to_vec(),
            vec![vec![C::new(0.0, 0.0); 4]],
            inst.h().to_vec(),
        )
        .unwrap();
        let th = random_theta(&mut rng, 4, 0.8);
        let ph = phase_reference(&flat, &th);
        let lam = optimal_lambda(&flat, &th, &ph);
        let out = solve_theta(&flat, &lam, &ph, &th, false, 100, 1e-12).unwrap();
        assert_eq!(out, th);
    }

    #[test]
    fn energy_constraints_hold_after_every_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sys = SystemParams {
            p_b: dbm_to_watts(-30.0),
            ..SystemParams::default()
        }
        .with_elements(100)
        .with_power(dbm_to_watts(30.0));
        let links = fig11_links();
        let mut ran = 0;
        for _ in 0..10 {
            let inst = MultiTagInstance::sample(&links, sys, &mut rng).unwrap();
            match optimize_phases(&inst, &SolverOptions::default()) {
                Ok(st) => {
                    assert!(energy_feasible(&inst, &st.theta));
                    assert!(st.theta.iter().all(|t| t.norm() <= sys.eta * (1.0 + 1e-9)));
                    for w in st.trace.windows(2) {
                        assert!(w[1] >= w[0] - 1e-9);
                    }
                    ran += 1;
                }
                Err(Error::Infeasible { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(ran > 0);
    }

    #[test]
    fn infeasible_threshold_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sys = SystemParams {
            p_b: 1.0,
            ..SystemParams::default()
        }
        .with_elements(16);
        let inst = MultiTagInstance::sample(&fig11_links(), sys, &mut rng).unwrap();
        assert!(matches!(
            optimize_phases(&inst, &SolverOptions::default()),
            Err(Error::Infeasible { .. })
        ));
        let relaxed = SolverOptions {
            energy_constraints: false,
            ..Default::default()
        };
        assert!(optimize_phases(&inst, &relaxed).is_ok());
    }

    #[test]
    fn more_elements_never_hurt() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let opts = SolverOptions {
            energy_constraints: false,
            ..Default::default()
        };
        let sys = SystemParams::default().with_power(dbm_to_watts(30.0));
        for _ in 0..3 {
            let big =
                MultiTagInstance::sample(&fig11_links(), sys.with_elements(64), &mut rng).unwrap();
            let half = MultiTagInstance::new(
                sys.with_elements(32),
                big.f().to_vec(),
                big.u().to_vec(),
                (0..2).map(|k| big.g(k)[..32].to_vec()).collect(),
                big.h()[..32].to_vec(),
            )
            .unwrap();
            let small = optimize_phases(&half, &opts).unwrap();
            let mut start = small.theta.clone();
            start.resize(64, C::new(0.0, 0.0));
            let grown = optimize_phases_from(&big, start, &opts).unwrap();
            assert!(grown.sum_rate() >= small.sum_rate() - 1e-6);
        }
    }

    #[test]
    fn optimized_beats_random_and_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let sys = SystemParams::default()
            .with_elements(100)
            .with_power(dbm_to_watts(30.0));
        let opts = SolverOptions {
            energy_constraints: false,
            ..Default::default()
        };
        let mut wins = 0;
        for _ in 0..10 {
            let inst = MultiTagInstance::sample(&fig11_links(), sys, &mut rng).unwrap();
            let st = optimize_phases(&inst, &opts).unwrap();
            let random: Vec<C> = crate::ris::random_phases(100, &mut rng)
                .into_iter()
                .map(|t| C::from_polar(sys.eta, t))
                .collect();
            let zero = vec![C::new(0.0, 0.0); 100];
            let (o, r, d) = (
                st.sum_rate(),
                sum_rate(&inst, &random),
                sum_rate(&inst, &zero),
            );
            assert!(o >= d - 1e-9, "{o} {d}");
            if o > r {
                wins += 1;
            }
        }
        assert_eq!(wins, 10);
    }
}
