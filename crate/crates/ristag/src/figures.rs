//! Desk-scale presets for the reference figures.
//!
//! Every preset starts from the reference scenario and applies the figure's
//! caption parameters; [`preset`] returns that scenario so it can be echoed
//! and checked. Trial counts are chosen so each figure finishes in minutes on
//! a single core; `trials` and `seed` overrides scale them.

use ristag_core::single_tag::{
    asymptotics, avg_received_power, cascade_moments, quantized_rate_ub, rate_bounds, Fit, FitKind,
};
use ristag_core::units::{dbm_to_watts, watts_to_dbm};

use crate::commands::{analytic_point, multi_policy, solver_options};
use crate::config::{LinkSpec, Policy, ScenarioConfig, TagSpec};
use crate::csv::{format_number, Cell, Table};
use crate::error::{Error, Result};
use crate::montecarlo::{
    ber_quadrature_oracle, empirical_cdf, run_multi_tag, sample_single_tag, TrialReport,
};

pub const FIGURES: [u32; 9] = [3, 4, 6, 7, 8, 9, 10, 11, 12];

/// Caption scenario of figure `id`.
pub fn preset(id: u32) -> Result<ScenarioConfig> {
    let mut c = ScenarioConfig::default();
    match id {
        3 => {
            c.power_dbm = 10.0;
            c.links.f = LinkSpec::new(3.0, 10.0);
            c.links.u = LinkSpec::new(5.0, 5.0);
            c.links.h = LinkSpec::new(3.0, 5.0);
            c.links.g = LinkSpec::new(4.0, 6.0);
            c.trials = 100_000;
        }
        4 | 6 => {
            c.power_dbm = 20.0;
            c.links.u.distance = 5.0;
            c.links.h.distance = 1.0;
            c.derive_d_g = true;
            c.trials = if id == 4 { 20_000 } else { 5_000 };
        }
        7 | 9 | 10 => {
            c.trials = if id == 9 { 200_000 } else { 20_000 };
        }
        8 => {
            c.gamma_th_db = 0.0;
            c.links.f.distance = 8.0;
            c.links.u.distance = 4.0;
            c.links.h.distance = 1.0;
            c.links.g.distance = 8.0;
            c.trials = 200_000;
        }
        11 | 12 => {
            c.gamma_th_db = 0.0;
            c.links.h.distance = 2.0;
            let tag = |df: f64, du: f64, dg: f64| TagSpec {
                f: LinkSpec::new(3.0, df),
                u: LinkSpec::new(3.0, du),
                g: LinkSpec::new(3.0, dg),
            };
            c.tags = vec![tag(4.0, 5.0, 4.5), tag(5.0, 5.0, 5.4)];
            c.trials = 300;
        }
        _ => {
            return Err(Error::config(
                "figure",
                format!("no preset {id}; available: {FIGURES:?}"),
            ))
        }
    }
    Ok(c)
}

/// Runs figure `id` and returns its table.
pub fn run(id: u32, seed: Option<u64>, trials: Option<usize>) -> Result<Table> {
    let mut cfg = preset(id)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let mut t = match id {
        3 => snr_distribution(&cfg)?,
        4 => energy_outage_vs_distance(&cfg)?,
        6 => received_power_vs_distance(&cfg)?,
        7 => rate_gain(&cfg)?,
        8 => outage_vs_power(&cfg)?,
        9 => ber_vs_power(&cfg)?,
        10 => quantization(&cfg)?,
        11 | 12 => multi_tag(&cfg, id)?,
        _ => unreachable!("preset() rejects unknown ids"),
    };
    t.meta("figure", id.to_string());
    Ok(t)
}

fn with_meta(header: &[&str], id: u32, cfg: &ScenarioConfig) -> Table {
    Table::new(header.iter().copied()).with_run_metadata(&format!("figure {id}"), cfg)
}

fn steps(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Gamma and truncated-Gaussian fits of `γ*` against its ECDF.
fn snr_distribution(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &[
            "elements",
            "snr",
            "ecdf",
            "cdf_gamma",
            "cdf_tg",
            "pdf_gamma",
            "pdf_tg",
        ],
        3,
        cfg,
    );
    for n in [100usize, 200, 400] {
        let c = ScenarioConfig {
            elements: n,
            ..cfg.clone()
        };
        let sys = c.system();
        let links = c.single_links()?;
        let stats = cascade_moments(&links, &sys)?;
        let gbar = sys.avg_snr();
        let draws = sample_single_tag(&links, &sys, c.policy.phase_policy(), c.trials, c.seed)?;
        let snr: Vec<f64> = draws.iter().map(|d| gbar * d.lambda2()).collect();
        let ecdf = empirical_cdf(&snr)?;
        let gamma = stats.lambda_fit(FitKind::Gamma)?;
        let tg = stats.lambda_fit(FitKind::TruncGaussian)?;
        let cdf = |f: &Fit, r: f64| f.cdf((r / gbar).sqrt());
        // density of γ = γ̄Λ² from the density of Λ
        let pdf = |f: &Fit, r: f64| {
            let x = (r / gbar).sqrt();
            f.pdf(x) / (2.0 * (r * gbar).sqrt())
        };
        t.meta(
            format!("sup_distance_gamma_n{n}"),
            format_number(ecdf.sup_distance(|r| cdf(&gamma, r))),
        );
        t.meta(
            format!("sup_distance_tg_n{n}"),
            format_number(ecdf.sup_distance(|r| cdf(&tg, r))),
        );
        for r in steps(ecdf.quantile(0.001), ecdf.quantile(0.999), 120) {
            t.push(vec![
                n.into(),
                r.into(),
                ecdf.eval(r).into(),
                cdf(&gamma, r).into(),
                cdf(&tg, r).into(),
                pdf(&gamma, r).into(),
                pdf(&tg, r).into(),
            ]);
        }
    }
    Ok(t)
}

fn energy_outage_vs_distance(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &["elements", "d_f", "d_g", "eo_gamma", "eo_tg", "mc_eo"],
        4,
        cfg,
    );
    for n in [0usize, 100, 200, 400] {
        for d in steps(1.0, 40.0, 40) {
            let mut c = ScenarioConfig {
                elements: n,
                ..cfg.clone()
            };
            c.links.f.distance = d;
            let a = analytic_point(&c)?;
            let sys = c.system();
            let draws = sample_single_tag(
                &c.single_links()?,
                &sys,
                c.policy.phase_policy(),
                c.trials,
                c.seed,
            )?;
            let r = TrialReport::from_draws(&draws, &sys, c.gamma_th())?;
            t.push(vec![
                n.into(),
                d.into(),
                c.d_g().into(),
                a.eo.into(),
                a.eo_tg.into(),
                r.energy_outage.into(),
            ]);
        }
    }
    Ok(t)
}

/// `E{|f + Σ η e^{jθ_n} g_n h_n|²}` for i.i.d. uniform phases:
/// `Ω_f + N η² Ω_g Ω_h`.
fn random_phase_gain(c: &ScenarioConfig) -> Result<f64> {
    let l = c.single_links()?;
    Ok(l.f.omega() + c.elements as f64 * c.eta * c.eta * l.g.omega() * l.h.omega())
}

fn mean_received_power(c: &ScenarioConfig, policy: Policy) -> Result<f64> {
    let c = ScenarioConfig {
        policy,
        ..c.clone()
    };
    match policy {
        Policy::Random => Ok(c.system().power * random_phase_gain(&c)?),
        _ => Ok(avg_received_power(
            &c.system(),
            &cascade_moments(&c.single_links()?, &c.system())?,
        )),
    }
}

/// Largest `d_f` at which the mean received power reaches `P_b`, by
/// bisection on `[1, 10⁴]` m.
pub fn activation_distance(cfg: &ScenarioConfig, policy: Policy) -> Result<f64> {
    let target = dbm_to_watts(cfg.activation_dbm);
    let power_at = |d: f64| -> Result<f64> {
        let mut c = cfg.clone();
        c.links.f.distance = d;
        mean_received_power(&c, policy)
    };
    let (mut lo, mut hi) = (1.0f64, 1e4f64);
    if power_at(lo)? < target {
        return Ok(f64::NAN);
    }
    if power_at(hi)? >= target {
        return Ok(hi);
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if power_at(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn received_power_vs_distance(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &[
            "elements",
            "policy",
            "d_f",
            "rx_power_dbm",
            "mc_rx_power_dbm",
        ],
        6,
        cfg,
    );
    for n in [0usize, 100, 400] {
        let policies: &[Policy] = if n == 0 {
            &[Policy::Optimal]
        } else {
            &[Policy::Optimal, Policy::Random]
        };
        for &policy in policies {
            let base = ScenarioConfig {
                elements: n,
                policy,
                ..cfg.clone()
            };
            t.meta(
                format!("activation_distance_n{n}_{}", policy.label()),
                format_number(activation_distance(&base, policy)?),
            );
            for d in steps(1.0, 40.0, 40) {
                let mut c = base.clone();
                c.links.f.distance = d;
                let sys = c.system();
                let draws = sample_single_tag(
                    &c.single_links()?,
                    &sys,
                    c.policy.phase_policy(),
                    c.trials,
                    c.seed,
                )?;
                let mc = draws.iter().map(|x| x.y2).sum::<f64>() / draws.len() as f64 * sys.power;
                t.push(vec![
                    n.into(),
                    policy.label().into(),
                    d.into(),
                    watts_to_dbm(mean_received_power(&c, policy)?).into(),
                    watts_to_dbm(mc).into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn rate_gain(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &[
            "power_dbm",
            "elements",
            "rate_ub",
            "rate_ub_no_ris",
            "rate_gain",
            "mc_rate",
            "mc_rate_no_ris",
            "mc_rate_gain",
        ],
        7,
        cfg,
    );
    let ns: Vec<usize> = (0..=16).map(|i| i * 25).collect();
    for p in [0.0, 10.0, 20.0] {
        let c0 = ScenarioConfig {
            power_dbm: p,
            elements: 0,
            ..cfg.clone()
        };
        let sys0 = c0.system();
        let ub0 = rate_bounds(&sys0, &cascade_moments(&c0.single_links()?, &sys0)?).upper;
        let mc0 = mc_rate(&c0)?;
        for &n in &ns {
            let c = ScenarioConfig {
                elements: n,
                ..c0.clone()
            };
            let sys = c.system();
            let ub = rate_bounds(&sys, &cascade_moments(&c.single_links()?, &sys)?).upper;
            let mc = mc_rate(&c)?;
            t.push(vec![
                p.into(),
                n.into(),
                ub.into(),
                ub0.into(),
                (ub - ub0).into(),
                mc.into(),
                mc0.into(),
                (mc - mc0).into(),
            ]);
        }
    }
    Ok(t)
}

fn mc_rate(c: &ScenarioConfig) -> Result<f64> {
    let sys = c.system();
    let d = sample_single_tag(
        &c.single_links()?,
        &sys,
        c.policy.phase_policy(),
        c.trials,
        c.seed,
    )?;
    Ok(TrialReport::from_draws(&d, &sys, c.gamma_th())?.rate.mean)
}

fn power_grid() -> Vec<f64> {
    steps(-10.0, 40.0, 21)
}

/// MC reports on common draws across [`power_grid`].
fn power_sweep(c: &ScenarioConfig) -> Result<Vec<TrialReport>> {
    let sys = c.system();
    let draws = sample_single_tag(
        &c.single_links()?,
        &sys,
        c.policy.phase_policy(),
        c.trials,
        c.seed,
    )?;
    power_grid()
        .into_iter()
        .map(|p| TrialReport::from_draws(&draws, &sys.with_power(dbm_to_watts(p)), c.gamma_th()))
        .collect()
}

fn single_tag_cases(cfg: &ScenarioConfig) -> Vec<ScenarioConfig> {
    let mut out = vec![ScenarioConfig {
        policy: Policy::NoRis,
        ..cfg.clone()
    }];
    for n in [100usize, 200] {
        for policy in [Policy::Optimal, Policy::Random] {
            out.push(ScenarioConfig {
                elements: n,
                policy,
                ..cfg.clone()
            });
        }
    }
    out
}

fn outage_vs_power(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &[
            "elements",
            "policy",
            "power_dbm",
            "outage_printed",
            "outage_physical",
            "outage_physical_tg",
            "outage_asymptotic",
            "mc_outage",
        ],
        8,
        cfg,
    );
    for c in single_tag_cases(cfg) {
        let reports = power_sweep(&c)?;
        for (p, r) in power_grid().into_iter().zip(&reports) {
            let cp = ScenarioConfig {
                power_dbm: p,
                ..c.clone()
            };
            let mut row: Vec<Cell> = vec![
                cp.effective_elements().into(),
                cp.policy.label().into(),
                p.into(),
            ];
            if cp.policy == Policy::Random {
                row.extend(std::iter::repeat_n(Cell::Empty, 4));
            } else {
                let a = analytic_point(&cp)?;
                row.extend([
                    a.outage.printed.into(),
                    a.outage.physical.into(),
                    a.outage_tg.physical.into(),
                    a.asymptotics.outage.into(),
                ]);
            }
            row.push(r.outage.into());
            t.push(row);
        }
    }
    Ok(t)
}

fn ber_vs_power(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &[
            "elements",
            "policy",
            "power_dbm",
            "ber",
            "ber_method",
            "ber_oracle",
            "ber_asymptotic",
            "mc_ber",
        ],
        9,
        cfg,
    );
    for c in single_tag_cases(cfg) {
        let reports = power_sweep(&c)?;
        for (p, r) in power_grid().into_iter().zip(&reports) {
            let cp = ScenarioConfig {
                power_dbm: p,
                ..c.clone()
            };
            let mut row: Vec<Cell> = vec![
                cp.effective_elements().into(),
                cp.policy.label().into(),
                p.into(),
            ];
            if cp.policy == Policy::Random {
                row.extend(std::iter::repeat_n(Cell::Empty, 4));
            } else {
                let a = analytic_point(&cp)?;
                let sys = cp.system();
                row.extend([
                    a.ber.value.into(),
                    match a.ber.method {
                        ristag_core::single_tag::BerMethod::ClosedForm => "closed_form",
                        ristag_core::single_tag::BerMethod::Quadrature => "quadrature",
                    }
                    .into(),
                    ber_quadrature_oracle(&a.fit, sys.avg_snr()).into(),
                    asymptotics(&sys, &a.stats, cp.gamma_th())?.ber.into(),
                ]);
            }
            row.push(r.ber.into());
            t.push(row);
        }
    }
    Ok(t)
}

fn quantization(cfg: &ScenarioConfig) -> Result<Table> {
    let mut t = with_meta(
        &[
            "elements",
            "bits",
            "power_dbm",
            "rate_ub",
            "quantized_rate_ub",
            "ratio_percent",
            "mc_ratio_percent",
        ],
        10,
        cfg,
    );
    let powers = steps(-10.0, 40.0, 11);
    for n in [100usize, 400] {
        let base = ScenarioConfig {
            elements: n,
            ..cfg.clone()
        };
        let sys = base.system();
        let links = base.single_links()?;
        let stats = cascade_moments(&links, &sys)?;
        // identical draw sequences, so the runs are paired
        let cont = sample_single_tag(
            &links,
            &sys,
            Policy::Optimal.phase_policy(),
            base.trials,
            base.seed,
        )?;
        for bits in [1u32, 2, 4] {
            let quant = sample_single_tag(
                &links,
                &sys,
                Policy::Quantized { bits }.phase_policy(),
                base.trials,
                base.seed,
            )?;
            for &p in &powers {
                let s = sys.with_power(dbm_to_watts(p));
                let ub = rate_bounds(&s, &stats).upper;
                let qub = quantized_rate_ub(&s, &stats, bits)?;
                let rc = TrialReport::from_draws(&cont, &s, 1.0)?.rate.mean;
                let rq = TrialReport::from_draws(&quant, &s, 1.0)?.rate.mean;
                t.push(vec![
                    n.into(),
                    bits.into(),
                    p.into(),
                    ub.into(),
                    qub.into(),
                    (100.0 * qub / ub).into(),
                    (100.0 * rq / rc).into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn multi_tag(cfg: &ScenarioConfig, id: u32) -> Result<Table> {
    let k = cfg.tags.len();
    let mut header: Vec<String> = ["elements", "policy", "power_dbm", "sum_rate"]
        .map(String::from)
        .to_vec();
    for tag in 0..k {
        header.push(format!("tag{tag}_outage"));
        header.push(format!("tag{tag}_ber"));
    }
    header.extend(["infeasible", "max_trace_drop"].map(String::from));
    let mut t = Table::new(header).with_run_metadata(&format!("figure {id}"), cfg);
    let cases = [
        (100usize, Policy::Optimal),
        (100, Policy::Random),
        (0, Policy::NoRis),
    ];
    for (n, policy) in cases {
        for p in steps(0.0, 40.0, 9) {
            let c = ScenarioConfig {
                elements: n,
                policy,
                power_dbm: p,
                ..cfg.clone()
            };
            let r = run_multi_tag(
                &c.multi_links()?,
                &c.system(),
                multi_policy(policy)?,
                c.gamma_th(),
                &solver_options(&c),
                c.trials,
                c.seed,
            )?;
            let mut row: Vec<Cell> = vec![
                c.effective_elements().into(),
                policy.label().into(),
                p.into(),
                r.sum_rate.mean.into(),
            ];
            for tag in &r.tags {
                row.push(tag.outage.into());
                row.push(tag.ber.into());
            }
            row.push(r.infeasible.into());
            row.push(r.max_trace_drop.into());
            t.push(row);
        }
    }
    Ok(t)
}

/// Caption parameters of a preset, for echoing.
pub fn caption(cfg: &ScenarioConfig) -> String {
    let l = &cfg.links;
    let mut s = format!(
        "P = {} dBm, d_f = {} m, d_u = {} m, d_h = {} m, d_g = {}, m = ({}, {}, {}, {}), beta = {}, phi = {}, eta = {}, gamma_th = {} dB",
        cfg.power_dbm,
        l.f.distance,
        l.u.distance,
        l.h.distance,
        if cfg.derive_d_g {
            "sqrt(d_h^2 + d_f^2)".to_string()
        } else {
            format!("{} m", l.g.distance)
        },
        l.f.m,
        l.u.m,
        l.h.m,
        l.g.m,
        cfg.beta,
        cfg.phi,
        cfg.eta,
        cfg.gamma_th_db
    );
    for (k, t) in cfg.tags.iter().enumerate() {
        s.push_str(&format!(
            "; tag {k}: d_f = {} m, d_u = {} m, d_g = {} m",
            t.f.distance, t.u.distance, t.g.distance
        ));
    }
    s
}
