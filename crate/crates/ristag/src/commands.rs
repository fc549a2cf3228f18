//! The `analyze`, `simulate` and `optimize` commands as table producers.

use rayon::prelude::*;
use ristag_core::multi_tag::{self, optimize_phases, MultiTagInstance, SolverOptions, SolverState};
use ristag_core::single_tag::{
    asymptotics, avg_ber, avg_harvested_power, avg_received_power, cascade_moments, eo_probability,
    outage_probability, quantized_rate_ub, rate_bounds, Asymptotics, BerEstimate, BerMethod,
    CascadeStats, FitKind, GammaFit, Outage, RateBounds,
};
use ristag_core::units::{linear_to_db, watts_to_dbm};

use crate::config::{Policy, ScenarioConfig};
use crate::csv::{Cell, Table};
use crate::error::{Error, Result};
use crate::montecarlo::{chunk_rng, run_multi_tag, sample_single_tag, MultiPolicy, TrialReport};

/// Every closed-form quantity at one scenario point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPoint {
    pub stats: CascadeStats,
    pub fit: GammaFit,
    /// Average received power at the tag, W.
    pub rx_power: f64,
    /// Average harvested power, W.
    pub harvested: f64,
    pub eo: f64,
    pub eo_tg: f64,
    pub rate: RateBounds,
    /// Rate upper bound with quantized phases, for quantized policies.
    pub quantized_rate_ub: Option<f64>,
    pub outage: Outage,
    pub outage_tg: Outage,
    pub ber: BerEstimate,
    pub asymptotics: Asymptotics,
}

pub fn analytic_point(cfg: &ScenarioConfig) -> Result<AnalyticPoint> {
    if cfg.policy == Policy::Random {
        return Err(Error::config(
            "policy",
            "random phases have no closed form; use `simulate`",
        ));
    }
    if cfg.is_multi_tag() {
        return Err(Error::config(
            "tags",
            "multi-tag scenarios have no closed forms; use `simulate` or `optimize`",
        ));
    }
    let sys = cfg.system();
    let links = cfg.single_links()?;
    let stats = cascade_moments(&links, &sys)?;
    let gamma_th = cfg.gamma_th();
    let quantized_rate_ub = match cfg.policy {
        Policy::Quantized { bits } => Some(quantized_rate_ub(&sys, &stats, bits)?),
        _ => None,
    };
    Ok(AnalyticPoint {
        fit: stats.lambda_gamma()?,
        rx_power: avg_received_power(&sys, &stats),
        harvested: avg_harvested_power(&sys, &stats),
        eo: eo_probability(&sys, &stats, FitKind::Gamma)?,
        eo_tg: eo_probability(&sys, &stats, FitKind::TruncGaussian)?,
        rate: rate_bounds(&sys, &stats),
        quantized_rate_ub,
        outage: outage_probability(&sys, &stats, FitKind::Gamma, gamma_th)?,
        outage_tg: outage_probability(&sys, &stats, FitKind::TruncGaussian, gamma_th)?,
        ber: avg_ber(&sys, &stats)?,
        asymptotics: asymptotics(&sys, &stats, gamma_th)?,
        stats,
    })
}

const SCENARIO_COLUMNS: [&str; 11] = [
    "policy",
    "power_dbm",
    "elements",
    "d_f",
    "d_u",
    "d_g",
    "d_h",
    "bits",
    "gamma_th_db",
    "activation_dbm",
    "noise_dbm",
];

fn scenario_cells(cfg: &ScenarioConfig) -> Vec<Cell> {
    let bits = match cfg.policy {
        Policy::Quantized { bits } => Some(bits),
        _ => None,
    };
    vec![
        cfg.policy.label().into(),
        cfg.power_dbm.into(),
        cfg.effective_elements().into(),
        cfg.links.f.distance.into(),
        cfg.links.u.distance.into(),
        cfg.d_g().into(),
        cfg.links.h.distance.into(),
        bits.into(),
        cfg.gamma_th_db.into(),
        cfg.activation_dbm.into(),
        cfg.noise_dbm.into(),
    ]
}

const ANALYTIC_COLUMNS: [&str; 19] = [
    "avg_snr_db",
    "gamma_k",
    "gamma_lambda",
    "rx_power_dbm",
    "harvested_power_dbm",
    "eo_probability",
    "eo_probability_tg",
    "rate_lb",
    "rate_ub",
    "quantized_rate_ub",
    "outage_printed",
    "outage_physical",
    "outage_physical_tg",
    "ber",
    "ber_method",
    "diversity_order",
    "coding_gain",
    "array_gain",
    "outage_asymptotic",
];

fn ber_method_label(m: BerMethod) -> &'static str {
    match m {
        BerMethod::ClosedForm => "closed_form",
        BerMethod::Quadrature => "quadrature",
    }
}

fn analytic_cells(cfg: &ScenarioConfig, a: &AnalyticPoint) -> Vec<Cell> {
    vec![
        linear_to_db(cfg.system().avg_snr()).into(),
        a.fit.k.into(),
        a.fit.lambda.into(),
        watts_to_dbm(a.rx_power).into(),
        watts_to_dbm(a.harvested).into(),
        a.eo.into(),
        a.eo_tg.into(),
        a.rate.lower.into(),
        a.rate.upper.into(),
        a.quantized_rate_ub.into(),
        a.outage.printed.into(),
        a.outage.physical.into(),
        a.outage_tg.physical.into(),
        a.ber.value.into(),
        ber_method_label(a.ber.method).into(),
        a.asymptotics.diversity_order.into(),
        a.asymptotics.coding_gain.into(),
        a.asymptotics.array_gain.into(),
        a.asymptotics.outage.into(),
    ]
}

/// One row of closed-form quantities per sweep point.
pub fn analyze(cfg: &ScenarioConfig) -> Result<Table> {
    cfg.validate()?;
    let points = cfg.points();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|(_, p)| {
            let a = analytic_point(p)?;
            let mut row = scenario_cells(p);
            row.extend(analytic_cells(p, &a));
            row.push(a.asymptotics.ber.into());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header: Vec<&str> = SCENARIO_COLUMNS.to_vec();
    header.extend(ANALYTIC_COLUMNS);
    header.push("ber_asymptotic");
    let mut t = Table::new(header).with_run_metadata("analyze", cfg);
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

const MC_COLUMNS: [&str; 16] = [
    "mc_rx_power_dbm",
    "mc_harvested_power_dbm",
    "mc_harvested_rel_std_err",
    "mc_eo",
    "mc_snr_outage",
    "mc_outage",
    "mc_ber",
    "mc_rate",
    "mc_rate_std_err",
    "gap_harvested_rel",
    "gap_eo_abs",
    "gap_outage_abs",
    "gap_outage_rel",
    "gap_ber_rel",
    "gap_rate_ub",
    "rate_in_bounds",
];

fn rel_gap(analytic: f64, mc: f64) -> f64 {
    (analytic - mc) / mc
}

fn mc_cells(r: &TrialReport, a: Option<&AnalyticPoint>) -> Vec<Cell> {
    let mut row: Vec<Cell> = vec![
        watts_to_dbm(r.received_power.mean).into(),
        watts_to_dbm(r.harvested_power.mean).into(),
        (r.harvested_power.std_error() / r.harvested_power.mean).into(),
        r.energy_outage.into(),
        r.snr_outage.into(),
        r.outage.into(),
        r.ber.into(),
        r.rate.mean.into(),
        r.rate.std_error().into(),
    ];
    match a {
        Some(a) => {
            let ub = a.quantized_rate_ub.unwrap_or(a.rate.upper);
            row.extend([
                rel_gap(a.harvested, r.harvested_power.mean).into(),
                (a.eo - r.energy_outage).into(),
                (a.outage.physical - r.outage).into(),
                rel_gap(a.outage.physical, r.outage).into(),
                rel_gap(a.ber.value, r.ber).into(),
                (ub - r.rate.mean).into(),
                (a.quantized_rate_ub.is_some()
                    || (a.rate.lower <= r.rate.mean && r.rate.mean <= ub))
                    .into(),
            ]);
        }
        None => row.extend(std::iter::repeat_n(Cell::Empty, 7)),
    }
    row
}

/// Monte-Carlo columns beside the closed forms, one row per sweep point.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Table> {
    cfg.validate()?;
    if cfg.is_multi_tag() {
        return simulate_multi(cfg);
    }
    let points = cfg.points();
    // channel draws are shared across points when the sweep leaves them alone
    let shared = match cfg.sweep {
        Some(s) if !s.var.changes_channels() => {
            let p = &points[0].1;
            Some(sample_single_tag(
                &p.single_links()?,
                &p.system(),
                p.policy.phase_policy(),
                cfg.trials,
                cfg.seed,
            )?)
        }
        _ => None,
    };
    let mut header: Vec<&str> = SCENARIO_COLUMNS.to_vec();
    header.extend(ANALYTIC_COLUMNS);
    header.extend(MC_COLUMNS);
    let mut t = Table::new(header).with_run_metadata("simulate", cfg);
    for (_, p) in &points {
        let sys = p.system();
        let report = match &shared {
            Some(d) => TrialReport::from_draws(d, &sys, p.gamma_th())?,
            None => {
                let d = sample_single_tag(
                    &p.single_links()?,
                    &sys,
                    p.policy.phase_policy(),
                    p.trials,
                    p.seed,
                )?;
                TrialReport::from_draws(&d, &sys, p.gamma_th())?
            }
        };
        let analytic = match p.policy {
            Policy::Random => None,
            _ => Some(analytic_point(p)?),
        };
        let mut row = scenario_cells(p);
        match &analytic {
            Some(a) => row.extend(analytic_cells(p, a)),
            None => row.extend(std::iter::repeat_n(Cell::Empty, ANALYTIC_COLUMNS.len())),
        }
        row.extend(mc_cells(&report, analytic.as_ref()));
        t.push(row);
    }
    Ok(t)
}

pub fn multi_policy(policy: Policy) -> Result<MultiPolicy> {
    match policy {
        Policy::Optimal => Ok(MultiPolicy::Optimized),
        Policy::Random => Ok(MultiPolicy::Random),
        Policy::NoRis => Ok(MultiPolicy::NoRis),
        Policy::Quantized { .. } => Err(Error::config(
            "policy",
            "multi-tag scenarios have no quantized policy",
        )),
    }
}

pub fn solver_options(cfg: &ScenarioConfig) -> SolverOptions {
    SolverOptions {
        energy_constraints: cfg.energy_constraints,
        ..Default::default()
    }
}

fn simulate_multi(cfg: &ScenarioConfig) -> Result<Table> {
    let k = cfg.tags.len();
    let mut header: Vec<String> = [
        "policy",
        "power_dbm",
        "elements",
        "gamma_th_db",
        "activation_dbm",
    ]
    .map(String::from)
    .to_vec();
    header.extend(["sum_rate", "sum_rate_std_err"].map(String::from));
    for t in 0..k {
        for c in ["outage", "energy_outage", "ber", "rate"] {
            header.push(format!("tag{t}_{c}"));
        }
    }
    header.extend(["infeasible", "unconverged", "max_trace_drop"].map(String::from));
    let mut table = Table::new(header).with_run_metadata("simulate", cfg);
    for (_, p) in cfg.points() {
        let r = run_multi_tag(
            &p.multi_links()?,
            &p.system(),
            multi_policy(p.policy)?,
            p.gamma_th(),
            &solver_options(&p),
            p.trials,
            p.seed,
        )?;
        let mut row: Vec<Cell> = vec![
            p.policy.label().into(),
            p.power_dbm.into(),
            p.effective_elements().into(),
            p.gamma_th_db.into(),
            p.activation_dbm.into(),
            r.sum_rate.mean.into(),
            r.sum_rate.std_error().into(),
        ];
        for t in &r.tags {
            row.extend([
                t.outage.into(),
                t.energy_outage.into(),
                t.ber.into(),
                t.rate.mean.into(),
            ]);
        }
        row.extend([
            r.infeasible.into(),
            r.unconverged.into(),
            r.max_trace_drop.into(),
        ]);
        table.push(row);
    }
    Ok(table)
}

/// Tables written by `optimize`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutput {
    /// Sum rate per outer iteration.
    pub trace: Table,
    /// Converged per-element coefficients.
    pub theta: Table,
    /// Per-tag SINR, rate and activation.
    pub tags: Table,
    pub state: SolverState,
    /// Whether the activation constraints had to be dropped.
    pub relaxed: bool,
}

/// Optimizes one channel draw of the scenario (a single-tag scenario is
/// treated as one tag).
pub fn optimize(cfg: &ScenarioConfig) -> Result<OptimizeOutput> {
    cfg.validate()?;
    if cfg.sweep.is_some() {
        return Err(Error::config(
            "sweep",
            "`optimize` runs a single draw; remove the sweep",
        ));
    }
    if cfg.policy != Policy::Optimal {
        return Err(Error::config(
            "policy",
            "`optimize` requires the `optimal` policy",
        ));
    }
    if cfg.effective_elements() == 0 {
        return Err(Error::config(
            "elements",
            "`optimize` needs at least one element",
        ));
    }
    let mut rng = chunk_rng(cfg.seed, 0);
    let inst = MultiTagInstance::sample(&cfg.multi_links()?, cfg.system(), &mut rng)?;
    let opts = solver_options(cfg);
    let (state, relaxed) = match optimize_phases(&inst, &opts) {
        Ok(s) => (s, false),
        Err(ristag_core::Error::Infeasible { .. }) => {
            let o = SolverOptions {
                energy_constraints: false,
                ..opts
            };
            (optimize_phases(&inst, &o)?, true)
        }
        Err(e) => return Err(e.into()),
    };
    let constraints = if !cfg.energy_constraints {
        "off"
    } else if relaxed {
        "relaxed (no feasible starting point)"
    } else {
        "enforced"
    };
    let meta = |mut t: Table| {
        t = t.with_run_metadata("optimize", cfg);
        t.meta("energy_constraints", constraints);
        t.meta("iterations", state.iterations.to_string());
        t.meta("converged", state.converged.to_string());
        t
    };

    let mut trace = meta(Table::new(["iteration", "sum_rate"]));
    for (i, v) in state.trace.iter().enumerate() {
        trace.push(vec![i.into(), (*v).into()]);
    }

    // the surface applies conj(θ_n)
    let mut theta = meta(Table::new(["element", "phase_rad", "modulus"]));
    for (n, t) in state.theta.iter().enumerate() {
        theta.push(vec![n.into(), (-t.arg()).into(), t.norm().into()]);
    }

    let threshold = inst.power_threshold();
    let mut tags = meta(Table::new([
        "tag",
        "sinr",
        "sinr_db",
        "rate",
        "received_power_dbm",
        "activated",
    ]));
    for k in 0..inst.tags() {
        let g = multi_tag::sinr(&inst, &state.theta, k);
        let p = inst.received_power(&state.theta, k);
        tags.push(vec![
            k.into(),
            g.into(),
            linear_to_db(g).into(),
            (g.ln_1p() / std::f64::consts::LN_2).into(),
            watts_to_dbm(p).into(),
            (p >= threshold * (1.0 - 1e-9)).into(),
        ]);
    }
    Ok(OptimizeOutput {
        trace,
        theta,
        tags,
        state,
        relaxed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{LinkSpec, Sweep, SweepVar, TagSpec};

    fn small(cfg: ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            trials: 2000,
            ..cfg
        }
    }

    #[test]
    fn default_noise_column() {
        let t = analyze(&ScenarioConfig::default()).unwrap();
        assert_eq!(t.rows().len(), 1);
        assert!((t.values("noise_dbm")[0] + 94.0).abs() < 1e-12);
        assert!((t.values("avg_snr_db")[0] - (10.0 + 10.0 * 0.6f64.log10() + 94.0)).abs() < 1e-9);
    }

    #[test]
    fn sweep_rows_in_order() {
        let cfg = ScenarioConfig {
            sweep: Some("power_dbm:0:25:6".parse().unwrap()),
            ..Default::default()
        };
        let t = analyze(&cfg).unwrap();
        assert_eq!(
            t.values("power_dbm"),
            vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]
        );
        let ub = t.values("rate_ub");
        assert!(ub.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn no_ris_policy_zeroes_surface() {
        let base = analyze(&ScenarioConfig {
            elements: 0,
            ..Default::default()
        })
        .unwrap();
        let none = analyze(&ScenarioConfig {
            policy: Policy::NoRis,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(none.values("elements"), vec![0.0]);
        for c in ["rx_power_dbm", "rate_ub", "ber", "array_gain"] {
            assert_eq!(none.values(c), base.values(c), "{c}");
        }
    }

    #[test]
    fn random_policy_needs_simulation() {
        let cfg = ScenarioConfig {
            policy: Policy::Random,
            ..Default::default()
        };
        assert!(matches!(analyze(&cfg), Err(Error::Config { .. })));
        let t = simulate(&small(cfg)).unwrap();
        assert!(t.values("rate_ub")[0].is_nan());
        assert!(t.values("mc_rate")[0] > 0.0);
    }

    #[test]
    fn simulate_is_byte_reproducible() {
        let cfg = small(ScenarioConfig {
            elements: 16,
            sweep: Some("power_dbm:0:20:3".parse().unwrap()),
            ..Default::default()
        });
        let a = simulate(&cfg).unwrap().render();
        let b = simulate(&cfg).unwrap().render();
        assert_eq!(a, b);
        assert!(a.contains("# trials: 2000"));
        let c = simulate(&ScenarioConfig { seed: 2, ..cfg })
            .unwrap()
            .render();
        assert_ne!(a, c);
    }

    #[test]
    fn shared_draws_match_per_point_draws() {
        let cfg = small(ScenarioConfig {
            elements: 8,
            sweep: Some(Sweep {
                var: SweepVar::PowerDbm,
                lo: 5.0,
                hi: 15.0,
                steps: 2,
            }),
            ..Default::default()
        });
        let swept = simulate(&cfg).unwrap();
        let single = simulate(&ScenarioConfig {
            power_dbm: 15.0,
            sweep: None,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(swept.values("mc_rate")[1], single.values("mc_rate")[0]);
    }

    #[test]
    fn optimize_single_tag_defaults() {
        let out = optimize(&ScenarioConfig::default()).unwrap();
        assert!(out.state.iterations <= 50);
        let tr = out.trace.values("sum_rate");
        assert!(tr.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert_eq!(out.theta.rows().len(), 100);
        assert!(out.theta.values("modulus").iter().all(|m| *m <= 0.8 + 1e-9));
        assert_eq!(out.tags.rows().len(), 1);
    }

    #[test]
    fn optimize_two_tag_geometry_runs() {
        let tag = |df: f64, du: f64, dg: f64| TagSpec {
            f: LinkSpec::new(3.0, df),
            u: LinkSpec::new(3.0, du),
            g: LinkSpec::new(3.0, dg),
        };
        let mut cfg = ScenarioConfig {
            tags: vec![tag(4.0, 5.0, 4.5), tag(5.0, 5.0, 5.4)],
            ..Default::default()
        };
        cfg.links.h.distance = 2.0;
        let out = optimize(&cfg).unwrap();
        assert_eq!(out.tags.rows().len(), 2);
        assert!(out.trace.metadata("energy_constraints").is_some());
        let s = simulate(&ScenarioConfig { trials: 32, ..cfg }).unwrap();
        assert_eq!(s.rows().len(), 1);
        assert!(s.values("tag1_outage")[0] >= 0.0);
    }

    #[test]
    fn optimize_rejects_sweeps() {
        let cfg = ScenarioConfig {
            sweep: Some("power_dbm:0:1:2".parse().unwrap()),
            ..Default::default()
        };
        assert!(matches!(optimize(&cfg), Err(Error::Config { field, .. }) if field == "sweep"));
    }
}
