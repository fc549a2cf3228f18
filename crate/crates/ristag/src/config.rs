//! Scenario files.
//!
//! A scenario is a JSON document; every field is optional and defaults to the
//! reference settings (3 GHz, 10 MHz bandwidth with a 10 dB noise figure,
//! `m = 3` on every link, `d_f, d_u, d_g, d_h = 10, 5, 3, 8` m, `β = 0.6`,
//! `φ = 0.8`, `η = 0.8`, `N = 100`, `P = 10` dBm, `P_b = −20` dBm). Powers are
//! given in dBm and converted to watts once, in [`ScenarioConfig::system`].

use std::fmt;
use std::str::FromStr;

use ristag_core::channel::{LinkParams, MIN_DISTANCE_M, MIN_SHAPE};
use ristag_core::multi_tag::{MultiTagLinks, TagLinks};
use ristag_core::ris::PhasePolicy;
use ristag_core::single_tag::{SingleTagLinks, SystemParams};
use ristag_core::units::{db_to_linear, dbm_to_watts};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest surface the tools accept.
pub const MAX_ELEMENTS: usize = 1 << 20;
/// Largest phase resolution accepted for quantized surfaces.
pub const MAX_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// Nakagami shape.
    pub m: f64,
    /// Distance in metres.
    pub distance: f64,
}

impl LinkSpec {
    pub const fn new(m: f64, distance: f64) -> Self {
        Self { m, distance }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.m >= MIN_SHAPE) || !self.m.is_finite() {
            return Err(Error::config(
                format!("{field}.m"),
                format!(
                    "Nakagami shape {} must be finite and >= {MIN_SHAPE}",
                    self.m
                ),
            ));
        }
        if !(self.distance >= MIN_DISTANCE_M) || !self.distance.is_finite() {
            return Err(Error::config(
                format!("{field}.distance"),
                format!(
                    "distance {} m must be finite and >= {MIN_DISTANCE_M} m",
                    self.distance
                ),
            ));
        }
        Ok(())
    }

    fn params(&self, carrier_hz: f64) -> Result<LinkParams> {
        Ok(LinkParams::new(self.m, self.distance, carrier_hz)?)
    }
}

/// Links of the single-tag geometry; `h` is also the shared emitter-to-RIS
/// link of multi-tag scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSet {
    /// Emitter to tag.
    pub f: LinkSpec,
    /// Tag to reader.
    pub u: LinkSpec,
    /// RIS to tag.
    pub g: LinkSpec,
    /// Emitter to RIS.
    pub h: LinkSpec,
}

impl Default for LinkSet {
    fn default() -> Self {
        Self {
            f: LinkSpec::new(3.0, 10.0),
            u: LinkSpec::new(3.0, 5.0),
            g: LinkSpec::new(3.0, 3.0),
            h: LinkSpec::new(3.0, 8.0),
        }
    }
}

/// Per-tag links of a multi-tag scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSpec {
    pub f: LinkSpec,
    pub u: LinkSpec,
    pub g: LinkSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Co-phased (single tag) or optimized (multi-tag) surface.
    Optimal,
    Quantized {
        bits: u32,
    },
    Random,
    NoRis,
}

impl Policy {
    pub fn phase_policy(&self) -> PhasePolicy {
        match *self {
            Policy::Optimal => PhasePolicy::OptimalContinuous,
            Policy::Quantized { bits } => PhasePolicy::Quantized { bits },
            Policy::Random => PhasePolicy::Random,
            Policy::NoRis => PhasePolicy::NoRis,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Policy::Optimal => "optimal".into(),
            Policy::Quantized { bits } => format!("quantized{bits}"),
            Policy::Random => "random".into(),
            Policy::NoRis => "no_ris".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    PowerDbm,
    Elements,
    DF,
    DU,
    DG,
    DH,
    Bits,
    GammaThDb,
    ActivationDbm,
}

impl SweepVar {
    pub const ALL: [SweepVar; 9] = [
        SweepVar::PowerDbm,
        SweepVar::Elements,
        SweepVar::DF,
        SweepVar::DU,
        SweepVar::DG,
        SweepVar::DH,
        SweepVar::Bits,
        SweepVar::GammaThDb,
        SweepVar::ActivationDbm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::PowerDbm => "power_dbm",
            SweepVar::Elements => "elements",
            SweepVar::DF => "d_f",
            SweepVar::DU => "d_u",
            SweepVar::DG => "d_g",
            SweepVar::DH => "d_h",
            SweepVar::Bits => "bits",
            SweepVar::GammaThDb => "gamma_th_db",
            SweepVar::ActivationDbm => "activation_dbm",
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, SweepVar::Elements | SweepVar::Bits)
    }

    /// Whether the channel realizations of a single-tag run depend on it.
    pub fn changes_channels(&self) -> bool {
        !matches!(
            self,
            SweepVar::PowerDbm | SweepVar::GammaThDb | SweepVar::ActivationDbm
        )
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepVar::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SweepVar::ALL.iter().map(|v| v.name()).collect();
                Error::config(
                    "sweep.var",
                    format!(
                        "unknown variable `{s}`; expected one of {}",
                        names.join(", ")
                    ),
                )
            })
    }
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub var: SweepVar,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.lo];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let x = self.lo + (self.hi - self.lo) * (i as f64 / last);
                if self.var.is_integer() {
                    x.round()
                } else {
                    x
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("sweep.steps", "must be >= 1"));
        }
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::config("sweep", "lo and hi must be finite"));
        }
        if self.var.is_integer() && (self.lo.fract() != 0.0 || self.hi.fract() != 0.0) {
            return Err(Error::config(
                "sweep",
                format!("`{}` takes integer bounds", self.var),
            ));
        }
        Ok(())
    }
}

/// `var:lo:hi:steps`, as accepted by `--sweep`.
impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::config(
                "sweep",
                format!("`{s}` is not var:lo:hi:steps"),
            ));
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            parts[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("sweep.{what}"), format!("`{}`: {e}", parts[i])))
        };
        let steps = parts[3]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::config("sweep.steps", format!("`{}`: {e}", parts[3])))?;
        let sweep = Sweep {
            var: parts[0].trim().parse()?,
            lo: num(1, "lo")?,
            hi: num(2, "hi")?,
            steps,
        };
        sweep.validate()?;
        Ok(sweep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub power_dbm: f64,
    pub beta: f64,
    pub phi: f64,
    pub eta: f64,
    pub elements: usize,
    pub noise_dbm: f64,
    pub activation_dbm: f64,
    pub carrier_ghz: f64,
    pub links: LinkSet,
    /// When set, `d_g` is replaced by `√(d_h² + d_f²)` (surface beside the
    /// emitter, tag on the emitter's broadside axis).
    pub derive_d_g: bool,
    /// Multi-tag links; empty for a single-tag scenario. All tags share
    /// `links.h`.
    pub tags: Vec<TagSpec>,
    pub policy: Policy,
    pub gamma_th_db: f64,
    /// Enforce the tags' activation threshold in the multi-tag optimizer.
    pub energy_constraints: bool,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            power_dbm: 10.0,
            beta: 0.6,
            phi: 0.8,
            eta: 0.8,
            elements: 100,
            noise_dbm: -94.0,
            activation_dbm: -20.0,
            carrier_ghz: 3.0,
            links: LinkSet::default(),
            derive_d_g: false,
            tags: Vec::new(),
            policy: Policy::Optimal,
            gamma_th_db: 0.0,
            energy_constraints: true,
            sweep: None,
            trials: 100_000,
            seed: 1,
            output: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("scenario serializes");
        Sha256::digest(compact.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn is_multi_tag(&self) -> bool {
        !self.tags.is_empty()
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_ghz * 1e9
    }

    /// `d_g` after applying [`ScenarioConfig::derive_d_g`].
    pub fn d_g(&self) -> f64 {
        if self.derive_d_g {
            self.links.h.distance.hypot(self.links.f.distance)
        } else {
            self.links.g.distance
        }
    }

    /// Elements actually deployed: 0 under [`Policy::NoRis`].
    pub fn effective_elements(&self) -> usize {
        if self.policy == Policy::NoRis {
            0
        } else {
            self.elements
        }
    }

    pub fn gamma_th(&self) -> f64 {
        db_to_linear(self.gamma_th_db)
    }

    pub fn system(&self) -> SystemParams {
        SystemParams {
            power: dbm_to_watts(self.power_dbm),
            beta: self.beta,
            phi: self.phi,
            eta: self.eta,
            n: self.effective_elements(),
            noise: dbm_to_watts(self.noise_dbm),
            p_b: dbm_to_watts(self.activation_dbm),
        }
    }

    pub fn single_links(&self) -> Result<SingleTagLinks> {
        let fc = self.carrier_hz();
        Ok(SingleTagLinks {
            f: self.links.f.params(fc)?,
            u: self.links.u.params(fc)?,
            g: LinkSpec::new(self.links.g.m, self.d_g()).params(fc)?,
            h: self.links.h.params(fc)?,
        })
    }

    /// Multi-tag links; a single-tag scenario becomes one tag.
    pub fn multi_links(&self) -> Result<MultiTagLinks> {
        let fc = self.carrier_hz();
        let tags = if self.tags.is_empty() {
            let s = self.single_links()?;
            vec![TagLinks {
                f: s.f,
                u: s.u,
                g: s.g,
            }]
        } else {
            self.tags
                .iter()
                .map(|t| {
                    Ok(TagLinks {
                        f: t.f.params(fc)?,
                        u: t.u.params(fc)?,
                        g: t.g.params(fc)?,
                    })
                })
                .collect::<Result<_>>()?
        };
        Ok(MultiTagLinks {
            tags,
            h: self.links.h.params(fc)?,
        })
    }

    /// The scenario with the sweep variable set to `x`.
    pub fn at(&self, var: SweepVar, x: f64) -> Self {
        let mut c = self.clone();
        match var {
            SweepVar::PowerDbm => c.power_dbm = x,
            SweepVar::Elements => c.elements = x.max(0.0) as usize,
            SweepVar::DF => c.links.f.distance = x,
            SweepVar::DU => c.links.u.distance = x,
            SweepVar::DG => c.links.g.distance = x,
            SweepVar::DH => c.links.h.distance = x,
            SweepVar::Bits => {
                c.policy = Policy::Quantized {
                    bits: x.max(0.0) as u32,
                }
            }
            SweepVar::GammaThDb => c.gamma_th_db = x,
            SweepVar::ActivationDbm => c.activation_dbm = x,
        }
        c.sweep = None;
        c
    }

    /// `(x, scenario)` for every sweep point, or the scenario itself.
    pub fn points(&self) -> Vec<(Option<f64>, Self)> {
        match self.sweep {
            Some(s) => s
                .points()
                .into_iter()
                .map(|x| (Some(x), self.at(s.var, x)))
                .collect(),
            None => vec![(None, self.clone())],
        }
    }

    /// Checks every field and every sweep point.
    pub fn validate(&self) -> Result<()> {
        self.validate_point()?;
        if let Some(s) = &self.sweep {
            s.validate()?;
            if s.var == SweepVar::Bits && self.is_multi_tag() {
                return Err(Error::config(
                    "sweep.var",
                    "multi-tag scenarios have no quantized policy",
                ));
            }
            for (x, p) in self.points() {
                p.validate_point().map_err(|e| match e {
                    Error::Config { field, message } => Error::config(
                        field,
                        format!("{message} (at {} = {})", s.var, x.unwrap_or(f64::NAN)),
                    ),
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        let finite = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} is not finite")))
            }
        };
        finite("power_dbm", self.power_dbm)?;
        finite("noise_dbm", self.noise_dbm)?;
        finite("activation_dbm", self.activation_dbm)?;
        finite("gamma_th_db", self.gamma_th_db)?;
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(
                "beta",
                format!("{} is not in (0, 1)", self.beta),
            ));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(Error::config(
                "phi",
                format!("{} is not in (0, 1]", self.phi),
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(
                "eta",
                format!("{} is not in (0, 1]", self.eta),
            ));
        }
        if self.elements > MAX_ELEMENTS {
            return Err(Error::config(
                "elements",
                format!("{} exceeds {MAX_ELEMENTS}", self.elements),
            ));
        }
        if !(self.carrier_ghz > 0.0) || !self.carrier_ghz.is_finite() {
            return Err(Error::config(
                "carrier_ghz",
                format!("{} must be positive", self.carrier_ghz),
            ));
        }
        self.links.f.validate("links.f")?;
        self.links.u.validate("links.u")?;
        self.links.h.validate("links.h")?;
        LinkSpec::new(self.links.g.m, self.d_g()).validate("links.g")?;
        for (k, t) in self.tags.iter().enumerate() {
            t.f.validate(&format!("tags[{k}].f"))?;
            t.u.validate(&format!("tags[{k}].u"))?;
            t.g.validate(&format!("tags[{k}].g"))?;
        }
        if let Policy::Quantized { bits } = self.policy {
            if bits == 0 || bits > MAX_BITS {
                return Err(Error::config(
                    "policy.quantized.bits",
                    format!("{bits} is not in 1..={MAX_BITS}"),
                ));
            }
            if self.is_multi_tag() {
                return Err(Error::config(
                    "policy",
                    "multi-tag scenarios have no quantized policy",
                ));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        self.system().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_settings() {
        let c = ScenarioConfig::default();
        let s = c.system();
        assert!((ristag_core::units::watts_to_dbm(s.noise) + 94.0).abs() < 1e-12);
        assert_eq!(s.n, 100);
        assert_eq!(c.links.g.distance, 3.0);
        assert_eq!(c.links.h.distance, 8.0);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_is_idempotent() {
        let mut c = ScenarioConfig {
            power_dbm: 12.345678901234567,
            policy: Policy::Quantized { bits: 3 },
            sweep: Some("d_f:1:40.5:7".parse().unwrap()),
            tags: vec![],
            output: Some("x.csv".into()),
            ..Default::default()
        };
        c.links.u.m = 0.5 + 1.0 / 3.0;
        let once = c.to_json();
        let parsed = ScenarioConfig::from_json(&once).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(parsed.to_json(), once);
        assert_eq!(parsed.hash(), c.hash());
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = ScenarioConfig::from_json(r#"{"power_dbm": 20, "policy": "no_ris"}"#).unwrap();
        assert_eq!(c.power_dbm, 20.0);
        assert_eq!(c.system().n, 0);
        assert_eq!(c.beta, 0.6);
        assert!(ScenarioConfig::from_json(r#"{"powr_dbm": 20}"#).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let field_of = |c: ScenarioConfig| match c.validate() {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        let base = ScenarioConfig::default();
        assert_eq!(
            field_of(ScenarioConfig {
                beta: 1.0,
                ..base.clone()
            }),
            "beta"
        );
        let mut c = base.clone();
        c.links.u.distance = 0.5;
        assert_eq!(field_of(c), "links.u.distance");
        let c = ScenarioConfig {
            sweep: Some(Sweep {
                var: SweepVar::DF,
                lo: 0.2,
                hi: 4.0,
                steps: 3,
            }),
            ..base.clone()
        };
        assert_eq!(field_of(c), "links.f.distance");
        let c = ScenarioConfig {
            policy: Policy::Quantized { bits: 0 },
            ..base
        };
        assert_eq!(field_of(c), "policy.quantized.bits");
    }

    #[test]
    fn sweep_parsing_and_points() {
        let s: Sweep = "power_dbm:0:25:6".parse().unwrap();
        assert_eq!(s.points(), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]);
        let s: Sweep = "elements:0:100:3".parse().unwrap();
        assert_eq!(s.points(), vec![0.0, 50.0, 100.0]);
        assert!("elements:0:10.5:3".parse::<Sweep>().is_err());
        assert!("voltage:0:1:2".parse::<Sweep>().is_err());
        assert!("power_dbm:0:1".parse::<Sweep>().is_err());
        let one: Sweep = "d_f:4:9:1".parse().unwrap();
        assert_eq!(one.points(), vec![4.0]);
    }

    #[test]
    fn derived_ris_distance() {
        let mut c = ScenarioConfig {
            derive_d_g: true,
            ..Default::default()
        };
        c.links.h.distance = 1.0;
        c.links.f.distance = 7.0;
        assert!((c.d_g() - 50f64.sqrt()).abs() < 1e-12);
        let l = c.single_links().unwrap();
        assert_eq!(l.g.distance(), Some(50f64.sqrt()));
    }
}
