//! Effect estimates: functional contrasts between regime pairs, and
//! percentile-bootstrap intervals around them.

mod bootstrap;
mod pipeline;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DcmaError, Result};
use crate::metrics::{apply_functional_contrast, Contrast, FunctionalSpec};
use crate::simulate::{RegimeLabel, SimulationOutput};

pub use bootstrap::{
    bootstrap_effects, percentile_interval, BootstrapConfig, BootstrapMeta, BootstrapOutput,
};
pub use pipeline::{
    estimate_effects, fit_models, run_pipeline, simulate_fitted, OutcomeModel, OutcomeModelKind, PipelineConfig,
    PipelineOutput,
};

/// Interventional effect, `Ipse` carrying a 1-based mediator index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EffectKind {
    Ite,
    Ide,
    Ipse(usize),
}

impl EffectKind {
    /// `(treated, control)` regimes whose contrast defines the effect.
    pub fn regimes(self) -> (RegimeLabel, RegimeLabel) {
        match self {
            EffectKind::Ite => (RegimeLabel::Treated, RegimeLabel::Control),
            EffectKind::Ide => (RegimeLabel::Cross, RegimeLabel::Control),
            EffectKind::Ipse(s) => (RegimeLabel::IpseTreated(s), RegimeLabel::IpseControl(s)),
        }
    }

    /// ITE, IDE and the path-specific effects for `mediators`.
    pub fn all(mediators: &[usize]) -> Vec<EffectKind> {
        let mut v = vec![EffectKind::Ite, EffectKind::Ide];
        v.extend(mediators.iter().map(|&s| EffectKind::Ipse(s)));
        v
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectKind::Ite => write!(f, "ITE"),
            EffectKind::Ide => write!(f, "IDE"),
            EffectKind::Ipse(s) => write!(f, "IPSE{s}"),
        }
    }
}

impl FromStr for EffectKind {
    type Err = DcmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ITE" => Ok(EffectKind::Ite),
            "IDE" => Ok(EffectKind::Ide),
            _ => s
                .strip_prefix("IPSE")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k >= 1)
                .map(EffectKind::Ipse)
                .ok_or_else(|| DcmaError::arg(format!("unknown effect '{s}'"))),
        }
    }
}

impl Serialize for EffectKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EffectKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A functional contrast for one effect, optionally with a percentile
/// interval (pointwise band for curves).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EffectRecord", try_from = "EffectRecord")]
pub struct EffectEstimate {
    pub effect: EffectKind,
    pub functional: FunctionalSpec,
    pub point: Contrast,
    pub interval: Option<(Contrast, Contrast)>,
    pub meta: Option<BootstrapMeta>,
}

impl EffectEstimate {
    pub fn lower(&self) -> Option<&Contrast> {
        self.interval.as_ref().map(|i| &i.0)
    }

    pub fn upper(&self) -> Option<&Contrast> {
        self.interval.as_ref().map(|i| &i.1)
    }
}

#[derive(Serialize, Deserialize)]
struct EffectRecord {
    effect: EffectKind,
    functional: String,
    params: serde_json::Map<String, serde_json::Value>,
    point: Option<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    curve_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    curve_upper: Option<Vec<f64>>,
    meta: Option<BootstrapMeta>,
}

impl From<EffectEstimate> for EffectRecord {
    fn from(e: EffectEstimate) -> Self {
        let mut params = match serde_json::to_value(&e.functional) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        };
        params.remove("kind");
        let (lo, hi) = match e.interval {
            Some((l, h)) => (Some(l), Some(h)),
            None => (None, None),
        };
        EffectRecord {
            effect: e.effect,
            functional: e.functional.name().to_string(),
            params,
            point: e.point.scalar(),
            lower: lo.as_ref().and_then(Contrast::scalar),
            upper: hi.as_ref().and_then(Contrast::scalar),
            curve: e.point.curve().map(<[f64]>::to_vec),
            curve_lower: lo.as_ref().and_then(|c| c.curve().map(<[f64]>::to_vec)),
            curve_upper: hi.as_ref().and_then(|c| c.curve().map(<[f64]>::to_vec)),
            meta: e.meta,
        }
    }
}

impl TryFrom<EffectRecord> for EffectEstimate {
    type Error = DcmaError;

    fn try_from(r: EffectRecord) -> Result<Self> {
        let mut obj = r.params;
        obj.insert("kind".into(), serde_json::Value::String(r.functional));
        let functional: FunctionalSpec = serde_json::from_value(serde_json::Value::Object(obj))?;
        let pick = |s: Option<f64>, c: Option<Vec<f64>>| match (s, c) {
            (Some(v), None) => Ok(Some(Contrast::Scalar(v))),
            (None, Some(c)) => Ok(Some(Contrast::Curve(c))),
            (None, None) => Ok(None),
            _ => Err(DcmaError::arg("effect record has both a scalar and a curve")),
        };
        let point = pick(r.point, r.curve)?.ok_or_else(|| DcmaError::arg("effect record has no value"))?;
        let interval = match (pick(r.lower, r.curve_lower)?, pick(r.upper, r.curve_upper)?) {
            (Some(l), Some(h)) => Some((l, h)),
            (None, None) => None,
            _ => return Err(DcmaError::arg("effect record has a one-sided interval")),
        };
        Ok(EffectEstimate {
            effect: r.effect,
            functional,
            point,
            interval,
            meta: r.meta,
        })
    }
}

/// Applies `functional` to the pooled draws of the effect's regime pair,
/// treated member first.
pub fn compute_effect(
    samples: &SimulationOutput,
    kind: EffectKind,
    functional: &FunctionalSpec,
) -> Result<EffectEstimate> {
    let (t, c) = kind.regimes();
    let get = |r: RegimeLabel| {
        samples
            .get(&r)
            .ok_or_else(|| DcmaError::arg(format!("regime {r} is missing from the simulation output")))
    };
    let (p, q) = (get(t)?.pooled(), get(c)?.pooled());
    Ok(EffectEstimate {
        effect: kind,
        functional: functional.clone(),
        point: apply_functional_contrast(functional, &p, &q)?,
        interval: None,
        meta: None,
    })
}

/// Quantile contrast of the effect's regime pair at each `τ` of the grid.
pub fn quantile_effect_curve(
    samples: &SimulationOutput,
    kind: EffectKind,
    taus: &[f64],
) -> Result<EffectEstimate> {
    if taus.is_empty() {
        return Err(DcmaError::arg("quantile grid is empty"));
    }
    compute_effect(
        samples,
        kind,
        &FunctionalSpec::QteCurve {
            taus: taus.to_vec(),
        },
    )
}

pub fn effects_to_json(effects: &[EffectEstimate]) -> Result<String> {
    Ok(serde_json::to_string_pretty(effects)?)
}

pub fn effects_from_json(text: &str) -> Result<Vec<EffectEstimate>> {
    Ok(serde_json::from_str(text)?)
}

/// Flat table, one row per scalar effect or curve point:
/// `effect,functional,params,point,lower,upper`.
pub fn write_effects_csv<W: Write>(effects: &[EffectEstimate], mut w: W) -> Result<()> {
    writeln!(w, "effect,functional,params,point,lower,upper")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in effects {
        match (&e.point, &e.functional) {
            (Contrast::Curve(c), FunctionalSpec::QteCurve { taus }) => {
                let lo = e.lower().map(Contrast::components);
                let hi = e.upper().map(Contrast::components);
                for (k, (tau, v)) in taus.iter().zip(c).enumerate() {
                    writeln!(
                        w,
                        "{},{},tau={},{},{},{}",
                        e.effect,
                        e.functional.name(),
                        tau,
                        v,
                        opt(lo.as_ref().map(|l| l[k])),
                        opt(hi.as_ref().map(|h| h[k]))
                    )?;
                }
            }
            (point, f) => {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    e.effect,
                    f.name(),
                    f.params_label(),
                    point.components()[0],
                    opt(e.lower().and_then(Contrast::scalar)),
                    opt(e.upper().and_then(Contrast::scalar))
                )?;
            }
        }
    }
    Ok(())
}
