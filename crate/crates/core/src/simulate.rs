//! Forward simulation of interventional outcome distributions.
//!
//! For every observation `i` the simulator draws `B` counterfactual mediator
//! vectors under each treatment arm, splices hybrid mediator vectors for the
//! path-specific regimes, and pushes everything through the outcome sampler
//! with fresh noise per regime. All randomness for observation `i` comes from
//! sub-streams of `(master seed, i)`, so results do not depend on how
//! observations are scheduled across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DcmaError, Result};
use crate::genmodel::{Dataset, GeneratorModel, LinearGaussianModel, Role};
use crate::metrics::{energy_distance, SampleSet};
use crate::numcore::{sample_standard_normal, Matrix, RngStream};
use crate::par;

/// Draws mediator vectors given `(a, z)` and one noise row per draw.
pub trait MediatorSampler: Sync {
    fn n_mediators(&self) -> usize;
    fn mediator_noise_dim(&self) -> usize;
    fn sample_mediators(&self, a: u8, z: &[f64], noise: &Matrix) -> Result<Matrix>;
}

/// Draws outcomes given `(a, z)`, one mediator row and one noise row per draw.
pub trait OutcomeSampler: Sync {
    fn outcome_noise_dim(&self) -> usize;
    fn sample_outcomes(&self, a: u8, z: &[f64], m: &Matrix, noise: &Matrix) -> Result<Vec<f64>>;
}

impl MediatorSampler for GeneratorModel {
    fn n_mediators(&self) -> usize {
        self.layout.n_mediators
    }

    fn mediator_noise_dim(&self) -> usize {
        self.noise_dim()
    }

    fn sample_mediators(&self, a: u8, z: &[f64], noise: &Matrix) -> Result<Matrix> {
        if self.role != Role::Mediator {
            return Err(DcmaError::shape("outcome generator used as mediator sampler"));
        }
        self.sample_with_noise(a, z, None, noise)
    }
}

impl OutcomeSampler for GeneratorModel {
    fn outcome_noise_dim(&self) -> usize {
        self.noise_dim()
    }

    fn sample_outcomes(&self, a: u8, z: &[f64], m: &Matrix, noise: &Matrix) -> Result<Vec<f64>> {
        if self.role != Role::Outcome {
            return Err(DcmaError::shape("mediator generator used as outcome sampler"));
        }
        Ok(self.sample_with_noise(a, z, Some(m), noise)?.into_vec())
    }
}

impl OutcomeSampler for LinearGaussianModel {
    fn outcome_noise_dim(&self) -> usize {
        1
    }

    fn sample_outcomes(&self, a: u8, z: &[f64], m: &Matrix, noise: &Matrix) -> Result<Vec<f64>> {
        if m.cols() != self.n_mediators || z.len() != self.n_covariates || noise.rows() != m.rows() {
            return Err(DcmaError::shape("linear-Gaussian model input layout mismatch"));
        }
        Ok((0..m.rows())
            .map(|r| self.mean(a, m.row(r), z) + self.sigma * noise[(r, 0)])
            .collect())
    }
}

/// Interventional regime whose outcome distribution is simulated.
/// Mediator indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegimeLabel {
    /// `Y(1, M̃₁)`
    Treated,
    /// `Y(0, M̃₀)`
    Control,
    /// `Y(1, M̃₀)`
    Cross,
    /// `Y(1, M̃₀^{<s}, M̃_{s1}, M̃₁^{>s})`
    IpseTreated(usize),
    /// `Y(1, M̃₀^{<s}, M̃_{s0}, M̃₁^{>s})`
    IpseControl(usize),
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeLabel::Treated => write!(f, "Y(1,M1)"),
            RegimeLabel::Control => write!(f, "Y(0,M0)"),
            RegimeLabel::Cross => write!(f, "Y(1,M0)"),
            RegimeLabel::IpseTreated(s) => write!(f, "IPSE{s}_treated"),
            RegimeLabel::IpseControl(s) => write!(f, "IPSE{s}_control"),
        }
    }
}

impl FromStr for RegimeLabel {
    type Err = DcmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Y(1,M1)" => return Ok(RegimeLabel::Treated),
            "Y(0,M0)" => return Ok(RegimeLabel::Control),
            "Y(1,M0)" => return Ok(RegimeLabel::Cross),
            _ => {}
        }
        let parse_idx = |body: &str| -> Result<usize> {
            body.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| DcmaError::arg(format!("unknown regime '{s}'")))
        };
        if let Some(body) = s.strip_prefix("IPSE").and_then(|r| r.strip_suffix("_treated")) {
            return Ok(RegimeLabel::IpseTreated(parse_idx(body)?));
        }
        if let Some(body) = s.strip_prefix("IPSE").and_then(|r| r.strip_suffix("_control")) {
            return Ok(RegimeLabel::IpseControl(parse_idx(body)?));
        }
        Err(DcmaError::arg(format!("unknown regime '{s}'")))
    }
}

impl Serialize for RegimeLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegimeLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Monte Carlo draws per observation.
    pub b: usize,
    pub seed: u64,
    /// Mediators (1-based) whose path-specific regimes are simulated;
    /// `None` means all of them.
    pub ipse_mediators: Option<Vec<usize>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            b: 200,
            seed: 0,
            ipse_mediators: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, n_mediators: usize) -> Result<()> {
        if self.b < 2 {
            return Err(DcmaError::config(format!("b must be >= 2, got {}", self.b)));
        }
        if let Some(list) = &self.ipse_mediators {
            for &s in list {
                if s == 0 || s > n_mediators {
                    return Err(DcmaError::config(format!(
                        "ipse mediator index {s} is outside 1..={n_mediators}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Non-fatal configuration concerns.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.b == 2 {
            w.push("b = 2: hybrid mediator permutations are nearly deterministic".to_string());
        }
        w
    }

    pub fn ipse_list(&self, n_mediators: usize) -> Vec<usize> {
        match &self.ipse_mediators {
            Some(list) => {
                let mut l = list.clone();
                l.sort_unstable();
                l.dedup();
                l
            }
            None => (1..=n_mediators).collect(),
        }
    }

    /// Every regime this configuration simulates.
    pub fn regimes(&self, n_mediators: usize) -> Vec<RegimeLabel> {
        let mut r = vec![RegimeLabel::Treated, RegimeLabel::Control, RegimeLabel::Cross];
        for s in self.ipse_list(n_mediators) {
            r.push(RegimeLabel::IpseTreated(s));
            r.push(RegimeLabel::IpseControl(s));
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub mediator_model: String,
    pub outcome_model: String,
}

/// `n x B` outcome draws for one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionalSamples {
    pub regime: RegimeLabel,
    pub draws: Matrix,
    pub provenance: Provenance,
}

impl InterventionalSamples {
    pub fn n(&self) -> usize {
        self.draws.rows()
    }

    pub fn b(&self) -> usize {
        self.draws.cols()
    }

    /// All `n·B` draws as one sample.
    pub fn pooled(&self) -> SampleSet {
        SampleSet::new(
            Matrix::from_vec(self.draws.rows() * self.draws.cols(), 1, self.draws.as_slice().to_vec())
                .expect("sized"),
        )
    }

    pub fn grand_mean(&self) -> f64 {
        let v = self.draws.as_slice();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub type SimulationOutput = BTreeMap<RegimeLabel, InterventionalSamples>;

const SIM_DOMAIN: u64 = 0x51u64;

/// Noise sub-streams of one observation.
#[derive(Debug, Clone)]
pub struct ObservationStreams {
    root: RngStream,
}

impl ObservationStreams {
    pub fn new(master_seed: u64, obs: usize) -> Self {
        ObservationStreams {
            root: RngStream::new(master_seed, SIM_DOMAIN).split(obs as u64),
        }
    }

    pub fn mediator(&self, arm: u8) -> RngStream {
        self.root.split(1 + u64::from(arm))
    }

    pub fn permutation(&self, which: u8) -> RngStream {
        self.root.split(10 + u64::from(which))
    }

    pub fn outcome(&self, regime: RegimeLabel) -> RngStream {
        let tag = match regime {
            RegimeLabel::Treated => 20,
            RegimeLabel::Control => 21,
            RegimeLabel::Cross => 22,
            RegimeLabel::IpseTreated(s) => 1000 + 2 * s as u64,
            RegimeLabel::IpseControl(s) => 1001 + 2 * s as u64,
        };
        self.root.split(tag)
    }

    /// Stream ids of every noise source used for this observation:
    /// two mediator arms, two permutations, then one per regime.
    pub fn stream_ids(&self, regimes: &[RegimeLabel]) -> Vec<u64> {
        let mut ids = vec![
            self.mediator(0).stream_id(),
            self.mediator(1).stream_id(),
            self.permutation(1).stream_id(),
            self.permutation(2).stream_id(),
        ];
        ids.extend(regimes.iter().map(|&r| self.outcome(r).stream_id()));
        ids
    }
}

/// `M̃₀` and `M̃₁` (`B x S` each) for covariates `z`, using independent
/// noise for the two arms.
pub fn draw_counterfactual_mediators(
    fm: &dyn MediatorSampler,
    z: &[f64],
    b: usize,
    streams: &ObservationStreams,
) -> Result<(Matrix, Matrix)> {
    if b < 2 {
        return Err(DcmaError::config(format!("b must be >= 2, got {b}")));
    }
    let q = fm.mediator_noise_dim();
    let e0 = sample_standard_normal(&mut streams.mediator(0), b, q);
    let e1 = sample_standard_normal(&mut streams.mediator(1), b, q);
    draw_counterfactual_mediators_with_noise(fm, z, &e0, &e1)
}

/// Same as [`draw_counterfactual_mediators`] on caller-supplied noise.
pub fn draw_counterfactual_mediators_with_noise(
    fm: &dyn MediatorSampler,
    z: &[f64],
    noise0: &Matrix,
    noise1: &Matrix,
) -> Result<(Matrix, Matrix)> {
    Ok((fm.sample_mediators(0, z, noise0)?, fm.sample_mediators(1, z, noise1)?))
}

/// Hybrid mediator matrices for path `s` (1-based). Row `b` of `treated` is
/// `(M̃₀[π₁(b), <s], M̃₁[b, s], M̃₁[π₂(b), >s])`; `control` uses `M̃₀[b, s]`
/// in the middle block and shares the flanking blocks.
pub fn build_hybrid_mediators(
    m0: &Matrix,
    m1: &Matrix,
    s: usize,
    pi1: &[usize],
    pi2: &[usize],
) -> Result<(Matrix, Matrix)> {
    let (b, n_med) = m0.shape();
    if m1.shape() != (b, n_med) {
        return Err(DcmaError::shape("mediator draw matrices differ in shape"));
    }
    if s == 0 || s > n_med {
        return Err(DcmaError::arg(format!("mediator index {s} is outside 1..={n_med}")));
    }
    if pi1.len() != b || pi2.len() != b {
        return Err(DcmaError::shape("permutation length differs from B"));
    }
    let j = s - 1;
    let mut treated = Matrix::zeros(b, n_med);
    let mut control = Matrix::zeros(b, n_med);
    for r in 0..b {
        let (lo, hi) = (m0.row(pi1[r]), m1.row(pi2[r]));
        let t = treated.row_mut(r);
        t[..j].copy_from_slice(&lo[..j]);
        t[j] = m1[(r, j)];
        t[j + 1..].copy_from_slice(&hi[j + 1..]);
        let c = control.row_mut(r);
        c[..j].copy_from_slice(&lo[..j]);
        c[j] = m0[(r, j)];
        c[j + 1..].copy_from_slice(&hi[j + 1..]);
    }
    Ok((treated, control))
}

fn check_finite(values: &[f64], obs: usize, regime: RegimeLabel) -> Result<()> {
    if let Some(b) = values.iter().position(|v| !v.is_finite()) {
        return Err(DcmaError::Simulation {
            obs,
            draw: b,
            regime: regime.to_string(),
            reason: "non-finite generated outcome".into(),
        });
    }
    Ok(())
}

/// Outcome draws for one observation, one vector of length `B` per regime.
fn simulate_observation(
    fm: &dyn MediatorSampler,
    fy: &dyn OutcomeSampler,
    z: &[f64],
    obs: usize,
    cfg: &SimConfig,
    regimes: &[RegimeLabel],
) -> Result<Vec<Vec<f64>>> {
    let streams = ObservationStreams::new(cfg.seed, obs);
    let b = cfg.b;
    let (m0, m1) = draw_counterfactual_mediators(fm, z, b, &streams)?;
    let needs_perm = regimes
        .iter()
        .any(|r| matches!(r, RegimeLabel::IpseTreated(_) | RegimeLabel::IpseControl(_)));
    let (pi1, pi2) = if needs_perm {
        (
            streams.permutation(1).permutation(b),
            streams.permutation(2).permutation(b),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let q = fy.outcome_noise_dim();
    let mut hybrid_cache: BTreeMap<usize, (Matrix, Matrix)> = BTreeMap::new();

    let mut out = Vec::with_capacity(regimes.len());
    for &regime in regimes {
        let noise = sample_standard_normal(&mut streams.outcome(regime), b, q);
        let y = match regime {
            RegimeLabel::Treated => fy.sample_outcomes(1, z, &m1, &noise)?,
            RegimeLabel::Control => fy.sample_outcomes(0, z, &m0, &noise)?,
            RegimeLabel::Cross => fy.sample_outcomes(1, z, &m0, &noise)?,
            RegimeLabel::IpseTreated(s) | RegimeLabel::IpseControl(s) => {
                let (t, c) = match hybrid_cache.entry(s) {
                    std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(build_hybrid_mediators(&m0, &m1, s, &pi1, &pi2)?)
                    }
                };
                let m = if matches!(regime, RegimeLabel::IpseTreated(_)) { t } else { c };
                fy.sample_outcomes(1, z, m, &noise)?
            }
        };
        check_finite(&y, obs, regime)?;
        out.push(y);
    }
    Ok(out)
}

const BLOCK: usize = 512;

/// Simulates the requested regimes for every covariate row of `z`.
pub fn forward_simulate_regimes(
    fm: &dyn MediatorSampler,
    fy: &dyn OutcomeSampler,
    z: &Matrix,
    cfg: &SimConfig,
    regimes: &[RegimeLabel],
    provenance: &Provenance,
) -> Result<SimulationOutput> {
    cfg.validate(fm.n_mediators())?;
    for r in regimes {
        if let RegimeLabel::IpseTreated(s) | RegimeLabel::IpseControl(s) = r {
            if *s == 0 || *s > fm.n_mediators() {
                return Err(DcmaError::arg(format!("regime {r} refers to a missing mediator")));
            }
        }
    }
    let n = z.rows();
    if n == 0 {
        return Err(DcmaError::arg("no observations to simulate"));
    }
    let b = cfg.b;
    let mut mats: Vec<Matrix> = regimes.iter().map(|_| Matrix::zeros(n, b)).collect();
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let block = par::try_map_indexed(end - start, |k| {
            let i = start + k;
            simulate_observation(fm, fy, z.row(i), i, cfg, regimes)
        })?;
        for (k, per_regime) in block.into_iter().enumerate() {
            for (mat, draws) in mats.iter_mut().zip(per_regime) {
                mat.row_mut(start + k).copy_from_slice(&draws);
            }
        }
        start = end;
    }
    Ok(regimes
        .iter()
        .zip(mats)
        .map(|(&regime, draws)| {
            (
                regime,
                InterventionalSamples {
                    regime,
                    draws,
                    provenance: provenance.clone(),
                },
            )
        })
        .collect())
}

/// Simulates every regime named by `cfg` for the covariates of `data`.
pub fn forward_simulate(
    fm: &GeneratorModel,
    fy: &dyn OutcomeSampler,
    data: &Dataset,
    cfg: &SimConfig,
) -> Result<SimulationOutput> {
    let provenance = Provenance {
        master_seed: cfg.seed,
        mediator_model: format!("generator(seed={})", fm.meta.seed),
        outcome_model: "outcome".into(),
    };
    let regimes = cfg.regimes(fm.n_mediators());
    forward_simulate_regimes(fm, fy, data.covariates(), cfg, &regimes, &provenance)
}

/// Writes `regime,i,b,y` rows for every regime.
pub fn write_regimes_csv<W: Write>(out: &SimulationOutput, mut w: W) -> Result<()> {
    writeln!(w, "regime,i,b,y")?;
    for (regime, s) in out {
        for i in 0..s.n() {
            for (b, y) in s.draws.row(i).iter().enumerate() {
                writeln!(w, "{regime},{i},{b},{y}")?;
            }
        }
    }
    Ok(())
}

/// Energy distances `B = ED(R̂, R)`, `B₁ = ED(R̂, R_med)` and
/// `B₂ = ED(R_med, R)` for the interventional law of `Y_{a M̃_{a'}}` at
/// covariates `z`, where `R_med` pushes the true mediator law through the
/// learned outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn error_decomposition_diag(
    fm_hat: &dyn MediatorSampler,
    fy_hat: &dyn OutcomeSampler,
    fm_true: &dyn MediatorSampler,
    fy_true: &dyn OutcomeSampler,
    z: &[f64],
    a: u8,
    a_prime: u8,
    n_mc: usize,
    seed: u64,
) -> Result<ErrorDecomposition> {
    if fm_hat.n_mediators() != 1 || fm_true.n_mediators() != 1 {
        return Err(DcmaError::Unsupported(
            "error decomposition is only available for a single mediator".into(),
        ));
    }
    if n_mc < 2 {
        return Err(DcmaError::arg("n_mc must be >= 2"));
    }
    let root = RngStream::new(seed, 0xdec0);
    let draw = |fm: &dyn MediatorSampler, fy: &dyn OutcomeSampler, tag: u64| -> Result<SampleSet> {
        let st = root.split(tag);
        let em = sample_standard_normal(&mut st.split(0), n_mc, fm.mediator_noise_dim());
        let m = fm.sample_mediators(a_prime, z, &em)?;
        let ey = sample_standard_normal(&mut st.split(1), n_mc, fy.outcome_noise_dim());
        SampleSet::from_values(fy.sample_outcomes(a, z, &m, &ey)?)
    };
    let r_hat = draw(fm_hat, fy_hat, 1)?;
    let r_true = draw(fm_true, fy_true, 2)?;
    let r_med = draw(fm_true, fy_hat, 3)?;
    Ok(ErrorDecomposition {
        b: energy_distance(&r_hat, &r_true)?,
        b1: energy_distance(&r_hat, &r_med)?,
        b2: energy_distance(&r_med, &r_true)?,
    })
}
