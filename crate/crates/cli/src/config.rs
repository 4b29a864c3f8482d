//! Run configuration files.
//!
//! Every physical quantity carries its unit in the key: energies in units of
//! `v` (`_v`), times in `1/v` (`_inv_v`), wave numbers in units of `π`
//! (`_pi_units`) and positions in unit cells (`_cells`). Band labels are 1-based.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use ssh_bell::evolve::record_grid;
use ssh_bell::{Boundary, DriveProfile, EvolutionConfig, HoppingMode, LatticeSpec, OnsiteMode, PairSetup, Statistics};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default, rename = "profile")]
    pub profiles: Vec<ProfileConfig>,
    #[serde(default)]
    pub pair: PairConfig,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<DecoherenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_map: Option<CouplingMapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onsite_map: Option<OnsiteMapConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "default_bands")]
    pub bands: usize,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_bands() -> usize {
    2
}
fn default_cells() -> usize {
    240
}
fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { bands: default_bands(), cells: default_cells(), boundary: default_boundary() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Step { eta_i: f64, eta_f: f64, t_c_inv_v: f64 },
    Arctan { eta_i: f64, eta_f: f64, omega_v: f64, t_c_inv_v: f64 },
    TwoStep { eta_i: f64, eta_p: f64, eta_f: f64, t_p_inv_v: f64, t_c_inv_v: f64 },
    OnsiteStep { eta: f64, delta_i_v: f64, delta_f_v: f64, t_c_inv_v: f64 },
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Step { eta_i: 0.5, eta_f: -0.5, t_c_inv_v: 160.0 }
    }
}

impl ProfileConfig {
    pub fn profile(&self) -> DriveProfile {
        match *self {
            ProfileConfig::Step { eta_i, eta_f, t_c_inv_v } => DriveProfile::step(eta_i, eta_f, t_c_inv_v),
            ProfileConfig::Arctan { eta_i, eta_f, omega_v, t_c_inv_v } => {
                DriveProfile::Arctan { eta_i, eta_f, omega: omega_v, t_c: t_c_inv_v }
            }
            ProfileConfig::TwoStep { eta_i, eta_p, eta_f, t_p_inv_v, t_c_inv_v } => {
                DriveProfile::TwoStep { eta_i, eta_p, eta_f, t_p: t_p_inv_v, t_c: t_c_inv_v }
            }
            ProfileConfig::OnsiteStep { eta, delta_i_v, delta_f_v, t_c_inv_v } => {
                DriveProfile::OnsiteStep { eta, delta_i: delta_i_v, delta_f: delta_f_v, t_c: t_c_inv_v }
            }
        }
    }

    /// Short label used in output rows.
    pub fn label(&self) -> String {
        match *self {
            ProfileConfig::Step { .. } => "step".into(),
            ProfileConfig::Arctan { omega_v, .. } => format!("arctan_omega_{omega_v}"),
            ProfileConfig::TwoStep { eta_p, .. } => format!("two_step_eta_p_{eta_p}"),
            ProfileConfig::OnsiteStep { .. } => "onsite_step".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    Gaussian,
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    #[serde(default = "default_statistics")]
    pub statistics: Statistics,
    /// Defaults to the lower band for two bands and the middle band otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident_band: Option<usize>,
    #[serde(default = "default_k0")]
    pub k0_pi_units: f64,
    #[serde(default = "default_dk")]
    pub dk_pi_units: f64,
    #[serde(default = "default_envelope")]
    pub envelope: Envelope,
    #[serde(default = "default_kw")]
    pub kw_pi_units: f64,
    /// Defaults to the lattice centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_first_cells: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_second_cells: Option<f64>,
}

fn default_statistics() -> Statistics {
    Statistics::Fermion
}
fn default_k0() -> f64 {
    0.5
}
fn default_dk() -> f64 {
    0.02
}
fn default_envelope() -> Envelope {
    Envelope::Gaussian
}
fn default_kw() -> f64 {
    0.08
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            statistics: default_statistics(),
            incident_band: None,
            k0_pi_units: default_k0(),
            dk_pi_units: default_dk(),
            envelope: default_envelope(),
            kw_pi_units: default_kw(),
            x0_first_cells: None,
            x0_second_cells: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default = "default_dt")]
    pub dt_inv_v: f64,
    #[serde(default)]
    pub t_start_inv_v: f64,
    #[serde(default = "default_t_end")]
    pub t_end_inv_v: f64,
    #[serde(default = "default_record_interval")]
    pub record_interval_inv_v: f64,
}

fn default_dt() -> f64 {
    EvolutionConfig::DEFAULT_DT
}
fn default_t_end() -> f64 {
    320.0
}
fn default_record_interval() -> f64 {
    EvolutionConfig::DEFAULT_RECORD_INTERVAL
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            dt_inv_v: default_dt(),
            t_start_inv_v: 0.0,
            t_end_inv_v: default_t_end(),
            record_interval_inv_v: default_record_interval(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    /// Band pairs `[α, β]`; defaults to `[1, 2]`, or all pairs in multiband runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[usize; 2]>>,
    #[serde(default = "default_true")]
    pub density: bool,
    /// Run the time evolution; `false` limits `multiband` to its map.
    #[serde(default = "default_true")]
    pub evolve: bool,
}

fn default_true() -> bool {
    true
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { pairs: None, density: true, evolve: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub zeta_v: Vec<f64>,
    pub xi_v: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hopping_mode: HoppingMode,
    #[serde(default)]
    pub onsite_mode: OnsiteMode,
    /// `[ζ, ξ]` cells at which every noise-structure combination is also evaluated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensitivity_cells_v: Vec<[f64; 2]>,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceConfig {
    pub gamma_v: Vec<f64>,
    /// Defaults to the boundary time of the profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset_inv_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marker {
    pub label: String,
    pub eta_i: f64,
    pub eta_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default = "default_curve_eta_i")]
    pub eta_i: f64,
    #[serde(default = "default_curve_k0_min")]
    pub k0_min_pi_units: f64,
    #[serde(default = "default_curve_k0_max")]
    pub k0_max_pi_units: f64,
    #[serde(default = "default_curve_points")]
    pub points: usize,
    #[serde(default = "default_dk_min")]
    pub dk_min_pi_units: f64,
    #[serde(default = "default_dk_max")]
    pub dk_max_pi_units: f64,
    #[serde(default = "default_dk_points")]
    pub dk_points: usize,
    #[serde(default)]
    pub markers: Vec<Marker>,
}

fn default_curve_eta_i() -> f64 {
    ssh_bell::protocol::CURVE_ETA_I
}
fn default_curve_k0_min() -> f64 {
    ssh_bell::protocol::CURVE_K0_PI.0
}
fn default_curve_k0_max() -> f64 {
    ssh_bell::protocol::CURVE_K0_PI.1
}
fn default_curve_points() -> usize {
    50
}
fn default_dk_min() -> f64 {
    0.005
}
fn default_dk_max() -> f64 {
    0.495
}
fn default_dk_points() -> usize {
    99
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingMapConfig {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsiteMapConfig {
    pub eta: f64,
    pub delta_min_v: f64,
    pub delta_max_v: f64,
    pub delta_points: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        if cfg.profiles.is_empty() {
            cfg.profiles.push(ProfileConfig::default());
        }
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<LatticeSpec, Failure> {
        Ok(LatticeSpec::new(self.lattice.bands, self.lattice.cells, 1.0, self.lattice.boundary)?)
    }

    /// The single profile of commands that take one.
    pub fn profile(&self) -> Result<DriveProfile, Failure> {
        match self.profiles.as_slice() {
            [one] => {
                let p = one.profile();
                p.validate()?;
                Ok(p)
            }
            _ => Err(Failure::config(format!("this command takes one [[profile]], found {}", self.profiles.len()))),
        }
    }

    pub fn incident_band(&self) -> Result<usize, Failure> {
        match self.pair.incident_band {
            None => Ok(ssh_bell::protocol::default_incident_band(self.lattice.bands)),
            Some(b) if (1..=self.lattice.bands).contains(&b) => Ok(b - 1),
            Some(b) => Err(Failure::config(format!("incident_band {b} outside 1..={}", self.lattice.bands))),
        }
    }

    pub fn setup(&self) -> Result<PairSetup, Failure> {
        let centre = self.lattice.cells as f64 / 2.0;
        Ok(PairSetup {
            statistics: self.pair.statistics,
            incident: self.incident_band()?,
            k0: self.pair.k0_pi_units * PI,
            dk: self.pair.dk_pi_units * PI,
            k_width: match self.pair.envelope {
                Envelope::Gaussian => Some(self.pair.kw_pi_units * PI),
                Envelope::PlaneWave => None,
            },
            x0: [self.pair.x0_first_cells.unwrap_or(centre), self.pair.x0_second_cells.unwrap_or(centre)],
        })
    }

    pub fn evolution(&self) -> Result<EvolutionConfig, Failure> {
        let e = &self.evolution;
        if !(e.record_interval_inv_v > 0.0) {
            return Err(Failure::config("record_interval_inv_v must be positive"));
        }
        let cfg = EvolutionConfig::new(e.t_start_inv_v, e.t_end_inv_v)
            .with_dt(e.dt_inv_v)
            .with_record_times(record_grid(e.t_start_inv_v, e.t_end_inv_v, e.record_interval_inv_v));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Measured band pairs, 0-based.
    pub fn pairs(&self, all_by_default: bool) -> Result<Vec<(usize, usize)>, Failure> {
        let m = self.lattice.bands;
        match &self.measure.pairs {
            None if all_by_default => Ok(ssh_bell::protocol::all_band_pairs(m)),
            None => Ok(vec![(0, 1)]),
            Some(list) => list
                .iter()
                .map(|&[a, b]| {
                    if a == b || a == 0 || b == 0 || a > m || b > m {
                        Err(Failure::config(format!("bad band pair [{a}, {b}] for {m} bands")))
                    } else {
                        Ok((a - 1, b - 1))
                    }
                })
                .collect(),
        }
    }
}

pub const PRESETS: [(&str, &str); 9] = [
    ("fig1c", include_str!("../presets/fig1c.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig2c", include_str!("../presets/fig2c.toml")),
    ("fig2ef", include_str!("../presets/fig2ef.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("figS1b", include_str!("../presets/figS1b.toml")),
    ("figS2", include_str!("../presets/figS2.toml")),
    ("figS3", include_str!("../presets/figS3.toml")),
];

pub fn preset(name: &str) -> Result<&'static str, Failure> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Failure::config(format!("unknown preset '{name}'; available: {}", names.join(", ")))
    })
}
