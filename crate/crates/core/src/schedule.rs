//! Time dependence of the couplings and seeded parametric noise.
//!
//! All profile parameters are dimensionless multiples of `v`: `w(t) = η(t) v`
//! and `Δ(t) = δ(t) v`. Times are in units of `1/v`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CouplingSnapshot, LatticeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveProfile {
    /// Abrupt switch of `w/v` at `t_c`.
    Step { eta_i: f64, eta_f: f64, t_c: f64 },
    /// Smooth switch `(η_i+η_f)/2 - (η_i-η_f)/π · atan(Ω(t - t_c))`.
    Arctan { eta_i: f64, eta_f: f64, omega: f64, t_c: f64 },
    /// `η_i → η_p` at `t_p`, then `η_p → η_f` at `t_c`.
    TwoStep { eta_i: f64, eta_p: f64, eta_f: f64, t_p: f64, t_c: f64 },
    /// Constant `w/v = eta`; staggered onsite `Δ/v` switches `delta_i → delta_f` at `t_c`.
    OnsiteStep { eta: f64, delta_i: f64, delta_f: f64, t_c: f64 },
}

impl DriveProfile {
    pub fn step(eta_i: f64, eta_f: f64, t_c: f64) -> Self {
        DriveProfile::Step { eta_i, eta_f, t_c }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            DriveProfile::Step { eta_i, eta_f, t_c } => [eta_i, eta_f, t_c].iter().all(|x| x.is_finite()),
            DriveProfile::Arctan { eta_i, eta_f, omega, t_c } => {
                if !(omega > 0.0) {
                    return Err(Error::invalid(format!("arctan sharpness must be positive, got {omega}")));
                }
                [eta_i, eta_f, omega, t_c].iter().all(|x| x.is_finite())
            }
            DriveProfile::TwoStep { eta_i, eta_p, eta_f, t_p, t_c } => {
                if !(t_p < t_c) {
                    return Err(Error::invalid(format!("two-step profile needs t_p < t_c, got {t_p} >= {t_c}")));
                }
                [eta_i, eta_p, eta_f, t_p, t_c].iter().all(|x| x.is_finite())
            }
            DriveProfile::OnsiteStep { eta, delta_i, delta_f, t_c } => {
                [eta, delta_i, delta_f, t_c].iter().all(|x| x.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid("profile parameters must be finite"))
        }
    }

    pub fn boundary_time(&self) -> f64 {
        match *self {
            DriveProfile::Step { t_c, .. }
            | DriveProfile::Arctan { t_c, .. }
            | DriveProfile::TwoStep { t_c, .. }
            | DriveProfile::OnsiteStep { t_c, .. } => t_c,
        }
    }

    /// `(w/v, Δ/v)` at time `t`; piecewise kinds are right-continuous.
    pub fn parameters_at(&self, t: f64) -> (f64, f64) {
        match *self {
            DriveProfile::Step { eta_i, eta_f, t_c } => (if t < t_c { eta_i } else { eta_f }, 0.0),
            DriveProfile::Arctan { eta_i, eta_f, omega, t_c } => {
                let x = omega * (t - t_c);
                let eta = if x.is_infinite() {
                    if x > 0.0 { eta_f } else { eta_i }
                } else {
                    0.5 * (eta_i + eta_f) - (eta_i - eta_f) / PI * x.atan()
                };
                (eta, 0.0)
            }
            DriveProfile::TwoStep { eta_i, eta_p, eta_f, t_p, t_c } => {
                let eta = if t < t_p {
                    eta_i
                } else if t < t_c {
                    eta_p
                } else {
                    eta_f
                };
                (eta, 0.0)
            }
            DriveProfile::OnsiteStep { eta, delta_i, delta_f, t_c } => {
                (eta, if t < t_c { delta_i } else { delta_f })
            }
        }
    }

    /// Asymptotic parameters before the boundary.
    pub fn initial(&self) -> (f64, f64) {
        match *self {
            DriveProfile::Step { eta_i, .. }
            | DriveProfile::Arctan { eta_i, .. }
            | DriveProfile::TwoStep { eta_i, .. } => (eta_i, 0.0),
            DriveProfile::OnsiteStep { eta, delta_i, .. } => (eta, delta_i),
        }
    }

    /// Asymptotic parameters after the boundary.
    pub fn terminal(&self) -> (f64, f64) {
        match *self {
            DriveProfile::Step { eta_f, .. }
            | DriveProfile::Arctan { eta_f, .. }
            | DriveProfile::TwoStep { eta_f, .. } => (eta_f, 0.0),
            DriveProfile::OnsiteStep { eta, delta_f, .. } => (eta, delta_f),
        }
    }

    /// Coupling snapshot at time `t` for intra-cell coupling `v`.
    pub fn snapshot(&self, v: f64, t: f64) -> CouplingSnapshot {
        let (eta, delta) = self.parameters_at(t);
        CouplingSnapshot::staggered(eta * v, delta * v)
    }

    pub fn initial_snapshot(&self, v: f64) -> CouplingSnapshot {
        let (eta, delta) = self.initial();
        CouplingSnapshot::staggered(eta * v, delta * v)
    }

    pub fn terminal_snapshot(&self, v: f64) -> CouplingSnapshot {
        let (eta, delta) = self.terminal();
        CouplingSnapshot::staggered(eta * v, delta * v)
    }

    /// Times at which the profile jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            DriveProfile::Step { t_c, .. } | DriveProfile::OnsiteStep { t_c, .. } => vec![t_c],
            DriveProfile::TwoStep { t_p, t_c, .. } => vec![t_p, t_c],
            DriveProfile::Arctan { .. } => Vec::new(),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, DriveProfile::Arctan { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HoppingMode {
    /// One draw each for `v` and `w` per step, shared by all bonds.
    #[default]
    Global,
    /// Independent draw for every bond.
    PerBond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OnsiteMode {
    /// Independent draw for every site.
    PerSite,
    /// One draw applied with alternating sign along the sites of a cell.
    #[default]
    Staggered,
    /// One draw applied to all sites.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Hopping perturbation amplitude, units of `v`.
    pub zeta: f64,
    /// Onsite perturbation amplitude, units of `v`.
    pub xi: f64,
    pub hopping_mode: HoppingMode,
    pub onsite_mode: OnsiteMode,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(zeta: f64, xi: f64, seed: u64) -> Self {
        NoiseSpec {
            zeta,
            xi,
            hopping_mode: HoppingMode::default(),
            onsite_mode: OnsiteMode::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta >= 0.0) || !(self.xi >= 0.0) {
            return Err(Error::invalid(format!(
                "noise amplitudes must be non-negative, got zeta={} xi={}",
                self.zeta, self.xi
            )));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.zeta == 0.0 && self.xi == 0.0
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the stream for one run; depends only on `(seed, run_index)`.
pub fn derive_seed(seed: u64, run_index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(run_index))
}

/// Perturbations held constant over one integrator step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseRecord {
    pub dv: f64,
    pub dw: f64,
    /// Per-bond offsets (per-bond mode), else empty.
    pub bonds: Vec<f64>,
    /// Per-site onsite offsets, else empty.
    pub onsite: Vec<f64>,
}

impl NoiseRecord {
    /// Adds the perturbations to `snap`.
    pub fn apply(&self, snap: &mut CouplingSnapshot) {
        snap.dv += self.dv;
        snap.w += self.dw;
        if !self.bonds.is_empty() {
            snap.bond_offsets = Some(self.bonds.clone());
        }
        if !self.onsite.is_empty() {
            snap.onsite = Some(self.onsite.clone());
        }
    }

    pub fn max_abs(&self) -> f64 {
        [self.dv, self.dw]
            .into_iter()
            .chain(self.bonds.iter().copied())
            .chain(self.onsite.iter().copied())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Deterministic per-run noise generator, one record per step.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    spec: NoiseSpec,
    sites: usize,
    cell: usize,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(noise: &NoiseSpec, lattice: &LatticeSpec, run_index: u64) -> Self {
        NoiseStream {
            spec: *noise,
            sites: lattice.sites(),
            cell: lattice.bands,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, run_index)),
        }
    }

    /// Uniform draw on the open interval (-1, 1).
    fn draw(&mut self) -> f64 {
        loop {
            let x = 2.0 * self.rng.random::<f64>() - 1.0;
            if x > -1.0 {
                return x;
            }
        }
    }

    pub fn next_record(&mut self) -> NoiseRecord {
        let NoiseSpec { zeta, xi, hopping_mode, onsite_mode, .. } = self.spec;
        let mut rec = NoiseRecord::default();
        match hopping_mode {
            HoppingMode::Global => {
                rec.dv = zeta * self.draw();
                rec.dw = zeta * self.draw();
            }
            HoppingMode::PerBond => {
                rec.bonds = (0..self.sites).map(|_| zeta * self.draw()).collect();
            }
        }
        match onsite_mode {
            OnsiteMode::PerSite => {
                rec.onsite = (0..self.sites).map(|_| xi * self.draw()).collect();
            }
            OnsiteMode::Staggered => {
                let r = xi * self.draw();
                rec.onsite = (0..self.sites)
                    .map(|j| if (j % self.cell) % 2 == 0 { r } else { -r })
                    .collect();
            }
            OnsiteMode::Global => {
                let r = xi * self.draw();
                rec.onsite = vec![r; self.sites];
            }
        }
        rec
    }
}

/// Full per-step noise track for one run, `ceil(horizon / dt)` records.
pub fn noise_track(noise: &NoiseSpec, lattice: &LatticeSpec, dt: f64, horizon: f64, run_index: u64) -> Result<Vec<NoiseRecord>> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    noise.validate()?;
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut stream = NoiseStream::new(noise, lattice, run_index);
    Ok((0..steps).map(|_| stream.next_record()).collect())
}
