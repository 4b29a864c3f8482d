//! End-to-end experiment pipelines: prepare a pair, scatter it off a time
//! boundary and measure band-resolved momentum entanglement.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diag::Warning;
use crate::entangle::{fidelity, project_band_pair, project_band_pair_mixed, trial_statistics, ProjectionResult, TrialStatistics};
use crate::error::{Error, Result};
use crate::evolve::{evolve_lindblad_dense_with, evolve_orbitals_with, fock_density, EvolutionConfig, LossSpec, NoiseRun};
use crate::lattice::{solve_bands, BandTable, Boundary, CouplingSnapshot, LatticeSpec};
use crate::schedule::{DriveProfile, HoppingMode, NoiseSpec, OnsiteMode};
use crate::states::{
    envelope_edge_ratio, gaussian_orbital, pair_state, plane_wave_orbital, to_band_amplitudes, PairForm, Statistics,
    TwoParticleWave, EDGE_ENVELOPE_RATIO,
};

/// Band both particles start in: the lower band for two bands, the middle band otherwise.
pub fn default_incident_band(bands: usize) -> usize {
    if bands == 2 {
        0
    } else {
        (bands - 1) / 2
    }
}

/// All band pairs `α < β`.
pub fn all_band_pairs(bands: usize) -> Vec<(usize, usize)> {
    (0..bands).flat_map(|a| (a + 1..bands).map(move |b| (a, b))).collect()
}

/// Two excitations at `k₀ ∓ Δk/2` on one band, as plane waves or Gaussian packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSetup {
    pub statistics: Statistics,
    pub incident: usize,
    pub k0: f64,
    pub dk: f64,
    /// Envelope width; `None` for plane waves.
    pub k_width: Option<f64>,
    /// Packet centres in cells.
    pub x0: [f64; 2],
}

impl PairSetup {
    pub fn momenta(&self) -> (f64, f64) {
        (self.k0 - 0.5 * self.dk, self.k0 + 0.5 * self.dk)
    }

    /// Builds the pair in the eigenbasis `bands` of the initial Hamiltonian.
    pub fn build(&self, bands: &BandTable) -> Result<(TwoParticleWave, Vec<Warning>)> {
        let (k1, k2) = self.momenta();
        let mut warnings = Vec::new();
        let (a, b) = match self.k_width {
            None => (plane_wave_orbital(bands, self.incident, k1)?, plane_wave_orbital(bands, self.incident, k2)?),
            Some(kw) => {
                let ratio = envelope_edge_ratio(kw);
                if ratio > EDGE_ENVELOPE_RATIO {
                    warnings.push(Warning::WideEnvelope { k_width: kw, edge_ratio: ratio });
                }
                (
                    gaussian_orbital(bands, self.incident, k1, kw, self.x0[0])?,
                    gaussian_orbital(bands, self.incident, k2, kw, self.x0[1])?,
                )
            }
        };
        Ok((pair_state(&a, &b, self.statistics, PairForm::Orbitals)?, warnings))
    }
}

/// A scattering experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRun {
    pub spec: LatticeSpec,
    pub profile: DriveProfile,
    pub setup: PairSetup,
    pub evolution: EvolutionConfig,
    /// Band pairs to measure; empty for density-only runs.
    pub pairs: Vec<(usize, usize)>,
    pub noise: Option<NoiseRun>,
    pub record_density: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRecord {
    pub time: f64,
    pub projections: Vec<ProjectionResult>,
    /// Site density (sums to 2) if requested.
    pub density: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterOutcome {
    pub records: Vec<ScatterRecord>,
    pub warnings: Vec<Warning>,
}

impl ScatterOutcome {
    pub fn last(&self) -> Option<&ScatterRecord> {
        self.records.last()
    }
}

/// Eigenbases of the noiseless profile, cached by snapshot.
struct BasisCache<'a> {
    spec: &'a LatticeSpec,
    profile: &'a DriveProfile,
    tables: HashMap<Vec<u64>, BandTable>,
}

impl<'a> BasisCache<'a> {
    fn new(spec: &'a LatticeSpec, profile: &'a DriveProfile) -> Self {
        BasisCache { spec, profile, tables: HashMap::new() }
    }

    fn at(&mut self, t: f64) -> Result<&BandTable> {
        let snap = self.profile.snapshot(self.spec.v, t);
        let key = vec![snap.w.to_bits(), snap.delta.to_bits()];
        if !self.tables.contains_key(&key) {
            let table = solve_bands(self.spec, &snap)?;
            self.tables.insert(key.clone(), table);
        }
        Ok(&self.tables[&key])
    }
}

/// Fraction of cells at each end of an open chain watched for packet arrival.
const EDGE_MARGIN: f64 = 0.05;
/// Density allowed near an open edge before a run is rejected.
const EDGE_WEIGHT_LIMIT: f64 = 1e-6;

fn edge_weight(spec: &LatticeSpec, density: &[f64]) -> f64 {
    let cells = ((spec.cells as f64 * EDGE_MARGIN).ceil() as usize).max(1) * spec.bands;
    let n = density.len();
    density[..cells.min(n)].iter().chain(&density[n.saturating_sub(cells)..]).sum::<f64>() / 2.0
}

/// Runs one scattering experiment, measuring against the instantaneous eigenbasis.
pub fn run_scatter(run: &ScatterRun) -> Result<ScatterOutcome> {
    let spec = &run.spec;
    let periodic = spec.boundary == Boundary::Periodic;
    if !periodic && !run.pairs.is_empty() {
        return Err(Error::invalid("band projections need a periodic lattice"));
    }
    let initial_snapshot = run.profile.snapshot(spec.v, run.evolution.t_start);
    let prep_spec = LatticeSpec { boundary: Boundary::Periodic, ..*spec };
    let prep = solve_bands(&prep_spec, &initial_snapshot)?;
    let (pair, mut warnings) = run.setup.build(&prep)?;
    warnings.extend(prep.warnings.iter().cloned());
    let mut cache = BasisCache::new(spec, &run.profile);
    let mut records = Vec::with_capacity(run.evolution.record_times.len());
    evolve_orbitals_with(&pair, spec, &run.profile, run.noise.as_ref(), &run.evolution, |time, state| {
        let density = if run.record_density || !periodic { Some(state.site_density()) } else { None };
        if !periodic {
            let w = edge_weight(spec, density.as_deref().unwrap_or_default());
            if w > EDGE_WEIGHT_LIMIT {
                return Err(Error::invalid(format!(
                    "packet reached the open edge at t = {time} (edge weight {w:.3e}); enlarge the lattice"
                )));
            }
        }
        let mut projections = Vec::with_capacity(run.pairs.len());
        if !run.pairs.is_empty() {
            let amps = to_band_amplitudes(state, cache.at(time)?)?;
            for &(a, b) in &run.pairs {
                projections.push(project_band_pair(&amps, a, b)?);
            }
        }
        records.push(ScatterRecord {
            time,
            projections,
            density: if run.record_density { density } else { None },
        });
        Ok(())
    })?;
    for table in cache.tables.values() {
        for w in &table.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    Ok(ScatterOutcome { records, warnings })
}

/// Noise amplitudes, trial count and seed of a fidelity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweep {
    /// Noiseless experiment; its last record time is the measurement time.
    pub base: ScatterRun,
    pub pair: (usize, usize),
    pub zetas: Vec<f64>,
    pub xis: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub hopping_mode: HoppingMode,
    pub onsite_mode: OnsiteMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub zeta: f64,
    pub xi: f64,
    pub fidelities: Vec<f64>,
    pub stats: TrialStatistics,
}

/// Final projection of one run.
fn final_projection(run: &ScatterRun, pair: (usize, usize)) -> Result<ProjectionResult> {
    let out = run_scatter(run)?;
    let rec = out.last().ok_or_else(|| Error::invalid("run has no record times"))?;
    rec.projections
        .iter()
        .find(|p| (p.alpha, p.beta) == pair)
        .cloned()
        .ok_or_else(|| Error::invalid("requested band pair was not measured"))
}

/// Measurement-only copy of `base`: one record at the end, one band pair.
fn measurement_run(base: &ScatterRun, pair: (usize, usize)) -> ScatterRun {
    let mut run = base.clone();
    run.evolution.record_times = vec![base.evolution.t_end];
    run.pairs = vec![pair];
    run.record_density = false;
    run.noise = None;
    run
}

/// Fidelity of noisy runs against the noiseless one, for every `(ζ, ξ)` cell.
///
/// Trial `j` uses noise run index `j` in every cell, so cells share random
/// numbers and differ only in amplitude. Results do not depend on the thread count.
pub fn run_noise_sweep(sweep: &NoiseSweep) -> Result<(ProjectionResult, Vec<SweepCell>)> {
    if sweep.trials < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: sweep.trials });
    }
    let base = measurement_run(&sweep.base, sweep.pair);
    let reference = final_projection(&base, sweep.pair)?;
    let cells: Vec<(f64, f64)> = sweep.xis.iter().flat_map(|&xi| sweep.zetas.iter().map(move |&z| (z, xi))).collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..sweep.trials).map(move |t| (c, t))).collect();
    let fids: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, trial)| {
            let (zeta, xi) = cells[c];
            let mut run = base.clone();
            run.noise = Some(NoiseRun {
                spec: NoiseSpec {
                    zeta,
                    xi,
                    hopping_mode: sweep.hopping_mode,
                    onsite_mode: sweep.onsite_mode,
                    seed: sweep.seed,
                },
                run_index: trial as u64,
            });
            fidelity(&reference, &final_projection(&run, sweep.pair)?)
        })
        .collect::<Result<_>>()?;
    let out = cells
        .iter()
        .enumerate()
        .map(|(c, &(zeta, xi))| {
            let f = fids[c * sweep.trials..(c + 1) * sweep.trials].to_vec();
            Ok(SweepCell { zeta, xi, stats: trial_statistics(&f)?, fidelities: f })
        })
        .collect::<Result<_>>()?;
    Ok((reference, out))
}

/// Entropy and success probability versus time for one loss rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoherenceCurve {
    pub gamma: f64,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub probability: Vec<f64>,
}

/// Block-structured decoherence: one unitary run, then the loss weight per rate.
pub fn run_decoherence(run: &ScatterRun, pair: (usize, usize), gammas: &[f64], onset: f64) -> Result<Vec<DecoherenceCurve>> {
    let mut clean = run.clone();
    clean.pairs = vec![pair];
    clean.noise = None;
    let out = run_scatter(&clean)?;
    gammas
        .iter()
        .map(|&gamma| {
            let loss = LossSpec::new(gamma, onset);
            loss.validate()?;
            let times: Vec<f64> = out.records.iter().map(|r| r.time).collect();
            Ok(DecoherenceCurve {
                gamma,
                entropy: out.records.iter().map(|r| r.projections[0].entropy).collect(),
                probability: out
                    .records
                    .iter()
                    .map(|r| r.projections[0].probability * loss.pair_weight(run.evolution.t_start, r.time))
                    .collect(),
                times,
            })
        })
        .collect()
}

/// Dense Fock-space Lindblad version of [`run_decoherence`] for small lattices.
pub fn run_decoherence_dense(run: &ScatterRun, pair: (usize, usize), gammas: &[f64], onset: f64) -> Result<Vec<DecoherenceCurve>> {
    let spec = &run.spec;
    let prep = solve_bands(spec, &run.profile.snapshot(spec.v, run.evolution.t_start))?;
    let (state, _) = run.setup.build(&prep)?;
    let rho0 = fock_density(&state)?;
    gammas
        .iter()
        .map(|&gamma| {
            let mut cache = BasisCache::new(spec, &run.profile);
            let mut curve = DecoherenceCurve { gamma, times: Vec::new(), entropy: Vec::new(), probability: Vec::new() };
            evolve_lindblad_dense_with(&rho0, spec, &run.profile, &LossSpec::new(gamma, onset), &run.evolution, |t, rho| {
                let m = project_band_pair_mixed(rho, cache.at(t)?, pair.0, pair.1)?;
                curve.times.push(t);
                curve.entropy.push(m.entropy);
                curve.probability.push(m.probability);
                Ok(())
            })?;
            Ok(curve)
        })
        .collect()
}

/// Default `η_i` and `k₀` span (units of `π`) for sampling the Bell curve.
pub const CURVE_ETA_I: f64 = 0.5;
pub const CURVE_K0_PI: (f64, f64) = (0.2, 0.65);

/// Points `(k₀, η_f)` solving the leading-order Bell condition at fixed `η_i`.
///
/// Wave numbers without a valid final coupling are skipped.
pub fn bell_curve(eta_i: f64, k0s: &[f64]) -> Vec<(f64, f64)> {
    k0s.iter()
        .filter_map(|&k0| crate::analytic::bell_eta_f(eta_i, k0).ok().map(|f| (k0, f)))
        .collect()
}

/// Plane-wave projected entropy as a function of `Δk` for fixed boundary parameters.
pub fn entropy_versus_dk(
    spec: &LatticeSpec,
    eta: (f64, f64),
    k0: f64,
    dks: &[f64],
    statistics: Statistics,
) -> Result<Vec<f64>> {
    let pre = CouplingSnapshot::hopping(eta.0 * spec.v);
    let post = CouplingSnapshot::hopping(eta.1 * spec.v);
    let incident = default_incident_band(spec.bands);
    dks.iter()
        .map(|&dk| {
            let c = crate::analytic::scatter_coefficients(spec, &pre, &post, k0 - dk / 2.0, k0 + dk / 2.0, incident, statistics)?;
            Ok(c.pair_projection(0, 1)?.entropy)
        })
        .collect()
}

/// `k` as a multiple of `π`.
pub fn pi_units(k: f64) -> f64 {
    k / PI
}
