//! Time evolution: RK4 for orbitals, dense two-particle tensors and
//! density matrices with uniform single-particle loss.

mod fock;
mod lindblad;

pub use fock::FockBasis;
pub use lindblad::{
    evolve_lindblad_block, evolve_lindblad_dense, evolve_lindblad_dense_with, fock_density, project_pair_sector,
    DensityBasis, DensityBlock, LossySnapshot, LossSpec, MAX_LINDBLAD_SITES,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{fill_chain, ChainHamiltonian, LatticeSpec};
use crate::linalg::norm_sq;
use crate::schedule::{DriveProfile, NoiseRecord, NoiseSpec, NoiseStream};
use crate::states::{Representation, SingleParticleWave, TwoParticleWave};

/// Norm drift that aborts a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Site count above which the dense two-particle path refuses to run by default.
pub const MAX_DENSE_SITES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Strictly increasing times inside `[t_start, t_end]`.
    pub record_times: Vec<f64>,
}

impl EvolutionConfig {
    pub const DEFAULT_DT: f64 = 0.005;
    pub const DEFAULT_RECORD_INTERVAL: f64 = 2.0;

    /// Default step and a record every 2 time units, endpoints included.
    pub fn new(t_start: f64, t_end: f64) -> Self {
        EvolutionConfig {
            dt: Self::DEFAULT_DT,
            t_start,
            t_end,
            record_times: record_grid(t_start, t_end, Self::DEFAULT_RECORD_INTERVAL),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_record_times(mut self, times: Vec<f64>) -> Self {
        self.record_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::invalid(format!("bad time window [{}, {}]", self.t_start, self.t_end)));
        }
        let tol = self.tolerance();
        for pair in self.record_times.windows(2) {
            if !(pair[1] > pair[0] + tol) {
                return Err(Error::invalid("record times must be strictly increasing"));
            }
        }
        if let (Some(&first), Some(&last)) = (self.record_times.first(), self.record_times.last()) {
            if first < self.t_start - tol || last > self.t_end + tol {
                return Err(Error::invalid("record times must lie inside the time window"));
            }
        }
        Ok(())
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.dt
    }
}

/// `t_start, t_start + interval, ...` up to and including `t_end`.
pub fn record_grid(t_start: f64, t_end: f64, interval: f64) -> Vec<f64> {
    if !(interval > 0.0) || !(t_end >= t_start) {
        return vec![t_start];
    }
    let n = ((t_end - t_start) / interval + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| t_start + i as f64 * interval).collect();
    if t_end - times[n] > 1e-9 * interval {
        times.push(t_end);
    }
    times
}

/// A state recorded at one of the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub time: f64,
    pub state: T,
}

/// Noise realisation for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRun {
    pub spec: NoiseSpec,
    pub run_index: u64,
}

/// One integrator sub-step inside global step `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Substep {
    pub t0: f64,
    pub h: f64,
    pub index: usize,
    pub record: Option<usize>,
}

/// Sub-steps of the global `dt` grid, split at record times and profile jumps.
pub(crate) fn time_plan(config: &EvolutionConfig, breakpoints: &[f64]) -> (Vec<usize>, Vec<Substep>) {
    let tol = config.tolerance();
    let (t0, t1, dt) = (config.t_start, config.t_end, config.dt);
    let mut cuts: Vec<(f64, Option<usize>)> = Vec::new();
    let mut initial = Vec::new();
    for (i, &r) in config.record_times.iter().enumerate() {
        if (r - t0).abs() <= tol {
            initial.push(i);
        } else {
            cuts.push((r, Some(i)));
        }
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    cuts.extend((1..n).map(|i| (t0 + i as f64 * dt, None)));
    cuts.extend(breakpoints.iter().filter(|&&b| b > t0 + tol && b < t1 - tol).map(|&b| (b, None)));
    if t1 > t0 + tol {
        cuts.push((t1, None));
    }
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, Option<usize>)> = Vec::with_capacity(cuts.len());
    for (t, rec) in cuts {
        match merged.last_mut() {
            Some(last) if (t - last.0).abs() <= tol => {
                if rec.is_some() {
                    *last = (t, rec);
                }
            }
            _ => merged.push((t, rec)),
        }
    }
    let mut steps = Vec::with_capacity(merged.len());
    let mut prev = t0;
    for (t, record) in merged {
        let mid = 0.5 * (prev + t);
        steps.push(Substep { t0: prev, h: t - prev, index: ((mid - t0) / dt).floor().max(0.0) as usize, record });
        prev = t;
    }
    (initial, steps)
}

/// Builds the instantaneous chain Hamiltonian from the profile and noise track.
pub(crate) struct Drive<'a> {
    spec: &'a LatticeSpec,
    profile: &'a DriveProfile,
    stream: Option<NoiseStream>,
    record: NoiseRecord,
    index: Option<usize>,
    built_at: Option<f64>,
    h: ChainHamiltonian,
}

impl<'a> Drive<'a> {
    pub fn new(spec: &'a LatticeSpec, profile: &'a DriveProfile, noise: Option<&NoiseRun>) -> Result<Self> {
        spec.validate()?;
        profile.validate()?;
        let stream = match noise {
            Some(run) => {
                run.spec.validate()?;
                Some(NoiseStream::new(&run.spec, spec, run.run_index))
            }
            None => None,
        };
        Ok(Drive {
            spec,
            profile,
            stream,
            record: NoiseRecord::default(),
            index: None,
            built_at: None,
            h: ChainHamiltonian::zeros(spec.sites()),
        })
    }

    pub fn piecewise(&self) -> bool {
        self.profile.is_piecewise_constant()
    }

    /// Moves the noise track forward to global step `index`.
    pub fn enter_step(&mut self, index: usize) {
        if let Some(stream) = self.stream.as_mut() {
            while self.index.map_or(true, |i| i < index) {
                self.record = stream.next_record();
                self.index = Some(self.index.map_or(0, |i| i + 1));
            }
        }
        self.built_at = None;
    }

    /// Hamiltonian at time `t` within the current step.
    pub fn at(&mut self, t: f64) -> Result<&ChainHamiltonian> {
        if self.built_at != Some(t) {
            let mut snap = self.profile.snapshot(self.spec.v, t);
            if self.stream.is_some() {
                self.record.apply(&mut snap);
            }
            fill_chain(self.spec, &snap, &mut self.h)?;
            self.built_at = Some(t);
        }
        Ok(&self.h)
    }

    /// Evaluation time for an RK4 stage: the sub-step midpoint for piecewise profiles.
    pub fn stage_time(&self, step: &Substep, t: f64) -> f64 {
        if self.piecewise() {
            step.t0 + 0.5 * step.h
        } else {
            t
        }
    }
}

/// Classical fourth-order Runge–Kutta on a flat complex vector.
pub(crate) struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        let z = vec![C64::default(); n];
        Rk4 { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// Advances `x` from `t` to `t + h` for `dx/dt = f(t, x)`.
    pub fn step<F>(&mut self, x: &mut [C64], t: f64, h: f64, mut f: F) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        let Rk4 { k1, k2, k3, k4, tmp } = self;
        f(t, x, k1)?;
        axpy_into(tmp, x, 0.5 * h, k1);
        f(t + 0.5 * h, tmp, k2)?;
        axpy_into(tmp, x, 0.5 * h, k2);
        f(t + 0.5 * h, tmp, k3)?;
        axpy_into(tmp, x, h, k3);
        f(t + h, tmp, k4)?;
        let c = h / 6.0;
        for i in 0..x.len() {
            x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * c;
        }
        Ok(())
    }
}

fn axpy_into(out: &mut [C64], x: &[C64], a: f64, y: &[C64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

/// Evolves independent single-particle orbitals, calling `on_record` at each record time.
pub fn evolve_waves<F>(
    orbitals: &[SingleParticleWave],
    spec: &LatticeSpec,
    profile: &DriveProfile,
    noise: Option<&NoiseRun>,
    config: &EvolutionConfig,
    mut on_record: F,
) -> Result<()>
where
    F: FnMut(f64, &[SingleParticleWave]) -> Result<()>,
{
    config.validate()?;
    let n = spec.sites();
    for o in orbitals {
        if o.sites() != n {
            return Err(Error::DimensionMismatch { expected: n, found: o.sites() });
        }
    }
    let mut drive = Drive::new(spec, profile, noise)?;
    let (initial, plan) = time_plan(config, &profile.breakpoints());
    let mut x: Vec<C64> = orbitals.iter().flat_map(|o| o.amplitudes.iter().copied()).collect();
    let norms0: Vec<f64> = orbitals.iter().map(|o| o.norm_sq()).collect();
    let unpack = |x: &[C64]| -> Vec<SingleParticleWave> {
        x.chunks(n.max(1)).map(|c| SingleParticleWave { amplitudes: c.to_vec() }).collect()
    };
    for _ in &initial {
        on_record(config.t_start, &unpack(&x))?;
    }
    let mut rk = Rk4::new(x.len());
    for step in &plan {
        drive.enter_step(step.index);
        rk.step(&mut x, step.t0, step.h, |t, y, out| {
            let te = drive.stage_time(step, t);
            let h = drive.at(te)?;
            for (yc, oc) in y.chunks(n).zip(out.chunks_mut(n)) {
                h.apply_neg_i(yc, oc);
            }
            Ok(())
        })?;
        let t = step.t0 + step.h;
        let drift = x
            .chunks(n)
            .zip(&norms0)
            .map(|(c, n0)| (norm_sq(c) - n0).abs())
            .fold(0.0, f64::max);
        if drift > NORM_DRIFT_LIMIT || !drift.is_finite() {
            return Err(Error::StepSize { drift, time: t });
        }
        if let Some(r) = step.record {
            on_record(config.record_times[r], &unpack(&x))?;
        }
    }
    Ok(())
}

/// Streams the evolved pair state at each record time.
pub fn evolve_orbitals_with<F>(
    state: &TwoParticleWave,
    spec: &LatticeSpec,
    profile: &DriveProfile,
    noise: Option<&NoiseRun>,
    config: &EvolutionConfig,
    mut on_record: F,
) -> Result<()>
where
    F: FnMut(f64, &TwoParticleWave) -> Result<()>,
{
    let Representation::OrbitalPair { first, second, norm } = &state.repr else {
        return Err(Error::invalid("orbital evolution needs an orbital-pair state"));
    };
    let statistics = state.statistics;
    let norm = *norm;
    evolve_waves(&[first.clone(), second.clone()], spec, profile, noise, config, |t, o| {
        let pair = TwoParticleWave {
            statistics,
            repr: Representation::OrbitalPair { first: o[0].clone(), second: o[1].clone(), norm },
        };
        on_record(t, &pair)
    })
}

/// Evolves each orbital of a non-interacting pair independently.
pub fn evolve_orbitals(
    state: &TwoParticleWave,
    spec: &LatticeSpec,
    profile: &DriveProfile,
    noise: Option<&NoiseRun>,
    config: &EvolutionConfig,
) -> Result<Vec<Snapshot<TwoParticleWave>>> {
    let mut out = Vec::with_capacity(config.record_times.len());
    evolve_orbitals_with(state, spec, profile, noise, config, |time, s| {
        out.push(Snapshot { time, state: s.clone() });
        Ok(())
    })?;
    Ok(out)
}

/// `out = -i (H⊗1 + 1⊗H) x` for a row-major `n × n` tensor.
fn apply_pair_neg_i(h: &ChainHamiltonian, x: &[C64], out: &mut [C64], n: usize) {
    for (xr, or) in x.chunks(n).zip(out.chunks_mut(n)) {
        h.apply(xr, or);
    }
    let (e, b) = (&h.onsite, &h.bonds);
    for i in 0..n {
        let up = (i + 1) % n;
        let down = (i + n - 1) % n;
        let row = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += x[i * n + j] * e[i] + x[up * n + j] * b[i] + x[down * n + j] * b[down];
        }
    }
    for z in out.iter_mut() {
        *z = C64::new(z.im, -z.re);
    }
}

/// Full two-particle RK4; an oracle for [`evolve_orbitals`].
///
/// Refuses more than [`MAX_DENSE_SITES`] sites unless `override_guard` is set.
pub fn evolve_dense_two_particle(
    state: &TwoParticleWave,
    spec: &LatticeSpec,
    profile: &DriveProfile,
    noise: Option<&NoiseRun>,
    config: &EvolutionConfig,
    override_guard: bool,
) -> Result<Vec<Snapshot<TwoParticleWave>>> {
    config.validate()?;
    let n = spec.sites();
    if n > MAX_DENSE_SITES && !override_guard {
        return Err(Error::SizeGuard { sites: n, limit: MAX_DENSE_SITES });
    }
    if state.sites() != n {
        return Err(Error::DimensionMismatch { expected: n, found: state.sites() });
    }
    let statistics = state.statistics;
    let mut x = state.dense_amplitudes();
    let norm0 = norm_sq(&x);
    let wrap = |x: &[C64]| TwoParticleWave {
        statistics,
        repr: Representation::Dense { sites: n, amplitudes: x.to_vec() },
    };
    let mut drive = Drive::new(spec, profile, noise)?;
    let (initial, plan) = time_plan(config, &profile.breakpoints());
    let mut out: Vec<Snapshot<TwoParticleWave>> = initial
        .iter()
        .map(|_| Snapshot { time: config.t_start, state: wrap(&x) })
        .collect();
    let mut rk = Rk4::new(x.len());
    for step in &plan {
        drive.enter_step(step.index);
        rk.step(&mut x, step.t0, step.h, |t, y, o| {
            let te = drive.stage_time(step, t);
            apply_pair_neg_i(drive.at(te)?, y, o, n);
            Ok(())
        })?;
        let t = step.t0 + step.h;
        let drift = (norm_sq(&x) - norm0).abs();
        if drift > NORM_DRIFT_LIMIT || !drift.is_finite() {
            return Err(Error::StepSize { drift, time: t });
        }
        if let Some(r) = step.record {
            out.push(Snapshot { time: config.record_times[r], state: wrap(&x) });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{solve_bands, Boundary, CouplingSnapshot};
    use crate::states::{gaussian_orbital, pair_state, plane_wave_orbital, PairForm, Statistics};
    use std::f64::consts::PI;

    fn cfg(t0: f64, t1: f64, dt: f64, rec: Vec<f64>) -> EvolutionConfig {
        EvolutionConfig { dt, t_start: t0, t_end: t1, record_times: rec }
    }

    #[test]
    fn record_grid_includes_endpoints() {
        assert_eq!(record_grid(0.0, 6.0, 2.0), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(record_grid(0.0, 5.0, 2.0), vec![0.0, 2.0, 4.0, 5.0]);
        assert_eq!(record_grid(1.0, 1.0, 2.0), vec![1.0]);
    }

    #[test]
    fn plan_hits_records_and_breakpoints() {
        let c = cfg(0.0, 1.0, 0.3, vec![0.0, 0.45, 1.0]);
        let (initial, plan) = time_plan(&c, &[0.5]);
        assert_eq!(initial, vec![0]);
        let ends: Vec<f64> = plan.iter().map(|s| s.t0 + s.h).collect();
        let expect = [0.3, 0.45, 0.5, 0.6, 0.9, 1.0];
        assert_eq!(ends.len(), expect.len());
        for (a, b) in ends.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let idx: Vec<usize> = plan.iter().map(|s| s.index).collect();
        assert_eq!(idx, vec![0, 1, 1, 1, 2, 3]);
        assert_eq!(plan[1].record, Some(1));
        assert_eq!(plan[5].record, Some(2));
        let total: f64 = plan.iter().map(|s| s.h).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plan_record_on_grid_point_is_not_duplicated() {
        let c = cfg(0.0, 1.0, 0.25, vec![0.5, 1.0]);
        let (_, plan) = time_plan(&c, &[]);
        assert_eq!(plan.len(), 4);
        assert_eq!(plan[1].record, Some(0));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 1.0, 0.0, vec![]).validate().is_err());
        assert!(cfg(1.0, 0.0, 0.1, vec![]).validate().is_err());
        assert!(cfg(0.0, 1.0, 0.1, vec![0.5, 0.4]).validate().is_err());
        assert!(cfg(0.0, 1.0, 0.1, vec![1.5]).validate().is_err());
        assert!(EvolutionConfig::new(0.0, 320.0).validate().is_ok());
    }

    #[test]
    fn rk4_integrates_exponential_to_fourth_order() {
        let err = |h: f64| {
            let mut x = vec![C64::new(1.0, 0.0)];
            let mut rk = Rk4::new(1);
            let n = (1.0 / h).round() as usize;
            for i in 0..n {
                rk.step(&mut x, i as f64 * h, h, |_, y, o| {
                    o[0] = C64::new(0.0, -2.0) * y[0];
                    Ok(())
                })
                .unwrap();
            }
            (x[0] - C64::from_polar(1.0, -2.0)).norm()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    fn two_band(l: usize) -> LatticeSpec {
        LatticeSpec::new(2, l, 1.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn zero_duration_is_identity() {
        let spec = two_band(6);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = gaussian_orbital(&bands, 0, 0.5, 0.8, 1.0).unwrap();
        let b = gaussian_orbital(&bands, 1, 1.5, 0.8, 2.0).unwrap();
        let pair = pair_state(&a, &b, Statistics::Fermion, PairForm::Orbitals).unwrap();
        let prof = DriveProfile::step(0.5, -0.5, 3.0);
        let out = evolve_orbitals(&pair, &spec, &prof, None, &cfg(2.0, 2.0, 0.01, vec![2.0])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].state, pair);
    }

    #[test]
    fn bloch_state_acquires_dynamical_phase() {
        let spec = two_band(10);
        let snap = CouplingSnapshot::hopping(0.5);
        let bands = solve_bands(&spec, &snap).unwrap();
        let ki = 3;
        let wave = plane_wave_orbital(&bands, 0, bands.kgrid[ki]).unwrap();
        let prof = DriveProfile::step(0.5, 0.5, 1e9);
        let t = 20.0;
        let mut last = None;
        evolve_waves(&[wave.clone()], &spec, &prof, None, &cfg(0.0, t, 0.005, vec![t]), |_, o| {
            last = Some(o[0].clone());
            Ok(())
        })
        .unwrap();
        let phase = C64::from_polar(1.0, -bands.energy(ki, 0) * t);
        let got = last.unwrap();
        let fid = wave.overlap(&got).norm_sqr();
        assert!(fid > 1.0 - 1e-8);
        let err = got.amplitudes.iter().zip(&wave.amplitudes).map(|(g, w)| (g - w * phase).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn dense_matches_orbital_path() {
        let spec = two_band(6);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = gaussian_orbital(&bands, 0, 0.4 * PI, 0.6, 1.0).unwrap();
        let b = gaussian_orbital(&bands, 0, 0.7 * PI, 0.6, 2.0).unwrap();
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let pair = pair_state(&a, &b, stats, PairForm::Orbitals).unwrap();
            let prof = DriveProfile::Arctan { eta_i: 0.5, eta_f: -0.5, omega: 1.0, t_c: 2.0 };
            let c = cfg(0.0, 4.0, 0.005, vec![1.0, 4.0]);
            let orb = evolve_orbitals(&pair, &spec, &prof, None, &c).unwrap();
            let den = evolve_dense_two_particle(&pair.to_dense(), &spec, &prof, None, &c, false).unwrap();
            for (o, d) in orb.iter().zip(&den) {
                let ov = o.state.overlap(&d.state);
                assert!(ov.norm() > 1.0 - 1e-8, "t = {}: {ov}", o.time);
            }
        }
    }

    #[test]
    fn dense_guard() {
        let spec = two_band(65);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = plane_wave_orbital(&bands, 0, 0.0).unwrap();
        let b = plane_wave_orbital(&bands, 1, 0.0).unwrap();
        let pair = pair_state(&a, &b, Statistics::Boson, PairForm::Dense).unwrap();
        let prof = DriveProfile::step(0.5, 0.5, 1.0);
        let res = evolve_dense_two_particle(&pair, &spec, &prof, None, &cfg(0.0, 0.01, 0.01, vec![]), false);
        assert!(matches!(res, Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn oversized_step_is_reported() {
        let spec = two_band(6);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = gaussian_orbital(&bands, 0, 0.4, 0.6, 1.0).unwrap();
        let prof = DriveProfile::step(0.5, 0.5, 1e9);
        let res = evolve_waves(&[a], &spec, &prof, None, &cfg(0.0, 10.0, 2.0, vec![]), |_, _| Ok(()));
        let err = res.unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn noisy_runs_are_reproducible() {
        let spec = two_band(6);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = gaussian_orbital(&bands, 0, 0.4, 0.6, 1.0).unwrap();
        let prof = DriveProfile::step(0.5, -0.5, 1.0);
        let run = NoiseRun { spec: NoiseSpec::new(0.05, 0.05, 7), run_index: 3 };
        let go = |run: &NoiseRun| {
            let mut last = None;
            evolve_waves(&[a.clone()], &spec, &prof, Some(run), &cfg(0.0, 2.0, 0.01, vec![2.0]), |_, o| {
                last = Some(o[0].clone());
                Ok(())
            })
            .unwrap();
            last.unwrap()
        };
        assert_eq!(go(&run), go(&run));
        let other = NoiseRun { run_index: 4, ..run };
        assert_ne!(go(&run), go(&other));
    }
}
