//! Uniform single-particle loss: dense Fock-space Lindblad solver and the
//! block-structured fast path.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::fock::FockBasis;
use super::{evolve_orbitals_with, time_plan, Drive, EvolutionConfig, Rk4, Snapshot, NORM_DRIFT_LIMIT};
use crate::error::{Error, Result};
use crate::lattice::{BandTable, ChainHamiltonian, LatticeSpec};
use crate::linalg::{eigvalsh, hermiticity_defect};
use crate::schedule::DriveProfile;
use crate::states::{plane_wave_orbital, Statistics, TwoParticleWave};

/// Largest lattice the dense Lindblad solver accepts.
pub const MAX_LINDBLAD_SITES: usize = 32;
/// Allowed negative eigenvalue or Hermiticity defect of an evolved density matrix.
const POSITIVITY_TOL: f64 = 1e-8;

/// Loss rate `gamma` switched on at `onset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub gamma: f64,
    pub onset: f64,
}

impl LossSpec {
    pub fn new(gamma: f64, onset: f64) -> Self {
        LossSpec { gamma, onset }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() || !self.onset.is_finite() {
            return Err(Error::invalid(format!("bad loss rate {} from t = {}", self.gamma, self.onset)));
        }
        Ok(())
    }

    fn rate_at(&self, t: f64) -> f64 {
        if t >= self.onset {
            self.gamma
        } else {
            0.0
        }
    }

    /// Surviving two-particle weight at `t` for a run started at `t_start`.
    pub fn pair_weight(&self, t_start: f64, t: f64) -> f64 {
        let from = self.onset.max(t_start);
        (-2.0 * self.gamma * (t - from).max(0.0)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityBasis {
    /// Vacuum, one- and two-particle sectors in [`FockBasis`] order.
    Fock { sites: usize, statistics: Statistics },
    /// Two-particle sector only.
    PairSector { sites: usize, statistics: Statistics },
    /// `|α, k; β, k'⟩` flattened as `k L + k'`.
    BandMomentum { alpha: usize, beta: usize, cells: usize },
    /// Momentum of a single labelled particle.
    Momentum { cells: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityBlock {
    pub basis: DensityBasis,
    pub matrix: DMatrix<C64>,
}

impl DensityBlock {
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        eigvalsh(h).first().copied().unwrap_or(0.0)
    }

    fn fock_basis(&self) -> Result<FockBasis> {
        match self.basis {
            DensityBasis::Fock { sites, statistics } => Ok(FockBasis::new(sites, statistics)),
            _ => Err(Error::invalid("operation needs a Fock-space density matrix")),
        }
    }

    /// Trace of the `particles`-particle sector.
    pub fn sector_trace(&self, particles: usize) -> Result<f64> {
        let basis = self.fock_basis()?;
        Ok((0..basis.dim()).filter(|&s| basis.number(s) == particles).map(|s| self.matrix[(s, s)].re).sum())
    }

    /// Two-particle block of a Fock-space density matrix.
    pub fn pair_block(&self) -> Result<DensityBlock> {
        let basis = self.fock_basis()?;
        let r = basis.pair_range();
        let n = r.len();
        Ok(DensityBlock {
            basis: DensityBasis::PairSector { sites: basis.sites(), statistics: basis.statistics() },
            matrix: self.matrix.view((r.start, r.start), (n, n)).into_owned(),
        })
    }
}

/// `|f⟩⟨f|` of a pure two-particle state in Fock space.
pub fn fock_density(state: &TwoParticleWave) -> Result<DensityBlock> {
    let n = state.sites();
    if n > MAX_LINDBLAD_SITES {
        return Err(Error::SizeGuard { sites: n, limit: MAX_LINDBLAD_SITES });
    }
    let basis = FockBasis::new(n, state.statistics);
    let v = DMatrix::from_column_slice(basis.dim(), 1, &basis.from_first_quantized(&state.dense_amplitudes()));
    Ok(DensityBlock {
        basis: DensityBasis::Fock { sites: n, statistics: state.statistics },
        matrix: &v * v.adjoint(),
    })
}

/// Band-momentum block `ρ_M = V† ρ₂ V` with `V_{kk'} = b†_{αk} b†_{βk'}|0⟩`.
pub fn project_pair_sector(rho: &DensityBlock, bands: &BandTable, alpha: usize, beta: usize) -> Result<DensityBlock> {
    let basis = rho.fock_basis()?;
    if basis.sites() != bands.spec.sites() {
        return Err(Error::DimensionMismatch { expected: bands.spec.sites(), found: basis.sites() });
    }
    if alpha == beta {
        return Err(Error::invalid("band pair must have distinct bands"));
    }
    let l = bands.spec.cells;
    let a: Vec<Vec<C64>> = bands
        .kgrid
        .iter()
        .map(|&k| plane_wave_orbital(bands, alpha, k).map(|w| w.amplitudes))
        .collect::<Result<_>>()?;
    let b: Vec<Vec<C64>> = bands
        .kgrid
        .iter()
        .map(|&k| plane_wave_orbital(bands, beta, k).map(|w| w.amplitudes))
        .collect::<Result<_>>()?;
    let p = basis.pair_range().len();
    let mut v = DMatrix::<C64>::zeros(p, l * l);
    for k in 0..l {
        for kp in 0..l {
            let col = basis.pair_sector_vector(|x, y| a[k][x] * b[kp][y]);
            v.column_mut(k * l + kp).copy_from_slice(&col);
        }
    }
    let rho2 = rho.pair_block()?.matrix;
    Ok(DensityBlock {
        basis: DensityBasis::BandMomentum { alpha, beta, cells: l },
        matrix: v.adjoint() * rho2 * &v,
    })
}

/// Sparse Fock-space operators for the Lindblad right-hand side.
struct LindbladOperators {
    dim: usize,
    number: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    terms: Vec<usize>,
    coeffs: Vec<f64>,
    values: Vec<f64>,
    /// Per site: `(dst, src, coeff)` of `a_j`.
    jumps: Vec<Vec<(usize, usize, f64)>>,
}

impl LindbladOperators {
    fn new(basis: &FockBasis) -> Self {
        let n = basis.sites();
        let dim = basis.dim();
        // term j < n: onsite n_j; term n + j: bond (j, j + 1)
        let mut rows: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); dim];
        for s in 0..dim {
            for j in 0..n {
                let occ = basis.occupation(s).iter().filter(|&&x| x == j).count();
                if occ > 0 {
                    rows[s].push((s, j, occ as f64));
                }
                let jn = (j + 1) % n;
                if jn == j {
                    continue;
                }
                for (p, q) in [(j, jn), (jn, j)] {
                    if let Some((dst, c)) = basis.hop(p, q, s) {
                        rows[dst].push((s, n + j, c));
                    }
                }
            }
        }
        let mut row_ptr = vec![0];
        let (mut cols, mut terms, mut coeffs) = (Vec::new(), Vec::new(), Vec::new());
        for row in rows {
            for (c, t, v) in row {
                cols.push(c);
                terms.push(t);
                coeffs.push(v);
            }
            row_ptr.push(cols.len());
        }
        let jumps = (0..n)
            .map(|j| (0..dim).filter_map(|s| basis.annihilate(j, s).map(|(d, c)| (d, s, c))).collect())
            .collect();
        LindbladOperators {
            dim,
            number: (0..dim).map(|s| basis.number(s) as f64).collect(),
            values: vec![0.0; coeffs.len()],
            row_ptr,
            cols,
            terms,
            coeffs,
            jumps,
        }
    }

    fn load(&mut self, h: &ChainHamiltonian) {
        let n = h.sites();
        for (i, v) in self.values.iter_mut().enumerate() {
            let t = self.terms[i];
            let w = if t < n { h.onsite[t] } else { h.bonds[t - n] };
            *v = self.coeffs[i] * w;
        }
    }

    /// `out = -i[H, ρ] + γ Σ_j a_j ρ a_j† - γ/2 {N, ρ}` on a row-major `ρ`.
    fn rhs(&self, gamma: f64, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let d = self.dim;
        scratch.iter_mut().for_each(|z| *z = C64::default());
        for r in 0..d {
            let xr = &mut scratch[r * d..(r + 1) * d];
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[e];
                if v == 0.0 {
                    continue;
                }
                let src = &rho[self.cols[e] * d..(self.cols[e] + 1) * d];
                for (x, s) in xr.iter_mut().zip(src) {
                    *x += s * v;
                }
            }
        }
        for r in 0..d {
            for c in 0..d {
                let comm = scratch[r * d + c] - scratch[c * d + r].conj();
                let decay = 0.5 * gamma * (self.number[r] + self.number[c]);
                out[r * d + c] = C64::new(comm.im, -comm.re) - rho[r * d + c] * decay;
            }
        }
        if gamma > 0.0 {
            for jump in &self.jumps {
                for &(d1, s1, a) in jump {
                    for &(d2, s2, b) in jump {
                        out[d1 * d + d2] += rho[s1 * d + s2] * (gamma * a * b);
                    }
                }
            }
        }
    }
}

fn check_density(rho: &DensityBlock, trace0: f64, time: f64) -> Result<()> {
    let drift = (rho.trace() - trace0).abs();
    if drift > NORM_DRIFT_LIMIT || !drift.is_finite() {
        return Err(Error::StepSize { drift, time });
    }
    let herm = rho.hermiticity_defect();
    let min_eig = rho.min_eigenvalue();
    if herm > POSITIVITY_TOL || min_eig < -POSITIVITY_TOL {
        return Err(Error::Positivity { min_eig: min_eig.min(-herm), time });
    }
    Ok(())
}

/// Dense Lindblad evolution in the full Fock space, streaming each record.
pub fn evolve_lindblad_dense_with<F>(
    rho0: &DensityBlock,
    spec: &LatticeSpec,
    profile: &DriveProfile,
    loss: &LossSpec,
    config: &EvolutionConfig,
    mut on_record: F,
) -> Result<()>
where
    F: FnMut(f64, &DensityBlock) -> Result<()>,
{
    config.validate()?;
    loss.validate()?;
    let basis = rho0.fock_basis()?;
    let n = spec.sites();
    if n > MAX_LINDBLAD_SITES {
        return Err(Error::SizeGuard { sites: n, limit: MAX_LINDBLAD_SITES });
    }
    if basis.sites() != n {
        return Err(Error::DimensionMismatch { expected: n, found: basis.sites() });
    }
    let d = basis.dim();
    let mut ops = LindbladOperators::new(&basis);
    let mut x: Vec<C64> = (0..d * d).map(|i| rho0.matrix[(i / d, i % d)]).collect();
    let wrap = |x: &[C64]| DensityBlock { basis: rho0.basis, matrix: DMatrix::from_row_slice(d, d, x) };
    let trace0 = rho0.trace();
    let mut breaks = profile.breakpoints();
    breaks.push(loss.onset);
    let (initial, plan) = time_plan(config, &breaks);
    for _ in &initial {
        on_record(config.t_start, &wrap(&x))?;
    }
    let mut drive = Drive::new(spec, profile, None)?;
    let mut rk = Rk4::new(x.len());
    let mut scratch = vec![C64::default(); d * d];
    for step in &plan {
        drive.enter_step(step.index);
        let gamma = loss.rate_at(step.t0 + 0.5 * step.h);
        rk.step(&mut x, step.t0, step.h, |t, y, o| {
            let te = drive.stage_time(step, t);
            ops.load(drive.at(te)?);
            ops.rhs(gamma, y, o, &mut scratch);
            Ok(())
        })?;
        if let Some(r) = step.record {
            let rho = wrap(&x);
            let time = config.record_times[r];
            check_density(&rho, trace0, time)?;
            on_record(time, &rho)?;
        }
    }
    Ok(())
}

/// Dense Lindblad evolution; an oracle for [`evolve_lindblad_block`].
pub fn evolve_lindblad_dense(
    rho0: &DensityBlock,
    spec: &LatticeSpec,
    profile: &DriveProfile,
    loss: &LossSpec,
    config: &EvolutionConfig,
) -> Result<Vec<Snapshot<DensityBlock>>> {
    let mut out = Vec::new();
    evolve_lindblad_dense_with(rho0, spec, profile, loss, config, |time, rho| {
        out.push(Snapshot { time, state: rho.clone() });
        Ok(())
    })?;
    Ok(out)
}

/// Pure two-particle state together with its surviving weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LossySnapshot {
    pub time: f64,
    pub state: TwoParticleWave,
    pub weight: f64,
}

/// Two-particle block under uniform loss: unitary evolution times `e^{-2γ(t - t₀)}`.
pub fn evolve_lindblad_block(
    state: &TwoParticleWave,
    spec: &LatticeSpec,
    profile: &DriveProfile,
    loss: &LossSpec,
    config: &EvolutionConfig,
) -> Result<Vec<LossySnapshot>> {
    loss.validate()?;
    let mut out = Vec::new();
    evolve_orbitals_with(state, spec, profile, None, config, |time, s| {
        out.push(LossySnapshot { time, state: s.clone(), weight: loss.pair_weight(config.t_start, time) });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{solve_bands, Boundary, CouplingSnapshot};
    use crate::states::{gaussian_orbital, pair_state, PairForm};

    fn setup(stats: Statistics) -> (LatticeSpec, TwoParticleWave) {
        let spec = LatticeSpec::new(2, 4, 1.0, Boundary::Periodic).unwrap();
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = gaussian_orbital(&bands, 0, 0.4, 0.9, 0.0).unwrap();
        let b = gaussian_orbital(&bands, 0, 2.0, 0.9, 1.0).unwrap();
        (spec, pair_state(&a, &b, stats, PairForm::Orbitals).unwrap())
    }

    #[test]
    fn lossless_matches_pure_evolution() {
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let (spec, pair) = setup(stats);
            let prof = DriveProfile::step(0.5, -0.5, 1.0);
            let cfg = EvolutionConfig { dt: 0.01, t_start: 0.0, t_end: 2.0, record_times: vec![2.0] };
            let rho = evolve_lindblad_dense(&fock_density(&pair).unwrap(), &spec, &prof, &LossSpec::new(0.0, 0.0), &cfg)
                .unwrap();
            let pure = evolve_lindblad_block(&pair, &spec, &prof, &LossSpec::new(0.0, 0.0), &cfg).unwrap();
            let expect = fock_density(&pure[0].state).unwrap();
            let diff = (&rho[0].state.matrix - &expect.matrix).camax();
            assert!(diff < 1e-8, "{diff}");
        }
    }

    #[test]
    fn pair_trace_decays_and_total_trace_is_kept() {
        let (spec, pair) = setup(Statistics::Fermion);
        let prof = DriveProfile::step(0.5, 0.5, 1e9);
        let gamma = 0.2;
        let cfg = EvolutionConfig { dt: 0.01, t_start: 0.0, t_end: 5.0, record_times: vec![2.5, 5.0] };
        let out = evolve_lindblad_dense(&fock_density(&pair).unwrap(), &spec, &prof, &LossSpec::new(gamma, 0.0), &cfg)
            .unwrap();
        for s in &out {
            let p2 = s.state.sector_trace(2).unwrap();
            assert!((p2 - (-2.0 * gamma * s.time).exp()).abs() < 1e-6);
            assert!((s.state.trace() - 1.0).abs() < 1e-8);
            // one-particle sector fed by decay: 2 e^{-γt}(1 - e^{-γt})
            let p1 = s.state.sector_trace(1).unwrap();
            let e = (-gamma * s.time).exp();
            assert!((p1 - 2.0 * e * (1.0 - e)).abs() < 1e-6);
        }
    }

    #[test]
    fn delayed_onset() {
        let (spec, pair) = setup(Statistics::Boson);
        let prof = DriveProfile::step(0.5, 0.5, 1e9);
        let loss = LossSpec::new(0.3, 1.0);
        let cfg = EvolutionConfig { dt: 0.01, t_start: 0.0, t_end: 3.0, record_times: vec![0.5, 3.0] };
        let out = evolve_lindblad_dense(&fock_density(&pair).unwrap(), &spec, &prof, &loss, &cfg).unwrap();
        assert!((out[0].state.sector_trace(2).unwrap() - 1.0).abs() < 1e-10);
        let p2 = out[1].state.sector_trace(2).unwrap();
        assert!((p2 - loss.pair_weight(0.0, 3.0)).abs() < 1e-6);
        assert!((loss.pair_weight(0.0, 3.0) - (-1.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn lindblad_guard() {
        let spec = LatticeSpec::new(2, 17, 1.0, Boundary::Periodic).unwrap();
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let a = gaussian_orbital(&bands, 0, 0.4, 0.9, 0.0).unwrap();
        let b = gaussian_orbital(&bands, 0, 2.0, 0.9, 1.0).unwrap();
        let pair = pair_state(&a, &b, Statistics::Fermion, PairForm::Orbitals).unwrap();
        assert!(matches!(fock_density(&pair), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn projection_of_pure_state_matches_amplitudes() {
        let (spec, pair) = setup(Statistics::Fermion);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(-0.5)).unwrap();
        let rho = fock_density(&pair).unwrap();
        let pm = project_pair_sector(&rho, &bands, 0, 1).unwrap();
        let amps = crate::states::to_band_amplitudes(&pair, &bands).unwrap();
        let l = spec.cells;
        for k in 0..l {
            for kp in 0..l {
                let psi = amps.get(0, 1, k, kp) * std::f64::consts::SQRT_2;
                let diag = pm.matrix[(k * l + kp, k * l + kp)].re;
                assert!((diag - psi.norm_sqr()).abs() < 1e-12);
            }
        }
    }
}
