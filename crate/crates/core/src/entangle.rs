//! Projective measurements on band-momentum amplitudes and entanglement measures.

use std::f64::consts::{PI, SQRT_2};
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{project_pair_sector, DensityBlock};
use crate::io::fmt_f64;
use crate::lattice::BandTable;
use crate::linalg::{eigvalsh, frobenius_sq, shannon_bits, singular_values};
use crate::states::BandAmplitudes;

/// Projection probability below which a measurement outcome counts as null.
pub const NULL_PROBABILITY: f64 = 1e-14;
/// Weight allowed outside the plane-wave pair for the branch-correlation measurement.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Outcome of projecting onto particle I in band `alpha`, particle II in band `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub alpha: usize,
    pub beta: usize,
    /// `ψ_{k,k'}` over the k-grid, unnormalised.
    pub amplitudes: DMatrix<C64>,
    pub probability: f64,
    /// Bits; zero for a null projection.
    pub entropy: f64,
    pub null: bool,
}

/// JSON summary of a [`ProjectionResult`] with 1-based band labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSummary {
    pub alpha: usize,
    pub beta: usize,
    pub probability: f64,
    pub entropy: f64,
    pub null: bool,
}

impl ProjectionResult {
    pub fn cells(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn summary(&self) -> ProjectionSummary {
        ProjectionSummary {
            alpha: self.alpha + 1,
            beta: self.beta + 1,
            probability: self.probability,
            entropy: self.entropy,
            null: self.null,
        }
    }

    /// Non-zero amplitudes as `k, k_prime, re_psi, im_psi` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let l = self.cells();
        writeln!(w, "k,k_prime,re_psi,im_psi")?;
        for k in 0..l {
            for kp in 0..l {
                let z = self.amplitudes[(k, kp)];
                if z == C64::default() {
                    continue;
                }
                let (a, b) = (2.0 * PI * k as f64 / l as f64, 2.0 * PI * kp as f64 / l as f64);
                writeln!(w, "{},{},{},{}", fmt_f64(a), fmt_f64(b), fmt_f64(z.re), fmt_f64(z.im))?;
            }
        }
        Ok(())
    }
}

/// Momentum-correlation measurement: particle I on `alpha`, particle II on `beta`.
///
/// `ψ_{k,k'} = ⟨α,k; β,k'|f⟩ = √2 A^{αβ}_{k,k'}` for the Parseval-normalised
/// tensor `A`, so the probability is `Σ|ψ|²`.
pub fn project_band_pair(amps: &BandAmplitudes, alpha: usize, beta: usize) -> Result<ProjectionResult> {
    if alpha == beta {
        return Err(Error::invalid("band pair must have distinct bands"));
    }
    if alpha >= amps.bands || beta >= amps.bands {
        return Err(Error::invalid(format!("band pair ({alpha}, {beta}) out of range for {} bands", amps.bands)));
    }
    let amplitudes = amps.block(alpha, beta) * C64::new(SQRT_2, 0.0);
    let probability = frobenius_sq(&amplitudes);
    let null = probability < NULL_PROBABILITY;
    let entropy = if null { 0.0 } else { entropy_pure(&amplitudes)? };
    Ok(ProjectionResult { alpha, beta, amplitudes, probability, entropy, null })
}

/// Branch-correlation measurement on a plane-wave pair `(k₁, k₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCorrelation {
    /// `φ_{α,β} = ⟨α,k₁; β,k₂|f⟩`.
    pub amplitudes: DMatrix<C64>,
    pub probability: f64,
    pub entropy: f64,
}

/// Labels the particles by momentum (`k₁` for I, `k₂` for II) and measures band entanglement.
pub fn project_branch_correlation(amps: &BandAmplitudes, k1: usize, k2: usize) -> Result<BranchCorrelation> {
    if amps.bands != 2 {
        return Err(Error::invalid("branch-correlation measurement needs two bands"));
    }
    if k1 == k2 || k1 >= amps.cells || k2 >= amps.cells {
        return Err(Error::invalid(format!("bad momentum pair ({k1}, {k2})")));
    }
    let mut inside = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            inside += amps.get(a, b, k1, k2).norm_sqr() + amps.get(a, b, k2, k1).norm_sqr();
        }
    }
    let outside = (amps.norm_sq() - inside).max(0.0);
    if outside > SUPPORT_TOL {
        return Err(Error::SupportMismatch { weight: outside });
    }
    let amplitudes = DMatrix::from_fn(2, 2, |a, b| amps.get(a, b, k1, k2) * SQRT_2);
    let probability = frobenius_sq(&amplitudes);
    let entropy = entropy_pure(&amplitudes)?;
    Ok(BranchCorrelation { amplitudes, probability, entropy })
}

/// Entanglement entropy in bits of a pure bipartite amplitude matrix.
pub fn entropy_pure(m: &DMatrix<C64>) -> Result<f64> {
    let total = frobenius_sq(m);
    if !(total > 0.0) {
        return Err(Error::ZeroState("amplitude matrix"));
    }
    let sv = singular_values(m.clone());
    Ok(shannon_bits(sv.iter().map(|s| s * s / total)))
}

/// Von Neumann entropy in bits of a (not necessarily normalised) density operator.
pub fn entropy_mixed(rho: &DMatrix<C64>) -> Result<f64> {
    let trace = rho.trace().re;
    if !(trace >= NULL_PROBABILITY) {
        return Err(Error::ZeroState("density operator"));
    }
    let h = (rho + rho.adjoint()) * C64::new(0.5 / trace, 0.0);
    let eig = eigvalsh(h);
    if eig.first().is_some_and(|&e| e < -1e-10) {
        return Err(Error::invalid(format!("density operator is not positive ({:.3e})", eig[0])));
    }
    Ok(shannon_bits(eig.into_iter().map(|e| e.max(0.0))))
}

/// Partial trace over particle II of a `(k, k')`-indexed operator.
pub fn reduce_over_second(rho: &DMatrix<C64>, cells: usize) -> DMatrix<C64> {
    DMatrix::from_fn(cells, cells, |k, q| (0..cells).map(|kp| rho[(k * cells + kp, q * cells + kp)]).sum())
}

/// Partial trace over particle I.
pub fn reduce_over_first(rho: &DMatrix<C64>, cells: usize) -> DMatrix<C64> {
    DMatrix::from_fn(cells, cells, |kp, qp| (0..cells).map(|k| rho[(k * cells + kp, k * cells + qp)]).sum())
}

/// Band-pair measurement on a mixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProjection {
    pub alpha: usize,
    pub beta: usize,
    /// `ρ_M`, unnormalised.
    pub block: DensityBlock,
    pub probability: f64,
    pub entropy: f64,
    pub null: bool,
}

/// `ρ_M = Q ρ Q` for a Fock-space density matrix; entropy of the reduced, normalised operator.
pub fn project_band_pair_mixed(rho: &DensityBlock, bands: &BandTable, alpha: usize, beta: usize) -> Result<MixedProjection> {
    let block = project_pair_sector(rho, bands, alpha, beta)?;
    let probability = block.trace();
    let null = probability < NULL_PROBABILITY;
    let entropy = if null { 0.0 } else { entropy_mixed(&reduce_over_second(&block.matrix, bands.spec.cells))? };
    Ok(MixedProjection { alpha, beta, block, probability, entropy, null })
}

/// `|⟨f_Q|f_Q'⟩|²` of the normalised projected states.
pub fn fidelity(reference: &ProjectionResult, perturbed: &ProjectionResult) -> Result<f64> {
    if (reference.alpha, reference.beta) != (perturbed.alpha, perturbed.beta)
        || reference.amplitudes.shape() != perturbed.amplitudes.shape()
    {
        return Err(Error::invalid("fidelity needs projections on the same band pair and grid"));
    }
    for p in [reference, perturbed] {
        if p.null {
            return Err(Error::NullProjection(p.probability));
        }
    }
    if reference.amplitudes == perturbed.amplitudes {
        return Ok(1.0);
    }
    let overlap: C64 = reference.amplitudes.iter().zip(perturbed.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok((overlap.norm_sqr() / (reference.probability * perturbed.probability)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialStatistics {
    pub mean: f64,
    /// Population (divide-by-n) standard deviation.
    pub std: f64,
    pub samples: usize,
}

pub fn trial_statistics(values: &[f64]) -> Result<TrialStatistics> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: values.len() });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(TrialStatistics { mean, std: var.sqrt(), samples: values.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{solve_bands, Boundary, CouplingSnapshot, LatticeSpec};
    use crate::states::{pair_state, plane_wave_orbital, to_band_amplitudes, PairForm, Statistics};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn entropy_reference_values() {
        let rank1 = DMatrix::from_fn(3, 3, |i, j| c((i + 1) as f64 * (j as f64 - 0.5)));
        assert!(entropy_pure(&rank1).unwrap().abs() < 1e-12);
        let bell = DMatrix::from_diagonal_element(2, 2, c(std::f64::consts::FRAC_1_SQRT_2));
        assert!((entropy_pure(&bell).unwrap() - 1.0).abs() < 1e-14);
        let four = DMatrix::from_diagonal_element(4, 4, c(0.5));
        assert!((entropy_pure(&four).unwrap() - 2.0).abs() < 1e-14);
        assert!(entropy_pure(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn mixed_entropy_reference_values() {
        let v = DMatrix::from_column_slice(2, 1, &[c(0.6), C64::new(0.0, 0.8)]);
        assert!(entropy_mixed(&(&v * v.adjoint())).unwrap().abs() < 1e-12);
        let mixed = DMatrix::from_diagonal_element(2, 2, c(0.5));
        assert!((entropy_mixed(&mixed).unwrap() - 1.0).abs() < 1e-14);
        assert!(entropy_mixed(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn partial_traces_agree_for_pure_states() {
        let l = 3;
        let psi = DMatrix::from_fn(l, l, |i, j| C64::new((i * 2 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let vec = DMatrix::from_fn(l * l, 1, |r, _| psi[(r / l, r % l)]);
        let rho = &vec * vec.adjoint();
        let s1 = entropy_mixed(&reduce_over_second(&rho, l)).unwrap();
        let s2 = entropy_mixed(&reduce_over_first(&rho, l)).unwrap();
        let sp = entropy_pure(&psi).unwrap();
        assert!((s1 - s2).abs() < 1e-10 && (s1 - sp).abs() < 1e-10);
    }

    #[test]
    fn statistics() {
        let s = trial_statistics(&[0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.5));
        let s = trial_statistics(&[0.7; 5]).unwrap();
        assert!(s.std.abs() < 1e-15);
        assert!(matches!(trial_statistics(&[1.0]), Err(Error::TooFewSamples { .. })));
    }

    fn pre_boundary_pair() -> (BandAmplitudes, usize, usize) {
        let spec = LatticeSpec::new(2, 200, 1.0, Boundary::Periodic).unwrap();
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.5)).unwrap();
        let (k1, k2) = (0.49 * PI, 0.51 * PI);
        let a = plane_wave_orbital(&bands, 0, k1).unwrap();
        let b = plane_wave_orbital(&bands, 0, k2).unwrap();
        let pair = pair_state(&a, &b, Statistics::Fermion, PairForm::Orbitals).unwrap();
        (to_band_amplitudes(&pair, &bands).unwrap(), bands.k_index(k1).unwrap(), bands.k_index(k2).unwrap())
    }

    #[test]
    fn single_band_state_gives_null_projection() {
        let (amps, k1, k2) = pre_boundary_pair();
        let p = project_band_pair(&amps, 0, 1).unwrap();
        assert!(p.null && p.probability < 1e-20 && p.entropy == 0.0);
        let q = project_branch_correlation(&amps, k1, k2).unwrap();
        assert!(q.entropy.abs() < 1e-10);
        assert!((q.probability - 1.0).abs() < 1e-12);
        let nonzero = q.amplitudes.iter().filter(|z| z.norm() > 1e-12).count();
        assert_eq!(nonzero, 1);
        assert!(q.amplitudes[(0, 0)].norm() > 0.99);
    }

    #[test]
    fn fidelity_bounds() {
        let m = |v: [f64; 4]| ProjectionResult {
            alpha: 0,
            beta: 1,
            amplitudes: DMatrix::from_row_slice(2, 2, &v.map(c)),
            probability: v.iter().map(|x| x * x).sum(),
            entropy: 0.0,
            null: false,
        };
        let a = m([0.0, 0.6, 0.0, 0.0]);
        let b = m([0.0, 0.0, 0.3, 0.0]);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let mut z = m([0.0; 4]);
        z.null = true;
        assert!(matches!(fidelity(&a, &z), Err(Error::NullProjection(_))));
    }

    #[test]
    fn csv_lists_nonzero_entries() {
        let mut amps = DMatrix::zeros(4, 4);
        amps[(1, 2)] = c(0.5);
        amps[(2, 1)] = c(-0.5);
        let p = ProjectionResult { alpha: 0, beta: 1, amplitudes: amps, probability: 0.5, entropy: 1.0, null: false };
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(p.summary().beta, 2);
    }
}
