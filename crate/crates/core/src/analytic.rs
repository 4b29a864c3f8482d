//! Closed-form plane-wave scattering at a sudden time boundary.

use std::f64::consts::{PI, SQRT_2};
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entangle::{entropy_pure, NULL_PROBABILITY};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::lattice::{group_velocities, solve_bloch, CouplingSnapshot, LatticeSpec};
use crate::states::{BandAmplitudes, Statistics};

/// Denominators below this count as a closed gap.
const GAP_EPS: f64 = 1e-12;

/// `⟨h_α(k)|g_β(k)⟩`: rows in the post-boundary basis, columns in the pre-boundary basis.
pub fn transfer_overlaps(spec: &LatticeSpec, pre: &CouplingSnapshot, post: &CouplingSnapshot, k: f64) -> Result<DMatrix<C64>> {
    let g = solve_bloch(spec, pre, k)?.vectors;
    let h = solve_bloch(spec, post, k)?.vectors;
    Ok(h.adjoint() * g)
}

/// `P_α = |⟨h_α(k)|g_i(k)⟩|²` for incident band `incident`.
pub fn scattering_probabilities(
    spec: &LatticeSpec,
    pre: &CouplingSnapshot,
    post: &CouplingSnapshot,
    k: f64,
    incident: usize,
) -> Result<Vec<f64>> {
    check_band(spec, incident)?;
    let t = transfer_overlaps(spec, pre, post, k)?;
    Ok((0..spec.bands).map(|a| t[(a, incident)].norm_sqr()).collect())
}

/// Space-time angles `atan(v_α / v)` in degrees; negative means the packet moves left.
pub fn scattering_angles(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64) -> Result<Vec<f64>> {
    Ok(group_velocities(spec, snap, k)?.into_iter().map(|vel| (vel / spec.v).atan().to_degrees()).collect())
}

fn check_band(spec: &LatticeSpec, band: usize) -> Result<()> {
    if band >= spec.bands {
        return Err(Error::invalid(format!("band {band} out of range for {} bands", spec.bands)));
    }
    Ok(())
}

/// Band amplitudes of a plane-wave pair right after a sudden switch.
///
/// Both particles start in band `incident` at `k₁` and `k₂`. Entries are in the
/// same Parseval normalisation as [`BandAmplitudes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterCoefficients {
    pub k1: f64,
    pub k2: f64,
    pub incident: usize,
    pub statistics: Statistics,
    /// `A^{αβ}_{k₁,k₂}`.
    pub forward: DMatrix<C64>,
    /// `A^{αβ}_{k₂,k₁}`.
    pub backward: DMatrix<C64>,
    /// Post-boundary energies at `k₁` and `k₂`.
    pub energies: [Vec<f64>; 2],
}

/// Outcome of the band-pair measurement on a plane-wave pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairProjection {
    /// `⟨α,k₁; β,k₂|f⟩`.
    pub psi_12: C64,
    /// `⟨α,k₂; β,k₁|f⟩`.
    pub psi_21: C64,
    pub probability: f64,
    pub entropy: f64,
    pub null: bool,
}

impl ScatterCoefficients {
    pub fn bands(&self) -> usize {
        self.forward.nrows()
    }

    /// Sum of `|A|²` over both orderings and all band pairs.
    pub fn total_weight(&self) -> f64 {
        self.forward.iter().chain(self.backward.iter()).map(|z| z.norm_sqr()).sum()
    }

    /// Largest violation of `A^{αβ}_{k₁,k₂} = ±A^{βα}_{k₂,k₁}`.
    pub fn exchange_defect(&self) -> f64 {
        let s = self.statistics.sign();
        let m = self.bands();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                worst = worst.max((self.forward[(a, b)] - self.backward[(b, a)] * s).norm());
            }
        }
        worst
    }

    /// Coefficients after a further free evolution time `tau` under the post-boundary Hamiltonian.
    pub fn propagated(&self, tau: f64) -> ScatterCoefficients {
        let mut out = self.clone();
        let [e1, e2] = &self.energies;
        for a in 0..self.bands() {
            for b in 0..self.bands() {
                out.forward[(a, b)] *= C64::from_polar(1.0, -(e1[a] + e2[b]) * tau);
                out.backward[(a, b)] *= C64::from_polar(1.0, -(e2[a] + e1[b]) * tau);
            }
        }
        out
    }

    /// Band-pair measurement with particle I on `alpha`, II on `beta`.
    pub fn pair_projection(&self, alpha: usize, beta: usize) -> Result<PairProjection> {
        let m = self.bands();
        if alpha == beta || alpha >= m || beta >= m {
            return Err(Error::invalid(format!("bad band pair ({alpha}, {beta})")));
        }
        let psi_12 = self.forward[(alpha, beta)] * SQRT_2;
        let psi_21 = self.backward[(alpha, beta)] * SQRT_2;
        let probability = psi_12.norm_sqr() + psi_21.norm_sqr();
        let null = probability < NULL_PROBABILITY;
        let entropy = if null {
            0.0
        } else {
            let zero = C64::default();
            entropy_pure(&DMatrix::from_row_slice(2, 2, &[zero, psi_12, psi_21, zero]))?
        };
        Ok(PairProjection { psi_12, psi_21, probability, entropy, null })
    }

    /// Max deviation from numerically obtained amplitudes after aligning the global phase
    /// on the largest coefficient.
    pub fn deviation_from(&self, amps: &BandAmplitudes, k1: usize, k2: usize) -> f64 {
        let m = self.bands();
        let pairs: Vec<(C64, C64)> = (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .flat_map(|(a, b)| {
                [(self.forward[(a, b)], amps.get(a, b, k1, k2)), (self.backward[(a, b)], amps.get(a, b, k2, k1))]
            })
            .collect();
        let (ref_a, ref_n) = pairs
            .iter()
            .copied()
            .max_by(|x, y| x.0.norm().total_cmp(&y.0.norm()))
            .unwrap_or_default();
        let phase = if ref_n.norm() > 0.0 && ref_a.norm() > 0.0 {
            (ref_a / ref_n) / (ref_a / ref_n).norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let support = pairs.iter().map(|(a, n)| (a - n * phase).norm()).fold(0.0, f64::max);
        let captured: f64 = pairs.iter().map(|(_, n)| n.norm_sqr()).sum();
        support.max((amps.norm_sq() - captured).max(0.0).sqrt())
    }
}

/// Sudden-switch amplitudes of a plane-wave pair from band `incident`.
pub fn scatter_coefficients(
    spec: &LatticeSpec,
    pre: &CouplingSnapshot,
    post: &CouplingSnapshot,
    k1: f64,
    k2: f64,
    incident: usize,
    statistics: Statistics,
) -> Result<ScatterCoefficients> {
    check_band(spec, incident)?;
    if (k1 - k2).rem_euclid(2.0 * PI) < 1e-12 || (k2 - k1).rem_euclid(2.0 * PI) < 1e-12 {
        return Err(Error::invalid("plane-wave pair needs distinct wave numbers"));
    }
    let t1 = transfer_overlaps(spec, pre, post, k1)?;
    let t2 = transfer_overlaps(spec, pre, post, k2)?;
    let m = spec.bands;
    let s = statistics.sign();
    let n = std::f64::consts::FRAC_1_SQRT_2;
    let forward = DMatrix::from_fn(m, m, |a, b| t1[(a, incident)] * t2[(b, incident)] * n);
    let backward = DMatrix::from_fn(m, m, |a, b| t2[(a, incident)] * t1[(b, incident)] * (n * s));
    let energies = [solve_bloch(spec, post, k1)?.energies, solve_bloch(spec, post, k2)?.energies];
    Ok(ScatterCoefficients { k1, k2, incident, statistics, forward, backward, energies })
}

/// Leading-order condition for equal-magnitude momentum amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellCondition {
    pub eta_i: f64,
    pub eta_f: f64,
    /// Central wave number in `(0, π)` if one exists.
    pub k0: Option<f64>,
    pub satisfied: bool,
    /// `η_i = -η_f`, `k₀ = π/2`: equal magnitudes at every `Δk`.
    pub exact: bool,
    /// `|cos k₀ + (η_i+η_f)/(1+η_iη_f)|` at the solved `k₀`, or the excess `|c| - 1`
    /// when no real `k₀` exists.
    pub residual: f64,
}

fn check_domain(eta_i: f64, eta_f: f64) -> Result<()> {
    if eta_i == eta_f {
        return Err(Error::invalid("couplings before and after the boundary must differ"));
    }
    for eta in [eta_i, eta_f] {
        if eta == 0.0 || eta == 1.0 || !eta.is_finite() {
            return Err(Error::invalid(format!("coupling ratio {eta} is excluded")));
        }
    }
    Ok(())
}

/// `cos k₀ + (η_i+η_f)/(1+η_iη_f)`.
pub fn bell_residual(k0: f64, eta_i: f64, eta_f: f64) -> f64 {
    k0.cos() + (eta_i + eta_f) / (1.0 + eta_i * eta_f)
}

/// Solves `cos k₀ = -(η_i+η_f)/(1+η_iη_f)` for `k₀`.
pub fn bell_condition(eta_i: f64, eta_f: f64) -> Result<BellCondition> {
    check_domain(eta_i, eta_f)?;
    let denom = 1.0 + eta_i * eta_f;
    let exact = (eta_i + eta_f).abs() < GAP_EPS;
    if denom.abs() < GAP_EPS {
        return Ok(BellCondition { eta_i, eta_f, k0: None, satisfied: false, exact: false, residual: f64::INFINITY });
    }
    let c = -(eta_i + eta_f) / denom;
    if c.abs() >= 1.0 {
        return Ok(BellCondition { eta_i, eta_f, k0: None, satisfied: false, exact, residual: c.abs() - 1.0 });
    }
    let k0 = if exact { PI / 2.0 } else { c.acos() };
    Ok(BellCondition { eta_i, eta_f, k0: Some(k0), satisfied: true, exact, residual: bell_residual(k0, eta_i, eta_f).abs() })
}

/// Final coupling ratio satisfying the condition for given `η_i` and `k₀`.
pub fn bell_eta_f(eta_i: f64, k0: f64) -> Result<f64> {
    let c = k0.cos();
    let denom = 1.0 + c * eta_i;
    if denom.abs() < GAP_EPS {
        return Err(Error::invalid(format!("no final coupling for eta_i = {eta_i} at k0 = {k0}")));
    }
    let eta_f = -(eta_i + c) / denom;
    check_domain(eta_i, eta_f)?;
    Ok(eta_f)
}

/// Phase difference `Ξ` and first-order coefficient `Z` of the small-`Δk` expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorQuantities {
    pub xi: f64,
    pub z: f64,
}

pub fn taylor_quantities(k0: f64, eta_i: f64, eta_f: f64) -> Result<TaylorQuantities> {
    let (s, c) = k0.sin_cos();
    let term = |eta: f64| -> Result<(f64, f64)> {
        let denom = 1.0 + eta * eta + 2.0 * eta * c;
        if denom < GAP_EPS {
            return Err(Error::GapClosing { k: k0, what: "vanishing expansion denominator" });
        }
        Ok(((eta * s).atan2(1.0 + eta * c), (eta * c + eta * eta) / denom))
    };
    let (phase_f, zf) = term(eta_f)?;
    let (phase_i, zi) = term(eta_i)?;
    Ok(TaylorQuantities { xi: phase_f - phase_i, z: zf - zi })
}

/// Which couplings a map varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapAxes {
    /// `x = η_i`, `y = η_f`.
    Coupling,
    /// `x = Δ_i/v`, `y = Δ_f/v` at fixed `w/v = eta` (two bands only).
    Onsite { eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRequest {
    pub spec: LatticeSpec,
    pub axes: MapAxes,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub k0: f64,
    pub dk: f64,
    pub statistics: Statistics,
    pub incident: usize,
    pub pair: (usize, usize),
}

/// Entropy and probability over a parameter grid, row-major in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub entropy: Vec<f64>,
    pub probability: Vec<f64>,
    /// No boundary, excluded coupling, or vanishing projection.
    pub null: Vec<bool>,
}

impl EntropyMap {
    pub fn at(&self, ix: usize, iy: usize) -> (f64, bool) {
        let i = iy * self.x.len() + ix;
        (self.entropy[i], self.null[i])
    }

    /// Matrix CSV: first row holds the `x` axis, first column the `y` axis.
    pub fn write_csv<W: Write>(&self, values: &[f64], corner: &str, mut w: W) -> io::Result<()> {
        write!(w, "{corner}")?;
        for x in &self.x {
            write!(w, ",{}", fmt_f64(*x))?;
        }
        writeln!(w)?;
        for (iy, y) in self.y.iter().enumerate() {
            write!(w, "{}", fmt_f64(*y))?;
            for v in &values[iy * self.x.len()..(iy + 1) * self.x.len()] {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn singular_ratio(eta: f64) -> bool {
    [0.0, 1.0, -1.0].iter().any(|s| (eta - s).abs() < GAP_EPS)
}

fn map_cell(req: &MapRequest, x: f64, y: f64) -> (f64, f64, bool) {
    let v = req.spec.v;
    let (pre, post) = match req.axes {
        MapAxes::Coupling => {
            if singular_ratio(x) || singular_ratio(y) || (x - y).abs() < GAP_EPS {
                return (f64::NAN, 0.0, true);
            }
            (CouplingSnapshot::hopping(x * v), CouplingSnapshot::hopping(y * v))
        }
        MapAxes::Onsite { eta } => {
            if (x - y).abs() < GAP_EPS {
                return (f64::NAN, 0.0, true);
            }
            (CouplingSnapshot::staggered(eta * v, x * v), CouplingSnapshot::staggered(eta * v, y * v))
        }
    };
    let (k1, k2) = (req.k0 - 0.5 * req.dk, req.k0 + 0.5 * req.dk);
    match scatter_coefficients(&req.spec, &pre, &post, k1, k2, req.incident, req.statistics)
        .and_then(|c| c.pair_projection(req.pair.0, req.pair.1))
    {
        Ok(p) if !p.null => (p.entropy, p.probability, false),
        Ok(p) => (f64::NAN, p.probability, true),
        Err(_) => (f64::NAN, 0.0, true),
    }
}

/// Plane-wave projected entropy over a grid of boundary parameters.
pub fn entropy_map(req: &MapRequest) -> Result<EntropyMap> {
    req.spec.validate()?;
    check_band(&req.spec, req.incident)?;
    if req.pair.0 == req.pair.1 || req.pair.0 >= req.spec.bands || req.pair.1 >= req.spec.bands {
        return Err(Error::invalid(format!("bad band pair {:?}", req.pair)));
    }
    if matches!(req.axes, MapAxes::Onsite { .. }) && req.spec.bands != 2 {
        return Err(Error::invalid("onsite maps need two bands"));
    }
    let cells: Vec<(f64, f64, bool)> = req
        .y
        .par_iter()
        .flat_map_iter(|&y| req.x.iter().map(move |&x| map_cell(req, x, y)))
        .collect();
    Ok(EntropyMap {
        x: req.x.clone(),
        y: req.y.clone(),
        entropy: cells.iter().map(|c| c.0).collect(),
        probability: cells.iter().map(|c| c.1).collect(),
        null: cells.iter().map(|c| c.2).collect(),
    })
}

/// `n` evenly spaced values on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
