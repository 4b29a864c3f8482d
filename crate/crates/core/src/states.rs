//! Single- and two-particle states and the band-momentum transform.
//!
//! A two-particle state is stored in first quantisation: `Φ(x₁, x₂)` over
//! ordered site pairs with `Φ(x₂, x₁) = ±Φ(x₁, x₂)` and `Σ|Φ|² = 1`. The
//! band-momentum tensor `A^{αβ}_{k,k'}` is the same object with a Bloch
//! transform on both legs, so it obeys Parseval against `Φ`.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::lattice::{BandTable, CouplingSnapshot, LatticeSpec};
use crate::linalg::{inner, norm_sq};

/// Relative envelope weight at the zone edge above which a Gaussian is "wide".
pub const EDGE_ENVELOPE_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Fermion,
    Boson,
}

impl Statistics {
    /// Exchange sign: +1 for bosons, -1 for fermions.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Fermion => -1.0,
            Statistics::Boson => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleWave {
    pub amplitudes: Vec<C64>,
}

impl SingleParticleWave {
    /// Normalises `amplitudes`; fails on the zero vector.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm_sq(&amplitudes).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroState("single-particle amplitudes"));
        }
        amplitudes.iter_mut().for_each(|z| *z /= n);
        Ok(SingleParticleWave { amplitudes })
    }

    pub fn sites(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.amplitudes)
    }

    pub fn overlap(&self, other: &SingleParticleWave) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Shifts the wave by `cells` unit cells (periodic wrap).
    pub fn translated(&self, spec: &LatticeSpec, cells: usize) -> SingleParticleWave {
        let n = self.sites();
        let shift = (cells % spec.cells) * spec.bands;
        let mut out = vec![C64::default(); n];
        for (i, z) in self.amplitudes.iter().enumerate() {
            out[(i + shift) % n] = *z;
        }
        SingleParticleWave { amplitudes: out }
    }
}

/// Bloch eigenstate `g_m^{(α)}(k) e^{ikl}/√L` of band `band` at grid wave number `k`.
pub fn plane_wave_orbital(bands: &BandTable, band: usize, k: f64) -> Result<SingleParticleWave> {
    let ki = bands.k_index(k)?;
    check_band(bands, band)?;
    let spec = &bands.spec;
    let kk = bands.kgrid[ki];
    let norm = (spec.cells as f64).sqrt();
    let mut amps = Vec::with_capacity(spec.sites());
    for l in 0..spec.cells {
        let phase = C64::from_polar(1.0 / norm, kk * l as f64);
        for m in 0..spec.bands {
            amps.push(bands.component(ki, band, m) * phase);
        }
    }
    Ok(SingleParticleWave { amplitudes: amps })
}

/// Signed distance `k - k_c` folded onto `(-π, π]`.
pub fn brillouin_distance(k: f64, k_c: f64) -> f64 {
    let d = (k - k_c).rem_euclid(2.0 * PI);
    if d > PI { d - 2.0 * PI } else { d }
}

/// Envelope value at the zone edge relative to the centre.
pub fn envelope_edge_ratio(k_width: f64) -> f64 {
    (-(PI / k_width).powi(2)).exp()
}

/// Gaussian wave packet on one band, centred at cell `x0`.
///
/// `ψ_{l,m} ∝ Σ_k exp[-(k - k_c)²/k_w²] g_m^{(α)}(k) e^{ik(l - x₀)}` with the
/// distance taken on the Brillouin circle.
pub fn gaussian_orbital(bands: &BandTable, band: usize, k_center: f64, k_width: f64, x0: f64) -> Result<SingleParticleWave> {
    if !(k_width > 0.0) {
        return Err(Error::invalid(format!("k width must be positive, got {k_width}")));
    }
    check_band(bands, band)?;
    let spec = &bands.spec;
    let mut amps = vec![C64::default(); spec.sites()];
    for (ki, &k) in bands.kgrid.iter().enumerate() {
        let env = (-(brillouin_distance(k, k_center) / k_width).powi(2)).exp();
        if env == 0.0 {
            continue;
        }
        for l in 0..spec.cells {
            let phase = C64::from_polar(env, k * (l as f64 - x0));
            for m in 0..spec.bands {
                amps[l * spec.bands + m] += bands.component(ki, band, m) * phase;
            }
        }
    }
    SingleParticleWave::normalized(amps)
}

fn check_band(bands: &BandTable, band: usize) -> Result<()> {
    if band >= bands.bands() {
        return Err(Error::invalid(format!("band index {band} out of range for {} bands", bands.bands())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// `norm · (φ₁⊗φ₂ ± φ₂⊗φ₁)`.
    OrbitalPair { first: SingleParticleWave, second: SingleParticleWave, norm: f64 },
    /// Row-major `Φ[x₁ · N + x₂]`.
    Dense { sites: usize, amplitudes: Vec<C64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleWave {
    pub statistics: Statistics,
    pub repr: Representation,
}

/// Which storage `pair_state` should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairForm {
    Orbitals,
    Dense,
}

/// Symmetrised (bosons) or antisymmetrised (fermions) product of two orbitals.
pub fn pair_state(first: &SingleParticleWave, second: &SingleParticleWave, statistics: Statistics, form: PairForm) -> Result<TwoParticleWave> {
    if first.sites() != second.sites() {
        return Err(Error::DimensionMismatch { expected: first.sites(), found: second.sites() });
    }
    let ov = first.overlap(second).norm_sqr();
    let raw = 2.0 * (1.0 + statistics.sign() * ov);
    if raw < 1e-12 {
        return Err(Error::PauliExclusion);
    }
    let norm = 1.0 / raw.sqrt();
    let pair = TwoParticleWave {
        statistics,
        repr: Representation::OrbitalPair { first: first.clone(), second: second.clone(), norm },
    };
    Ok(match form {
        PairForm::Orbitals => pair,
        PairForm::Dense => pair.to_dense(),
    })
}

impl TwoParticleWave {
    pub fn sites(&self) -> usize {
        match &self.repr {
            Representation::OrbitalPair { first, .. } => first.sites(),
            Representation::Dense { sites, .. } => *sites,
        }
    }

    /// Wraps a dense `Φ`; checks the exchange symmetry and normalises.
    pub fn from_dense(statistics: Statistics, sites: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != sites * sites {
            return Err(Error::DimensionMismatch { expected: sites * sites, found: amplitudes.len() });
        }
        let s = statistics.sign();
        let scale = amplitudes.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for i in 0..sites {
            for j in 0..i {
                if (amplitudes[i * sites + j] - amplitudes[j * sites + i] * s).norm() > 1e-12 * scale.max(1e-300) {
                    return Err(Error::invalid("dense amplitudes violate exchange symmetry"));
                }
            }
        }
        let n = norm_sq(&amplitudes).sqrt();
        if !(n > 0.0) {
            return Err(Error::ZeroState("two-particle amplitudes"));
        }
        amplitudes.iter_mut().for_each(|z| *z /= n);
        Ok(TwoParticleWave { statistics, repr: Representation::Dense { sites, amplitudes } })
    }

    pub fn dense_amplitudes(&self) -> Vec<C64> {
        match &self.repr {
            Representation::Dense { amplitudes, .. } => amplitudes.clone(),
            Representation::OrbitalPair { first, second, norm } => {
                let n = first.sites();
                let s = self.statistics.sign();
                let (a, b) = (&first.amplitudes, &second.amplitudes);
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        out.push((a[i] * b[j] + b[i] * a[j] * s) * *norm);
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> TwoParticleWave {
        TwoParticleWave {
            statistics: self.statistics,
            repr: Representation::Dense { sites: self.sites(), amplitudes: self.dense_amplitudes() },
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match &self.repr {
            Representation::Dense { amplitudes, .. } => norm_sq(amplitudes),
            Representation::OrbitalPair { first, second, norm } => {
                let raw = 2.0 * (first.norm_sq() * second.norm_sq() + self.statistics.sign() * first.overlap(second).norm_sqr());
                raw * norm * norm
            }
        }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &TwoParticleWave) -> C64 {
        use Representation::*;
        match (&self.repr, &other.repr) {
            (OrbitalPair { first: a, second: b, norm: n1 }, OrbitalPair { first: c, second: d, norm: n2 }) => {
                let s = self.statistics.sign();
                (a.overlap(c) * b.overlap(d) + a.overlap(d) * b.overlap(c) * s) * (2.0 * n1 * n2)
            }
            _ => inner(&self.dense_amplitudes(), &other.dense_amplitudes()),
        }
    }

    /// One-body density `n(x) = 2 Σ_y |Φ(x, y)|²`, summing to 2.
    pub fn site_density(&self) -> Vec<f64> {
        match &self.repr {
            Representation::OrbitalPair { first, second, norm } => {
                let s = self.statistics.sign();
                let ba = second.overlap(first);
                let (na, nb) = (first.norm_sq(), second.norm_sq());
                first
                    .amplitudes
                    .iter()
                    .zip(&second.amplitudes)
                    .map(|(a, b)| {
                        let cross = (a.conj() * b * ba).re;
                        2.0 * norm * norm * (a.norm_sqr() * nb + b.norm_sqr() * na + 2.0 * s * cross)
                    })
                    .collect()
            }
            Representation::Dense { sites, amplitudes } => amplitudes
                .chunks(*sites)
                .map(|row| 2.0 * norm_sq(row))
                .collect(),
        }
    }

    /// CSV with columns `cell, site, density` (1-based indices).
    pub fn write_density_csv<W: Write>(&self, spec: &LatticeSpec, mut w: W) -> io::Result<()> {
        writeln!(w, "cell,site,density")?;
        for (j, n) in self.site_density().iter().enumerate() {
            writeln!(w, "{},{},{}", j / spec.bands + 1, j % spec.bands + 1, fmt_f64(*n))?;
        }
        Ok(())
    }
}

/// Band-momentum amplitudes `A^{αβ}_{k,k'}` in the eigenbasis of `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAmplitudes {
    pub bands: usize,
    pub cells: usize,
    pub statistics: Statistics,
    /// Couplings whose eigenbasis the amplitudes are expressed in.
    pub basis: CouplingSnapshot,
    /// Row `(α, k)`, column `(β, k')`, both flattened as `band * L + k`.
    data: Vec<C64>,
}

impl BandAmplitudes {
    fn dim(&self) -> usize {
        self.bands * self.cells
    }

    pub fn get(&self, alpha: usize, beta: usize, k: usize, kp: usize) -> C64 {
        let n = self.dim();
        self.data[(alpha * self.cells + k) * n + beta * self.cells + kp]
    }

    /// `L × L` block with particle I on `alpha`, particle II on `beta`.
    pub fn block(&self, alpha: usize, beta: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.cells, self.cells, |k, kp| self.get(alpha, beta, k, kp))
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.data)
    }

    /// Weight in the block `(alpha, beta)`.
    pub fn block_weight(&self, alpha: usize, beta: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.cells {
            for kp in 0..self.cells {
                acc += self.get(alpha, beta, k, kp).norm_sqr();
            }
        }
        acc
    }

    /// Largest violation of `A^{αβ}_{k,k'} = ±A^{βα}_{k',k}`.
    pub fn exchange_defect(&self) -> f64 {
        let s = self.statistics.sign();
        let mut worst = 0.0f64;
        for a in 0..self.bands {
            for b in 0..self.bands {
                for k in 0..self.cells {
                    for kp in 0..self.cells {
                        worst = worst.max((self.get(a, b, k, kp) - self.get(b, a, kp, k) * s).norm());
                    }
                }
            }
        }
        worst
    }

    pub fn raw(&self) -> &[C64] {
        &self.data
    }
}

/// Bloch transform tables for one band structure.
struct Transform<'a> {
    bands: &'a BandTable,
    /// `e^{-2πi j / L} / √L`.
    twiddle: Vec<C64>,
}

impl<'a> Transform<'a> {
    fn new(bands: &'a BandTable) -> Self {
        let l = bands.spec.cells;
        let norm = (l as f64).sqrt();
        let twiddle = (0..l)
            .map(|j| C64::from_polar(1.0 / norm, -2.0 * PI * j as f64 / l as f64))
            .collect();
        Transform { bands, twiddle }
    }

    /// `t[α L + k] = Σ_{l,m} conj(u_{α,k}(l, m)) x(l, m)` for a strided vector.
    fn forward(&self, x: impl Fn(usize) -> C64, out: &mut [C64]) {
        let spec = &self.bands.spec;
        let (l_n, m_n) = (spec.cells, spec.bands);
        let mut fourier = vec![C64::default(); m_n];
        for n in 0..l_n {
            fourier.iter_mut().for_each(|z| *z = C64::default());
            for l in 0..l_n {
                let tw = self.twiddle[(n * l) % l_n];
                for (m, f) in fourier.iter_mut().enumerate() {
                    *f += x(l * m_n + m) * tw;
                }
            }
            for a in 0..m_n {
                out[a * l_n + n] = (0..m_n).map(|m| self.bands.component(n, a, m).conj() * fourier[m]).sum();
            }
        }
    }

    /// Inverse of [`forward`].
    fn backward(&self, t: impl Fn(usize) -> C64, out: &mut [C64]) {
        let spec = &self.bands.spec;
        let (l_n, m_n) = (spec.cells, spec.bands);
        for l in 0..l_n {
            for m in 0..m_n {
                let mut acc = C64::default();
                for n in 0..l_n {
                    let tw = self.twiddle[(n * l) % l_n].conj();
                    for a in 0..m_n {
                        acc += self.bands.component(n, a, m) * t(a * l_n + n) * tw;
                    }
                }
                out[l * m_n + m] = acc;
            }
        }
    }
}

fn check_layout(bands: &BandTable, sites: usize) -> Result<()> {
    if !bands.spec.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    if bands.spec.sites() != sites {
        return Err(Error::DimensionMismatch { expected: bands.spec.sites(), found: sites });
    }
    Ok(())
}

/// Band-momentum components `⟨α, k|φ⟩` indexed `α L + k`.
pub fn orbital_band_components(orbital: &SingleParticleWave, bands: &BandTable) -> Result<Vec<C64>> {
    check_layout(bands, orbital.sites())?;
    let mut out = vec![C64::default(); orbital.sites()];
    Transform::new(bands).forward(|i| orbital.amplitudes[i], &mut out);
    Ok(out)
}

/// Expresses a two-particle state in the band-momentum basis of `bands`.
pub fn to_band_amplitudes(state: &TwoParticleWave, bands: &BandTable) -> Result<BandAmplitudes> {
    let n = state.sites();
    check_layout(bands, n)?;
    let s = state.statistics.sign();
    let data = match &state.repr {
        Representation::OrbitalPair { first, second, norm } => {
            let a = orbital_band_components(first, bands)?;
            let b = orbital_band_components(second, bands)?;
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    out.push((a[i] * b[j] + b[i] * a[j] * s) * *norm);
                }
            }
            out
        }
        Representation::Dense { amplitudes, .. } => {
            let tr = Transform::new(bands);
            // first leg: columns of Φ
            let mut half = vec![C64::default(); n * n];
            let mut col = vec![C64::default(); n];
            for x2 in 0..n {
                tr.forward(|x1| amplitudes[x1 * n + x2], &mut col);
                for (r, z) in col.iter().enumerate() {
                    half[r * n + x2] = *z;
                }
            }
            let mut out = vec![C64::default(); n * n];
            for r in 0..n {
                tr.forward(|x2| half[r * n + x2], &mut out[r * n..(r + 1) * n]);
            }
            out
        }
    };
    Ok(BandAmplitudes {
        bands: bands.spec.bands,
        cells: bands.spec.cells,
        statistics: state.statistics,
        basis: bands.snapshot.clone(),
        data,
    })
}

/// Dense real-space `Φ` from band-momentum amplitudes.
pub fn from_band_amplitudes(amps: &BandAmplitudes, bands: &BandTable) -> Result<TwoParticleWave> {
    let n = amps.dim();
    check_layout(bands, n)?;
    let tr = Transform::new(bands);
    let mut half = vec![C64::default(); n * n];
    let mut col = vec![C64::default(); n];
    for c in 0..n {
        tr.backward(|r| amps.data[r * n + c], &mut col);
        for (x1, z) in col.iter().enumerate() {
            half[x1 * n + c] = *z;
        }
    }
    let mut out = vec![C64::default(); n * n];
    for x1 in 0..n {
        tr.backward(|c| half[x1 * n + c], &mut out[x1 * n..(x1 + 1) * n]);
    }
    Ok(TwoParticleWave { statistics: amps.statistics, repr: Representation::Dense { sites: n, amplitudes: out } })
}
