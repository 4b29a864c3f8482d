//! Multiband SSH chain: real-space and Bloch Hamiltonians, band structure.
//!
//! Sites are indexed `cell * M + site` with both indices zero-based. Inside a
//! cell neighbouring sites couple with `v`; the last site of cell `l` couples
//! to the first site of cell `l + 1` with `w`. A periodic chain also closes the
//! bond from the last cell back to the first.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diag::Warning;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg;

/// Bands closer than this are reported as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Below this magnitude the last eigenvector component cannot fix the gauge.
pub const GAUGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Sites per unit cell.
    pub bands: usize,
    /// Number of unit cells.
    pub cells: usize,
    /// Intra-cell hopping, the energy unit.
    pub v: f64,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(bands: usize, cells: usize, v: f64, boundary: Boundary) -> Result<Self> {
        let spec = LatticeSpec { bands, cells, v, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn periodic(bands: usize, cells: usize) -> Self {
        LatticeSpec { bands, cells, v: 1.0, boundary: Boundary::Periodic }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands < 2 {
            return Err(Error::invalid(format!("need at least 2 sites per cell, got {}", self.bands)));
        }
        if self.cells < 2 {
            return Err(Error::invalid(format!("need at least 2 cells, got {}", self.cells)));
        }
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::invalid(format!("intra-cell coupling must be positive, got {}", self.v)));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.bands * self.cells
    }

    pub fn site_index(&self, cell: usize, site: usize) -> usize {
        cell * self.bands + site
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Grid wave numbers `2πn/L`, `n = 0..L`.
    pub fn kgrid(&self) -> Vec<f64> {
        (0..self.cells).map(|n| 2.0 * PI * n as f64 / self.cells as f64).collect()
    }

    /// Index of `k` on the grid (modulo 2π), or `OffGrid`.
    pub fn k_index(&self, k: f64) -> Result<usize> {
        let x = k / (2.0 * PI) * self.cells as f64;
        let n = x.round();
        if (x - n).abs() > 1e-9 {
            return Err(Error::OffGrid(k));
        }
        Ok((n as i64).rem_euclid(self.cells as i64) as usize)
    }
}

/// Instantaneous couplings on top of the static lattice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingSnapshot {
    /// Inter-cell hopping.
    pub w: f64,
    /// Staggered onsite amplitude: `+Δ` on the first, `-Δ` on the second site (M = 2 only).
    pub delta: f64,
    /// Shift added to every intra-cell bond.
    pub dv: f64,
    /// Per-bond offsets, bond `j` joining sites `j` and `j + 1`.
    pub bond_offsets: Option<Vec<f64>>,
    /// Per-site onsite offsets.
    pub onsite: Option<Vec<f64>>,
}

impl CouplingSnapshot {
    pub fn hopping(w: f64) -> Self {
        CouplingSnapshot { w, ..Default::default() }
    }

    pub fn staggered(w: f64, delta: f64) -> Self {
        CouplingSnapshot { w, delta, ..Default::default() }
    }

    fn check(&self, spec: &LatticeSpec) -> Result<()> {
        if self.delta != 0.0 && spec.bands != 2 {
            return Err(Error::invalid("staggered onsite energy requires 2 sites per cell"));
        }
        for v in [&self.bond_offsets, &self.onsite].into_iter().flatten() {
            if v.len() != spec.sites() {
                return Err(Error::DimensionMismatch { expected: spec.sites(), found: v.len() });
            }
        }
        Ok(())
    }
}

/// Nearest-neighbour chain Hamiltonian with real couplings.
///
/// `bonds[j]` couples sites `j` and `(j + 1) % n`; an open chain has
/// `bonds[n - 1] == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainHamiltonian {
    pub onsite: Vec<f64>,
    pub bonds: Vec<f64>,
}

impl ChainHamiltonian {
    pub fn zeros(sites: usize) -> Self {
        ChainHamiltonian { onsite: vec![0.0; sites], bonds: vec![0.0; sites] }
    }

    pub fn sites(&self) -> usize {
        self.onsite.len()
    }

    /// Matrix element `H[i][j]`.
    pub fn element(&self, i: usize, j: usize) -> f64 {
        let n = self.sites();
        if i == j {
            self.onsite[i]
        } else if (i + 1) % n == j {
            self.bonds[i]
        } else if (j + 1) % n == i {
            self.bonds[j]
        } else {
            0.0
        }
    }

    /// Non-zero entries as `(row, col, value)` triplets, both triangles.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.sites();
        let mut out = Vec::with_capacity(3 * n);
        for (i, &e) in self.onsite.iter().enumerate() {
            if e != 0.0 {
                out.push((i, i, e));
            }
        }
        for (j, &b) in self.bonds.iter().enumerate() {
            if b != 0.0 {
                let k = (j + 1) % n;
                out.push((j, k, b));
                out.push((k, j, b));
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.sites();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += C64::new(v, 0.0);
        }
        m
    }

    /// `out = H x`.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        let n = self.sites();
        debug_assert!(x.len() == n && out.len() == n);
        let b = &self.bonds;
        out[0] = x[0] * self.onsite[0] + x[1] * b[0] + x[n - 1] * b[n - 1];
        for j in 1..n - 1 {
            out[j] = x[j] * self.onsite[j] + x[j + 1] * b[j] + x[j - 1] * b[j - 1];
        }
        out[n - 1] = x[n - 1] * self.onsite[n - 1] + x[0] * b[n - 1] + x[n - 2] * b[n - 2];
    }

    /// `out = -i H x`, the Schrödinger right-hand side.
    pub fn apply_neg_i(&self, x: &[C64], out: &mut [C64]) {
        self.apply(x, out);
        for z in out.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }
}

/// Real-space Hamiltonian of the chain for one coupling snapshot.
pub fn build_real_space_hamiltonian(spec: &LatticeSpec, snap: &CouplingSnapshot) -> Result<ChainHamiltonian> {
    let mut h = ChainHamiltonian::zeros(spec.sites());
    fill_chain(spec, snap, &mut h)?;
    Ok(h)
}

/// Same as [`build_real_space_hamiltonian`] but reuses `h`'s buffers.
pub fn fill_chain(spec: &LatticeSpec, snap: &CouplingSnapshot, h: &mut ChainHamiltonian) -> Result<()> {
    spec.validate()?;
    snap.check(spec)?;
    let n = spec.sites();
    let m = spec.bands;
    h.onsite.resize(n, 0.0);
    h.bonds.resize(n, 0.0);
    for j in 0..n {
        let site = j % m;
        h.bonds[j] = if site + 1 < m { spec.v + snap.dv } else { snap.w };
        h.onsite[j] = match site {
            0 => snap.delta,
            1 => -snap.delta,
            _ => 0.0,
        };
    }
    if let Some(off) = &snap.bond_offsets {
        h.bonds.iter_mut().zip(off).for_each(|(b, o)| *b += o);
    }
    if let Some(off) = &snap.onsite {
        h.onsite.iter_mut().zip(off).for_each(|(e, o)| *e += o);
    }
    if !spec.is_periodic() {
        h.bonds[n - 1] = 0.0;
    }
    Ok(())
}

/// Pattern of a per-site/per-bond vector inside one cell, if it repeats with the cell.
fn cell_pattern(v: &[f64], m: usize) -> Option<Vec<f64>> {
    let pat = v[..m].to_vec();
    v.chunks(m).all(|c| c == pat.as_slice()).then_some(pat)
}

/// Bloch Hamiltonian `H(k)` in the basis of the `M` sites of one cell.
pub fn bloch_hamiltonian(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64) -> Result<DMatrix<C64>> {
    spec.validate()?;
    snap.check(spec)?;
    if !spec.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    let m = spec.bands;
    let bonds = match &snap.bond_offsets {
        Some(off) => cell_pattern(off, m)
            .ok_or_else(|| Error::invalid("bond offsets are not cell-periodic"))?,
        None => vec![0.0; m],
    };
    let onsite = match &snap.onsite {
        Some(off) => cell_pattern(off, m)
            .ok_or_else(|| Error::invalid("onsite offsets are not cell-periodic"))?,
        None => vec![0.0; m],
    };
    let mut h = DMatrix::<C64>::zeros(m, m);
    for a in 0..m {
        let stagger = match a {
            0 => snap.delta,
            1 => -snap.delta,
            _ => 0.0,
        };
        h[(a, a)] = C64::new(stagger + onsite[a], 0.0);
    }
    for a in 0..m - 1 {
        let t = C64::new(spec.v + snap.dv + bonds[a], 0.0);
        h[(a, a + 1)] += t;
        h[(a + 1, a)] += t;
    }
    let w = snap.w + bonds[m - 1];
    let phase = C64::from_polar(w, -k);
    h[(0, m - 1)] += phase;
    h[(m - 1, 0)] += phase.conj();
    Ok(h)
}

/// Sorted bands and gauge-fixed eigenvectors of `H(k)`.
pub struct BlochSolution {
    pub energies: Vec<f64>,
    /// Columns are the band eigenvectors.
    pub vectors: DMatrix<C64>,
    pub warnings: Vec<Warning>,
}

pub fn solve_bloch(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64) -> Result<BlochSolution> {
    let h = bloch_hamiltonian(spec, snap, k)?;
    let (energies, mut vectors) = linalg::eigh(h);
    let m = spec.bands;
    let mut warnings = Vec::new();
    for band in 0..m {
        let last = vectors[(m - 1, band)];
        let pivot = if last.norm() >= GAUGE_EPS {
            last
        } else {
            let (idx, _) = (0..m)
                .map(|r| (r, vectors[(r, band)].norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            warnings.push(Warning::GaugeFallback { k, band, component: idx });
            vectors[(idx, band)]
        };
        let fix = pivot.conj() / pivot.norm();
        vectors.column_mut(band).iter_mut().for_each(|z| *z *= fix);
    }
    for band in 1..m {
        let gap = energies[band] - energies[band - 1];
        if gap < DEGENERACY_GAP {
            warnings.push(Warning::Degeneracy { k, lower: band - 1, upper: band, gap });
        }
    }
    Ok(BlochSolution { energies, vectors, warnings })
}

/// Band energies only.
pub fn bloch_energies(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64) -> Result<Vec<f64>> {
    Ok(linalg::eigvalsh(bloch_hamiltonian(spec, snap, k)?))
}

/// Group velocities `dε_α/dk` by Richardson-refined central differences.
pub fn finite_difference_velocities(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64, h0: f64) -> Result<Vec<f64>> {
    const LEVELS: usize = 4;
    let m = spec.bands;
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(LEVELS);
    for i in 0..LEVELS {
        let h = h0 / f64::powi(2.0, i as i32);
        let plus = bloch_energies(spec, snap, k + h)?;
        let minus = bloch_energies(spec, snap, k - h)?;
        let mut row = vec![(0..m).map(|a| (plus[a] - minus[a]) / (2.0 * h)).collect::<Vec<_>>()];
        for j in 1..=i {
            let factor = f64::powi(4.0, j as i32) - 1.0;
            let prev = &table[i - 1][j - 1];
            let cur = &row[j - 1];
            row.push((0..m).map(|a| cur[a] + (cur[a] - prev[a]) / factor).collect());
        }
        table.push(row);
    }
    Ok(table[LEVELS - 1][LEVELS - 1].clone())
}

/// Closed-form velocities of the two-band chain with staggered onsite energy.
fn two_band_velocities(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64) -> [f64; 2] {
    let v = spec.v + snap.dv;
    let w = snap.w;
    let eps = (v * v + w * w + 2.0 * v * w * k.cos() + snap.delta * snap.delta).sqrt();
    if eps < DEGENERACY_GAP {
        return [0.0, 0.0];
    }
    let slope = v * w * k.sin() / eps;
    [slope, -slope]
}

/// Group velocities at any `k`: closed form for two cell-uniform bands,
/// Richardson differences with base step `2π/L` otherwise.
pub fn group_velocities(spec: &LatticeSpec, snap: &CouplingSnapshot, k: f64) -> Result<Vec<f64>> {
    if spec.bands == 2 && snap.bond_offsets.is_none() && snap.onsite.is_none() {
        Ok(two_band_velocities(spec, snap, k).to_vec())
    } else {
        finite_difference_velocities(spec, snap, k, 2.0 * PI / spec.cells as f64)
    }
}

/// Per-k bands of a periodic chain.
#[derive(Debug, Clone)]
pub struct BandTable {
    pub spec: LatticeSpec,
    pub snapshot: CouplingSnapshot,
    pub kgrid: Vec<f64>,
    energies: Vec<f64>,
    vectors: Vec<DMatrix<C64>>,
    velocities: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl BandTable {
    pub fn bands(&self) -> usize {
        self.spec.bands
    }

    pub fn len(&self) -> usize {
        self.kgrid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kgrid.is_empty()
    }

    pub fn energy(&self, ki: usize, band: usize) -> f64 {
        self.energies[ki * self.spec.bands + band]
    }

    pub fn velocity(&self, ki: usize, band: usize) -> f64 {
        self.velocities[ki * self.spec.bands + band]
    }

    /// Eigenvector matrix at `kgrid[ki]`; column `α` is `u_α(k)`.
    pub fn vectors(&self, ki: usize) -> &DMatrix<C64> {
        &self.vectors[ki]
    }

    pub fn component(&self, ki: usize, band: usize, site: usize) -> C64 {
        self.vectors[ki][(site, band)]
    }

    pub fn k_index(&self, k: f64) -> Result<usize> {
        self.spec.k_index(k)
    }

    /// Applies an arbitrary phase `phases[ki][band]` to every eigenvector.
    /// Physical quantities must not change under this.
    pub fn regauge(&mut self, phases: impl Fn(usize, usize) -> f64) {
        for (ki, vecs) in self.vectors.iter_mut().enumerate() {
            for band in 0..vecs.ncols() {
                let p = C64::from_polar(1.0, phases(ki, band));
                vecs.column_mut(band).iter_mut().for_each(|z| *z *= p);
            }
        }
    }

    /// CSV with columns `k, band_index, energy, velocity, re_u1, im_u1, ...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = self.spec.bands;
        write!(w, "k,band_index,energy,velocity")?;
        for s in 1..=m {
            write!(w, ",re_u{s},im_u{s}")?;
        }
        writeln!(w)?;
        for (ki, &k) in self.kgrid.iter().enumerate() {
            for band in 0..m {
                write!(
                    w,
                    "{},{},{},{}",
                    fmt_f64(k),
                    band + 1,
                    fmt_f64(self.energy(ki, band)),
                    fmt_f64(self.velocity(ki, band))
                )?;
                for s in 0..m {
                    let z = self.component(ki, band, s);
                    write!(w, ",{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Bands, gauge-fixed eigenvectors and group velocities on the k-grid.
pub fn solve_bands(spec: &LatticeSpec, snap: &CouplingSnapshot) -> Result<BandTable> {
    spec.validate()?;
    if !spec.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    let kgrid = spec.kgrid();
    let per_k: Vec<(BlochSolution, Vec<f64>)> = kgrid
        .par_iter()
        .map(|&k| Ok((solve_bloch(spec, snap, k)?, group_velocities(spec, snap, k)?)))
        .collect::<Result<_>>()?;

    let mut table = BandTable {
        spec: *spec,
        snapshot: snap.clone(),
        kgrid,
        energies: Vec::with_capacity(spec.sites()),
        vectors: Vec::with_capacity(spec.cells),
        velocities: Vec::with_capacity(spec.sites()),
        warnings: Vec::new(),
    };
    for (sol, vel) in per_k {
        table.energies.extend(&sol.energies);
        table.velocities.extend(vel);
        table.vectors.push(sol.vectors);
        table.warnings.extend(sol.warnings);
    }
    Ok(table)
}
