//! Fock space with at most two particles.

use std::collections::HashMap;
use std::ops::Range;

use num_complex::Complex64 as C64;

use crate::states::Statistics;

/// Vacuum, one-particle and two-particle occupation states.
///
/// State order: vacuum, `|j⟩ = a_j†|0⟩` for each site, then
/// `|i j⟩ = a_i† a_j†|0⟩` with `i < j` (and `i = j` for bosons).
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    statistics: Statistics,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl FockBasis {
    pub fn new(sites: usize, statistics: Statistics) -> Self {
        let mut states = vec![Vec::new()];
        states.extend((0..sites).map(|j| vec![j]));
        for i in 0..sites {
            let start = if statistics == Statistics::Boson { i } else { i + 1 };
            states.extend((start..sites).map(|j| vec![i, j]));
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        FockBasis { sites, statistics, states, index }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn number(&self, state: usize) -> usize {
        self.states[state].len()
    }

    pub fn pair_range(&self) -> Range<usize> {
        1 + self.sites..self.dim()
    }

    /// Sorted occupied sites of `state`, repeated for multiple occupation.
    pub fn occupation(&self, state: usize) -> &[usize] {
        &self.states[state]
    }

    fn lookup(&self, occ: &[usize]) -> usize {
        self.index[occ]
    }

    /// `a_q |occ⟩` as `(occupation, coefficient)`.
    fn annihilate_occ(&self, q: usize, occ: &[usize]) -> Option<(Vec<usize>, f64)> {
        let pos = occ.iter().position(|&s| s == q)?;
        let coeff = match self.statistics {
            Statistics::Fermion => if pos % 2 == 0 { 1.0 } else { -1.0 },
            Statistics::Boson => (occ.iter().filter(|&&s| s == q).count() as f64).sqrt(),
        };
        let mut out = occ.to_vec();
        out.remove(pos);
        Some((out, coeff))
    }

    /// `a_p† |occ⟩`; `None` beyond two particles or by exclusion.
    fn create_occ(&self, p: usize, occ: &[usize]) -> Option<(Vec<usize>, f64)> {
        if occ.len() >= 2 {
            return None;
        }
        let below = occ.iter().filter(|&&s| s < p).count();
        let same = occ.iter().filter(|&&s| s == p).count();
        let coeff = match self.statistics {
            Statistics::Fermion => {
                if same > 0 {
                    return None;
                }
                if below % 2 == 0 { 1.0 } else { -1.0 }
            }
            Statistics::Boson => ((same + 1) as f64).sqrt(),
        };
        let mut out = occ.to_vec();
        out.insert(below, p);
        Some((out, coeff))
    }

    /// `a_q |state⟩`.
    pub fn annihilate(&self, q: usize, state: usize) -> Option<(usize, f64)> {
        self.annihilate_occ(q, &self.states[state]).map(|(o, c)| (self.lookup(&o), c))
    }

    /// `a_p† a_q |state⟩`.
    pub fn hop(&self, p: usize, q: usize, state: usize) -> Option<(usize, f64)> {
        let (mid, c1) = self.annihilate_occ(q, &self.states[state])?;
        let (out, c2) = self.create_occ(p, &mid)?;
        Some((self.lookup(&out), c1 * c2))
    }

    /// Pair-sector coordinates of `Σ_{x,y} c(x, y) a_x† a_y† |0⟩`, indexed from
    /// the start of [`pair_range`](Self::pair_range).
    pub fn pair_sector_vector(&self, c: impl Fn(usize, usize) -> C64) -> Vec<C64> {
        let s = self.statistics.sign();
        self.states[self.pair_range()]
            .iter()
            .map(|occ| {
                let (i, j) = (occ[0], occ[1]);
                if i == j {
                    c(i, i) * std::f64::consts::SQRT_2
                } else {
                    c(i, j) + c(j, i) * s
                }
            })
            .collect()
    }

    /// Full Fock vector of the first-quantised pair `Φ` (row-major `N × N`):
    /// `(1/√2) Σ Φ(x, y) a_x† a_y† |0⟩`.
    pub fn from_first_quantized(&self, phi: &[C64]) -> Vec<C64> {
        let n = self.sites;
        let pair = self.pair_sector_vector(|x, y| phi[x * n + y] * std::f64::consts::FRAC_1_SQRT_2);
        let mut out = vec![C64::default(); self.dim()];
        out[self.pair_range()].copy_from_slice(&pair);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(FockBasis::new(4, Statistics::Fermion).dim(), 1 + 4 + 6);
        assert_eq!(FockBasis::new(4, Statistics::Boson).dim(), 1 + 4 + 10);
    }

    #[test]
    fn fermion_signs() {
        let b = FockBasis::new(3, Statistics::Fermion);
        let s02 = b.lookup(&[0, 2]);
        // a_2 passes one operator (-1), a_1† passes one occupied site (-1)
        let (dst, c) = b.hop(1, 2, s02).unwrap();
        assert_eq!(b.occupation(dst), &[0, 1]);
        assert_eq!(c, 1.0);
        let (dst, c) = b.hop(1, 0, s02).unwrap();
        assert_eq!(b.occupation(dst), &[1, 2]);
        assert_eq!(c, 1.0);
        assert!(b.hop(0, 2, s02).is_none());
    }

    #[test]
    fn fermion_hop_matches_anticommutation() {
        // a_0† a_2 |1 2⟩ = a_0† (-|1⟩) = -|0 1⟩
        let b = FockBasis::new(3, Statistics::Fermion);
        let (dst, c) = b.hop(0, 2, b.lookup(&[1, 2])).unwrap();
        assert_eq!(b.occupation(dst), &[0, 1]);
        assert_eq!(c, -1.0);
    }

    #[test]
    fn boson_factors() {
        let b = FockBasis::new(2, Statistics::Boson);
        let (dst, c) = b.hop(1, 0, b.lookup(&[0, 0])).unwrap();
        assert_eq!(b.occupation(dst), &[0, 1]);
        assert!((c - 2f64.sqrt()).abs() < 1e-15);
        let (dst, c) = b.hop(1, 0, b.lookup(&[0, 1])).unwrap();
        assert_eq!(b.occupation(dst), &[1, 1]);
        assert!((c - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn first_quantized_norm_is_preserved() {
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let n = 3;
            let s = stats.sign();
            let mut phi = vec![C64::default(); 9];
            let raw = [(0, 1, C64::new(0.3, 0.1)), (0, 2, C64::new(-0.2, 0.4)), (1, 2, C64::new(0.5, 0.0))];
            for (i, j, z) in raw {
                phi[i * n + j] = z;
                phi[j * n + i] = z * s;
            }
            if stats == Statistics::Boson {
                phi[4] = C64::new(0.2, -0.3);
            }
            let fock = FockBasis::new(n, stats).from_first_quantized(&phi);
            let a: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
            let b: f64 = fock.iter().map(|z| z.norm_sqr()).sum();
            assert!((a - b).abs() < 1e-14);
        }
    }
}
