use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::AtomLevel;

/// Largest full-space dimension we are willing to enumerate.
pub const MAX_DIMENSION: usize = 1 << 20;

/// Product basis atom ⊗ forward mode ⊗ backward mode ⊗ source mode, each
/// mode truncated at its Fock cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    pub fock_cut_a: usize,
    pub fock_cut_b: usize,
    pub fock_cut_s: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub atom: AtomLevel,
    pub na: usize,
    pub nb: usize,
    pub ns: usize,
}

impl BasisState {
    /// Total number of excitations: photons in all modes plus the atom.
    pub fn excitations(&self) -> usize {
        self.na + self.nb + self.ns + usize::from(self.atom == AtomLevel::Excited)
    }
}

impl Default for HilbertSpace {
    fn default() -> Self {
        HilbertSpace {
            fock_cut_a: 2,
            fock_cut_b: 2,
            fock_cut_s: 2,
        }
    }
}

impl HilbertSpace {
    pub fn new(fock_cut_a: usize, fock_cut_b: usize, fock_cut_s: usize) -> Result<Self> {
        let space = HilbertSpace {
            fock_cut_a,
            fock_cut_b,
            fock_cut_s,
        };
        space.checked_dimension()?;
        Ok(space)
    }

    pub fn checked_dimension(&self) -> Result<usize> {
        let dim = [self.fock_cut_a, self.fock_cut_b, self.fock_cut_s]
            .iter()
            .try_fold(4usize, |acc, &c| acc.checked_mul(c.checked_add(1)?))
            .unwrap_or(usize::MAX);
        if dim > MAX_DIMENSION {
            return Err(Error::DimensionOverflow {
                dim,
                limit: MAX_DIMENSION,
            });
        }
        Ok(dim)
    }

    pub fn dimension(&self) -> usize {
        4 * (self.fock_cut_a + 1) * (self.fock_cut_b + 1) * (self.fock_cut_s + 1)
    }

    pub fn contains(&self, s: &BasisState) -> bool {
        s.na <= self.fock_cut_a && s.nb <= self.fock_cut_b && s.ns <= self.fock_cut_s
    }

    pub fn index(&self, s: &BasisState) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        let i = s.atom.index();
        let i = i * (self.fock_cut_a + 1) + s.na;
        let i = i * (self.fock_cut_b + 1) + s.nb;
        Some(i * (self.fock_cut_s + 1) + s.ns)
    }

    pub fn decompose(&self, index: usize) -> Option<BasisState> {
        if index >= self.dimension() {
            return None;
        }
        let ns = index % (self.fock_cut_s + 1);
        let rest = index / (self.fock_cut_s + 1);
        let nb = rest % (self.fock_cut_b + 1);
        let rest = rest / (self.fock_cut_b + 1);
        let na = rest % (self.fock_cut_a + 1);
        let atom = AtomLevel::from_index(rest / (self.fock_cut_a + 1))?;
        Some(BasisState { atom, na, nb, ns })
    }

    /// Every basis state in index order.
    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dimension()).map(|i| self.decompose(i).expect("index in range"))
    }

    /// Basis states with exactly `n` excitations, in index order.
    pub fn sector_states(&self, n: usize) -> Vec<BasisState> {
        let mut out = Vec::new();
        for atom in AtomLevel::ALL {
            let e = usize::from(atom == AtomLevel::Excited);
            if e > n {
                continue;
            }
            for na in 0..=self.fock_cut_a.min(n - e) {
                for nb in 0..=self.fock_cut_b.min(n - e - na) {
                    let ns = n - e - na - nb;
                    if ns <= self.fock_cut_s {
                        out.push(BasisState { atom, na, nb, ns });
                    }
                }
            }
        }
        out
    }

    /// Each cutoff doubled (a cutoff of zero becomes one).
    pub fn doubled(&self) -> Self {
        HilbertSpace {
            fock_cut_a: (2 * self.fock_cut_a).max(1),
            fock_cut_b: (2 * self.fock_cut_b).max(1),
            fock_cut_s: (2 * self.fock_cut_s).max(1),
        }
    }
}

/// Unnormalized state vector over the full [`HilbertSpace`] basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl QuantumState {
    pub fn basis(space: &HilbertSpace, s: BasisState, time: f64) -> Result<Self> {
        let idx = space
            .index(&s)
            .ok_or_else(|| Error::invalid(format!("basis state {s:?} outside the truncated space")))?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); space.dimension()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { amplitudes, time })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimension_formula() {
        let s = HilbertSpace::new(1, 1, 2).unwrap();
        assert_eq!(s.dimension(), 4 * 2 * 2 * 3);
        assert_eq!(s.states().count(), s.dimension());
        assert!(matches!(
            HilbertSpace::new(1000, 1000, 1000),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn sectors_partition_the_space() {
        let s = HilbertSpace::new(2, 1, 3).unwrap();
        let max_n = 2 + 1 + 3 + 1;
        let total: usize = (0..=max_n).map(|n| s.sector_states(n).len()).sum();
        assert_eq!(total, s.dimension());
        for n in 0..=max_n {
            for st in s.sector_states(n) {
                assert_eq!(st.excitations(), n);
            }
        }
    }

    #[test]
    fn basis_state_vector() {
        let s = HilbertSpace::default();
        let st = BasisState {
            atom: AtomLevel::GMinus,
            na: 0,
            nb: 0,
            ns: 2,
        };
        let q = QuantumState::basis(&s, st, 0.0).unwrap();
        assert_eq!(q.norm_sqr(), 1.0);
        let out = BasisState { ns: 3, ..st };
        assert!(QuantumState::basis(&s, out, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn index_round_trip(ca in 0usize..4, cb in 0usize..4, cs in 0usize..5, pick in 0usize..10_000) {
            let s = HilbertSpace::new(ca, cb, cs).unwrap();
            let i = pick % s.dimension();
            let st = s.decompose(i).unwrap();
            prop_assert_eq!(s.index(&st), Some(i));
        }
    }
}
