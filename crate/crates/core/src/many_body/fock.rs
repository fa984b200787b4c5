use crate::error::{Error, Result};

/// Fixed-particle-number block of the Fock space of `n_sites` fermionic
/// modes. Bit `i` of a mask is the occupation of the `i`-th site from the
/// left edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSector {
    pub n_sites: usize,
    pub n_particles: usize,
    pub states: Vec<u64>,
}

impl FockSector {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.states.binary_search(&mask).ok()
    }
}

/// All masks on `L + 1` sites with `n_particles` bits set, ascending.
pub fn enumerate_sector(l: usize, n_particles: usize) -> Result<FockSector> {
    let n_sites = l + 1;
    if n_sites > 63 {
        return Err(Error::invalid("L", "at most 62 for bitmask states"));
    }
    if n_particles > n_sites {
        return Err(Error::invalid("n_particles", "cannot exceed the number of sites"));
    }
    let mut states = Vec::with_capacity(binomial(n_sites, n_particles));
    if n_particles == 0 {
        states.push(0);
    } else {
        let limit = 1u64 << n_sites;
        let mut mask = (1u64 << n_particles) - 1;
        while mask < limit {
            states.push(mask);
            // Gosper's hack: next integer with the same popcount
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }
    Ok(FockSector { n_sites, n_particles, states })
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `a⁺` on bit `i`: the new mask and the sign `(-1)^{occupied bits below i}`,
/// or `None` if the site is already filled.
pub fn create(mask: u64, i: usize) -> Option<(u64, bool)> {
    let bit = 1u64 << i;
    if mask & bit != 0 {
        return None;
    }
    let negative = (mask & (bit - 1)).count_ones() % 2 == 1;
    Some((mask | bit, negative))
}

/// `a⁻` on bit `i`, with the same sign convention as [`create`].
pub fn annihilate(mask: u64, i: usize) -> Option<(u64, bool)> {
    let bit = 1u64 << i;
    if mask & bit == 0 {
        return None;
    }
    let negative = (mask & (bit - 1)).count_ones() % 2 == 1;
    Some((mask & !bit, negative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sectors() {
        assert_eq!(enumerate_sector(2, 0).unwrap().states, vec![0]);
        assert_eq!(enumerate_sector(2, 1).unwrap().states, vec![0b001, 0b010, 0b100]);
        assert_eq!(enumerate_sector(2, 2).unwrap().states, vec![0b011, 0b101, 0b110]);
        assert_eq!(enumerate_sector(2, 3).unwrap().states, vec![0b111]);
        assert!(enumerate_sector(2, 4).is_err());
    }

    #[test]
    fn anticommutation_on_masks() {
        // a_i a⁺_j + a⁺_j a_i = δ_ij, checked on every basis state of 5 modes
        for mask in 0u64..32 {
            for i in 0..5 {
                for j in 0..5 {
                    let mut total = std::collections::BTreeMap::<u64, i32>::new();
                    if let Some((m1, s1)) = create(mask, j) {
                        if let Some((m2, s2)) = annihilate(m1, i) {
                            *total.entry(m2).or_default() += if s1 ^ s2 { -1 } else { 1 };
                        }
                    }
                    if let Some((m1, s1)) = annihilate(mask, i) {
                        if let Some((m2, s2)) = create(m1, j) {
                            *total.entry(m2).or_default() += if s1 ^ s2 { -1 } else { 1 };
                        }
                    }
                    total.retain(|_, v| *v != 0);
                    if i == j {
                        assert_eq!(total.into_iter().collect::<Vec<_>>(), vec![(mask, 1)]);
                    } else {
                        assert!(total.is_empty());
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sector_invariants(l in 0usize..12, n in 0usize..13) {
            prop_assume!(n <= l + 1);
            let s = enumerate_sector(l, n).unwrap();
            prop_assert_eq!(s.len(), binomial(l + 1, n));
            prop_assert!(s.states.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.states.iter().all(|m| m.count_ones() as usize == n && *m >> (l + 1) == 0));
            for (k, &m) in s.states.iter().enumerate() {
                prop_assert_eq!(s.index_of(m), Some(k));
            }
        }
    }
}
