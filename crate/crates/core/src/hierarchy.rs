//! The truncated set of multi-indices {(j₁,…,j_K) : Σ j_k ≤ N_max} with
//! ranking and neighbour tables.
//!
//! States are grouped by total phonon number n ascending; within a level they
//! are in colexicographic order (the last component varies slowest).

use crate::error::{HeomError, Result};

/// Marks a missing neighbour in the flat tables.
pub const ABSENT: u32 = u32::MAX;

/// Number of complex amplitude buffers the RK4 propagator keeps alive.
pub const PROPAGATION_BUFFERS: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateBudget {
    pub max_states: usize,
    /// Grid points per state, used only for the memory estimate in errors.
    pub grid_points: usize,
}

impl Default for StateBudget {
    fn default() -> Self {
        Self {
            max_states: 2_000_000,
            grid_points: 44,
        }
    }
}

/// Bytes needed to propagate `states` hierarchy members on `grid_points`
/// points, including the neighbour tables.
pub fn memory_estimate(states: u128, k: usize, grid_points: usize) -> u128 {
    let amplitudes = states * grid_points as u128 * 16 * PROPAGATION_BUFFERS;
    let tables = states * k as u128 * (2 * 4 + 1);
    amplitudes + tables
}

/// C(n, r) in u128, saturating at u128::MAX.
pub fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc·(n−i) is divisible by (i+1) at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// C(N_max + K, K).
pub fn state_count(k: usize, n_max: usize) -> u128 {
    binomial((n_max + k) as u64, k as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub j: Vec<u8>,
}

impl MultiIndex {
    pub fn new(j: Vec<u8>) -> Self {
        Self { j }
    }

    pub fn vacuum(k: usize) -> Self {
        Self { j: vec![0; k] }
    }

    /// Phonon number n = Σ j_k.
    pub fn n(&self) -> usize {
        self.j.iter().map(|&x| x as usize).sum()
    }
}

#[derive(Debug, Clone)]
pub struct IndexSpace {
    k: usize,
    n_max: usize,
    total: usize,
    occupations: Vec<u8>,
    level_start: Vec<usize>,
    /// compositions[p][s] = C(s + p − 1, p − 1), the number of ways to
    /// write s as an ordered sum of p non-negative parts.
    compositions: Vec<Vec<usize>>,
    lower: Vec<u32>,
    raise: Vec<u32>,
}

impl IndexSpace {
    pub fn enumerate(k: usize, n_max: usize, budget: StateBudget) -> Result<Self> {
        if k == 0 {
            return Err(crate::error::invalid(
                "k",
                "need at least one bath function",
            ));
        }
        if n_max > u8::MAX as usize {
            return Err(crate::error::invalid(
                "n_max",
                format!("at most {} supported", u8::MAX),
            ));
        }
        let required = state_count(k, n_max);
        if required > budget.max_states as u128 || required >= ABSENT as u128 {
            return Err(HeomError::SizingExceeded {
                required,
                budget: budget.max_states,
                k,
                n_max,
                memory_bytes: memory_estimate(required, k, budget.grid_points),
            });
        }
        let total = required as usize;

        let mut compositions = vec![vec![0usize; n_max + 1]; k + 1];
        for (p, row) in compositions.iter_mut().enumerate().skip(1) {
            for (s, c) in row.iter_mut().enumerate() {
                *c = binomial((s + p - 1) as u64, (p - 1) as u64) as usize;
            }
        }
        let mut level_start = vec![0usize; n_max + 2];
        for n in 0..=n_max {
            level_start[n + 1] = level_start[n] + compositions[k][n];
        }

        let mut space = Self {
            k,
            n_max,
            total,
            occupations: vec![0; total * k],
            level_start,
            compositions,
            lower: vec![ABSENT; total * k],
            raise: vec![ABSENT; total * k],
        };
        space.fill_occupations();
        space.fill_neighbours();
        Ok(space)
    }

    fn fill_occupations(&mut self) {
        let k = self.k;
        let mut j = vec![0u8; k];
        for n in 0..=self.n_max {
            // first composition of n in colex order puts everything in j₁
            j.iter_mut().for_each(|x| *x = 0);
            j[0] = n as u8;
            for s in self.level_start[n]..self.level_start[n + 1] {
                self.occupations[s * k..(s + 1) * k].copy_from_slice(&j);
                next_colex(&mut j);
            }
        }
    }

    fn fill_neighbours(&mut self) {
        let k = self.k;
        let mut j = vec![0u8; k];
        for s in 0..self.total {
            j.copy_from_slice(self.occupation(s));
            let n: usize = j.iter().map(|&x| x as usize).sum();
            for a in 0..k {
                if j[a] >= 1 {
                    j[a] -= 1;
                    self.lower[s * k + a] = self.rank_unchecked(&j, n - 1) as u32;
                    j[a] += 1;
                }
                if n < self.n_max {
                    j[a] += 1;
                    self.raise[s * k + a] = self.rank_unchecked(&j, n + 1) as u32;
                    j[a] -= 1;
                }
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Ordinals of phonon-number level n, as a half-open range.
    pub fn level(&self, n: usize) -> std::ops::Range<usize> {
        self.level_start[n]..self.level_start[n + 1]
    }

    /// j_k of state s for every k.
    pub fn occupation(&self, s: usize) -> &[u8] {
        &self.occupations[s * self.k..(s + 1) * self.k]
    }

    pub fn phonon_number(&self, s: usize) -> usize {
        self.level_start.partition_point(|&start| start <= s) - 1
    }

    /// The state with j_k decreased by one, if j_k ≥ 1.
    pub fn lower(&self, s: usize, k: usize) -> Option<usize> {
        decode(self.lower[s * self.k + k])
    }

    /// The state with j_k increased by one, if that stays within N_max.
    pub fn raise(&self, s: usize, k: usize) -> Option<usize> {
        decode(self.raise[s * self.k + k])
    }

    /// raise(lower(s, k), k'): one phonon moved from k to k'.
    pub fn shift(&self, s: usize, from: usize, to: usize) -> Option<usize> {
        let down = self.lower(s, from)?;
        self.raise(down, to)
    }

    /// Flat lower table, `ABSENT` where j_k = 0.
    pub fn lower_table(&self) -> &[u32] {
        &self.lower
    }

    /// Flat raise table, `ABSENT` on the top level.
    pub fn raise_table(&self) -> &[u32] {
        &self.raise
    }

    pub fn rank(&self, j: &MultiIndex) -> Result<usize> {
        let n = j.n();
        if j.j.len() != self.k || n > self.n_max {
            return Err(HeomError::OutOfSpace(j.j.clone()));
        }
        Ok(self.rank_unchecked(&j.j, n))
    }

    pub fn unrank(&self, ordinal: usize) -> Result<MultiIndex> {
        if ordinal >= self.total {
            return Err(HeomError::OrdinalOutOfRange {
                ordinal,
                total: self.total,
            });
        }
        Ok(MultiIndex::new(self.occupation(ordinal).to_vec()))
    }

    fn rank_unchecked(&self, j: &[u8], n: usize) -> usize {
        // colex: count compositions of the same n that agree above position p
        // and have a smaller value at p
        let mut within = 0;
        let mut remaining = n;
        for p in (1..self.k).rev() {
            let jp = j[p] as usize;
            for m in 0..jp {
                within += self.compositions[p][remaining - m];
            }
            remaining -= jp;
        }
        self.level_start[n] + within
    }
}

fn decode(v: u32) -> Option<usize> {
    (v != ABSENT).then_some(v as usize)
}

/// Advances j to the next composition of the same total in colex order.
/// Returns false after the last one.
fn next_colex(j: &mut [u8]) -> bool {
    // find the first position p ≥ 1 such that some weight sits below it;
    // move one unit up to p and gather the rest into j₁
    let k = j.len();
    let mut below = j[0] as usize;
    for p in 1..k {
        if below > 0 {
            j[p] += 1;
            for x in j[..p].iter_mut() {
                *x = 0;
            }
            j[0] = (below - 1) as u8;
            return true;
        }
        below += j[p] as usize;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn space(k: usize, n: usize) -> IndexSpace {
        IndexSpace::enumerate(k, n, StateBudget::default()).unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(space(10, 3).total(), 286);
        assert_eq!(space(10, 4).total(), 1001);
        assert_eq!(space(10, 5).total(), 3003);
        assert_eq!(space(20, 5).total(), 53130);
        assert_eq!(space(7, 0).total(), 1);
        assert_eq!(state_count(10, 10), 184756);
    }

    #[test]
    fn count_matches_brute_force() {
        for k in 1..=5 {
            for n in 0..=4 {
                let mut count = 0;
                let limit = (n + 1) as u32;
                let combos = limit.pow(k as u32);
                for code in 0..combos {
                    let mut c = code;
                    let mut sum = 0;
                    for _ in 0..k {
                        sum += c % limit;
                        c /= limit;
                    }
                    if sum as usize <= n {
                        count += 1;
                    }
                }
                assert_eq!(space(k, n).total(), count, "K={k} N={n}");
            }
        }
    }

    #[test]
    fn ordering_and_ranks() {
        let s = space(3, 2);
        let order: Vec<Vec<u8>> = (0..s.total()).map(|i| s.occupation(i).to_vec()).collect();
        assert_eq!(
            order,
            vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
        assert_eq!(s.rank(&MultiIndex::vacuum(3)).unwrap(), 0);
        assert_eq!(s.unrank(s.total() - 1).unwrap().n(), 2);
        assert!(s.rank(&MultiIndex::new(vec![2, 1, 0])).is_err());
        assert!(s.rank(&MultiIndex::new(vec![0, 0])).is_err());
        assert!(s.unrank(10).is_err());
        assert_eq!(s.level(1), 1..4);
        assert_eq!(s.phonon_number(0), 0);
        assert_eq!(s.phonon_number(3), 1);
        assert_eq!(s.phonon_number(9), 2);
    }

    #[test]
    fn roundtrip_all_states() {
        let s = space(10, 5);
        for i in 0..s.total() {
            let j = s.unrank(i).unwrap();
            assert_eq!(s.rank(&j).unwrap(), i);
            assert_eq!(j.n(), s.phonon_number(i));
        }
    }

    #[test]
    fn neighbours_match_hash_map() {
        for k in 1..=6 {
            for n_max in 0..=4 {
                let s = space(k, n_max);
                let map: HashMap<Vec<u8>, usize> = (0..s.total())
                    .map(|i| (s.occupation(i).to_vec(), i))
                    .collect();
                assert_eq!(map.len(), s.total());
                for i in 0..s.total() {
                    let j = s.occupation(i).to_vec();
                    for a in 0..k {
                        let mut down = j.clone();
                        let want = if down[a] > 0 {
                            down[a] -= 1;
                            map.get(&down).copied()
                        } else {
                            None
                        };
                        assert_eq!(s.lower(i, a), want);
                        let mut up = j.clone();
                        up[a] += 1;
                        assert_eq!(s.raise(i, a), map.get(&up).copied());
                        if let Some(d) = s.lower(i, a) {
                            assert_eq!(s.raise(d, a), Some(i));
                        }
                        for b in 0..k {
                            let mut moved = j.clone();
                            let want = if moved[a] > 0 {
                                moved[a] -= 1;
                                moved[b] += 1;
                                map.get(&moved).copied()
                            } else {
                                None
                            };
                            assert_eq!(s.shift(i, a, b), want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = IndexSpace::enumerate(
            20,
            5,
            StateBudget {
                max_states: 1000,
                grid_points: 44,
            },
        )
        .unwrap_err();
        match err {
            HeomError::SizingExceeded {
                required,
                memory_bytes,
                ..
            } => {
                assert_eq!(required, 53130);
                assert_eq!(memory_bytes, memory_estimate(53130, 20, 44));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_msg_names_count());
    }

    fn err_msg_names_count() -> bool {
        let e = IndexSpace::enumerate(
            10,
            10,
            StateBudget {
                max_states: 10,
                grid_points: 44,
            },
        )
        .unwrap_err();
        e.to_string().contains("184756")
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(25, 20), 53130);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(60, 30), 118264581564861424);
    }
}
