use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest hierarchy [`build_hierarchy`] will construct.
pub const MAX_HIERARCHY_SIZE: u128 = 10_000_000;

/// Occupation numbers `(n₀, …, n_{N_k})`, one per exponential term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HierarchyIndex {
    pub counts: Vec<u16>,
}

impl HierarchyIndex {
    pub fn level(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }
}

/// Link from one hierarchy member to a neighbour `n ± e_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub target: u32,
    pub term: u32,
}

/// All indices with `|n| ≤ N_C`, ordered by level, with neighbour tables in
/// compressed-row form.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    n_terms: usize,
    depth: usize,
    indices: Vec<HierarchyIndex>,
    lookup: HashMap<HierarchyIndex, u32>,
    plus_start: Vec<u32>,
    plus: Vec<Link>,
    minus_start: Vec<u32>,
    minus: Vec<Link>,
}

/// Number of multisets of size ≤ `depth` over `n_terms` symbols, `C(n_terms + depth, depth)`.
pub fn hierarchy_size(n_terms: usize, depth: usize) -> Option<u128> {
    let mut c: u128 = 1;
    for i in 1..=depth as u128 {
        c = c.checked_mul(n_terms as u128 + i)? / i;
    }
    Some(c)
}

/// Enumerate the hierarchy for `n_k` Matsubara terms (plus the Drude term)
/// truncated at level `n_c`.
pub fn build_hierarchy(n_k: usize, n_c: usize) -> Result<Hierarchy> {
    if n_k == 0 {
        return Err(Error::Domain(
            "the hierarchy needs at least one Matsubara term".into(),
        ));
    }
    if n_c > u16::MAX as usize {
        return Err(Error::Domain(format!("hierarchy depth {n_c} is too large")));
    }
    let n_terms = n_k + 1;
    let size = hierarchy_size(n_terms, n_c).unwrap_or(u128::MAX);
    if size > MAX_HIERARCHY_SIZE {
        return Err(Error::SizeOverflow {
            count: size,
            limit: MAX_HIERARCHY_SIZE,
        });
    }

    let mut indices = Vec::with_capacity(size as usize);
    let mut level_sets = vec![vec![vec![0u16; n_terms]]];
    indices.push(HierarchyIndex {
        counts: vec![0; n_terms],
    });
    for _ in 1..=n_c {
        // Extend each multiset of the previous level by one symbol ≥ its last
        // non-zero symbol, so every multiset is generated once.
        let prev = level_sets.last().expect("level 0 exists");
        let mut next = Vec::new();
        for counts in prev {
            let first = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
            for k in first..n_terms {
                let mut c = counts.clone();
                c[k] += 1;
                next.push(c);
            }
        }
        indices.extend(next.iter().map(|c| HierarchyIndex { counts: c.clone() }));
        level_sets.push(next);
    }
    debug_assert_eq!(indices.len() as u128, size);

    let lookup: HashMap<HierarchyIndex, u32> = indices
        .iter()
        .enumerate()
        .map(|(i, idx)| (idx.clone(), i as u32))
        .collect();

    let mut plus_start = Vec::with_capacity(indices.len() + 1);
    let mut minus_start = Vec::with_capacity(indices.len() + 1);
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut probe = HierarchyIndex {
        counts: vec![0; n_terms],
    };
    for idx in &indices {
        plus_start.push(plus.len() as u32);
        minus_start.push(minus.len() as u32);
        probe.counts.copy_from_slice(&idx.counts);
        for k in 0..n_terms {
            if idx.level() < n_c {
                probe.counts[k] += 1;
                plus.push(Link {
                    target: lookup[&probe],
                    term: k as u32,
                });
                probe.counts[k] -= 1;
            }
            if idx.counts[k] > 0 {
                probe.counts[k] -= 1;
                minus.push(Link {
                    target: lookup[&probe],
                    term: k as u32,
                });
                probe.counts[k] += 1;
            }
        }
    }
    plus_start.push(plus.len() as u32);
    minus_start.push(minus.len() as u32);

    Ok(Hierarchy {
        n_terms,
        depth: n_c,
        indices,
        lookup,
        plus_start,
        plus,
        minus_start,
        minus,
    })
}

impl Hierarchy {
    /// Number of members (the root included).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of exponential terms, `N_k + 1`.
    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    /// Number of Matsubara terms `N_k`.
    pub fn n_matsubara(&self) -> usize {
        self.n_terms - 1
    }

    /// Truncation level `N_C`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn indices(&self) -> &[HierarchyIndex] {
        &self.indices
    }

    pub fn position(&self, index: &HierarchyIndex) -> Option<usize> {
        self.lookup.get(index).map(|&i| i as usize)
    }

    /// Members `n + e_k` of member `i`.
    pub fn raise(&self, i: usize) -> &[Link] {
        &self.plus[self.plus_start[i] as usize..self.plus_start[i + 1] as usize]
    }

    /// Members `n − e_k` of member `i`.
    pub fn lower(&self, i: usize) -> &[Link] {
        &self.minus[self.minus_start[i] as usize..self.minus_start[i + 1] as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(build_hierarchy(30, 2).unwrap().len(), 528);
        assert_eq!(hierarchy_size(31, 2), Some(528));
        assert_eq!(build_hierarchy(7, 0).unwrap().len(), 1);
        let h = build_hierarchy(1, 1).unwrap();
        let got: Vec<_> = h.indices().iter().map(|i| i.counts.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert!(matches!(
            build_hierarchy(200, 6),
            Err(Error::SizeOverflow { .. })
        ));
        assert!(build_hierarchy(0, 2).is_err());
    }

    #[test]
    fn neighbours_are_consistent() {
        let h = build_hierarchy(4, 3).unwrap();
        assert_eq!(h.len() as u128, hierarchy_size(5, 3).unwrap());
        for i in 0..h.len() {
            let idx = &h.indices()[i];
            assert_eq!(h.raise(i).len(), if idx.level() < 3 { 5 } else { 0 });
            assert_eq!(
                h.lower(i).len(),
                idx.counts.iter().filter(|&&c| c > 0).count()
            );
            for l in h.raise(i) {
                let j = l.target as usize;
                assert_eq!(h.indices()[j].level(), idx.level() + 1);
                assert!(h
                    .lower(j)
                    .iter()
                    .any(|m| m.target as usize == i && m.term == l.term));
            }
            assert_eq!(h.position(idx), Some(i));
        }
    }
}
