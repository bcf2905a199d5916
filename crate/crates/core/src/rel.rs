//! Binary relations over an indexed store space.
//!
//! The checker's predicates are sets of (pre, post) store pairs with the
//! thread fixed by context.  Small spaces use a dense bitset indexed by
//! `pre * size + post`; larger ones fall back to a sorted set of encoded
//! pairs.  Both present the same interface.

use std::collections::BTreeSet;

/// Square bit budget below which the dense backend is used.
const DENSE_BITS_CAP: u64 = 1 << 22;

#[derive(Debug, Clone)]
pub enum Rel {
    Dense { size: u64, bits: Vec<u64>, len: usize },
    Sparse { size: u64, set: BTreeSet<u64> },
}

impl Rel {
    pub fn empty(size: u64) -> Rel {
        if size.checked_mul(size).map(|n| n <= DENSE_BITS_CAP).unwrap_or(false) {
            Rel::Dense {
                size,
                bits: vec![0u64; ((size * size + 63) / 64) as usize],
                len: 0,
            }
        } else {
            Rel::Sparse { size, set: BTreeSet::new() }
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            Rel::Dense { size, .. } | Rel::Sparse { size, .. } => *size,
        }
    }

    fn key(&self, pre: u64, post: u64) -> u64 {
        debug_assert!(pre < self.size() && post < self.size());
        pre * self.size() + post
    }

    pub fn insert(&mut self, pre: u64, post: u64) -> bool {
        let k = self.key(pre, post);
        match self {
            Rel::Dense { bits, len, .. } => {
                let (w, b) = ((k / 64) as usize, k % 64);
                let fresh = bits[w] & (1 << b) == 0;
                if fresh {
                    bits[w] |= 1 << b;
                    *len += 1;
                }
                fresh
            }
            Rel::Sparse { set, .. } => set.insert(k),
        }
    }

    pub fn contains(&self, pre: u64, post: u64) -> bool {
        let k = self.key(pre, post);
        match self {
            Rel::Dense { bits, .. } => bits[(k / 64) as usize] & (1 << (k % 64)) != 0,
            Rel::Sparse { set, .. } => set.contains(&k),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Rel::Dense { len, .. } => *len,
            Rel::Sparse { set, .. } => set.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = (u64, u64)> + '_> {
        let size = self.size();
        match self {
            Rel::Dense { bits, .. } => Box::new(
                bits.iter()
                    .enumerate()
                    .flat_map(|(w, word)| {
                        let mut word = *word;
                        let mut out = Vec::new();
                        while word != 0 {
                            let b = word.trailing_zeros() as u64;
                            out.push(w as u64 * 64 + b);
                            word &= word - 1;
                        }
                        out
                    })
                    .map(move |k| (k / size, k % size)),
            ),
            Rel::Sparse { set, .. } => Box::new(set.iter().map(move |k| (k / size, k % size))),
        }
    }

    pub fn union_with(&mut self, other: &Rel) {
        debug_assert_eq!(self.size(), other.size());
        match (self, other) {
            (Rel::Dense { bits, len, .. }, Rel::Dense { bits: ob, .. }) => {
                let mut n = 0usize;
                for (a, b) in bits.iter_mut().zip(ob) {
                    *a |= b;
                    n += a.count_ones() as usize;
                }
                *len = n;
            }
            (me, other) => {
                for (p, q) in other.iter() {
                    me.insert(p, q);
                }
            }
        }
    }

    /// Returns a pair in `self` missing from `other`, if any.
    pub fn subset_witness(&self, other: &Rel) -> Option<(u64, u64)> {
        self.iter().find(|(p, q)| !other.contains(*p, *q))
    }

    pub fn is_subset(&self, other: &Rel) -> bool {
        self.subset_witness(other).is_none()
    }

    /// Distinct post stores, sorted.
    pub fn posts(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.iter().map(|(_, q)| q).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct pre stores, sorted.
    pub fn pres(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.iter().map(|(p, _)| p).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `{(σ, σ) | σ ∈ stores}`.
    pub fn diag(size: u64, stores: impl IntoIterator<Item = u64>) -> Rel {
        let mut r = Rel::empty(size);
        for s in stores {
            r.insert(s, s);
        }
        r
    }

    /// Relational composition with an action: keeps each pair's pre store
    /// and steps the post store through `succ`, which pushes the successor
    /// stores of its argument.
    pub fn step_posts(&self, succ: &mut dyn FnMut(u64, &mut Vec<u64>)) -> Rel {
        let mut out = Rel::empty(self.size());
        let mut buf = Vec::new();
        // Group by distinct post store so `succ` runs once per store.
        let mut by_post: Vec<(u64, u64)> = self.iter().map(|(p, q)| (q, p)).collect();
        by_post.sort_unstable();
        let mut i = 0;
        while i < by_post.len() {
            let q = by_post[i].0;
            buf.clear();
            succ(q, &mut buf);
            let mut j = i;
            while j < by_post.len() && by_post[j].0 == q {
                for &q2 in &buf {
                    out.insert(by_post[j].1, q2);
                }
                j += 1;
            }
            i = j;
        }
        out
    }

    pub fn retain(&self, keep: impl Fn(u64, u64) -> bool) -> Rel {
        let mut out = Rel::empty(self.size());
        for (p, q) in self.iter() {
            if keep(p, q) {
                out.insert(p, q);
            }
        }
        out
    }
}

impl PartialEq for Rel {
    fn eq(&self, other: &Rel) -> bool {
        self.size() == other.size()
            && self.len() == other.len()
            && self.is_subset(other)
    }
}

impl Eq for Rel {}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse(size: u64) -> Rel {
        Rel::Sparse { size, set: BTreeSet::new() }
    }

    #[test]
    fn backend_selection() {
        assert!(matches!(Rel::empty(100), Rel::Dense { .. }));
        assert!(matches!(Rel::empty(1 << 12), Rel::Sparse { .. }));
    }

    #[test]
    fn insert_contains_iter() {
        for mut r in [Rel::empty(10), sparse(10)] {
            assert!(r.insert(3, 7));
            assert!(!r.insert(3, 7));
            assert!(r.insert(9, 0));
            assert!(r.contains(3, 7) && r.contains(9, 0) && !r.contains(7, 3));
            assert_eq!(r.len(), 2);
            let mut pairs: Vec<_> = r.iter().collect();
            pairs.sort_unstable();
            assert_eq!(pairs, vec![(3, 7), (9, 0)]);
            assert_eq!(r.posts(), vec![0, 7]);
            assert_eq!(r.pres(), vec![3, 9]);
        }
    }

    #[test]
    fn union_and_subset_across_backends() {
        let mut a = Rel::empty(8);
        a.insert(1, 2);
        a.insert(2, 3);
        let mut b = sparse(8);
        b.insert(2, 3);
        b.insert(4, 4);
        assert_eq!(a.subset_witness(&b), Some((1, 2)));
        let mut u = a.clone();
        u.union_with(&b);
        assert_eq!(u.len(), 3);
        assert!(a.is_subset(&u) && b.is_subset(&u));
        let mut u2 = b.clone();
        u2.union_with(&a);
        assert_eq!(u, u2);
    }

    #[test]
    fn step_posts_keeps_pre() {
        let mut r = Rel::empty(16);
        r.insert(0, 5);
        r.insert(1, 5);
        r.insert(1, 6);
        let out = r.step_posts(&mut |q, buf| {
            if q == 5 {
                buf.push(7);
                buf.push(8);
            }
            // store 6 has no successors (disabled action)
        });
        let mut pairs: Vec<_> = out.iter().collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 7), (0, 8), (1, 7), (1, 8)]);
    }

    #[test]
    fn diag_and_eq() {
        let d = Rel::diag(6, [1, 3]);
        assert!(d.contains(1, 1) && d.contains(3, 3) && !d.contains(1, 3));
        let mut e = sparse(6);
        e.insert(3, 3);
        e.insert(1, 1);
        assert_eq!(d, e);
    }
}
