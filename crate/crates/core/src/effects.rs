//! The six-valued reduction-effect algebra: ordering, join, sequential
//! composition, and iterative closure.
//!
//! Reducible code sequences match the pattern `R* [N] L*`.  The effect of a
//! statement summarizes where it sits in that pattern; `E` marks sequences
//! that are not reducible.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Effect {
    /// Yield: an interference point separating reducible sequences.
    Y,
    /// Both-mover.
    B,
    /// Right-mover.
    R,
    /// Left-mover.
    L,
    /// Non-mover.
    N,
    /// Error: irreducible or unspecified.
    E,
}

pub const ALL_EFFECTS: [Effect; 6] =
    [Effect::Y, Effect::B, Effect::R, Effect::L, Effect::N, Effect::E];

impl Effect {
    fn idx(self) -> usize {
        match self {
            Effect::Y => 0,
            Effect::B => 1,
            Effect::R => 2,
            Effect::L => 3,
            Effect::N => 4,
            Effect::E => 5,
        }
    }

    fn level(self) -> u8 {
        match self {
            Effect::Y => 0,
            Effect::B => 1,
            Effect::R | Effect::L => 2,
            Effect::N => 3,
            Effect::E => 4,
        }
    }

    /// Partial order generated by `Y ⊑ B ⊑ R, L ⊑ N ⊑ E`, with `R` and `L`
    /// incomparable.
    pub fn leq(self, other: Effect) -> bool {
        self == other || self.level() < other.level()
    }

    /// Least upper bound under `leq`.
    pub fn join(self, other: Effect) -> Effect {
        if self.leq(other) {
            other
        } else if other.leq(self) {
            self
        } else {
            // R and L are the only incomparable pair.
            Effect::N
        }
    }

    /// Sequential composition `self ; other`.
    pub fn seq(self, other: Effect) -> Effect {
        use Effect::*;
        const T: [[Effect; 6]; 6] = [
            // Y    B  R  L  N  E
            [Y, Y, Y, L, L, E], // Y
            [Y, B, R, L, N, E], // B
            [R, R, R, N, N, E], // R
            [Y, L, E, L, E, E], // L
            [R, N, E, N, E, E], // N
            [E, E, E, E, E, E], // E
        ];
        T[self.idx()][other.idx()]
    }

    /// Iterative closure `self*`.
    pub fn star(self) -> Effect {
        match self {
            Effect::N => Effect::E,
            e => e,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Effect::Y => "Y",
            Effect::B => "B",
            Effect::R => "R",
            Effect::L => "L",
            Effect::N => "N",
            Effect::E => "E",
        }
    }

    /// Surface keyword for declared movers, where one exists.
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Effect::B => Some("both-mover"),
            Effect::R => Some("right-mover"),
            Effect::L => Some("left-mover"),
            Effect::N => Some("non-mover"),
            _ => None,
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Effect::*;

    #[test]
    fn ordering() {
        assert!(Y.leq(E));
        assert!(!R.leq(L));
        assert!(!L.leq(R));
        assert!(N.leq(N));
        assert!(Y.leq(B) && B.leq(R) && B.leq(L) && R.leq(N) && L.leq(N) && N.leq(E));
        // Antisymmetry.
        for a in ALL_EFFECTS {
            for b in ALL_EFFECTS {
                if a.leq(b) && b.leq(a) {
                    assert_eq!(a, b);
                }
            }
        }
        // Transitivity.
        for a in ALL_EFFECTS {
            for b in ALL_EFFECTS {
                for c in ALL_EFFECTS {
                    if a.leq(b) && b.leq(c) {
                        assert!(a.leq(c));
                    }
                }
            }
        }
    }

    #[test]
    fn join_basics() {
        assert_eq!(R.join(L), N);
        assert_eq!(Y.join(B), B);
        assert_eq!(E.join(B), E);
        for a in ALL_EFFECTS {
            for b in ALL_EFFECTS {
                let j = a.join(b);
                assert!(a.leq(j) && b.leq(j));
                assert_eq!(j, b.join(a));
                // Least among upper bounds.
                for u in ALL_EFFECTS {
                    if a.leq(u) && b.leq(u) {
                        assert!(j.leq(u));
                    }
                }
            }
        }
        for a in ALL_EFFECTS {
            assert_eq!(a.join(a), a);
            assert_eq!(a.join(Effect::E), Effect::E);
            assert_eq!(a.join(Effect::Y), a);
        }
    }

    #[test]
    fn seq_entries() {
        assert_eq!(R.seq(L), N);
        assert_eq!(N.seq(N), E);
        for x in ALL_EFFECTS {
            assert_eq!(B.seq(x), x);
            assert_eq!(x.seq(B), x);
        }
    }

    #[test]
    fn seq_associative_and_monotone() {
        for a in ALL_EFFECTS {
            for b in ALL_EFFECTS {
                for c in ALL_EFFECTS {
                    assert_eq!(a.seq(b).seq(c), a.seq(b.seq(c)));
                }
            }
        }
        for a in ALL_EFFECTS {
            for b in ALL_EFFECTS {
                for c in ALL_EFFECTS {
                    if a.leq(b) {
                        assert!(a.seq(c).leq(b.seq(c)), "{a};{c} vs {b};{c}");
                        assert!(c.seq(a).leq(c.seq(b)), "{c};{a} vs {c};{b}");
                    }
                }
            }
        }
    }

    #[test]
    fn star_entries() {
        assert_eq!(N.star(), E);
        assert_eq!(B.star(), B);
        assert_eq!(E.star(), E);
        assert_eq!(Y.star(), Y);
        assert_eq!(R.star(), R);
        assert_eq!(L.star(), L);
        for a in ALL_EFFECTS {
            assert_eq!(a.star().seq(a.star()), a.star());
        }
    }
}
