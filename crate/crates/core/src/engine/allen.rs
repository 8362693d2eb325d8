use std::fmt;

use crate::dsl::AllenRelation;
use crate::scene::FrameId;

/// Inclusive frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Interval {
    pub start: FrameId,
    pub end: FrameId,
    /// Still extending as of the last processed frame.
    pub open: bool,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Self {
        assert!(start <= end, "interval [{start},{end}] is reversed");
        Self {
            start: FrameId(start),
            end: FrameId(end),
            open: false,
        }
    }

    pub fn at(frame: FrameId) -> Self {
        Self {
            start: frame,
            end: frame,
            open: true,
        }
    }

    pub fn len(&self) -> u64 {
        self.end.0 - self.start.0 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, f: FrameId) -> bool {
        self.start <= f && f <= self.end
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            open: if self.end >= other.end { self.open } else { other.open },
        }
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(Interval {
            start,
            end,
            open: self.open && other.open,
        })
    }

    /// Same endpoints, ignoring `open`.
    pub fn same_span(&self, other: &Interval) -> bool {
        self.start == other.start && self.end == other.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// `a relation b` on inclusive frame intervals. Adjacent intervals
/// (`a.end + 1 == b.start`) meet; `before` needs at least one frame between.
pub fn allen(relation: AllenRelation, a: &Interval, b: &Interval) -> bool {
    let (s1, e1, s2, e2) = (a.start.0, a.end.0, b.start.0, b.end.0);
    match relation {
        AllenRelation::Before => e1 + 1 < s2,
        AllenRelation::Meets => e1 + 1 == s2,
        AllenRelation::Overlaps => s1 < s2 && s2 <= e1 && e1 < e2,
        AllenRelation::Starts => s1 == s2 && e1 < e2,
        AllenRelation::During => s2 < s1 && e1 < e2,
        AllenRelation::Finishes => e1 == e2 && s1 > s2,
        AllenRelation::Equals => s1 == s2 && e1 == e2,
    }
}

/// [`allen`] with the relation given by name.
pub fn allen_by_name(relation: &str, a: &Interval, b: &Interval) -> Result<bool, super::EngineError> {
    AllenRelation::parse(relation)
        .map(|r| allen(r, a, b))
        .ok_or_else(|| super::EngineError::UnknownRelation(relation.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: u64, b: u64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn spec_examples() {
        assert!(allen(AllenRelation::Before, &iv(0, 5), &iv(7, 10)));
        assert!(allen(AllenRelation::Meets, &iv(0, 5), &iv(6, 10)));
        assert!(!allen(AllenRelation::Before, &iv(0, 5), &iv(6, 10)));
        assert!(allen(AllenRelation::During, &iv(3, 4), &iv(0, 9)));
        assert!(allen_by_name("sometime", &iv(0, 1), &iv(2, 3)).is_err());
    }

    #[test]
    fn each_relation() {
        assert!(allen(AllenRelation::Overlaps, &iv(0, 5), &iv(3, 8)));
        assert!(allen(AllenRelation::Starts, &iv(2, 4), &iv(2, 8)));
        assert!(allen(AllenRelation::Finishes, &iv(5, 8), &iv(2, 8)));
        assert!(allen(AllenRelation::Equals, &iv(2, 8), &iv(2, 8)));
        assert!(!allen(AllenRelation::Overlaps, &iv(3, 8), &iv(0, 5)));
    }

    #[test]
    fn hull_and_intersection() {
        assert_eq!(iv(0, 5).hull(&iv(7, 9)), iv(0, 9));
        assert_eq!(iv(0, 5).intersection(&iv(3, 9)), Some(iv(3, 5)));
        assert_eq!(iv(0, 5).intersection(&iv(6, 9)), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn interval() -> impl Strategy<Value = Interval> {
            (0u64..40, 0u64..15).prop_map(|(s, l)| Interval::new(s, s + l))
        }

        /// The 13 base relations by endpoint comparison alone.
        fn base_relations(a: &Interval, b: &Interval) -> usize {
            let fwd = AllenRelation::ALL.iter().filter(|r| allen(**r, a, b)).count();
            let inv = AllenRelation::ALL
                .iter()
                .filter(|r| **r != AllenRelation::Equals && allen(**r, b, a))
                .count();
            fwd + inv
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(500))]

            #[test]
            fn exactly_one_base_relation(a in interval(), b in interval()) {
                prop_assert_eq!(base_relations(&a, &b), 1, "{} {}", a, b);
            }

            #[test]
            fn implemented_relations_exclusive(a in interval(), b in interval()) {
                let n = AllenRelation::ALL.iter().filter(|r| allen(**r, &a, &b)).count();
                prop_assert!(n <= 1, "{} {}", a, b);
            }
        }
    }
}
