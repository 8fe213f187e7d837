//! Coverage points of the reference parser.
//!
//! Every grammar production, token class and error branch of the lexer,
//! object parser and host-structure parser carries a fixed `(unit, id)`
//! number. Numbers are assigned by hand in the source and never reused, so
//! coverage sets from different runs (or different builds) are comparable.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The instrumented component a coverage point lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Unit {
    Lexer,
    Parser,
    Xref,
    Trailer,
    Host,
}

impl Unit {
    pub const ALL: [Unit; 5] = [Unit::Lexer, Unit::Parser, Unit::Xref, Unit::Trailer, Unit::Host];

    pub fn name(self) -> &'static str {
        match self {
            Unit::Lexer => "lexer",
            Unit::Parser => "parser",
            Unit::Xref => "xref",
            Unit::Trailer => "trailer",
            Unit::Host => "host",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoveragePoint {
    pub unit: Unit,
    pub id: u16,
}

impl fmt::Display for CoveragePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.unit.name(), self.id)
    }
}

impl FromStr for CoveragePoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (unit, id) = s.split_once(':').ok_or_else(|| format!("bad coverage point `{s}`"))?;
        let unit = Unit::ALL
            .into_iter()
            .find(|u| u.name() == unit)
            .ok_or_else(|| format!("unknown coverage unit `{unit}`"))?;
        let id = id.parse().map_err(|_| format!("bad coverage id in `{s}`"))?;
        Ok(CoveragePoint { unit, id })
    }
}

impl Serialize for CoveragePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoveragePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of coverage points. Union is the only combining operation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoverageSet {
    points: BTreeSet<CoveragePoint>,
}

impl CoverageSet {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn hit(&mut self, unit: Unit, id: u16) {
        self.points.insert(CoveragePoint { unit, id });
    }

    pub fn insert(&mut self, point: CoveragePoint) -> bool {
        self.points.insert(point)
    }

    pub fn contains(&self, point: &CoveragePoint) -> bool {
        self.points.contains(point)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CoveragePoint> {
        self.points.iter()
    }

    pub fn extend_from(&mut self, other: &CoverageSet) {
        self.points.extend(other.points.iter().copied());
    }

    /// Points in `self` that are not in `other`.
    pub fn difference_count(&self, other: &CoverageSet) -> usize {
        self.points.difference(&other.points).count()
    }

    pub fn is_subset(&self, other: &CoverageSet) -> bool {
        self.points.is_subset(&other.points)
    }
}

impl FromIterator<CoveragePoint> for CoverageSet {
    fn from_iter<I: IntoIterator<Item = CoveragePoint>>(iter: I) -> Self {
        CoverageSet { points: iter.into_iter().collect() }
    }
}

/// Set union of any number of coverage sets.
pub fn coverage_union<'a, I>(sets: I) -> CoverageSet
where
    I: IntoIterator<Item = &'a CoverageSet>,
{
    let mut out = CoverageSet::new();
    for s in sets {
        out.extend_from(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[u16]) -> CoverageSet {
        ids.iter().map(|&id| CoveragePoint { unit: Unit::Parser, id }).collect()
    }

    #[test]
    fn union_with_empty_is_identity() {
        let a = set(&[1, 2, 3]);
        assert_eq!(coverage_union([&a, &CoverageSet::new()]), a);
    }

    #[test]
    fn union_is_idempotent() {
        let a = set(&[4, 9]);
        assert_eq!(coverage_union([&a, &a]), a);
    }

    #[test]
    fn union_grows_strictly_with_unique_point() {
        let a = set(&[1, 2]);
        let b = set(&[2, 3]);
        let c = set(&[1]);
        let u = coverage_union([&a, &b, &c]);
        assert!(u.len() > a.len().max(b.len()).max(c.len()));
    }

    #[test]
    fn point_text_round_trip() {
        let p = CoveragePoint { unit: Unit::Xref, id: 17 };
        assert_eq!(p.to_string(), "xref:17");
        assert_eq!("xref:17".parse::<CoveragePoint>().unwrap(), p);
        assert!("bogus:1".parse::<CoveragePoint>().is_err());
        assert!("xref".parse::<CoveragePoint>().is_err());
    }
}
