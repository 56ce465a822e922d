//! Land-cover class hierarchy: dense class ids, names and relative elevation bands.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label rasters are 8-bit, which caps the class count.
pub const MAX_CLASSES: usize = 256;

/// Dense 0-based class identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u8);

impl ClassId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Self {
        debug_assert!(i < MAX_CLASSES);
        ClassId(i as u8)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Relative elevation of a class, encoded 0/1/2 in the elevation channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElevationBand {
    Low,
    Medium,
    High,
}

impl ElevationBand {
    pub fn code(self) -> u8 {
        match self {
            ElevationBand::Low => 0,
            ElevationBand::Medium => 1,
            ElevationBand::High => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ElevationBand::Low),
            1 => Some(ElevationBand::Medium),
            2 => Some(ElevationBand::High),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElevationBand::Low => "low",
            ElevationBand::Medium => "medium",
            ElevationBand::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Some(ElevationBand::Low),
            "medium" => Some(ElevationBand::Medium),
            "high" => Some(ElevationBand::High),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: ClassId,
    pub name: String,
    pub elevation_band: ElevationBand,
}

/// Ordered class list. Every class descends from the implicit `GeoObject` root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassInfo>", into = "Vec<ClassInfo>")]
pub struct Taxonomy {
    classes: Vec<ClassInfo>,
    #[serde(skip)]
    by_name: HashMap<String, ClassId>,
}

impl Taxonomy {
    pub fn new<S: Into<String>>(
        classes: impl IntoIterator<Item = (S, ElevationBand)>,
    ) -> Result<Self> {
        let classes: Vec<ClassInfo> = classes
            .into_iter()
            .enumerate()
            .map(|(i, (name, band))| ClassInfo {
                id: ClassId(i.min(u8::MAX as usize) as u8),
                name: name.into(),
                elevation_band: band,
            })
            .collect();
        Self::from_classes(classes)
    }

    fn from_classes(classes: Vec<ClassInfo>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Taxonomy("taxonomy has no classes".into()));
        }
        if classes.len() > MAX_CLASSES {
            return Err(Error::Taxonomy(format!(
                "{} classes exceed the limit of {MAX_CLASSES}",
                classes.len()
            )));
        }
        let mut by_name = HashMap::with_capacity(classes.len());
        for (i, c) in classes.iter().enumerate() {
            if c.id.index() != i {
                return Err(Error::Taxonomy(format!(
                    "class `{}` has id {} at position {i}; ids must be dense and 0-based",
                    c.name, c.id
                )));
            }
            if c.name.is_empty()
                || c.name
                    .chars()
                    .any(|ch| !(ch.is_alphanumeric() || ch == '_'))
            {
                return Err(Error::Taxonomy(format!("invalid class name `{}`", c.name)));
            }
            if by_name.insert(c.name.clone(), c.id).is_some() {
                return Err(Error::Taxonomy(format!(
                    "duplicate class name `{}`",
                    c.name
                )));
            }
        }
        Ok(Taxonomy { classes, by_name })
    }

    /// The eight merged UCM/DLRSD land-cover classes.
    pub fn ucm() -> Self {
        use ElevationBand::*;
        Taxonomy::new([
            ("Vegetation", Low),
            ("Ground", Low),
            ("Pavement", Low),
            ("Building", High),
            ("Water", Low),
            ("Airplane", Medium),
            ("Car", Medium),
            ("Ship", Medium),
        ])
        .expect("static taxonomy is valid")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().map(|c| c.id)
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.classes[id.index()].name
    }

    pub fn band(&self, id: ClassId) -> ElevationBand {
        self.classes[id.index()].elevation_band
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.index() < self.classes.len()
    }

    pub fn with_band(&self, band: ElevationBand) -> ClassSet {
        self.classes
            .iter()
            .filter(|c| c.elevation_band == band)
            .map(|c| c.id)
            .collect()
    }

    pub fn all(&self) -> ClassSet {
        self.ids().collect()
    }
}

impl TryFrom<Vec<ClassInfo>> for Taxonomy {
    type Error = Error;

    fn try_from(classes: Vec<ClassInfo>) -> Result<Self> {
        Self::from_classes(classes)
    }
}

impl From<Taxonomy> for Vec<ClassInfo> {
    fn from(t: Taxonomy) -> Self {
        t.classes
    }
}

/// Fixed-capacity set of class ids.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ClassSet([u64; 4]);

impl ClassSet {
    pub const EMPTY: ClassSet = ClassSet([0; 4]);

    pub fn insert(&mut self, id: ClassId) {
        self.0[id.index() / 64] |= 1 << (id.index() % 64);
    }

    #[inline]
    pub fn contains(&self, id: ClassId) -> bool {
        self.0[id.index() / 64] & (1 << (id.index() % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..MAX_CLASSES)
            .map(ClassId::from_index)
            .filter(|id| self.contains(*id))
    }

    pub fn union(&self, other: &ClassSet) -> ClassSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a |= *b;
        }
        out
    }
}

impl FromIterator<ClassId> for ClassSet {
    fn from_iter<I: IntoIterator<Item = ClassId>>(iter: I) -> Self {
        let mut s = ClassSet::EMPTY;
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl fmt::Debug for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|c| c.0)).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucm_has_dense_ids_and_bands() {
        let t = Taxonomy::ucm();
        assert_eq!(t.len(), 8);
        for (i, c) in t.classes().iter().enumerate() {
            assert_eq!(c.id.index(), i);
        }
        assert_eq!(t.band(t.id_of("Building").unwrap()), ElevationBand::High);
        assert_eq!(t.band(t.id_of("Car").unwrap()), ElevationBand::Medium);
        assert_eq!(t.with_band(ElevationBand::Medium).len(), 3);
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(Taxonomy::new(Vec::<(&str, ElevationBand)>::new()).is_err());
        assert!(Taxonomy::new([("A", ElevationBand::Low), ("A", ElevationBand::Low)]).is_err());
        assert!(Taxonomy::new([("bad name", ElevationBand::Low)]).is_err());
    }

    #[test]
    fn serde_roundtrip_rebuilds_name_index() {
        let t = Taxonomy::ucm();
        let json = serde_json::to_string(&t).unwrap();
        let back: Taxonomy = serde_json::from_str(&json).unwrap();
        assert_eq!(back.id_of("Ship"), t.id_of("Ship"));
    }

    #[test]
    fn class_set_ops() {
        let s: ClassSet = [ClassId(0), ClassId(200)].into_iter().collect();
        assert!(s.contains(ClassId(200)));
        assert!(!s.contains(ClassId(1)));
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![ClassId(0), ClassId(200)]);
    }
}
