use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A single Ising spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    pub fn from_sign(s: i64) -> Option<Spin> {
        match s {
            1 => Some(Spin::Plus),
            -1 => Some(Spin::Minus),
            _ => None,
        }
    }

    #[inline]
    pub fn value(self) -> i8 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    #[inline]
    pub fn sign(self) -> f64 {
        self.value() as f64
    }

    #[inline]
    pub fn flip(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }
}

impl Serialize for Spin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Spin::from_sign(v).ok_or_else(|| serde::de::Error::custom(format!("spin must be ±1, got {v}")))
    }
}

/// A complete assignment of spins, one per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpinConfig(pub Vec<Spin>);

impl SpinConfig {
    pub fn uniform(n: usize, spin: Spin) -> Self {
        SpinConfig(vec![spin; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> Spin {
        self.0[v]
    }

    #[inline]
    pub fn set(&mut self, v: usize, s: Spin) {
        self.0[v] = s;
    }

    pub fn hamming(&self, other: &SpinConfig) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// Bitmask over the given vertices, bit `i` set when `vertices[i]` is `+1`.
    pub fn mask_over(&self, vertices: &[usize]) -> u64 {
        vertices
            .iter()
            .enumerate()
            .filter(|(_, &v)| self.0[v] == Spin::Plus)
            .fold(0u64, |m, (i, _)| m | (1 << i))
    }

    /// FNV-1a over the spin sequence; a compact fingerprint for run logs.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in &self.0 {
            h ^= (s.value() as u8) as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// A partial assignment: `None` marks a free vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PartialConfig(Vec<Option<Spin>>);

impl PartialConfig {
    pub fn free(n: usize) -> Self {
        PartialConfig(vec![None; n])
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, Spin)>) -> Result<Self> {
        let mut c = PartialConfig::free(n);
        for (v, s) in pairs {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            c.0[v] = Some(s);
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> Option<Spin> {
        self.0[v]
    }

    #[inline]
    pub fn set(&mut self, v: usize, s: Option<Spin>) {
        self.0[v] = s;
    }

    pub fn as_slice(&self) -> &[Option<Spin>] {
        &self.0
    }

    pub fn fixed(&self) -> impl Iterator<Item = (usize, Spin)> + '_ {
        self.0.iter().enumerate().filter_map(|(v, s)| s.map(|s| (v, s)))
    }

    pub fn fixed_count(&self) -> usize {
        self.0.iter().filter(|s| s.is_some()).count()
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&v| self.0[v].is_none()).collect()
    }

    /// Union of two conditionings; fails where they assign opposite spins.
    pub fn merged(&self, other: &PartialConfig) -> Result<PartialConfig> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut out = self.clone();
        for (v, s) in other.fixed() {
            match out.0[v] {
                Some(t) if t != s => return Err(Error::BoundaryConflict(v)),
                _ => out.0[v] = Some(s),
            }
        }
        Ok(out)
    }

    /// Whether `config` agrees with every fixed spin.
    pub fn admits(&self, config: &SpinConfig) -> bool {
        self.fixed().all(|(v, s)| config.0.get(v) == Some(&s))
    }

    fn to_map(&self) -> BTreeMap<String, Spin> {
        self.fixed().map(|(v, s)| (v.to_string(), s)).collect()
    }

    /// Parses the `{"<vertex>": ±1}` map used by the JSON formats.
    pub fn from_map(n: usize, map: &BTreeMap<String, Spin>) -> Result<Self> {
        let mut pairs = Vec::with_capacity(map.len());
        for (k, &s) in map {
            let v: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("boundary key {k:?} is not a vertex index")))?;
            pairs.push((v, s));
        }
        PartialConfig::from_pairs(n, pairs)
    }
}

impl Serialize for PartialConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // Numeric key order keeps the output canonical.
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.fixed_count()))?;
        for (v, spin) in self.fixed() {
            m.serialize_entry(&v.to_string(), &spin)?;
        }
        m.end()
    }
}

impl From<&PartialConfig> for BTreeMap<String, Spin> {
    fn from(c: &PartialConfig) -> Self {
        c.to_map()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_serde() {
        assert_eq!(serde_json::to_string(&Spin::Minus).unwrap(), "-1");
        let s: Spin = serde_json::from_str("1").unwrap();
        assert_eq!(s, Spin::Plus);
        assert!(serde_json::from_str::<Spin>("0").is_err());
    }

    #[test]
    fn merge_detects_conflict() {
        let a = PartialConfig::from_pairs(3, [(0, Spin::Plus)]).unwrap();
        let b = PartialConfig::from_pairs(3, [(0, Spin::Minus)]).unwrap();
        assert!(matches!(a.merged(&b), Err(Error::BoundaryConflict(0))));
        let c = PartialConfig::from_pairs(3, [(2, Spin::Minus)]).unwrap();
        let m = a.merged(&c).unwrap();
        assert_eq!(m.free_vertices(), vec![1]);
    }

    #[test]
    fn partial_map_is_numerically_ordered() {
        let c = PartialConfig::from_pairs(12, [(10, Spin::Plus), (2, Spin::Minus)]).unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"2":-1,"10":1}"#);
        let back = PartialConfig::from_map(12, &BTreeMap::from(&c)).unwrap();
        assert_eq!(back, c);
    }
}
