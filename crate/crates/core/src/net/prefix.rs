// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{parse_addr, Addr, Family, NetError};

/// An address prefix. The base never has bits set beyond `len`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: Addr,
    len: u8,
}

fn mask(family: Family, len: u8) -> u128 {
    if len == 0 {
        return 0;
    }
    (u128::MAX << (128 - len as u32)) >> (128 - family.bits() as u32)
}

impl Prefix {
    /// Builds a prefix, zeroing any host bits of `base`.
    pub fn new(base: Addr, len: u8) -> Result<Self, NetError> {
        let family = base.family();
        if len > family.bits() {
            return Err(NetError::PrefixLength { len, family });
        }
        let bits = base.bits() & mask(family, len);
        Ok(Prefix { base: Addr::from_family_bits(family, bits), len })
    }

    /// Host route for a single address.
    pub fn host(a: Addr) -> Self {
        Prefix { base: a, len: a.family().bits() }
    }

    pub fn family(&self) -> Family {
        self.base.family()
    }

    pub fn base(&self) -> Addr {
        self.base
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    /// Number of addresses covered, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        let host_bits = (self.family().bits() - self.len) as u32;
        if host_bits >= 128 {
            u128::MAX
        } else {
            1u128 << host_bits
        }
    }

    /// True iff the first `len` bits of `a` equal the base.
    pub fn contains(&self, a: Addr) -> Result<bool, NetError> {
        if a.family() != self.family() {
            return Err(NetError::FamilyMismatch { expected: self.family(), found: a.family() });
        }
        Ok(a.bits() & mask(self.family(), self.len) == self.base.bits())
    }

    /// Like [`Prefix::contains`] but false on family mismatch.
    pub fn matches(&self, a: Addr) -> bool {
        self.contains(a).unwrap_or(false)
    }

    pub fn covers(&self, other: &Prefix) -> bool {
        other.family() == self.family() && other.len >= self.len && self.matches(other.base)
    }

    /// The `index`-th address inside the prefix.
    pub fn nth(&self, index: u128) -> Option<Addr> {
        if index >= self.size() && self.size() != u128::MAX {
            return None;
        }
        Some(Addr::from_family_bits(self.family(), self.base.bits() + index))
    }
}

/// Free-function form used by the steering and FIB lookups.
pub fn prefix_contains(p: &Prefix, a: Addr) -> Result<bool, NetError> {
    p.contains(a)
}

impl FromStr for Prefix {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s.trim().split_once('/').ok_or_else(|| NetError::PrefixParse { text: s.to_string() })?;
        let base = parse_addr(addr)?;
        let len: u8 = len.parse().map_err(|_| NetError::PrefixParse { text: s.to_string() })?;
        Prefix::new(base, len)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.len)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
