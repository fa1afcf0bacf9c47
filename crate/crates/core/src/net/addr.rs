// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::NetError;

/// Address family of a prefix, packet or policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    V4,
    V6,
}

impl Family {
    pub const fn bits(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }

    /// Protocol number used when a packet of this family is carried inside IPv6.
    pub const fn encap_protocol(self) -> u8 {
        match self {
            Family::V4 => super::PROTO_IPV4,
            Family::V6 => super::PROTO_IPV6,
        }
    }

    pub const fn from_encap_protocol(proto: u8) -> Option<Family> {
        match proto {
            super::PROTO_IPV4 => Some(Family::V4),
            super::PROTO_IPV6 => Some(Family::V6),
            _ => None,
        }
    }

    /// Name used by the ConfigMap documents (`traffic: IPv4`).
    pub const fn traffic_name(self) -> &'static str {
        match self {
            Family::V4 => "IPv4",
            Family::V6 => "IPv6",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::V4 => f.write_str("v4"),
            Family::V6 => f.write_str("v6"),
        }
    }
}

/// A 128-bit IPv6 address: SIDs, BSIDs, infrastructure addresses.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct V6Addr(Ipv6Addr);

impl V6Addr {
    pub const UNSPECIFIED: V6Addr = V6Addr(Ipv6Addr::UNSPECIFIED);

    pub const fn from_bits(bits: u128) -> Self {
        V6Addr(Ipv6Addr::from_bits(bits))
    }

    pub const fn bits(self) -> u128 {
        self.0.to_bits()
    }

    pub const fn octets(self) -> [u8; 16] {
        self.0.octets()
    }

    pub fn from_octets(octets: [u8; 16]) -> Self {
        V6Addr(Ipv6Addr::from(octets))
    }

    pub fn ip(self) -> Ipv6Addr {
        self.0
    }
}

impl From<Ipv6Addr> for V6Addr {
    fn from(a: Ipv6Addr) -> Self {
        V6Addr(a)
    }
}

impl FromStr for V6Addr {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse::<Ipv6Addr>().map(V6Addr).map_err(|_| NetError::AddrParse { token: s.to_string() })
    }
}

impl fmt::Display for V6Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for V6Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A 32-bit IPv4 address (pod addressing).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct V4Addr(Ipv4Addr);

impl V4Addr {
    pub const fn from_bits(bits: u32) -> Self {
        V4Addr(Ipv4Addr::from_bits(bits))
    }

    pub const fn bits(self) -> u32 {
        self.0.to_bits()
    }

    pub const fn octets(self) -> [u8; 4] {
        self.0.octets()
    }
}

impl From<Ipv4Addr> for V4Addr {
    fn from(a: Ipv4Addr) -> Self {
        V4Addr(a)
    }
}

impl FromStr for V4Addr {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse::<Ipv4Addr>().map(V4Addr).map_err(|_| NetError::AddrParse { token: s.to_string() })
    }
}

impl fmt::Display for V4Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for V4Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Either address family.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addr {
    V4(V4Addr),
    V6(V6Addr),
}

impl Addr {
    pub const fn family(self) -> Family {
        match self {
            Addr::V4(_) => Family::V4,
            Addr::V6(_) => Family::V6,
        }
    }

    /// The address value right-aligned in a u128.
    pub const fn bits(self) -> u128 {
        match self {
            Addr::V4(a) => a.bits() as u128,
            Addr::V6(a) => a.bits(),
        }
    }

    pub(crate) fn from_family_bits(family: Family, bits: u128) -> Self {
        match family {
            Family::V4 => Addr::V4(V4Addr::from_bits(bits as u32)),
            Family::V6 => Addr::V6(V6Addr::from_bits(bits)),
        }
    }

    pub fn as_v6(self) -> Option<V6Addr> {
        match self {
            Addr::V6(a) => Some(a),
            Addr::V4(_) => None,
        }
    }
}

impl From<V4Addr> for Addr {
    fn from(a: V4Addr) -> Self {
        Addr::V4(a)
    }
}

impl From<V6Addr> for Addr {
    fn from(a: V6Addr) -> Self {
        Addr::V6(a)
    }
}

/// Parses either a dotted-quad IPv4 or a textual IPv6 address.
pub fn parse_addr(text: &str) -> Result<Addr, NetError> {
    let t = text.trim();
    if t.contains(':') { t.parse::<V6Addr>().map(Addr::V6) } else { t.parse::<V4Addr>().map(Addr::V4) }
        .map_err(|_| NetError::AddrParse { token: text.to_string() })
}

impl FromStr for Addr {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_addr(s)
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::V4(a) => a.fmt(f),
            Addr::V6(a) => a.fmt(f),
        }
    }
}

impl fmt::Debug for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! text_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

text_serde!(V6Addr);
text_serde!(V4Addr);
text_serde!(Addr);
