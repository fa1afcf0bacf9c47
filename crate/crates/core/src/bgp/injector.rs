// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! YAML policy files accepted by the injector peer.

use serde::{Deserialize, Serialize};

use super::{BgpError, PolicyNlri, Segment, SegmentList, SrPolicyUpdate, AFI_IPV6, SAFI_SR_POLICY};
use crate::net::V6Addr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFileNlri {
    pub distinguisher: u32,
    pub color: u32,
    pub endpoint: V6Addr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFileFamily {
    pub afi: u16,
    pub safi: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFileSegment {
    pub sid: V6Addr,
    pub behavior: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFileSegmentList {
    #[serde(default)]
    pub weight: u32,
    pub segments: Vec<PolicyFileSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFileAge {
    pub seconds: i64,
    #[serde(default)]
    pub nanos: i64,
}

/// One policy in the injector's field vocabulary. `age`, `sourceasn` and
/// `neighborip` are accepted and ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub nlri: PolicyFileNlri,
    #[serde(default)]
    pub iswithdraw: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<PolicyFileAge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sourceasn: Option<u32>,
    pub family: PolicyFileFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighborip: Option<V6Addr>,
    pub segmentlist: PolicyFileSegmentList,
    pub bsid: V6Addr,
    #[serde(default)]
    pub preference: u32,
    #[serde(default)]
    pub priority: u8,
    pub nexthop: V6Addr,
}

impl PolicyFile {
    pub fn parse(text: &str) -> Result<Self, BgpError> {
        serde_yaml::from_str(text).map_err(|e| BgpError::PolicyFile(e.to_string()))
    }

    pub fn to_update(&self) -> Result<SrPolicyUpdate, BgpError> {
        if (self.family.afi, self.family.safi) != (AFI_IPV6, SAFI_SR_POLICY) {
            return Err(BgpError::Family { afi: self.family.afi, safi: self.family.safi });
        }
        let u = SrPolicyUpdate {
            nlri: PolicyNlri {
                distinguisher: self.nlri.distinguisher,
                color: self.nlri.color,
                endpoint: self.nlri.endpoint,
            },
            bsid: self.bsid,
            segment_list: SegmentList {
                weight: self.segmentlist.weight,
                segments: self
                    .segmentlist
                    .segments
                    .iter()
                    .map(|s| Segment { sid: s.sid, behavior: s.behavior })
                    .collect(),
            },
            preference: self.preference,
            priority: self.priority,
            next_hop: self.nexthop,
            withdraw: self.iswithdraw,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn from_update(u: &SrPolicyUpdate) -> Self {
        PolicyFile {
            nlri: PolicyFileNlri {
                distinguisher: u.nlri.distinguisher,
                color: u.nlri.color,
                endpoint: u.nlri.endpoint,
            },
            iswithdraw: u.withdraw,
            age: None,
            sourceasn: None,
            family: PolicyFileFamily { afi: AFI_IPV6, safi: SAFI_SR_POLICY },
            neighborip: None,
            segmentlist: PolicyFileSegmentList {
                weight: u.segment_list.weight,
                segments: u
                    .segment_list
                    .segments
                    .iter()
                    .map(|s| PolicyFileSegment { sid: s.sid, behavior: s.behavior })
                    .collect(),
            },
            bsid: u.bsid,
            preference: u.preference,
            priority: u.priority,
            nexthop: u.next_hop,
        }
    }
}
