// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::net::V6Addr;

/// Tunnel-level effect of one control action across all nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub added: usize,
    pub replaced: usize,
    pub removed: usize,
}

impl ChangeSummary {
    pub fn is_empty(&self) -> bool {
        self.added + self.replaced + self.removed == 0
    }
}

impl fmt::Display for ChangeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0 changes");
        }
        let parts: Vec<String> = [(self.added, "added"), (self.replaced, "replaced"), (self.removed, "removed")]
            .iter()
            .filter(|(n, _)| *n > 0)
            .map(|(n, w)| format!("{n} {w}"))
            .collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PingReport {
    pub src: String,
    pub dst: String,
    pub sent: u32,
    /// Echo replies that made it back.
    pub delivered: u32,
    /// One trace per direction per packet, request first.
    pub traces: Vec<Vec<String>>,
}

impl PingReport {
    pub fn loss_percent(&self) -> f64 {
        if self.sent == 0 {
            return 0.0;
        }
        100.0 * f64::from(self.sent - self.delivered) / f64::from(self.sent)
    }
}

impl fmt::Display for PingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} -> {}: {} packets transmitted, {} received, {:.0}% packet loss",
            self.src,
            self.dst,
            self.sent,
            self.delivered,
            self.loss_percent()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidCounter {
    pub element: String,
    pub sid: V6Addr,
    pub behavior: String,
    pub packets: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunnelCounter {
    pub node: String,
    pub bsid: V6Addr,
    pub packets: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCounters {
    pub step1: u64,
    pub step2: u64,
    pub injected: u64,
    pub delivered: u64,
    pub polls: u64,
    pub scans: u64,
    pub scheduler_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub localsids: Vec<SidCounter>,
    pub tunnels: Vec<TunnelCounter>,
    pub control: ControlCounters,
    pub pings_sent: u64,
    pub pings_delivered: u64,
    pub traces: Vec<Vec<String>>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    /// `section,key,value` rows; traces are left to the JSON form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        let _ = writeln!(out, "run,scenario,{}", self.scenario);
        let _ = writeln!(out, "run,mode,{}", self.mode);
        let _ = writeln!(out, "run,seed,{}", self.seed);
        for c in &self.localsids {
            let _ = writeln!(out, "localsid,{} {} {},{}", c.element, c.sid, c.behavior, c.packets);
        }
        for t in &self.tunnels {
            let _ = writeln!(out, "tunnel,{} {},{}", t.node, t.bsid, t.packets);
        }
        let c = &self.control;
        for (k, v) in [
            ("step1", c.step1),
            ("step2", c.step2),
            ("injected", c.injected),
            ("delivered", c.delivered),
            ("polls", c.polls),
            ("scans", c.scans),
            ("scheduler_steps", c.scheduler_steps),
        ] {
            let _ = writeln!(out, "control,{k},{v}");
        }
        let _ = writeln!(out, "ping,sent,{}", self.pings_sent);
        let _ = writeln!(out, "ping,delivered,{}", self.pings_delivered);
        out
    }
}
