//! Registry of the control loops the simulator knows about.
//!
//! Numbered entries mirror the loop table of the reference architecture
//! (entity pairs and their control actions); unnumbered entries are the
//! new distribution-side loop families this simulator adds. Entries marked
//! [`LoopRole::Stub`] are registry documentation only: the relevant
//! behavior is contractual or administrative and has no executable model
//! here.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopRole {
    /// Executable in this simulator.
    Executable,
    /// Documented, no executable behavior.
    Stub,
}

#[derive(Debug, Clone, Copy)]
pub struct LoopEntry {
    /// Harness id, e.g. `loop2.agc`; stubs use their table number only.
    pub loop_id: &'static str,
    pub entities: &'static str,
    pub action: &'static str,
    pub timescale: &'static str,
    pub role: LoopRole,
}

/// The full loop table.
pub fn registry() -> &'static [LoopEntry] {
    &[
        LoopEntry {
            loop_id: "loop1.gas",
            entities: "generation company / gas supplier",
            action: "fuel supply and purchases",
            timescale: "real-time to months-ahead",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop2.uc",
            entities: "generation company / system operator",
            action: "unit commitment",
            timescale: "day-ahead",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop2.dispatch",
            entities: "generation company / system operator",
            action: "economic dispatch (risk-aware variant available)",
            timescale: "5 minutes",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop2.agc",
            entities: "generation company / system operator",
            action: "automatic generation control with watermark detection",
            timescale: "seconds",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop3.transmission",
            entities: "system operator / transmission company",
            action: "transmission monitoring, outage coordination, planning",
            timescale: "real-time to years",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop4.generator",
            entities: "generation company",
            action: "AVR and governor response (modelled inside loop2.agc)",
            timescale: "seconds",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop5.protection",
            entities: "transmission company",
            action: "protection systems",
            timescale: "milliseconds",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop6.microgrid",
            entities: "distribution company / customer microgrids",
            action: "hierarchical microgrid control (droop, secondary, tertiary)",
            timescale: "seconds to minutes",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop7.evcs",
            entities: "distribution company / transportation",
            action: "charging station placement",
            timescale: "planning",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop8.power_purchase",
            entities: "system operator / distribution company",
            action: "wholesale market participation",
            timescale: "minutes to day-ahead",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop9.bes",
            entities: "system operator / aggregator",
            action: "battery regulation-market participation",
            timescale: "market interval",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop10.network_mgmt",
            entities: "distribution company",
            action: "outage management and maintenance",
            timescale: "hours to months",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop11.contracts",
            entities: "distribution company / aggregator",
            action: "delivery contract management",
            timescale: "yearly",
            role: LoopRole::Stub,
        },
        LoopEntry {
            loop_id: "loop12.ev",
            entities: "aggregator / transportation",
            action: "coordinated EV charging (valley filling)",
            timescale: "hourly slots over a day",
            role: LoopRole::Executable,
        },
        LoopEntry {
            loop_id: "loop13.demand",
            entities: "aggregator / customer",
            action: "two-layer thermal load control",
            timescale: "hourly planning, minutes tracking",
            role: LoopRole::Executable,
        },
    ]
}
