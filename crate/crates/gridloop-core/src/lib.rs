//! gridloop — a multi-timescale electric-grid control-loop simulator.
//!
//! The crate composes the control loops of a modern power system at desk
//! scale: market dispatch (unit commitment, economic dispatch, scenario-based
//! risk-aware dispatch), seconds-scale AGC with dynamic-watermarking attack
//! detection, battery participation in a pay-for-performance regulation
//! market, centralized/decentralized EV charging and charging-station
//! placement, two-layer thermal load control, and hierarchical microgrid
//! control. A deterministic multi-rate harness schedules the loops with
//! faster loops settling before slower ones, and emits reproducible CSV
//! traces: the same scenario and seed produce byte-identical output.
//!
//! Module map:
//! - [`model`]: network representation, DC power flow, LinDistFlow.
//! - [`dispatch`]: economic dispatch, unit commitment, scenario dispatch.
//! - [`agc`]: two-area frequency dynamics, PI-on-SACE control, watermarking.
//! - [`storage`]: battery regulation-market participation.
//! - [`ev`]: EV charging coordination and charging-station placement.
//! - [`demand`]: two-layer thermal inertial load control.
//! - [`microgrid`]: droop / secondary / tertiary microgrid control.
//! - [`harness`]: scenario config, multi-rate scheduler, trace emission.

pub mod agc;
pub mod demand;
pub mod dispatch;
pub mod ev;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod microgrid;
pub mod model;
pub mod rng;
pub mod storage;
pub mod trace_fmt;
