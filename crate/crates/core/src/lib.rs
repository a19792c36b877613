//! Deterministic simulator of the cooperative ring protocol: fixed-point
//! ARA accounting, coin and ring tables, hash-driven assembly of rings,
//! fractal rings and verification teams, the checkpoint and round engine,
//! and scripted wrongdoers.

pub mod adversary;
pub mod ara;
pub mod config;
pub mod ids;
pub mod ledger;
pub mod model;
pub mod protocol;
pub mod randomness;

pub use ara::Ara;
pub use config::SimConfig;
pub use ids::{CoinId, FractalId, RingId, ServiceId, TraderId};
pub use protocol::Simulation;
