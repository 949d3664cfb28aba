//! Core building blocks for assessing the open Ethernet interfaces of
//! S7-class PLCs: frame-level byte accounting, wire codecs for every
//! interface, device profiles and the computation-offloading cost model.

pub mod codec;
pub mod frame;
pub mod framing;
pub mod interface;
pub mod offload;
pub mod profile;

pub use interface::{Device, Direction, InterfaceId, NBucket};
pub use profile::{PlcProfile, PubSubLimits};
