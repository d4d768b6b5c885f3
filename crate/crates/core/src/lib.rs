//! Over-the-air computation of nomographic functions and Kolmogorov
//! superpositions over clustered Gaussian multiple-access channels, using
//! nested lattice codes from Construction A.

pub mod channel;
pub mod exec;
pub mod functions;
pub mod lattice;
pub mod modp;
pub mod pipeline;
pub mod quantizer;
pub mod rates;
pub mod rng;
pub mod source_coding;
pub mod stats;

pub use channel::{ChannelConfig, ClusterTopology};
pub use exec::Execution;
pub use functions::{builtin, Builtin, KolmogorovSpec, NomographicSpec};
pub use lattice::{scale_to_power, ConstructionALattice, LatticeError, NestedLatticePair};
pub use quantizer::DyadicQuantizer;
pub use source_coding::{derive_packing, PackingParams};
