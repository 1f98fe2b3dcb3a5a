pub mod cfus;
pub mod cli;
pub mod costmodel;
pub mod dse;
pub mod isa;
pub mod kernels;
pub mod kv;
pub mod machine;
pub mod rng;
pub mod workloads;
