//! Long-sequence encoder mechanisms, span-corruption pretraining objectives
//! and long-document corpus assembly, each checkable against brute-force
//! oracles.

pub mod attention;
pub mod corpus;
pub mod numerics;
pub mod objectives;
pub mod rouge;
pub mod seed;
