//! Shared inputs for the benchmarks.

use packlab_core::generators::{jodrey_tory, visscher_bolsterli, JtParams, VbParams};
use packlab_core::Configuration;

/// Visscher-Bolsterli deposit with four trial drops per sphere.
pub fn deposit(n: usize, seed: u64) -> Configuration {
    visscher_bolsterli(&VbParams { n, dim: 3, k_drops: 4, lateral: None }, seed).expect("deposit")
}

/// Short Jodrey-Tory run in a periodic box.
pub fn dense(n: usize, cycles: usize, seed: u64) -> Configuration {
    jodrey_tory(&JtParams { cycles, ..JtParams::new(n, 3) }, seed).expect("dense packing")
}
