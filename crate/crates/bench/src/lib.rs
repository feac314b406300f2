//! Shared fixtures for the benchmarks.

use lrlab_core::{SpinSystem, Spin};

/// Heisenberg chain (J = 1 meV) with easy-axis anisotropy K = 2 meV.
pub fn anisotropic_chain(n: usize, spin: Spin) -> SpinSystem {
    let mut sys = SpinSystem::heisenberg_chain(n, spin, 1.0).expect("valid chain");
    sys.add_uniform_anisotropy(2.0).expect("valid anisotropy");
    sys
}
