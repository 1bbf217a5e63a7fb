//! Fixtures shared by the criterion benches.

use basket_aad::{BasketDefaultSwap, CorrelationMatrix, EngineConfig};

/// Homogeneous second-to-default basket: hazard 2%, correlation 0.3, five
/// years of quarterly premiums.
pub fn portfolio(n_names: usize, n_paths: usize) -> EngineConfig {
    let contract =
        BasketDefaultSwap::regular(2.min(n_names), 5.0, 20, 0.0025, vec![0.4; n_names], 0.03)
            .expect("valid contract");
    let rho = CorrelationMatrix::constant(n_names, 0.3).expect("valid correlation");
    EngineConfig::new(rho, vec![0.02; n_names], contract, n_paths, 1)
}
