//! Quadrature rules and the element-pair integrators.

mod pair;
mod rules;
mod split;

pub use pair::{classify_pair, integrate_pair_v, integrate_pair_w, LagTerms, PairClass, PairElement, PairIntegral};
pub(crate) use pair::{fixed_tensor, integrate_with, is_smooth_pair, smooth_order, HypersingularLag, PairKernel, SingleLayerLag};
pub use rules::{
    adaptive_gk, composite, gauss_legendre, gauss_legendre_nodes, gauss_log, gauss_log_nodes_cached, Adaptive,
    QuadRule, RuleKind,
};
pub use split::{circle_crossings, split_at_wavefronts, Regime, SplitSegments};
