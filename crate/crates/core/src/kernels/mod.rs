//! Numerical kernels: expansions and direct interaction.

pub mod expansion;
pub mod p2p;

pub use expansion::{
    evaluate_multipole, l2l, l2p, local_potential_gradient, m2l, m2l_kernel, m2l_kernel_len,
    m2l_matrix, m2l_matrix_len, m2l_with_kernel, m2l_with_matrix, m2m, multipole_potential, p2m,
    LocalExpansion, MultipoleExpansion, Scratch,
};
pub use p2p::{direct_sum, p2p_batched, p2p_into, DirectResult, InteractionBatch, LANES};
