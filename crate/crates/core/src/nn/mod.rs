//! Dense feed-forward networks with hand-written backpropagation.

mod adam;
mod gradcheck;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{analytic_gradient, grad_check, grad_check_against, mse_loss, Loss};
pub use mlp::{Activation, Dense, ForwardCache, Gradients, Mlp};

/// Hidden widths used for every actor, critic and Q-network by default.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// `[input, hidden.., output]`
pub fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}
