//! CRP co-clustering of one covariate block.

pub mod chain;
pub mod crp;
pub mod likelihood;
pub mod random;
pub mod sampler;
pub mod state;

pub use chain::{
    full_sweep, read_coassign, run_chain, run_frozen_chain, write_coassign, Chain, Checkpoint,
    HyperSample, McmcConfig, McmcTrace, MotifSums,
};
pub use crp::{crp_log_pmf, sample_crp};
pub use likelihood::{ContinuousLik, FactorLik, InvGammaPrior, Likelihood};
pub use sampler::{
    gibbs_update_col, gibbs_update_row, update_likelihood_params, update_motif,
    update_motif_continuous, update_motif_factor,
};
pub use state::{CoClusterState, DataBlock, Motif};
