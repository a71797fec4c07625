//! Weighted random sampling: alias tables, output-sensitive sampling with and
//! without replacement, weighted permutations, subset sampling and mini-batch
//! reservoirs, plus the oracles used to check them.

pub mod alias;
pub mod compressed;
mod compensated;
pub mod error;
pub mod inputs;
pub mod noreplace;
pub mod outsens;
pub mod par;
pub mod permute;
pub mod reservoir;
pub mod rng;
pub mod sampler;
pub mod subset;
pub mod twolevel;
pub mod verify;
pub mod weights;

pub use alias::{AliasBucket, AliasMethod, AliasTable};
pub use compressed::{CompressedTable, RankBits};
pub use error::{Error, Result};
pub use inputs::Distribution;
pub use noreplace::{choose_ell, estimate_t, sample_no_replacement, EllEstimate, NoReplaceStats};
pub use outsens::{GroupedSampler, QueryStats, SampleWithMultiplicity};
pub use permute::{bucket_occupancy_audit, weighted_permutation, OccupancyStats};
pub use reservoir::{insertion_key, threshold_select, MiniBatch, ReservoirSampler};
pub use rng::{binomial_split, exponential_key, RngStream};
pub use sampler::Sampler;
pub use subset::SubsetSampler;
pub use twolevel::{LocalBuilder, TwoLevelTable};
pub use weights::WeightTable;
