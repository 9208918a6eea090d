//! Optimizer state machines driven by the simulator.

pub mod adsgd;
pub mod asbcd;
pub mod block;
pub mod kernels;
pub mod memeff;
pub mod sync;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adsgd::Adsgd;
pub use asbcd::{Asbcd, BlockAgent, SnapshotTiming};
pub use block::{
    BlockGradientOracle, BlockProblem, BlockProblemOracle, BlockQuadratic, PenalizedConsensus, PenalizedConsensusOracle,
    SingleBlock,
};
pub use kernels::{
    adsgd_update, asbcd_update, check_divergence, double_step_direct, double_step_update, memeff_update, AgentState,
    DIVERGENCE_NORM,
};
pub use memeff::{MemEffAdsgd, MemEffMessage, MemEffState};
pub use sync::{ring_allreduce, ring_allreduce_round, sync_dsgd_round, ParallelSgd, SyncDsgd};

use crate::error::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Asbcd,
    Adsgd,
    AdsgdMemEff,
    AdsgdDoubleStep,
    SyncDsgd,
    ParallelSgd,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 6] = [
        AlgorithmKind::Asbcd,
        AlgorithmKind::Adsgd,
        AlgorithmKind::AdsgdMemEff,
        AlgorithmKind::AdsgdDoubleStep,
        AlgorithmKind::SyncDsgd,
        AlgorithmKind::ParallelSgd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Asbcd => "asbcd",
            AlgorithmKind::Adsgd => "adsgd",
            AlgorithmKind::AdsgdMemEff => "adsgd_mem_eff",
            AlgorithmKind::AdsgdDoubleStep => "adsgd_double_step",
            AlgorithmKind::SyncDsgd => "sync_dsgd",
            AlgorithmKind::ParallelSgd => "parallel_sgd",
        }
    }

    pub fn is_async(&self) -> bool {
        !matches!(self, AlgorithmKind::SyncDsgd | AlgorithmKind::ParallelSgd)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| LabError::Config(format!("unknown algorithm `{s}`")))
    }
}
