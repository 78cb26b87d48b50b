//! Experiment runner, regret curves on finite MDPs, the dimension check
//! suite, and result tables.

mod checks;
mod regret;
mod run;
mod table;

pub use checks::{run_checks, CheckOptions, CheckReport, CHECK_LAMBDAS};
pub use regret::{run_regret, tail_length, RegretConfig, RegretLog, RegretPoint};
pub use run::{
    evaluate, run_experiment, run_seeds, BetaMode, KernelChoice, LambdaMode, RunConfig, RunLog, StepRecord,
    EVAL_SEED_SALT,
};
pub use table::{mean_std, summarize, CellStats, SummaryTable};

use crate::error::KqlError;

/// Process exit code for an error: 2 for configuration and argument errors,
/// 3 for I/O, 4 for anything raised while running.
pub fn exit_code(err: &KqlError) -> i32 {
    match err {
        KqlError::Config(_) | KqlError::InvalidArgument(_) | KqlError::OutOfDomain(_) => 2,
        KqlError::Io(_) => 3,
        _ => 4,
    }
}
