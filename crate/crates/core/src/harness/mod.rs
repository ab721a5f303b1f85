//! Training loop, evaluation protocol, metrics and result files.

pub mod eval;
pub mod plot;
pub mod records;
pub mod train;

pub use eval::{eval_spawn_seed, evaluate, write_evaluation, Evaluation};
pub use plot::{outcome_color, plot_trajectories};
pub use records::{
    read_learning_curve, read_trajectory_csv, summarize, write_trajectory_csv, CurveRow,
    EpisodeRecord, EvalSummary, StepRow, CURVE_HEADER, TRAJECTORY_HEADER,
};
pub use train::{train, TrainReport};
