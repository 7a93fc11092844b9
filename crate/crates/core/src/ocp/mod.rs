//! Path-tracking optimal control on Legendre-Spline decision variables:
//! problem definitions, collocation transcription, a Gauss-Newton SQP
//! solver and receding-horizon closed loops against a mismatched plant.

mod closed_loop;
mod model;
mod qp;
mod solver;
mod transcribe;

pub use closed_loop::{
    definition_from_features, features, generate_dataset, problem_for_record, randomize_scenarios, run_closed_loop,
    shift_solution, ClosedLoopOptions, ClosedLoopRun, ClosedLoopScenario, ObstacleEvent, Plant, PlantMismatch,
    PlantState, ScenarioRanges, Track, OBSTACLE_RANGE_M, OBSTACLE_SLOWDOWN_M,
};
pub use model::{
    CostWeights, DoubleIntegrator, Limits, OcpDefinition, OcpModel, ScenarioParams, TrackingTerm, VehicleParams,
    CONTROL_NAMES, STATE_NAMES,
};
pub use qp::{solve_qp, QpFailure, QpSolution};
pub use solver::{solve, SolveStats, SolverOptions, TimingMode};
pub use transcribe::{transcribe, CollocationNodes, NlpProblem, SparseRow, TranscriptionOptions};
