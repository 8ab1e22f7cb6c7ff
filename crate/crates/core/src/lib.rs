//! Decentralized multi-agent, multi-target tracking posed as a time-varying
//! harmonic extension on a cellular sheaf.
//!
//! Agents and targets are the vertices of a graph. Each vertex carries a state
//! space (its stalk) and each edge a shared measurement frame reached through
//! linear restriction maps. Agents track the harmonic extension of the target
//! states, `q* = H^{-1} B p`, using the decentralized law
//! `u_i = -k1 g_i^+ eta_i`, where `eta_i` is computed from edge measurements
//! alone.
//!
//! * [`sheaf`]: graphs, sheaves, cochains, coboundary and Laplacian.
//! * [`cohomology`]: global sections, relative cohomology, feasibility.
//! * [`harmonic`]: the partitioned operators `H`, `D`, `B` and the extension solve.
//! * [`dynamics`]: agent/target models, flow fields, references, pseudoinverse.
//! * [`controller`]: edge measurements and the control law.
//! * [`simulator`]: RK4 closed loop and the ultimate-bound check.
//!
//! Everything is generic over [`Real`] (`f64` or `f32`); the aliases below fix
//! the scalar for the common case.
//!
//! ```
//! use sheaftrack::{constant_sheaf, Graph, TrackingProblem, VertexSubset};
//! use nalgebra::DVector;
//!
//! let g = Graph::path(3).unwrap();
//! let problem = TrackingProblem::assemble(
//!     constant_sheaf::<f64>(&g, 1).unwrap(),
//!     VertexSubset::new(&g, [1]).unwrap(),
//!     VertexSubset::new(&g, [0, 2]).unwrap(),
//! )
//! .unwrap();
//! let q = problem.harmonic_extension(&DVector::from_vec(vec![0.0, 4.0])).unwrap();
//! assert_eq!(q[0], 2.0);
//! ```

pub mod cohomology;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod harmonic;
pub mod linalg;
pub mod scalar;
pub mod sheaf;
pub mod simulator;

pub use cohomology::{
    check_feasibility, global_sections, relative_cohomology, CohomologyReport, Feasibility,
    VertexSubset,
};
pub use controller::{
    control_input, decentralized_control, decentralized_disagreement, ensemble_control,
    local_disagreement, measure_edge, ControllerGains, EdgeMeasurement, NeighborPullback,
};
pub use dynamics::{
    pseudoinverse, AgentModel, Disturbance, Drift, Effectiveness, FlowField, Lissajous,
    OffsetConsensus, TargetModel,
};
pub use error::{Error, Result};
pub use harmonic::{dirichlet_energy, SolveMode, TrackingProblem};
pub use scalar::Real;
pub use sheaf::{constant_sheaf, CellularSheaf, Cochain, Degree, Graph, SheafBuilder};
pub use simulator::{
    error_dynamics_residual, theorem_bound, verify_bound, BoundConstants, BoundParams, BoundReport,
    Integration, Scenario, TrajectoryLog,
};

pub type Sheaf = CellularSheaf<f64>;
pub type Sheaf32 = CellularSheaf<f32>;
pub type Problem = TrackingProblem<f64>;
pub type Problem32 = TrackingProblem<f32>;
pub type Cochain64 = Cochain<f64>;
pub type Cochain32 = Cochain<f32>;
pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type Log = TrajectoryLog<f64>;
pub type Log32 = TrajectoryLog<f32>;
