//! Transfer-window squad composition: instances, value scenarios, the
//! chance-constrained program and the file formats around them.

pub mod bundle;
pub mod domain;
pub mod ftcp;
pub mod money;
pub mod results;
pub mod stability;
pub mod synthetic;
pub mod value;

pub use domain::{Decision, Formation, Instance, Lock, Player, PlayerDecision, Role, TransferSolution};
pub use ftcp::{apply_whatif, build_ftcp, extract_solution, solve_ftcp, Fixing, FtcpProblem};
pub use money::Money;
pub use value::{fit_value_model, predict_value, sample_scenarios, ScenarioSet, ValueModel};
