//! Choice generalized annotated programs: competitive diffusion over social
//! networks, their equilibria, range queries and an experiment harness.

pub mod equilibria;
pub mod experiments;
pub mod error;
pub mod function;
pub mod game;
pub mod ground;
pub mod interp;
pub mod milp;
pub mod model;
mod policy;
pub mod queries;
pub mod semantics;
pub mod text;
pub mod vic;

pub use error::{Error, Result};
pub use function::{AnnotationFn, FnKind, FunctionRegistry, EPS_EQ};
pub use game::State;
pub use ground::{ground, AtomId, GroundProgram};
pub use interp::Interpretation;
pub use model::{Program, SocialNetwork};
