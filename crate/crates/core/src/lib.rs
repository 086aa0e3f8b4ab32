pub mod bounds;
pub mod config;
pub mod error;
pub mod funcs;
pub mod growth;
pub mod harness;
pub mod lognum;
pub mod ode;
pub mod scale;

pub use error::{Error, Result};
pub use funcs::{Expr, TowerSpec};
pub use growth::{GrowthMode, GrowthOptions, RadialGrid};
pub use lognum::LogComplex;
pub use ode::{LogSeries, OdeProblem};
pub use scale::{ScaleFn, ScaleKind, ScaleTriple};
