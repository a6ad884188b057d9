//! Runtime for a small task language with single-assignment items.
//!
//! A program is a set of routines over typed items. Running it means
//! placing root tasks in a [`pool::TaskPool`] and letting an executor
//! evaluate ready tasks until the pool drains. A task either resolves its
//! outs directly or replaces itself by child tasks that inherit them.

pub mod entry;
pub mod eval;
pub mod exec;
pub mod frontend;
pub mod pool;
pub mod store;
pub mod value;
pub mod workload;

pub use entry::{Entry, EntryError};
pub use eval::{EvalConfig, EvalError};
pub use exec::{ExecError, FinalValues};
pub use frontend::{compile, CheckedProgram};
pub use pool::{Order, Policy};
