//! Deterministic root splitting for polynomials over prime fields.
//!
//! The pipeline takes a squarefree, completely splitting `f` over `F_p` and
//! tries to produce a nontrivial factor without randomness:
//!
//! 1. [`balance::sylow_root_filter`] separates roots whose 2-Sylow
//!    signatures differ;
//! 2. [`balance::stronger_balance`] colors ordered root pairs by the
//!    signature of their difference, as polynomials over `F_p[x]/(f)`;
//! 3. [`wl2::wl2_implicit`] refines that coloring to a coherent
//!    configuration without ever computing a root;
//! 4. [`scheme`] checks the association-scheme axioms and uses closed
//!    subsets of imprimitive schemes to shrink the problem.
//!
//! Every ring operation may stumble on a zero divisor; that is how factors
//! are found. [`driver::factor_pipeline`] ties the stages together.

pub mod balance;
pub mod driver;
pub mod ffield;
pub mod fppoly;
pub mod par;
pub mod report;
pub mod scheme;
pub mod tower;
pub mod verify;
pub mod wl2;

/// Resource limits and execution mode shared by the algebraic stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Engine {
    /// Largest tower dimension over `F_p` any stage may build.
    pub ceiling: usize,
    pub mode: par::ExecMode,
}

impl Default for Engine {
    fn default() -> Self {
        Engine { ceiling: tower::DEFAULT_DIMENSION_CEILING, mode: par::ExecMode::default() }
    }
}

pub use ffield::{FieldCtx, FieldError, SylowSignature};
pub use fppoly::{FpPoly, PolyError};
pub use tower::{Tower, TowerElem, TowerError, TowerPoly};
