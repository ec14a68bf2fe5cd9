//! Numerical engine for extrinsic conformal geometry of hypersurfaces
//! M^n ⊂ X^{n+1}: exact-derivative (jet) evaluation of curvature, the
//! fourth-order extrinsic conformal Laplacian and Q-curvature, local
//! conformal invariants, singular Yamabe expansion coefficients, and the
//! identity checks and surface integrals connecting them.

pub mod ambient;
pub mod checks;
pub mod error;
pub mod expr;
pub mod invariants;
pub mod jets;
pub mod operators;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod surface;
pub mod tensor;
pub mod yamabe;

pub use error::{Error, Result};
pub use expr::Expr;
pub use jets::Jet;
pub use scenario::Scenario;
pub use surface::{Frame, FrameDepth};
