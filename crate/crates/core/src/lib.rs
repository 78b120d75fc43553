//! Reversible random walks, jump processes and diffusions in
//! one-dimensional stationary random media.
//!
//! * [`environment`]: conductance fields `c(k)` on ℤ and coefficient flows
//!   `(λ, γ)` on ℝ, with their medium averages.
//! * [`walk`]: the discrete-time walk, evolved exactly or sampled.
//! * [`ctmc`]: the continuous-time walk with jump rates `c`.
//! * [`diffusion`]: the diffusion with generator `(2γ)⁻¹ (λ f')'`.
//! * [`corrector`]: explicit solutions of "generator of `f` ≡ 1".
//! * [`analysis`]: limit formulas, ergodic averages and verdicts.

pub mod analysis;
pub mod corrector;
pub mod ctmc;
pub mod diffusion;
pub mod environment;
pub mod par;
pub mod stats;
pub mod walk;

pub use analysis::{CurvePoint, LimitValue, Method, MomentReport, Verdict};
pub use environment::{ContinuousEnvironment, DiscreteEnvironment, EnvError};
pub use par::Threads;
