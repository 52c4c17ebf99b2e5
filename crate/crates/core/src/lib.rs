//! Single-loop successive difference-of-convex approximation (SDCAM) for
//! composite problems
//!
//! ```text
//! minimize  f(x) + g(x) + h(c(x))
//! ```
//!
//! where `f` is smooth, `g` and `h` have cheap proximal maps and `c` is a
//! smooth map exposed through vector-Jacobian products.
//!
//! Each iteration takes one proximal-gradient step on the penalized model
//! `f + g + (beta_t / 2) |c(x) - y|^2`, accepts it through a two-part
//! sufficient-decrease test with backtracking on the step size `mu`, and then
//! refreshes `y` with a prox of `h`. The penalty `beta_t` grows along a
//! [`ScheduleSpec`].
//!
//! ```no_run
//! use sdcam::problems::qcqp::{QcqpInstance, QcqpParams};
//! use sdcam::solver::solve;
//!
//! let inst = QcqpInstance::generate(1, &QcqpParams { n: 20, m: 5, ..Default::default() }).unwrap();
//! let problem = inst.problem();
//! let cfg = sdcam::problems::qcqp::default_config(1.0, 500);
//! let out = solve(&problem, &cfg, &inst.x0(), &inst.y0()).unwrap();
//! println!("{:?} after {} accepted steps", out.status, out.trace.len());
//! ```

pub mod diagnostics;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod prox;
pub mod solver;

pub use oracle::{
    check_gradient, check_vjp, objective, DomainTag, ExtReal, MapOracle, Problem, ProblemError, ProxOracle,
    SmoothOracle, ZeroSmooth,
};
pub use solver::{beta_at, solve, ScheduleFamily, ScheduleSpec, SolverConfig, TraceRow};
