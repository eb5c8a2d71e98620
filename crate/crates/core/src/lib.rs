//! Simulation and stability analysis of scalar impulsive delay differential
//! equations `x'(t) + a(t) x(t) = f(t, x_t)` with jumps
//! `x(t_k+) = x(t_k) + I_k(x(t_k))`.

pub mod cases;
pub mod criteria;
pub mod grid;
pub mod integrator;
pub mod model;
pub mod output;
pub mod quad;
pub mod reference;
pub mod trajectory;
pub mod transforms;
pub mod wazewska;
