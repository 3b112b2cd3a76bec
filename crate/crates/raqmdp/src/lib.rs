//! Risk-averse behavior planning under uncertainty.
//!
//! The planning core evaluates candidate maneuvers against a belief over the
//! road world: the belief is sampled into weighted deterministic sigma
//! points, each point gets its own Monte Carlo tree search over a
//! deterministic prediction model, and the per-action value mean and
//! variance across points drive a risk-averse choice. A deterministic
//! highway micro-simulator and a small experiment harness close the loop for
//! two uncertainty scenarios: a stationary object beyond sensor range, and a
//! highway ramp merge observed through decaying velocity noise.
//!
//! Modules
//! - [`traffic`]: road geometry, kinematic state, deterministic stepping.
//! - [`idm`]: car-following acceleration law and safe-distance rule.
//! - [`belief`]: Gaussian-plus-hypotheses beliefs and sigma-point sampling.
//! - [`mcts`]: tree search with upper-confidence descent and epsilon-greedy
//!   root exploration.
//! - [`qmdp`]: per-sample aggregation and risk-averse selection.
//! - [`sim`]: closed-loop episodes for the two scenarios, telemetry capture.
//! - [`config`]: scenario configuration files.
//! - [`sweep`]: parameter sweeps, summary tables, and scatter plots.
//! - [`gridworld`]: reference MDP with an exact solver for validating the
//!   search.

pub mod belief;
pub mod config;
pub mod gridworld;
pub mod idm;
pub mod mcts;
pub mod qmdp;
pub mod sim;
pub mod svg;
pub mod sweep;
pub mod traffic;
