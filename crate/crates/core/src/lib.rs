//! Quadruped locomotion on elastically sinking tiled terrain.
//!
//! The crate simulates a 25 kg, 12-DoF quadruped walking over a grid of
//! tiles that sink on vertical springs, generates gaits from Bezier-curve
//! actions, wraps the whole thing as a reinforcement-learning environment,
//! and trains a Gaussian MLP policy with PPO. A CLI binary (`tilewalk`)
//! drives training, evaluation, replay, terrain calibration, and plotting.
//!
//! Module map:
//! - [`geom`]: vectors, rotations, Euler conventions, cubic Bezier curves.
//! - [`robot`]: morphology, forward kinematics, analytic per-leg IK.
//! - [`terrain`]: sprung tile grid, stiffness calibration, stripe layouts.
//! - [`sim`]: articulated floating-base dynamics, penalty contact, PD control.
//! - [`gait`]: 27D action decoding into per-phase Bezier plans and tick targets.
//! - [`env`]: observation/reward/termination logic; one step = one 0.75 s phase.
//! - [`learn`]: MLP + backprop + Adam, GAE, PPO update, training loop.
//! - [`harness`]: config files, episode logs, gait statistics, SVG plots, CLI.

pub mod env;
pub mod gait;
pub mod geom;
pub mod harness;
pub mod learn;
pub mod robot;
pub mod sim;
pub mod terrain;
