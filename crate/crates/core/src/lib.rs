//! Simulator, agents and causal mechanism transfer for integrating another
//! agent's experience.
//!
//! Two pipelines live here:
//!
//! * **Video to waypoints.** A scripted demonstrator records first-person
//!   frames in a tile world ([`world`], [`demo`]). The [`agent`] recovers the
//!   demonstrator's positions in its own coordinates by locally searching for
//!   the position whose view best matches each frame ([`optimize`],
//!   [`vision`]) and then tracks them with a proportional controller
//!   ([`control`]).
//! * **Mechanism transfer.** Two cars with different engines log positions
//!   and controls; the shared position-dependent force is inferred from their
//!   pooled logs and reused to predict and control a third car
//!   ([`causal`]).

pub mod agent;
pub mod causal;
pub mod control;
pub mod demo;
pub mod maps;
pub mod optimize;
pub mod scaling;
pub mod vision;
pub mod world;

pub use vision::{Field, Frame, Kernel};
pub use world::{Action, Position, TileKind, TileMap, WorldState};
