//! Control co-design of hydrokinetic turbine rotors.
//!
//! The crate couples a blade-element momentum rotor model with single-state
//! rotational dynamics and co-optimizes blade chord/twist together with either
//! an open-loop torque trajectory (direct collocation) or a fixed speed
//! feedback gain (`u = K w` or `u = K w^2`). Finished designs can be stress
//! tested against perturbed inflow and noisy speed measurements.

pub mod ccd;
pub mod dynamics;
pub mod nlp;
pub mod oloc;
pub mod rotor;
pub mod roots;
pub mod sensitivity;
