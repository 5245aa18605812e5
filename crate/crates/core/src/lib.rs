#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod basis;
pub mod bench;
pub mod fmath;
pub mod geometry;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod model;
pub mod nn;
pub mod rng;
pub mod structure;
pub mod vec3;
