//! Core library for sharing component compositions between peers.
//!
//! A *composition* names a subset of a user's installed features together
//! with the on-screen placement of the parts they contribute and a screenshot.
//! This crate holds the domain model, the canonical codec that gives
//! compositions a content address, the resolver that turns a shared
//! composition into an install plan, screenshot hit-testing, and the on-disk
//! store.

pub mod codec;
pub mod model;
pub mod preview;
pub mod resolver;
pub mod store;
