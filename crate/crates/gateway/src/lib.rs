//! Network side of the specialist-routing medical QA gateway.
//!
//! A chat turn runs reformulate → route → dispatch → synthesize → record:
//! follow-ups are rewritten into standalone questions, the router scores the
//! ten specialties and selects some of them, the selected specialist
//! backends are queried concurrently, and an orchestrator model merges their
//! answers. Every backend speaks the common chat-completion JSON shape
//! ([`model_client`]); [`mock`] provides in-process stand-ins for tests.

pub mod config;
pub mod conversation;
pub mod embed;
pub mod gateway;
pub mod mock;
pub mod model_client;
pub mod orchestrator;
pub mod scoring;
pub mod server;
pub mod specialists;

pub use config::{load_config, GatewayConfig};
pub use gateway::{ChatRequest, ChatTurnResponse, Gateway, TurnError, TurnEvent};
