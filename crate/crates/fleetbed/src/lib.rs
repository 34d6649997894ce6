pub mod analysis;
pub mod datagen;
pub mod detector;
pub mod distributions;
pub mod orchestrator;
pub mod record;
pub mod server;
pub mod sim2d;
