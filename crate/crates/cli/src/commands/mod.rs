pub mod bound;
pub mod experiment;
pub mod fetch;
pub mod train;
pub mod verify;
