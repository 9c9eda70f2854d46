pub mod error;
pub mod geometry;
pub mod jets;
pub mod immersions;
pub mod quadrature;
pub mod spaceforms;
pub mod verify;
