pub mod autodiff;
pub mod dataio;
pub mod model;
pub mod signal;
pub mod train;
pub mod commands;
