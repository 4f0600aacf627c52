pub mod cli;
pub mod confseq;
pub mod eprocess;
pub mod error;
pub mod model;
pub mod projection;
pub mod sim;
