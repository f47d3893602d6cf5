pub mod bench;
pub mod cli;
pub mod constraint;
pub mod geocalc;
pub mod geometry;
pub mod llm;
pub mod orchestrator;
pub mod toolbox;
