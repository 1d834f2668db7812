//! Hierarchical LLM planning for household pick-and-place: plan language,
//! metrics, task generation, simulation, grounding, LLM access and the
//! multi-agent pipeline.

pub mod metrics;
pub mod plan_dsl;
pub mod seed;
pub mod task_gen;
pub mod world_sim;
pub mod grounding;
pub mod llm_gateway;
pub mod agents;
pub mod harness;
