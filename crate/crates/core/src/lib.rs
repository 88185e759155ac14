//! Agent-driven risk assessment for logistic hub networks.
//!
//! A chat model runs a ReAct loop over a registry of risk-analysis tools
//! (hub data, encyclopedia summaries, financial series, NOAA storm events,
//! news, traffic flow and a notebook) to identify and assess risks per hub.
//! Daily findings aggregate into yearly risk profiles, which are z-scored,
//! compared by cosine similarity and clustered hierarchically.
//!
//! Module map:
//!
//! * [`gateway`]: chat-completion contract, HTTP and scripted backends.
//! * [`agent`]: the ReAct runtime, short-term memory window and notebook.
//! * [`tools`]: tool registry and the seven tool implementations.
//! * [`ingest`]: hub and storm-event loading, spatial queries.
//! * [`pipeline`]: risk identification, tool selection, daily assessment
//!   and yearly aggregation.
//! * [`analytics`]: standardization, similarity and clustering.
//! * [`cli`]: configuration, subcommands and report emitters.

pub mod agent;
pub mod analytics;
pub mod cli;
pub mod dates;
pub mod gateway;
pub mod ingest;
pub mod pipeline;
pub mod tools;
