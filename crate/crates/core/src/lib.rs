pub mod graph;
pub mod indexer;
pub mod parser;
pub mod query;
pub mod schema;
pub mod store;
