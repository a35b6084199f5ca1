//! Core library for diversity-driven multi-agent query reformulation.
//!
//! A fixed BM25 search engine acts as a black-box environment: it takes a
//! query and returns a ranked document list plus a recall reward. Reformulation
//! agents learn, by policy gradient, to append terms to the original query so
//! that the environment retrieves more relevant documents. A learned
//! aggregator fuses the result lists of several independently trained agents
//! into one final ranking.
//!
//! Module map:
//!
//! * [`nn`] — minimal neural toolkit (tensors, CNN/BoW encoders, sigmoid
//!   scoring head, analytic backprop, SGD/Adam, binary checkpoints).
//! * [`search`] — tokenizer, corpus, inverted index, BM25 ranking, Dirichlet
//!   language models, and the query environment.
//! * [`metrics`] — retrieval metrics, token F1, oracle scores, reformulation
//!   diversity metrics, partition-quality metrics.
//! * [`baselines`] — PRF and RM3 query expansion.
//! * [`agents`] — candidate term pools, the term-appending policy, decoding
//!   (greedy/sample/beam/ensemble), and REINFORCE training.
//! * [`partition`] — random/bootstrap/balanced-k-means training-set splits.
//! * [`aggregator`] — result deduplication, rank/relevance scoring, and
//!   cross-entropy training of the relevance model.

pub mod agents;
pub mod aggregator;
pub mod baselines;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod partition;
pub mod search;
pub mod seed;

pub use error::{Error, Result};
