//! A deterministic laboratory for federated optimization with linear
//! minimization oracles.
//!
//! The round engine ([`fed`]) runs FedMuon-style methods — momentum plus an
//! oracle direction over a norm ball, with SCAFFOLD-style control variates —
//! next to their baselines (LocalMuon, FedAvg, SCAFFOLD) on small analytic
//! problems ([`problems`]). The oracle family ([`lmo`]) covers the exact
//! closed forms and the Newton-Schulz polynomial approximation, with the
//! effective Schatten exponent that quantifies how inexact a truncated
//! iteration is. Everything is seeded and reproducible to the byte: the same
//! config yields the same JSONL trace on any thread count.

pub mod config;
pub mod error;
pub mod fed;
pub mod lmo;
pub mod mat;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use mat::{Mat, NormKind};
