//! Penalized non-negative matrix factorization for networks and network
//! time series.
//!
//! The crate factorizes a non-negative adjacency matrix `A` as `U V^T` with
//! non-negative factors, optionally under an l1 penalty on `V` (sparser
//! incoming loadings) and, for snapshot sequences, a window penalty pulling
//! each `U_t` toward its temporal neighbors. On top of the fits it provides
//! rank selection by two-dimensional cross-validation, community extraction
//! and hub/authority scoring, seeded graph generators for validation, and
//! plot-ready file exports.
//!
//! ```
//! use dynmf::{fit_sparse_nmf, gen_star, FitConfig};
//!
//! let graph = gen_star(5).unwrap();
//! let cfg = FitConfig::new(1).with_seed(7);
//! let (factors, report) = fit_sparse_nmf(&graph, &cfg).unwrap();
//! assert!(report.converged);
//! assert_eq!(factors.k(), 1);
//! ```

mod community;
mod cv;
mod engine;
mod error;
mod factor;
mod fit_dynamic;
mod fit_static;
mod graph;
pub mod io;
mod sparse;
mod synthetic;

pub use community::{
    edge_decomposition, hub_authority, membership_from_edges, membership_from_u,
    normalize_for_display, rank1_equivalence_check, EdgeShares, Membership, Rank1Equivalence,
    SHARE_EPS,
};
pub use cv::{cv_fold_error, cv_rank_selection, make_holdout, CvCell, CvMean, CvReport, HoldoutPlan};
pub use error::{Error, Result};
pub use factor::{FactorPair, FactorSequence, FitConfig, FitReport};
pub use fit_dynamic::{
    fit_dynamic_nmf, fit_dynamic_nmf_from, objective_dynamic, smoothness_profile, WindowSpec,
};
pub use fit_static::{
    fit_classical_nmf, fit_sparse_nmf, fit_sparse_nmf_from, objective_static,
};
pub use graph::{
    aggregate_cumulative, load_edge_list, log_transform, sort_by_timestamps, write_edge_list,
    GraphSequence, GraphSnapshot,
};
pub use synthetic::{
    gen_planted_communities, gen_preferential_attachment, gen_ring, gen_star, PaGrowthConfig,
    PlantedConfig,
};
