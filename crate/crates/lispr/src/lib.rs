//! Tabular laboratory for reusing a black-box source policy on a larger
//! target task by learning where the policy succeeds.
//!
//! The crate has three layers:
//!
//! * environments and learning: [`mdp`], [`grid`], [`tabular`];
//! * the option machinery itself: [`options`] (initiation sets, option
//!   switching, recovery rewards, training loops) and [`proxy`] (reward
//!   transforms that avoid evaluating the success predictor at act time);
//! * verification and experiments: [`oracle`] (exact dynamic programming and
//!   the numerical checks behind the framework's guarantees) and
//!   [`experiment`] (seeded runs, sweeps, curve exports, heatmaps).

pub mod experiment;
pub mod grid;
pub mod mdp;
pub mod options;
pub mod oracle;
pub mod proxy;
pub mod tabular;
