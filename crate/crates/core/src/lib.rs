//! MDR-EFE: selection of interacting discrete factors by minimizing a
//! cross-validated estimate of a penalized prediction error, for i.i.d. and
//! stratified (fixed case/control count) samples.
//!
//! Modules, bottom-up:
//! - [`datagen`]: the XOR genotype/response law and seeded observation streams.
//! - [`model`]: exact error function, optimal classifier, consistency diagnostics.
//! - [`stratify`]: stratified sampling by label-dependent acceptance.
//! - [`estimator`]: fold partition, plug-in rule, error estimate, subset search.
//! - [`cost`]: budget planning for stratified designs.
//! - [`harness`]: the Monte Carlo method comparison and its CSV report.
//! - [`selfcheck`]: executable statistical checks of the above.
//!
//! ```
//! use mdr_core::{build_stratified, select_relevant, PsiMode, SeededStream, XorModel, XorSource};
//!
//! let model = XorModel::uniform(20, vec![1, 4], 0.2)?;
//! let mut source = XorSource::new(model.clone(), SeededStream::new(7));
//! let sample = build_stratified(&mut source, 300, 0.5)?;
//! let best = select_relevant(&sample, 5, 2, model.case_prevalence(), PsiMode::Natural)?;
//! assert_eq!(best.subset, vec![1, 4]);
//! # Ok::<(), mdr_core::Error>(())
//! ```

pub mod cost;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod rng;
pub mod selfcheck;
pub mod stratify;
pub mod types;

pub use cost::{lambda0, s_str, s_str_estimated, CostParams, NTildeLaw};
pub use datagen::{BernoulliLabels, LabelFirstSource, XorModel, XorSource};
pub use error::{Error, Result};
pub use estimator::{
    err_hat_iid, err_hat_k, partition_folds, select_relevant, select_relevant_iid, ErrEstimate,
    FoldPartition, IidPrevalence, IidSample, PsiMode, Selection, TrainedRule,
};
pub use harness::{ExperimentConfig, MethodVariant, TmrReport};
pub use model::{Classifier, ModelDiagnostics, PenaltySpec};
pub use rng::SeededStream;
pub use stratify::{build_stratified, PrevalenceEstimate, StratifiedSample};
pub use types::{FactorVector, Label, Observation};
