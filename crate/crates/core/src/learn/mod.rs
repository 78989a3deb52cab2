//! Bag-of-words encoding, kernel SVM classification and the subject-split
//! evaluation protocol.

pub mod bow;
pub mod eval;
pub mod kmeans;
pub mod svm;

pub use bow::{bow_encode, BowHistogram};
pub use eval::{enumerate_folds, evaluate, ConstantPipeline, EvalReport, Fold, FoldPipeline, FoldPlan, SampleMeta};
pub use kmeans::{kmeans_codebook, kmeans_fit, Codebook, KMeansFit};
pub use svm::{hik, svm_predict, svm_train, ClassifierModel, KernelKind, Prediction};
