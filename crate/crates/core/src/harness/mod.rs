//! Corpus generation, configuration, model files, experiment
//! orchestration and CSV output.

pub mod config;
pub mod corpus;
pub mod experiment;
pub mod persist;
pub mod report;

pub use config::{ExperimentConfig, HopSnr, KnowledgeSetup, LinkBudgetSpec};
pub use corpus::{generate_corpus, BkSpec, GeneratedCorpus, SlotValue, TemplateBank};
pub use experiment::{
    build_knowledge, evaluate, load_models, run_placement_sweep, run_point, run_snr_sweep, run_trial,
    save_models, train_ae_stage, train_models, train_semantic_stage, HopNoise, Models, SnrAxis, SweepResult,
    SweepRow, TrialResult,
};
pub use persist::{load_model, persist_model};
pub use report::{gnuplot_script, to_csv, CSV_HEADER};
