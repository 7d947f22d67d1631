//! Pyramid-style human evaluation: fact extraction and curation, blinded
//! task assembly, judgment storage, coverage and its correlation with the
//! automatic metrics.

mod compose;
mod coverage;
mod facts;
mod judgments;
pub mod study;
mod tasks;

pub use compose::{
    check_compose_order, compose_items, human_measure_inputs, ComposeItem, HumanGeneration,
    COMPOSE_CONFIGS, HUMAN_BACKEND_ID,
};
pub use coverage::{
    coverage, coverage_ratio, human_metric_correlation, CandidateCoverage, CoverageReport,
    CoverageRow, HumanMetricRow,
};
pub use facts::{
    extract_facts, fact_prompt, parse_facts, AtomicFact, CurationAction, CurationQueue,
    ExtractionFlag, FactExtraction, FactStatus, FACT_EXTRACTION_PROMPT, FACT_LABEL, MAX_FACT_WORDS,
};
pub use judgments::{validate_grid, CoverageGrid, Judgment, JudgmentStore};
pub use study::Study;
pub use tasks::{
    blind_label, build_tasks, task_permutation, BlindCandidate, CandidateSource, PyramidTask,
    SealedEntry, SealedTable, TaskInput, TaskSet,
};
