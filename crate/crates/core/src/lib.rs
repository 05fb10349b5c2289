//! Full-stack memory-consistency checking.
//!
//! A C11 litmus test is evaluated axiomatically at the language level,
//! compiled to RISC-V through a mapping table, evaluated again against a
//! microarchitectural ordering model, and the two verdicts are compared.

pub mod c11ax;
pub mod driver;
pub mod litmus;
pub mod mapping;
pub mod rel;
pub mod uarchax;

pub use c11ax::{check_consistent, enumerate_candidates, eval_hll, CandidateExecution, HllVerdict};
pub use driver::{
    classify, emit_report, load_report, rollup, tricheck_run, ModelSpec, ReportFormat, Rollup, VariantResult, Verdict,
};
pub use litmus::{
    builtin_suite, expand_template, parse_litmus, parse_template, render_litmus, Expect, LitmusError, LitmusTemplate,
    LitmusTest, MemOrder, Outcome,
};
pub use mapping::{
    compile_test, compute_dependencies, mapping_table, parse_isa, render_isa, IsaInstr, IsaProgram, MappingId,
};
pub use uarchax::{
    check_execution, eval_uarch, model_preset, parse_model_config, IsaExecution, McmVersion, ModelConfig, ModelId,
    Observability,
};
