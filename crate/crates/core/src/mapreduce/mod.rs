//! Deterministic in-process map-reduce.
//!
//! Each stage maps every record on a worker pool, sorts the mapped records
//! by `(key, seq)`, reduces each key group and concatenates the groups in
//! key order. Output does not depend on the worker count.

mod engine;
mod plan;

pub use engine::{
    run_mapreduce, run_mapreduce_observed, IdentityMapper, KeyedRecord, MapReduceError, Mapper,
    Reducer, Seq, Stage, StagePlan, StageReport,
};
pub use plan::{plan_stitch_pipeline, StitchJob, ALL_KEY, LEFTOVERS_KEY, POLYGONS_KEY};
