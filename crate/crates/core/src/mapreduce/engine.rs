use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Secondary sort key of a record: where it came from and its position there.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Seq {
    pub source: String,
    pub index: u64,
}

impl Seq {
    pub fn new(source: impl Into<String>, index: u64) -> Self {
        Self {
            source: source.into(),
            index,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedRecord {
    pub key: String,
    pub seq: Seq,
    pub payload: String,
}

impl KeyedRecord {
    pub fn new(key: impl Into<String>, seq: Seq, payload: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            seq,
            payload: payload.into(),
        }
    }
}

pub trait Mapper: Send + Sync {
    fn id(&self) -> &str;
    fn map(&self, record: &KeyedRecord) -> Result<Vec<KeyedRecord>, String>;
}

/// Receives every record of one key, sorted by `seq`.
pub trait Reducer: Send + Sync {
    fn id(&self) -> &str;
    fn reduce(&self, key: &str, records: &[KeyedRecord]) -> Result<Vec<KeyedRecord>, String>;
}

#[derive(Clone)]
pub struct Stage {
    pub mapper: Arc<dyn Mapper>,
    pub reducer: Arc<dyn Reducer>,
}

#[derive(Clone)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
    pub workers: usize,
}

impl StagePlan {
    pub fn validate(&self) -> Result<(), MapReduceError> {
        if self.stages.is_empty() {
            return Err(MapReduceError::EmptyPlan);
        }
        if self.workers == 0 {
            return Err(MapReduceError::ZeroWorkers);
        }
        Ok(())
    }

    /// `(mapper id, reducer id)` per stage.
    pub fn ids(&self) -> Vec<(String, String)> {
        self.stages
            .iter()
            .map(|s| (s.mapper.id().to_string(), s.reducer.id().to_string()))
            .collect()
    }
}

impl std::fmt::Debug for StagePlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StagePlan")
            .field("stages", &self.ids())
            .field("workers", &self.workers)
            .finish()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapReduceError {
    #[error("a plan needs at least one stage")]
    EmptyPlan,
    #[error("a plan needs at least one worker")]
    ZeroWorkers,
    #[error("stage {stage}: mapper `{mapper}` failed on record ({key}, {seq:?}): {cause}")]
    MapperFailure {
        stage: usize,
        mapper: String,
        key: String,
        seq: Seq,
        cause: String,
    },
    #[error("stage {stage}: reducer `{reducer}` failed on key `{key}`: {cause}")]
    ReducerFailure {
        stage: usize,
        reducer: String,
        key: String,
        cause: String,
    },
    #[error("stage {stage}: duplicate record ({key}, {seq:?})")]
    DuplicateRecord { stage: usize, key: String, seq: Seq },
    #[error("stage {stage}: observer failed: {cause}")]
    Observer { stage: usize, cause: String },
    #[error("no tiles selected")]
    EmptySelection,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Wall time of one stage, split into consecutive phases.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub mapper: String,
    pub reducer: String,
    pub input_records: usize,
    pub groups: usize,
    pub output_records: usize,
    pub map: Duration,
    pub shuffle: Duration,
    pub reduce: Duration,
}

impl StageReport {
    pub fn total(&self) -> Duration {
        self.map + self.shuffle + self.reduce
    }
}

pub fn run_mapreduce(
    inputs: Vec<KeyedRecord>,
    plan: &StagePlan,
) -> Result<Vec<KeyedRecord>, MapReduceError> {
    run_mapreduce_observed(inputs, plan, &mut |_, _| Ok(())).map(|(out, _)| out)
}

/// Runs every stage of `plan`. `observer` sees each stage's reducer input
/// after the shuffle, sorted by `(key, seq)`.
///
/// The first stage's map time also counts worker pool start-up, so stage
/// times add up to the call's wall time.
pub fn run_mapreduce_observed(
    inputs: Vec<KeyedRecord>,
    plan: &StagePlan,
    observer: &mut dyn FnMut(usize, &[KeyedRecord]) -> Result<(), String>,
) -> Result<(Vec<KeyedRecord>, Vec<StageReport>), MapReduceError> {
    let mut mark = Instant::now();
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| MapReduceError::Pool(e.to_string()))?;

    let mut records = inputs;
    let mut reports = Vec::with_capacity(plan.stages.len());
    for (k, stage) in plan.stages.iter().enumerate() {
        let input_records = records.len();
        let mapped: Vec<Result<Vec<KeyedRecord>, String>> =
            pool.install(|| records.par_iter().map(|r| stage.mapper.map(r)).collect());
        let mut shuffled = Vec::new();
        for (r, out) in records.iter().zip(mapped) {
            match out {
                Ok(v) => shuffled.extend(v),
                Err(cause) => {
                    return Err(MapReduceError::MapperFailure {
                        stage: k,
                        mapper: stage.mapper.id().to_string(),
                        key: r.key.clone(),
                        seq: r.seq.clone(),
                        cause,
                    })
                }
            }
        }
        let map_done = Instant::now();

        shuffled.sort_by(|a, b| (&a.key, &a.seq).cmp(&(&b.key, &b.seq)));
        if let Some(w) = shuffled
            .windows(2)
            .find(|w| w[0].key == w[1].key && w[0].seq == w[1].seq)
        {
            return Err(MapReduceError::DuplicateRecord {
                stage: k,
                key: w[0].key.clone(),
                seq: w[0].seq.clone(),
            });
        }
        observer(k, &shuffled).map_err(|cause| MapReduceError::Observer { stage: k, cause })?;
        let groups: Vec<&[KeyedRecord]> = shuffled.chunk_by(|a, b| a.key == b.key).collect();
        let shuffle_done = Instant::now();

        let reduced: Vec<Result<Vec<KeyedRecord>, String>> = pool.install(|| {
            groups
                .par_iter()
                .map(|g| stage.reducer.reduce(&g[0].key, g))
                .collect()
        });
        let mut next = Vec::new();
        for (g, out) in groups.iter().zip(reduced) {
            match out {
                Ok(v) => next.extend(v),
                Err(cause) => {
                    return Err(MapReduceError::ReducerFailure {
                        stage: k,
                        reducer: stage.reducer.id().to_string(),
                        key: g[0].key.clone(),
                        cause,
                    })
                }
            }
        }
        let reduce_done = Instant::now();

        reports.push(StageReport {
            mapper: stage.mapper.id().to_string(),
            reducer: stage.reducer.id().to_string(),
            input_records,
            groups: groups.len(),
            output_records: next.len(),
            map: map_done - mark,
            shuffle: shuffle_done - map_done,
            reduce: reduce_done - shuffle_done,
        });
        mark = reduce_done;
        records = next;
    }
    Ok((records, reports))
}

/// Passes records through unchanged.
pub struct IdentityMapper;

impl Mapper for IdentityMapper {
    fn id(&self) -> &str {
        "identity"
    }

    fn map(&self, record: &KeyedRecord) -> Result<Vec<KeyedRecord>, String> {
        Ok(vec![record.clone()])
    }
}
