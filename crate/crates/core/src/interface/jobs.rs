//! In-process job queue: a bounded worker pool with monotone state
//! transitions (queued → running → done | failed).

use std::collections::HashMap;
use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done) | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: String,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct JobQueue {
    jobs: RwLock<HashMap<String, JobRecord>>,
    permits: Arc<Semaphore>,
    next: AtomicU64,
}

impl JobQueue {
    pub fn new(workers: usize) -> Arc<Self> {
        Arc::new(Self {
            jobs: RwLock::new(HashMap::new()),
            permits: Arc::new(Semaphore::new(workers.max(1))),
            next: AtomicU64::new(1),
        })
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.jobs.read().expect("job table poisoned").get(id).cloned()
    }

    fn transition(&self, id: &str, next: JobState, result: Option<serde_json::Value>, error: Option<String>) {
        let mut jobs = self.jobs.write().expect("job table poisoned");
        let Some(job) = jobs.get_mut(id) else { return };
        if !job.state.can_become(next) {
            log::warn!("job {id}: ignoring transition {:?} -> {next:?}", job.state);
            return;
        }
        job.state = next;
        job.result = result;
        job.error = error;
    }

    /// Queues `work`; it starts once a worker is free. Must be called
    /// inside a tokio runtime.
    pub fn submit<F>(self: &Arc<Self>, kind: &str, work: F) -> String
    where
        F: Future<Output = Result<serde_json::Value, String>> + Send + 'static,
    {
        let id = format!("job-{}", self.next.fetch_add(1, Ordering::Relaxed));
        self.jobs.write().expect("job table poisoned").insert(
            id.clone(),
            JobRecord { id: id.clone(), kind: kind.to_string(), state: JobState::Queued, result: None, error: None },
        );
        let queue = Arc::clone(self);
        let job_id = id.clone();
        tokio::spawn(async move {
            let _permit = queue.permits.clone().acquire_owned().await.expect("job semaphore closed");
            queue.transition(&job_id, JobState::Running, None, None);
            // run on its own task so a panic fails the job instead of the worker
            match tokio::spawn(work).await {
                Ok(Ok(value)) => queue.transition(&job_id, JobState::Done, Some(value), None),
                Ok(Err(e)) => {
                    log::warn!("job {job_id} failed: {e}");
                    queue.transition(&job_id, JobState::Failed, None, Some(e));
                }
                Err(e) => queue.transition(&job_id, JobState::Failed, None, Some(format!("job panicked: {e}"))),
            }
        });
        id
    }
}
