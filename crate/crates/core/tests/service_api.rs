//! The probe service over a real socket.

mod common;

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use communitylm::interface::service::{router, AppState};
use communitylm::interface::ResponseCache;

struct Service {
    base: String,
    client: reqwest::Client,
    _dirs: Vec<tempfile::TempDir>,
}

async fn start(workers: usize) -> Service {
    let runs = tempfile::tempdir().unwrap();
    let cache = tempfile::tempdir().unwrap();
    let engine = common::gold_engine().with_runs_dir(runs.path()).with_cache(ResponseCache::new(cache.path()));
    let state = AppState::new(Arc::new(engine), workers, 200);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    Service { base: format!("http://{addr}"), client: reqwest::Client::new(), _dirs: vec![runs, cache] }
}

impl Service {
    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    async fn wait_job(&self, id: &str) -> Value {
        for _ in 0..400 {
            let (status, job) = self.get(&format!("/api/jobs/{id}")).await;
            assert_eq!(status, 200);
            if job["state"] == "done" || job["state"] == "failed" {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
        panic!("job {id} did not finish");
    }
}

fn assert_error_body(body: &Value) {
    assert!(body["error"].is_string(), "{body}");
    assert!(body["detail"].is_string(), "{body}");
}

#[tokio::test]
async fn items_lists_the_catalog() {
    let s = start(1).await;
    let (status, items) = s.get("/api/items").await;
    assert_eq!(status, 200);
    let items = items.as_array().unwrap();
    assert_eq!(items.len(), 30);
    assert_eq!(items.iter().filter(|i| i["gold_label"] == "R").count(), 9);
    assert!(items.iter().all(|i| i["question_id"].is_string() && i["prompt_name"].is_string()));
}

#[tokio::test]
async fn small_probes_answer_synchronously() {
    let s = start(1).await;
    let body = json!({"subject": "ftfauci1", "template": "is-a", "n": 50, "seed": 3});
    let (status, first) = s.post("/api/probe", body.clone()).await;
    assert_eq!(status, 200, "{first}");
    assert_eq!(first["prompt"], "Dr. Anthony Fauci is a");
    assert_eq!(first["democrat"]["n"], 50);
    assert_eq!(first["predicted"], "D");
    assert_eq!(first["democrat"]["cache_hit"], false);
    let (_, second) = s.post("/api/probe", body.clone()).await;
    let (_, third) = s.post("/api/probe", body).await;
    assert_eq!(second["democrat"]["cache_hit"], true);
    assert_eq!(second, third);
}

#[tokio::test]
async fn probe_validation_errors_are_400() {
    let s = start(1).await;
    for body in [
        json!({"subject": "ftfauci1", "template": "was-a", "n": 10}),
        json!({"subject": "pineapple pizza", "template": "is", "n": 10}),
        json!({"subject": "", "template": "is", "n": 10}),
        json!({"subject": "ftfauci1", "template": "is", "n": 0}),
        json!({"subject": "ftfauci1", "template": "is", "context_party": "green"}),
        json!({"subject": "x", "template": "is", "number": "dual"}),
        json!({"template": "is"}),
        json!({"subject": "pineapple pizza", "template": "is", "n": 5000}),
    ] {
        let (status, err) = s.post("/api/probe", body.clone()).await;
        assert_eq!(status, 400, "{body} -> {err}");
        assert_error_body(&err);
    }
    let r = s.client.post(format!("{}/api/probe", s.base)).body("{not json").header("content-type", "application/json").send().await.unwrap();
    assert_eq!(r.status().as_u16(), 400);
    assert_error_body(&r.json().await.unwrap());
}

#[tokio::test]
async fn free_text_with_number_probes() {
    let s = start(1).await;
    let (status, r) =
        s.post("/api/probe", json!({"subject": "Tax cuts", "template": "is-the", "n": 20, "number": "plural"})).await;
    assert_eq!(status, 200, "{r}");
    assert_eq!(r["prompt"], "Tax cuts are the");
    assert!(r["question_id"].is_null());
}

#[tokio::test]
async fn large_probes_become_jobs() {
    let s = start(1).await;
    let (status, accepted) = s.post("/api/probe", json!({"subject": "ftwhite", "template": "is", "n": 400})).await;
    assert_eq!(status, 202, "{accepted}");
    let id = accepted["job_id"].as_str().unwrap().to_string();
    assert!(["queued", "running", "done"].contains(&accepted["state"].as_str().unwrap()));
    let job = s.wait_job(&id).await;
    assert_eq!(job["state"], "done", "{job}");
    assert_eq!(job["result"]["democrat"]["n"], 400);
    assert_eq!(job["kind"], "probe");
}

#[tokio::test]
async fn ranking_endpoint() {
    let s = start(1).await;
    let (status, r) = s.get("/api/ranking?community=d&n=60").await;
    assert_eq!(status, 200, "{r}");
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 16);
    let stances: Vec<f64> = entries.iter().map(|e| e["stance"].as_f64().unwrap()).collect();
    assert!(stances.windows(2).all(|w| w[0] >= w[1]));
    for bad in ["/api/ranking?community=x", "/api/ranking", "/api/ranking?community=r&template=nope", "/api/ranking?community=r&n=0"] {
        let (status, err) = s.get(bad).await;
        assert_eq!(status, 400, "{bad}");
        assert_error_body(&err);
    }
}

#[tokio::test]
async fn eval_job_produces_a_report() {
    let s = start(2).await;
    let (status, accepted) = s.post("/api/eval", json!({"template": "is-the", "n": 40, "seed": 5})).await;
    assert_eq!(status, 202, "{accepted}");
    let job = s.wait_job(accepted["job_id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "done", "{job}");
    let run_id = job["result"]["run_ids"][0].as_str().unwrap().to_string();
    assert_eq!(job["result"]["aggregate"]["accuracy"]["mean"], 1.0);
    let (status, report) = s.get(&format!("/api/reports/{run_id}")).await;
    assert_eq!(status, 200);
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["per_item"].as_array().unwrap().len(), 30);

    let (status, err) = s.post("/api/eval", json!({"template": "bogus"})).await;
    assert_eq!(status, 400);
    assert_error_body(&err);
    let (status, _) = s.post("/api/eval", json!({"runs": 0})).await;
    assert_eq!(status, 400);
    let r = s.client.post(format!("{}/api/eval", s.base)).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 202, "an empty body uses the defaults");
}

#[tokio::test]
async fn unknown_things_are_404_json() {
    let s = start(1).await;
    for path in ["/api/jobs/job-77", "/api/reports/nope", "/api/nothing", "/"] {
        let (status, err) = s.get(path).await;
        assert_eq!(status, 404, "{path}");
        assert_error_body(&err);
    }
    let (status, err) = s.get("/api/reports/..").await;
    assert!(status == 400 || status == 404, "{status}");
    assert_error_body(&err);
}

#[tokio::test]
async fn concurrent_probes_share_the_cache() {
    let s = Arc::new(start(2).await);
    let body = json!({"subject": "ftpelosi1", "template": "is", "n": 80, "seed": 1});
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let s = Arc::clone(&s);
            let body = body.clone();
            tokio::spawn(async move { s.post("/api/probe", body).await })
        })
        .collect();
    let mut stances = Vec::new();
    for h in handles {
        let (status, r) = h.await.unwrap();
        assert_eq!(status, 200);
        stances.push((r["democrat"]["stance"].as_f64().unwrap(), r["republican"]["stance"].as_f64().unwrap()));
    }
    assert!(stances.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn bind_failure_is_an_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap();
    let state = AppState::new(Arc::new(common::gold_engine()), 1, 200);
    assert!(communitylm::interface::service::serve(state, addr).await.is_err());
}
