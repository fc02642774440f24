use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dse_workbench::api::Context;
use dse_workbench::server::router;
use dse_workbench::workspace::Workspace;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(ws: Option<&tempfile::TempDir>) -> Router {
    router(Context::new(ws.map(|d| Workspace::open(d.path()).unwrap())))
}

async fn call(app: Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn cyclic() -> Value {
    json!({
        "name": "loop",
        "input": {"channels": 3, "height": 8, "width": 8},
        "layers": [
            {"name": "data", "kind": "input", "inputs": []},
            {"name": "join", "kind": "concat", "inputs": ["data", "c2"]},
            {"name": "c1", "kind": "convolution", "filters": 4, "filter": [3, 3], "stride": 1, "pad": [1, 1], "inputs": ["join"]},
            {"name": "c2", "kind": "convolution", "filters": 4, "filter": [3, 3], "stride": 1, "pad": [1, 1], "inputs": ["c1"]}
        ]
    })
}

fn small(name: &str) -> Value {
    json!({
        "name": name,
        "input": {"channels": 3, "height": 8, "width": 8},
        "layers": [
            {"name": "data", "kind": "input", "inputs": []},
            {"name": "c1", "kind": "convolution", "filters": 4, "filter": [3, 3], "stride": 1, "pad": [1, 1], "inputs": ["data"]}
        ]
    })
}

#[tokio::test]
async fn nin_analysis_totals() {
    let (status, body) = call(
        app(None),
        "GET",
        "/api/architectures/nin/analysis?batch=1024",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["rows"].as_array().unwrap().len(), 17);
    assert_eq!(body["totals"]["display"]["params"], "30.4 MB");
    assert_eq!(body["totals"]["display"]["flops"], "2.27 TF");
}

#[tokio::test]
async fn unknown_architecture_is_404() {
    let (status, body) = call(app(None), "GET", "/api/architectures/nope/analysis", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["kind"], "not_found");
    assert!(body["error"]["message"].as_str().unwrap().contains("nope"));
    let (status, _) = call(app(None), "GET", "/api/no-such-endpoint", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_query_is_400_with_field() {
    let (status, body) = call(
        app(None),
        "GET",
        "/api/architectures/nin/analysis?batch=lots",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "validation");
    assert_eq!(body["error"]["path"], "batch");
}

#[tokio::test]
async fn bad_body_field_path() {
    let req = json!({"baseline": "nin", "mods": [{"kind": "scale_filters", "layer": "conv8", "factor": "x"}]});
    let (status, body) = call(app(None), "POST", "/api/diff", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(
        body["error"]["path"]
            .as_str()
            .unwrap()
            .starts_with("mods[0]"),
        "{body}"
    );

    let req = json!({"baseline": "nin", "mods": [{"kind": "remove_layer", "layer": "conv99"}]});
    let (status, body) = call(app(None), "POST", "/api/diff", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["path"], "mods[0]");

    let (status, body) = call(
        app(None),
        "POST",
        "/api/scale",
        Some(json!({"arch": "nin"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(
        body["error"]["message"]
            .as_str()
            .unwrap()
            .contains("cluster"),
        "{body}"
    );
}

#[tokio::test]
async fn malformed_json_is_400() {
    let app = app(None);
    let req = Request::builder()
        .method("POST")
        .uri("/api/diff")
        .body(Body::from("{\"baseline\": "))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn input_channel_diff_multiplier() {
    let req = json!({"baseline": "nin", "mods": [{"kind": "scale_input_channels", "factor": 4}], "batch": 1024});
    let (status, body) = call(app(None), "POST", "/api/diff", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["totals"]["flops_multiplier"], "1.3");
    assert_eq!(body["classification"], "local");
    let value: f64 = body["totals"]["flops"]["value"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 1.28).abs() < 0.01, "{value}");
}

#[tokio::test]
async fn cyclic_architecture_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = call(
        app(Some(&dir)),
        "POST",
        "/api/architectures",
        Some(cyclic()),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let msg = body["error"]["message"].as_str().unwrap();
    assert!(msg.contains("cycle"), "{msg}");
    assert!(msg.contains("c1") && msg.contains("c2"), "{msg}");
}

#[tokio::test]
async fn save_then_analyze_from_workspace() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(Some(&dir));
    let (status, body) = call(
        app.clone(),
        "POST",
        "/api/architectures",
        Some(small("tiny")),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let (status, _) = call(
        app.clone(),
        "POST",
        "/api/architectures",
        Some(small("tiny")),
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    let (_, list) = call(app.clone(), "GET", "/api/architectures", None).await;
    let tiny = list["architectures"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["name"] == "tiny")
        .unwrap()
        .clone();
    assert_eq!(tiny["source"], "workspace");

    let (status, body) = call(app.clone(), "GET", "/api/architectures/tiny/analysis", None).await;
    assert_eq!(status, StatusCode::OK);
    // 4 filters of 3x3x3 over an 8x8 output.
    assert_eq!(body["totals"]["forward_flops"], json!(4 * 27 * 64 * 2));

    let (status, body) = call(
        app.clone(),
        "POST",
        "/api/architectures",
        Some(small("nin")),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["path"], "name");
}

#[tokio::test]
async fn concurrent_identical_saves_leave_one_entry() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(Some(&dir));
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move {
                call(app, "POST", "/api/architectures", Some(small("shared"))).await
            })
        })
        .collect();
    let mut created = 0;
    for t in tasks {
        let (status, _) = t.await.unwrap();
        assert!(status == StatusCode::CREATED || status == StatusCode::OK);
        created += (status == StatusCode::CREATED) as usize;
    }
    assert_eq!(created, 1);
    let (_, body) = call(app, "GET", "/api/workspace", None).await;
    assert_eq!(body["entries"].as_array().unwrap().len(), 1);
    let index: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap())
            .unwrap();
    assert_eq!(index["entries"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn concurrent_analyses_do_not_interfere() {
    let app = app(None);
    let names = ["nin", "alexnet", "lenet", "squeezenet", "vgg19"];
    let mut expected = Vec::new();
    for n in names {
        let (_, body) = call(
            app.clone(),
            "GET",
            &format!("/api/architectures/{n}/analysis?batch=8"),
            None,
        )
        .await;
        expected.push(body);
    }
    let expected = Arc::new(expected);
    let tasks: Vec<_> = (0..40)
        .map(|i| {
            let app = app.clone();
            let expected = expected.clone();
            tokio::spawn(async move {
                let k = i % names.len();
                let uri = format!("/api/architectures/{}/analysis?batch=8", names[k]);
                let (status, body) = call(app, "GET", &uri, None).await;
                assert_eq!(status, StatusCode::OK);
                assert_eq!(body, expected[k]);
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
}

#[tokio::test]
async fn sweep_scale_and_count() {
    let req = json!({"meta": "squeezenet", "vary": "sr", "values": ["1/8", "0.75"]});
    let (status, body) = call(app(None), "POST", "/api/sweep", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["points"].as_array().unwrap().len(), 2);

    let req = json!({
        "arch": "nin",
        "cluster": {"workers": 32, "bandwidth": "1e9", "topology": {"kind": "reduction_tree", "branching": 2}, "throughput": "3.5e12"},
        "batch": 1024,
        "workers": [1, 2, 4, 8],
        "plan": {"dataset_frames": 1200000, "epochs": 47, "batch": 1024}
    });
    let (status, body) = call(app(None), "POST", "/api/scale", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["curve"]["points"].as_array().unwrap().len(), 4);
    assert!(body["training"].is_object());

    let (status, body) = call(
        app(None),
        "GET",
        "/api/count-space?slots=16&options=5",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["count"], "152587890625");
    assert!(body["note"].as_str().unwrap().contains("30"));
    let (status, body) = call(
        app(None),
        "GET",
        "/api/count-space?slots=15&options=5",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["count"], "30517578125");
}
