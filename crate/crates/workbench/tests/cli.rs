use std::path::Path;
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::Request;
use dse_workbench::api::Context;
use dse_workbench::server::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn dse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dse"))
        .args(args)
        .env_remove("DSE_WORKSPACE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn http(method: &str, uri: &str, body: Option<Value>) -> Value {
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req.body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = router(Context::default()).oneshot(req).await.unwrap();
        assert!(resp.status().is_success());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        serde_json::from_slice(&bytes).unwrap()
    })
}

#[test]
fn analyze_nin_total_row() {
    let out = dse(&["analyze", "nin", "--batch", "1024"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    // Parameters and FLOPs match the published totals; the activation
    // total is the computed one.
    let total = text.lines().find(|l| l.starts_with("total |")).unwrap();
    assert!(total.starts_with("total | 30.4 MB |"), "{total}");
    assert!(total.ends_with("| 2.27 TF"), "{total}");
}

#[test]
fn analyze_nin_prints_published_totals() {
    let text = stdout(&dse(&["analyze", "nin", "--batch", "1024"]));
    assert!(text.contains("30.4 MB | 5.90 GB | 2.27 TF"), "{text}");
}

#[test]
fn diff_remove_pool3() {
    let out = dse(&["diff", "nin", "--mod", "remove:pool3", "--batch", "1024"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let total = text.lines().find(|l| l.starts_with("total |")).unwrap();
    assert!(total.contains("Δflops 3.8x"), "{total}");
    assert!(text.contains("classification: global"));
}

#[test]
fn count_space() {
    let out = dse(&["count-space", "--slots", "16", "--options", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().next(), Some("152587890625"));
}

#[test]
fn cli_and_http_json_agree() {
    let cli: Value = serde_json::from_str(&stdout(&dse(&[
        "analyze", "nin", "--batch", "1024", "--format", "json",
    ])))
    .unwrap();
    assert_eq!(
        cli,
        http("GET", "/api/architectures/nin/analysis?batch=1024", None)
    );

    let cli: Value = serde_json::from_str(&stdout(&dse(&[
        "diff",
        "nin",
        "--mod",
        "scale-filters:conv8:4",
        "--batch",
        "1024",
        "--format",
        "json",
    ])))
    .unwrap();
    let req = json!({"baseline": "nin", "mods": [{"kind": "scale_filters", "layer": "conv8", "factor": 4}], "batch": 1024});
    assert_eq!(cli, http("POST", "/api/diff", Some(req)));

    let cli: Value = serde_json::from_str(&stdout(&dse(&[
        "sweep",
        "squeezenet",
        "--vary",
        "sr",
        "--values",
        "1/8,1/4",
        "--format",
        "json",
    ])))
    .unwrap();
    let req = json!({"meta": "squeezenet", "vary": "sr", "values": ["1/8", "1/4"]});
    assert_eq!(cli, http("POST", "/api/sweep", Some(req)));

    let cli: Value = serde_json::from_str(&stdout(&dse(&[
        "scale",
        "nin",
        "--workers",
        "4,1,2",
        "--bw",
        "1e9",
        "--topology",
        "tree:2",
        "--batch",
        "256",
        "--format",
        "json",
    ])))
    .unwrap();
    let req = json!({
        "arch": "nin",
        "cluster": {"workers": 4, "bandwidth": "1e9", "topology": {"kind": "reduction_tree", "branching": 2}, "throughput": "3.5e12", "efficiency": "1/5"},
        "batch": 256,
        "workers": [4, 1, 2]
    });
    assert_eq!(cli, http("POST", "/api/scale", Some(req)));

    let cli: Value = serde_json::from_str(&stdout(&dse(&[
        "count-space",
        "--slots",
        "15",
        "--options",
        "5",
        "--json",
    ])))
    .unwrap();
    assert_eq!(
        cli,
        http("GET", "/api/count-space?slots=15&options=5", None)
    );
}

#[test]
fn validation_errors_exit_2() {
    let out = dse(&["analyze", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown architecture `nope`"));

    let out = dse(&["diff", "nin", "--mod", "shrink:everything"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--mod[0]"), "{}", stderr(&out));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cnn.json");
    std::fs::write(&bad, "{\n  \"name\": \"x\",\n  \"layers\": [\n").unwrap();
    let out = dse(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));

    let out = dse(&["scale", "nin", "--workers", "2", "--bw", "fast"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--bw"));

    let out = dse(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_outputs() {
    let text = stdout(&dse(&["analyze", "lenet", "--format", "csv"]));
    assert!(text.starts_with(
        "layer,kind,channels,height,width,param_bytes,activation_bytes,forward_flops\n"
    ));
    assert!(text.lines().last().unwrap().starts_with("total,"));

    let text = stdout(&dse(&[
        "sweep",
        "squeezenet",
        "--vary",
        "sr",
        "--values",
        "0.25,0.5",
        "--format",
        "csv",
    ]));
    assert!(
        text.starts_with("value,param_bytes,flops,activation_bytes"),
        "{text}"
    );
    assert_eq!(text.lines().count(), 3);

    let text = stdout(&dse(&[
        "scale",
        "nin",
        "--workers",
        "1,2,4",
        "--bw",
        "1e9",
        "--topology",
        "ps",
        "--format",
        "csv",
    ]));
    assert!(
        text.starts_with("p,comm_s,compute_s,total_s,speedup,ratio\n"),
        "{text}"
    );
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn workspace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let file = dir.path().join("nin2.cnn.json");
    let exported = stdout(&dse(&["catalog", "export", "nin"]))
        .replace("\"name\": \"nin\"", "\"name\": \"nin2\"");
    std::fs::write(&file, exported).unwrap();

    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_dse"))
            .args(args)
            .env("DSE_WORKSPACE", &ws)
            .output()
            .unwrap()
    };
    let out = run(&["workspace", "add", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let listing = stdout(&run(&["catalog", "list"]));
    assert!(
        listing.lines().any(|l| l.starts_with("nin2\tworkspace")),
        "{listing}"
    );
    let a = stdout(&run(&["analyze", "nin2", "--batch", "1024"]));
    assert!(a.contains("total | 30.4 MB |"));

    let out = run(&["diff", "nin2", "--mod", "remove:pool3", "--save", "nopool3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(&ws).join("reports/nopool3.json").is_file());
    let entries = stdout(&run(&["workspace", "list"]));
    assert_eq!(entries.lines().count(), 2, "{entries}");
}

#[test]
fn catalog_check_passes() {
    let out = dse(&["catalog", "check"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
