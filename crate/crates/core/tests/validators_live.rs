use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shepherd_core::manifest::build_manifest;
use shepherd_core::validators::{check_url_live, deep_validate, sha256_file, DeepOptions, LinkStatus};
use shepherd_core::{canonical_tree, validate_manifest, FixedClock, RetrievabilityManifest, TraversalSession};
use shepherd_testkit::{reference_sha256, Route, StubServer};

fn stub() -> StubServer {
    StubServer::start(vec![
        ("/ok", Route::Status(200)),
        ("/gone", Route::Status(404)),
        ("/broken", Route::Status(500)),
        ("/moved", Route::Redirect(301, "/ok".into())),
        ("/loop", Route::Redirect(302, "/loop".into())),
        ("/nohead", Route::NoHead(200)),
        ("/slow", Route::Delay(Duration::from_millis(1500))),
    ])
}

#[tokio::test]
async fn reachability_against_stub() {
    let server = stub();
    let ok = check_url_live(&server.url("/ok"), 2000, 5).await.unwrap();
    assert_eq!((ok.status, ok.http_status), (LinkStatus::Reachable, Some(200)));

    let gone = check_url_live(&server.url("/gone"), 2000, 5).await.unwrap();
    assert_eq!((gone.status, gone.http_status), (LinkStatus::Unreachable, Some(404)));

    let broken = check_url_live(&server.url("/broken"), 2000, 5).await.unwrap();
    assert_eq!(broken.status, LinkStatus::Unreachable);

    let moved = check_url_live(&server.url("/moved"), 2000, 5).await.unwrap();
    assert_eq!((moved.status, moved.http_status), (LinkStatus::Reachable, Some(200)));

    // Redirect budget exhausted: the final answer is still a 3xx.
    let looped = check_url_live(&server.url("/loop"), 2000, 5).await.unwrap();
    assert_eq!(looped.http_status, Some(302));

    let nohead = check_url_live(&server.url("/nohead"), 2000, 5).await.unwrap();
    assert_eq!((nohead.status, nohead.http_status), (LinkStatus::Reachable, Some(200)));

    let slow = check_url_live(&server.url("/slow"), 300, 5).await.unwrap();
    assert_eq!(slow.status, LinkStatus::Timeout);
    assert!(slow.elapsed_ms < 1500);
}

#[tokio::test]
async fn closed_port_is_unreachable() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let r = check_url_live(&format!("http://127.0.0.1:{port}/"), 2000, 5).await.unwrap();
    assert_eq!((r.status, r.http_status), (LinkStatus::Unreachable, None));
}

fn script_manifest(raw_url: &str, script_ref: &str) -> RetrievabilityManifest {
    let clock = FixedClock::parse("2024-05-01T09:00:00Z").unwrap();
    let mut s = TraversalSession::start(Arc::new(canonical_tree()), &clock).unwrap();
    for a in ["yes", "yes", "yes", "script"] {
        s.apply_answer(a).unwrap();
    }
    s.set_field("raw_url", raw_url.into()).unwrap();
    s.set_field("script_ref", script_ref.into()).unwrap();
    build_manifest(&s, &clock).unwrap()
}

#[tokio::test]
async fn options_off_equals_schema_validation() {
    let tree = canonical_tree();
    let m = script_manifest("https://example.org/raw.csv", "missing/prep.py");
    let deep = deep_validate(&m, &tree, &DeepOptions::default()).await;
    assert_eq!(deep, validate_manifest(&m, &tree));
}

#[tokio::test]
async fn file_and_checksum_findings() {
    let tree = canonical_tree();
    let dir = tempfile::tempdir().unwrap();
    let opts = DeepOptions { checksums: true, base_dir: Some(dir.path().to_path_buf()), ..Default::default() };

    let m = script_manifest("https://example.org/raw.csv", "prep.py");
    let report = deep_validate(&m, &tree, &opts).await;
    assert_eq!(report.count("E_FILE_MISSING"), 1);

    std::fs::write(dir.path().join("prep.py"), b"print('clean')\n").unwrap();
    let mut m = script_manifest("https://example.org/raw.csv", "prep.py");
    assert!(deep_validate(&m, &tree, &opts).await.is_clean());

    let actual = sha256_file(&dir.path().join("prep.py")).unwrap();
    m.fields.insert("script_sha256".into(), actual.clone().into());
    m.checksums.insert("prep.py".into(), actual);
    assert!(deep_validate(&m, &tree, &opts).await.is_clean());

    let wrong = "0".repeat(64);
    m.fields.insert("script_sha256".into(), wrong.clone().into());
    m.checksums.insert("prep.py".into(), wrong);
    assert_eq!(deep_validate(&m, &tree, &opts).await.count("E_CHECKSUM_MISMATCH"), 2);
}

#[tokio::test]
async fn live_findings_in_field_order() {
    let server = stub();
    let tree = canonical_tree();
    let opts = DeepOptions { live: true, timeout_ms: 400, ..Default::default() };

    let m = script_manifest(&server.url("/gone"), &server.url("/slow"));
    let report = deep_validate(&m, &tree, &opts).await;
    let live: Vec<_> = report.findings.iter().filter(|f| f.code != "W_OPTIONAL_ABSENT").map(|f| (f.code, f.location.to_string())).collect();
    assert_eq!(
        live,
        [("E_LINK_DEAD", "fields.raw_url".to_string()), ("W_LINK_TIMEOUT", "fields.script_ref".to_string())]
    );

    let capped = DeepOptions { max_live_urls: Some(1), ..opts };
    let report = deep_validate(&m, &tree, &capped).await;
    assert_eq!(report.count("I_LINK_SKIPPED"), 1);
}

#[test]
fn sha256_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..50 {
        let len = rng.random_range(0..=70_000);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let path = dir.path().join(format!("blob{i}"));
        std::fs::File::create(&path).unwrap().write_all(&bytes).unwrap();
        assert_eq!(sha256_file(&path).unwrap(), reference_sha256(&bytes));
    }
}

#[test]
fn sha256_missing_file_is_io_error() {
    let err = sha256_file(std::path::Path::new("/nonexistent/blob")).unwrap_err();
    assert_eq!(err.code(), "E_IO");
}
