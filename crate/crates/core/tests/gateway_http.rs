use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use radstruct::lexical::MetricId;
use radstruct::scorer::{ClientConfig, GatewayError, HttpTransport, MockScorer, ScoreRequest, ScorerClient, TextPair};
use tiny_http::{Header, Response, Server};

#[derive(Default)]
struct Seen {
    auth: Vec<Option<String>>,
    batch_sizes: Vec<usize>,
}

struct FakeService {
    url: String,
    seen: Arc<Mutex<Seen>>,
    score_calls: Arc<AtomicUsize>,
}

/// Serves the scoring protocol backed by [`MockScorer`]. The first
/// `unavailable_first` score calls answer 503. `CHEXBERT` is advertised
/// but rejected at scoring time.
fn spawn_service(unavailable_first: usize) -> FakeService {
    let server = Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let seen = Arc::new(Mutex::new(Seen::default()));
    let score_calls = Arc::new(AtomicUsize::new(0));
    let (seen2, calls2) = (seen.clone(), score_calls.clone());
    thread::spawn(move || {
        let mock = MockScorer::new();
        let json = Header::from_bytes("Content-Type", "application/json").unwrap();
        for mut request in server.incoming_requests() {
            let auth = request
                .headers()
                .iter()
                .find(|h| h.field.equiv("Authorization"))
                .map(|h| h.value.to_string());
            seen2.lock().unwrap().auth.push(auth);
            let (status, body) = match request.url() {
                "/v1/health" => (200, r#"{"status":"ok","version":"fake"}"#.to_string()),
                "/v1/metrics" => {
                    let mut caps = mock.capabilities_listing();
                    caps.metric_ids.push("CHEXBERT".into());
                    (200, serde_json::to_string(&caps).unwrap())
                }
                "/v1/score" => {
                    let mut raw = String::new();
                    request.as_reader().read_to_string(&mut raw).unwrap();
                    let req: ScoreRequest = serde_json::from_str(&raw).unwrap();
                    if calls2.fetch_add(1, Ordering::SeqCst) < unavailable_first {
                        (503, "warming up".to_string())
                    } else {
                        match mock.respond(&req) {
                            Ok(resp) => {
                                seen2.lock().unwrap().batch_sizes.push(req.pairs.len());
                                (200, serde_json::to_string(&resp).unwrap())
                            }
                            Err(_) => (422, format!("unsupported metric {}", req.metric_id)),
                        }
                    }
                }
                _ => (404, "not found".to_string()),
            };
            let _ = request.respond(Response::from_string(body).with_status_code(status).with_header(json.clone()));
        }
    });
    FakeService { url, seen, score_calls }
}

fn config(max_batch: usize) -> ClientConfig {
    ClientConfig {
        max_batch,
        max_retries: 3,
        backoff_base: Duration::from_millis(1),
        timeout: Duration::from_secs(10),
        ..ClientConfig::default()
    }
}

fn pairs(n: usize) -> Vec<TextPair> {
    (0..n)
        .map(|i| TextPair::new(format!("p{i}"), format!("left pleural effusion {i}"), "pleural effusion"))
        .collect()
}

#[test]
fn http_round_trip_matches_in_process_mock() {
    let service = spawn_service(0);
    let client = ScorerClient::new(HttpTransport::new(&service.url, Duration::from_secs(10)), config(4));
    assert_eq!(client.health().unwrap().status, "ok");
    assert!(client.supports("BERTScore").unwrap());
    assert!(!client.supports("BLEU").unwrap());

    let request = ScoreRequest::new("F1_RadGraph", pairs(10));
    let over_http = client.score_batch(&request).unwrap();
    let direct = MockScorer::new().respond(&request).unwrap();
    assert_eq!(over_http, direct);
    // chunks are sent concurrently, so arrival order varies
    let mut sizes = service.seen.lock().unwrap().batch_sizes.clone();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![2, 4, 4]);
}

#[test]
fn bearer_token_is_forwarded() {
    let service = spawn_service(0);
    let transport = HttpTransport::new(&service.url, Duration::from_secs(10)).with_token(Some("s3cret".into()));
    let client = ScorerClient::new(transport, config(32));
    client.score_batch(&ScoreRequest::new("BERTScore", pairs(2))).unwrap();
    let seen = service.seen.lock().unwrap();
    assert!(!seen.auth.is_empty());
    assert!(seen.auth.iter().all(|a| a.as_deref() == Some("Bearer s3cret")));
}

#[test]
fn no_token_sends_no_header() {
    let service = spawn_service(0);
    let transport = HttpTransport::new(&service.url, Duration::from_secs(10)).with_token(Some(String::new()));
    ScorerClient::new(transport, config(32)).health().unwrap();
    assert_eq!(service.seen.lock().unwrap().auth, vec![None]);
}

#[test]
fn service_unavailable_is_retried() {
    let service = spawn_service(2);
    let client = ScorerClient::new(HttpTransport::new(&service.url, Duration::from_secs(10)), config(32));
    let resp = client.score_batch(&ScoreRequest::new("GREEN", pairs(3))).unwrap();
    assert_eq!(resp.scores.len(), 3);
    assert_eq!(service.score_calls.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_unavailability_gives_up() {
    let service = spawn_service(usize::MAX);
    let client = ScorerClient::new(HttpTransport::new(&service.url, Duration::from_secs(10)), config(32));
    match client.score_batch(&ScoreRequest::new("GREEN", pairs(1))) {
        Err(GatewayError::ScorerUnavailable { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("expected ScorerUnavailable, got {other:?}"),
    }
}

#[test]
fn unsupported_metric_is_not_retried() {
    let service = spawn_service(0);
    let client = ScorerClient::new(HttpTransport::new(&service.url, Duration::from_secs(10)), config(32));
    let err = client.score_batch(&ScoreRequest::new("CHEXBERT", pairs(1))).unwrap_err();
    assert!(matches!(err, GatewayError::UnsupportedMetric(_)), "{err:?}");
    assert_eq!(service.score_calls.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let transport = HttpTransport::new(&format!("http://127.0.0.1:{port}/"), Duration::from_secs(2));
    let client = ScorerClient::new(transport, config(32));
    let err = client.score_batch(&ScoreRequest::new(MetricId::BertScore.as_str(), pairs(1))).unwrap_err();
    assert!(matches!(err, GatewayError::ScorerUnavailable { .. }), "{err:?}");
}
