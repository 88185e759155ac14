mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{args, StubServer};
use hubrisk::gateway::{
    ChatMessage, ChatModel, CompletionRequest, GatewayError, HttpChatBackend, HttpClient, RateLimiter, ResponsePath,
    RetryPolicy,
};
use hubrisk::tools::{Endpoint, FinanceTool, NewsTool, Source, ToolError, TrafficTool, WikiTool};
use serde_json::{json, Value};

fn client(attempts: u32) -> HttpClient {
    let retry = RetryPolicy {
        max_attempts: attempts,
        base_delay: Duration::from_millis(5),
        max_delay: Duration::from_millis(20),
        jitter: 0.2,
    };
    HttpClient::new(retry, Arc::new(RateLimiter::new(1000.0)))
}

fn chat(server: &StubServer, attempts: u32, key: Option<&str>) -> HttpChatBackend {
    HttpChatBackend::new(
        client(attempts),
        format!("{}/v1/chat/completions", server.base),
        "gpt-4o".into(),
        ResponsePath::parse("choices[0].message.content").unwrap(),
        key.map(str::to_string),
    )
}

fn request() -> CompletionRequest {
    CompletionRequest::new(
        vec![
            ChatMessage::system("You are a risk analyst."),
            ChatMessage::user("Assess hub h001."),
            ChatMessage::assistant("Thought: look\nAction: hub_info[{\"hub_id\": \"h001\"}]"),
            ChatMessage::tool("Observation: Found 1 hub(s)"),
        ],
        0.0,
        256,
        vec!["\nObservation".into()],
    )
    .unwrap()
}

fn completion(text: &str) -> (u16, String) {
    (200, json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string())
}

#[test]
fn chat_request_shape_and_stop_truncation() {
    let server = StubServer::start(vec![completion("Thought: done\nFinal Answer: none\nObservation: invented")]);
    let text = chat(&server, 1, Some("sk-test")).complete(&request()).unwrap();
    assert_eq!(text, "Thought: done\nFinal Answer: none");

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].method, "POST");
    assert_eq!(reqs[0].target, "/v1/chat/completions");
    assert_eq!(reqs[0].headers["authorization"], "Bearer sk-test");
    let body: Value = serde_json::from_str(&reqs[0].body).unwrap();
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 256);
    assert_eq!(body["stop"], json!(["\nObservation"]));
    let roles: Vec<&str> = body["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["system", "user", "assistant", "user"]);
}

#[test]
fn transient_statuses_are_retried() {
    let server = StubServer::start(vec![
        (503, "busy".into()),
        (429, "slow down".into()),
        completion("Final Answer: ok"),
    ]);
    let text = chat(&server, 3, None).complete(&request()).unwrap();
    assert_eq!(text, "Final Answer: ok");
    assert_eq!(server.requests().len(), 3);
    assert!(!server.requests()[0].headers.contains_key("authorization"));
}

#[test]
fn retries_give_up_after_max_attempts() {
    let server = StubServer::start(vec![(500, "down".into())]);
    let err = chat(&server, 3, None).complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::Transport(ref m) if m.contains("giving up after 3 attempts")), "{err}");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = StubServer::start(vec![(401, "{\"error\": \"bad key\"}".into())]);
    let err = chat(&server, 3, None).complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::Transport(ref m) if m.contains("HTTP 401")), "{err}");
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn missing_or_empty_assistant_text_is_a_protocol_error() {
    let server = StubServer::start(vec![(200, "{\"choices\": []}".into()), completion("")]);
    let backend = chat(&server, 1, None);
    assert!(matches!(backend.complete(&request()), Err(GatewayError::Protocol(_))));
    assert!(matches!(backend.complete(&request()), Err(GatewayError::Protocol(_))));
}

#[test]
fn live_wiki_summary() {
    let doc = json!({
        "title": "Bibb County, Georgia",
        "extract": "Bibb County is a county in the central portion of Georgia.",
        "content_urls": {"desktop": {"page": "https://en.wikipedia.org/wiki/Bibb_County,_Georgia"}},
    });
    let server = StubServer::start(vec![(200, doc.to_string()), (404, "{}".into())]);
    let tool = WikiTool::live(Endpoint::new(format!("{}/page/summary/{{title}}", server.base)), client(1));
    let res = tool.run(&args(&[("place", "Bibb County, Georgia")])).unwrap();
    assert_eq!(res.source, Source::Live);
    assert_eq!(res.narrative, "Bibb County is a county in the central portion of Georgia.");
    assert_eq!(res.records["source_url"], "https://en.wikipedia.org/wiki/Bibb_County,_Georgia");
    assert_eq!(server.requests()[0].target, "/page/summary/Bibb_County%2C_Georgia");

    let missing = tool.run(&args(&[("place", "Nowhere")])).unwrap_err();
    assert!(matches!(missing, ToolError::NotFound(_)));
}

#[test]
fn live_traffic_status() {
    let doc = json!({"flowSegmentData": {
        "currentSpeed": 19, "freeFlowSpeed": 90, "currentTravelTime": 107, "freeFlowTravelTime": 22, "confidence": 1.0
    }});
    let server = StubServer::start(vec![(200, doc.to_string()), (400, "{}".into())]);
    let tool = TrafficTool::live(
        Endpoint::new(format!("{}/flow?point={{lat}},{{lon}}", server.base)),
        client(1),
    );
    let res = tool.run(&args(&[("lat", "33.749"), ("lon", "-84.388")])).unwrap();
    assert_eq!(res.records["severity"], "severe_jam");
    assert!(res.narrative.contains("85 seconds longer"), "{}", res.narrative);
    assert_eq!(server.requests()[0].target, "/flow?point=33.749,-84.388");
    assert!(matches!(
        tool.run(&args(&[("lat", "0"), ("lon", "0")])),
        Err(ToolError::NoCoverage { .. })
    ));
}

#[test]
fn live_news_filters_by_window_and_query() {
    let doc = json!({"articles": [
        {"title": "Bibb County bridge closed", "publishedAt": "2024-05-02T10:00:00Z", "source": {"name": "WMAZ"}},
        {"title": "Bibb County fair opens", "publishedAt": "2024-05-09T10:00:00Z", "source": {"name": "WMAZ"}},
        {"title": "Unrelated story", "publishedAt": "2024-05-02T11:00:00Z"},
    ]});
    let server = StubServer::start(vec![(200, doc.to_string())]);
    let tool = NewsTool::live(
        Endpoint::new(format!("{}/everything?q={{query}}&from={{start}}&to={{last}}", server.base)),
        client(1),
    );
    let res = tool
        .run(&args(&[("query", "bibb county"), ("start", "2024-05-01"), ("end", "2024-05-05")]))
        .unwrap();
    assert_eq!(
        res.narrative,
        "1 headline(s) matching \"bibb county\" between 2024-05-01 and 2024-05-05 (end exclusive): \
         2024-05-02 Bibb County bridge closed (WMAZ);"
    );
    assert_eq!(server.requests()[0].target, "/everything?q=bibb+county&from=2024-05-01&to=2024-05-04");
}

#[test]
fn live_finance_skips_missing_values() {
    let doc = json!({"observations": [
        {"date": "2024-01-01", "value": "100.0"},
        {"date": "2024-02-01", "value": "."},
        {"date": "2024-03-01", "value": "110.0"},
    ]});
    let server = StubServer::start(vec![(200, doc.to_string()), (400, "{}".into())]);
    let tool = FinanceTool::live(
        Endpoint::new(format!("{}/obs?series_id={{series}}&start={{start}}&end={{last}}", server.base)),
        client(1),
    );
    let res = tool
        .run(&args(&[("series_id", "GAUR"), ("start", "2024-01-01"), ("end", "2024-04-01")]))
        .unwrap();
    assert_eq!(res.records["values"].as_array().unwrap().len(), 2);
    assert!(matches!(
        tool.run(&args(&[("series_id", "NOPE"), ("start", "2024-01-01")])),
        Err(ToolError::SeriesNotFound(_))
    ));
}
