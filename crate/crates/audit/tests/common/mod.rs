//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use modaudit::cli::{run_with, Io};
use modaudit::audit::RunContext;
use modaudit::providers::{ScoreRequest, Transport, TransportError, TransportResponse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fnv(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Score in [0, 1) derived from the text, higher when it mentions "hate".
pub fn text_score(text: &str) -> f64 {
    let noise = (fnv(text) % 1000) as f64 / 4000.0;
    if text.to_lowercase().contains("hate") {
        0.6 + noise
    } else {
        0.1 + noise
    }
}

pub fn generic_body(text: &str) -> String {
    format!("{{\"sub_scores\":{{\"hate\":{},\"violence\":0.01}},\"model_version\":\"mock-1\"}}", text_score(text))
}

/// Zero-latency in-process transport answering in the generic schema.
#[derive(Default)]
pub struct MockTransport {
    pub calls: AtomicUsize,
    pub issued: Mutex<Vec<Duration>>,
}

impl Transport for MockTransport {
    fn send(&self, req: &ScoreRequest<'_>) -> Result<TransportResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.issued.lock().unwrap().push(req.issued_at);
        Ok(TransportResponse { status: 200, body: generic_body(req.text) })
    }
}

const WORDS: [&str; 16] = [
    "the", "weather", "is", "nice", "today", "we", "went", "to", "market", "and", "bought", "bread", "people",
    "talk", "about", "music",
];

/// Balanced corpus of `n` JSONL lines; toxic lines contain "hate". Some
/// lines carry raw group labels.
pub fn write_corpus(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ["women", "muslim", "black", "gay", "jewish", "asian", "latino"];
    let mut out = String::new();
    for i in 0..n {
        let toxic = i % 2 == 0;
        let len = rng.random_range(4..12);
        let mut words: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
        if toxic || rng.random_bool(0.1) {
            let at = rng.random_range(0..words.len());
            words.insert(at, "hate");
        }
        let mut groups = Vec::new();
        if rng.random_bool(0.4) {
            let label = labels[rng.random_range(0..labels.len())];
            groups.push(format!("\"{label}\""));
            words.push(label);
        }
        out.push_str(&format!(
            "{{\"id\":\"s{i}\",\"text\":\"{}\",\"toxic\":{},\"groups\":[{}]}}\n",
            words.join(" "),
            u8::from(toxic),
            groups.join(",")
        ));
    }
    std::fs::write(path, out).unwrap();
}

pub const MAPPING: &str = r#"{"rules": {"women": "Women", "muslim": "Muslim", "black": "PoC", "gay": "LGBTQ+",
    "jewish": "Jewish", "asian": "Asian", "latino": "Latinx"}}"#;

pub struct Output {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str], ctx: &RunContext<'_>) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut input = std::io::empty();
    let code = {
        let mut io = Io { out: &mut out, err: &mut err, input: &mut input };
        run_with(std::iter::once("modaudit").chain(args.iter().copied()), &mut io, ctx)
    };
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

/// Minimal HTTP/1.1 scoring server on 127.0.0.1. Each connection carries one
/// request. `respond` maps a request body to (status, body).
pub struct MockServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
}

fn handle(mut stream: TcpStream, respond: &(dyn Fn(&str) -> (u16, String) + Sync)) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((name, value)) = trimmed.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let (status, payload) = respond(&String::from_utf8_lossy(&body));
    let response = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

impl MockServer {
    pub fn start(respond: impl Fn(&str) -> (u16, String) + Send + Sync + 'static) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/score", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let counter = requests.clone();
        let respond = Arc::new(respond);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                counter.fetch_add(1, Ordering::SeqCst);
                let respond = respond.clone();
                std::thread::spawn(move || handle(stream, respond.as_ref()));
            }
        });
        MockServer { url, requests }
    }
}
