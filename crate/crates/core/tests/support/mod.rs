//! Helpers shared by the integration tests: a tiny HTTP stub and
//! brute-force oracles that do not reuse library code.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use relmaze::gateway::GatewayConfig;

#[derive(Debug, Clone)]
pub struct Request {
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// The user message of an OpenAI-style chat body.
    pub fn user_prompt(&self) -> String {
        let v: serde_json::Value = serde_json::from_str(&self.body).unwrap_or_default();
        v.pointer("/messages/1/content")
            .and_then(|c| c.as_str())
            .unwrap_or_default()
            .to_string()
    }
}

type Responder = dyn Fn(&Request) -> (u16, String) + Send + Sync;

pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    addr: std::net::SocketAddr,
}

pub fn chat_body(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

impl StubServer {
    pub fn start<F>(responder: F) -> Self
    where
        F: Fn(&Request) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let responder: Arc<Responder> = Arc::new(responder);
        let (reqs, halt) = (requests.clone(), stop.clone());
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if halt.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (reqs, responder) = (reqs.clone(), responder.clone());
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut headers = Vec::new();
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap_or(0);
                    loop {
                        line.clear();
                        if reader.read_line(&mut line).unwrap_or(0) == 0 {
                            break;
                        }
                        let l = line.trim_end();
                        if l.is_empty() {
                            break;
                        }
                        if let Some((k, v)) = l.split_once(':') {
                            headers.push((k.trim().to_string(), v.trim().to_string()));
                        }
                    }
                    let len = headers
                        .iter()
                        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                        .and_then(|(_, v)| v.parse::<usize>().ok())
                        .unwrap_or(0);
                    let mut body = vec![0u8; len];
                    reader.read_exact(&mut body).unwrap_or(());
                    let req = Request {
                        headers,
                        body: String::from_utf8_lossy(&body).into_owned(),
                    };
                    let (status, text) = responder(&req);
                    reqs.lock().unwrap().push(req);
                    let mut stream = stream;
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                        text.len()
                    );
                    let _ = stream.flush();
                });
            }
        });
        StubServer {
            url: format!("http://{addr}/v1/chat/completions"),
            requests,
            stop,
            handle: Some(handle),
            addr,
        }
    }

    /// Serves the given responses in order, then repeats the last one.
    pub fn scripted(responses: Vec<(u16, String)>) -> Self {
        let queue = Mutex::new(VecDeque::from(responses));
        let last = Mutex::new((500u16, String::new()));
        StubServer::start(move |_| {
            let mut q = queue.lock().unwrap();
            match q.pop_front() {
                Some(r) => {
                    *last.lock().unwrap() = r.clone();
                    r
                }
                None => last.lock().unwrap().clone(),
            }
        })
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    pub fn config(&self, key_env: &str, max_retries: u32) -> GatewayConfig {
        GatewayConfig {
            endpoint_url: self.url.clone(),
            api_key_env: key_env.to_string(),
            max_retries,
            timeout_secs: 5.0,
            ..GatewayConfig::default()
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = std::net::TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Brute-force BFS on a raw occupancy grid (`true` = blocked).
pub fn grid_bfs(
    blocked: &[Vec<bool>],
    from: (usize, usize),
    to: (usize, usize),
) -> Option<usize> {
    let (h, w) = (blocked.len(), blocked[0].len());
    if blocked[from.0][from.1] || blocked[to.0][to.1] {
        return None;
    }
    let mut seen = BTreeSet::from([from]);
    let mut frontier = vec![from];
    let mut d = 0;
    while !frontier.is_empty() {
        if frontier.contains(&to) {
            return Some(d);
        }
        let mut next = Vec::new();
        for (r, c) in frontier {
            let cand = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for (nr, nc) in cand {
                if nr < h && nc < w && !blocked[nr][nc] && seen.insert((nr, nc)) {
                    next.push((nr, nc));
                }
            }
        }
        frontier = next;
        d += 1;
    }
    None
}

/// Bijective base-26 label written out by repeated division.
pub fn base26(mut n: usize) -> String {
    let mut out = Vec::new();
    n += 1;
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

pub fn occupancy(maze: &relmaze::Maze) -> Vec<Vec<bool>> {
    (0..maze.height())
        .map(|r| {
            (0..maze.width())
                .map(|c| maze.is_obstacle(relmaze::Coord::new(r, c)))
                .collect()
        })
        .collect()
}

/// Unique scratch directory under the target dir.
pub fn scratch_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("relmaze-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
