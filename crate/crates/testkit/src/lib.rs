//! Offline stand-ins for the remote services the pipeline talks to.
//!
//! [`FixtureServer`] is a tiny blocking HTTP/1.1 server bound to an
//! ephemeral localhost port. [`wordpress`] serves a fixed set of post objects
//! the way the WordPress REST API does (newest first, `page`/`per_page`
//! pagination, `search`, `after`/`before`, the `X-WP-TotalPages` header and
//! the 400 response past the last page). [`messages`] serves a
//! messages-style LLM endpoint from a caller-supplied reply function.
//! [`oracle`] holds naive reference scanners used to cross-check extraction.

pub mod oracle;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub headers: HashMap<String, String>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.query
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    pub fn json(&self) -> Option<Value> {
        serde_json::from_slice(&self.body).ok()
    }
}

#[derive(Debug, Clone)]
pub struct Response {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Response {
    pub fn json(status: u16, body: &Value) -> Self {
        Self {
            status,
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: serde_json::to_vec(body).unwrap(),
        }
    }

    pub fn with_header(mut self, name: &str, value: impl ToString) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }
}

type Handler = dyn Fn(&Request) -> Response + Send + Sync;

pub struct FixtureServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<Request>>>,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(handler: impl Fn(&Request) -> Response + Send + Sync + 'static) -> Self {
        Self::start_on("127.0.0.1:0", handler)
    }

    pub fn start_on(
        bind: &str,
        handler: impl Fn(&Request) -> Response + Send + Sync + 'static,
    ) -> Self {
        let listener = TcpListener::bind(bind).expect("bind fixture server");
        let addr = listener.local_addr().unwrap();
        let log = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let log = Arc::clone(&log);
            let shutdown = Arc::clone(&shutdown);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let handler = Arc::clone(&handler);
                    let log = Arc::clone(&log);
                    std::thread::spawn(move || serve_one(stream, &*handler, &log));
                }
            })
        };
        Self {
            addr,
            log,
            shutdown,
            thread: Some(thread),
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    /// Blocks the calling thread while the server keeps running.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve_one(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<Request>>) {
    let Ok(read_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(read_half);
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let target = parts.next().unwrap_or("/").to_string();
    let mut headers = HashMap::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 {
            break;
        }
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let len: usize = headers
        .get("content-length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; len];
    if len > 0 && reader.read_exact(&mut body).is_err() {
        return;
    }
    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p.to_string(), parse_query(q)),
        None => (target.clone(), Vec::new()),
    };
    let req = Request {
        method,
        path,
        query,
        headers,
        body,
    };
    log.lock().unwrap().push(req.clone());
    let resp = handler(&req);
    let mut out = stream;
    let reason = match resp.status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let mut head = format!("HTTP/1.1 {} {}\r\n", resp.status, reason);
    for (k, v) in &resp.headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str(&format!(
        "Content-Length: {}\r\nConnection: close\r\n\r\n",
        resp.body.len()
    ));
    let _ = out.write_all(head.as_bytes());
    let _ = out.write_all(&resp.body);
    let _ = out.flush();
}

fn parse_query(q: &str) -> Vec<(String, String)> {
    q.split('&')
        .filter(|kv| !kv.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
            (percent_decode(k), percent_decode(v))
        })
        .collect()
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap_or("");
                match u8::from_str_radix(hex, 16) {
                    Ok(b) => {
                        out.push(b);
                        i += 2;
                    }
                    Err(_) => out.push(b'%'),
                }
            }
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Behaviour switches for the WordPress fixture.
#[derive(Debug, Clone, Default)]
pub struct WordPressOptions {
    /// Answer the first N post requests with 503.
    pub fail_first: usize,
    /// Answer every request with this status instead.
    pub force_status: Option<u16>,
}

/// Serves `posts` (standard WordPress post objects) and `categories`
/// (`{id, slug}` objects).
pub fn wordpress(posts: Vec<Value>, categories: Vec<Value>) -> FixtureServer {
    wordpress_with(posts, categories, WordPressOptions::default())
}

pub fn wordpress_with(
    mut posts: Vec<Value>,
    categories: Vec<Value>,
    opts: WordPressOptions,
) -> FixtureServer {
    // WordPress default ordering: newest first, ties by id descending.
    posts.sort_by(|a, b| {
        let da = a["date_gmt"].as_str().or(a["date"].as_str()).unwrap_or("");
        let db = b["date_gmt"].as_str().or(b["date"].as_str()).unwrap_or("");
        db.cmp(da)
            .then_with(|| b["id"].as_u64().cmp(&a["id"].as_u64()))
    });
    let failures = AtomicUsize::new(0);
    FixtureServer::start(move |req| {
        if let Some(status) = opts.force_status {
            return Response::json(status, &json!({"code": "forced", "message": "forced"}));
        }
        match req.path.as_str() {
            "/wp-json/wp/v2/categories" => paginate(&categories, req, "rest_invalid_page_number"),
            "/wp-json/wp/v2/posts" => {
                if failures.fetch_add(1, Ordering::SeqCst) < opts.fail_first {
                    return Response::json(503, &json!({"code": "unavailable"}));
                }
                let filtered: Vec<Value> = posts
                    .iter()
                    .filter(|p| post_matches(p, req))
                    .cloned()
                    .collect();
                paginate(&filtered, req, "rest_post_invalid_page_number")
            }
            _ => Response::json(404, &json!({"code": "rest_no_route"})),
        }
    })
}

fn post_matches(p: &Value, req: &Request) -> bool {
    let date = p["date"].as_str().unwrap_or("");
    if let Some(after) = req.param("after") {
        if date <= after {
            return false;
        }
    }
    if let Some(before) = req.param("before") {
        if date >= before {
            return false;
        }
    }
    if let Some(search) = req.param("search") {
        let needle = search.to_lowercase();
        let title = p["title"]["rendered"].as_str().unwrap_or("").to_lowercase();
        let content = p["content"]["rendered"].as_str().unwrap_or("").to_lowercase();
        if !title.contains(&needle) && !content.contains(&needle) {
            return false;
        }
    }
    true
}

fn paginate(items: &[Value], req: &Request, overflow_code: &str) -> Response {
    let per_page: usize = req
        .param("per_page")
        .and_then(|v| v.parse().ok())
        .unwrap_or(10)
        .clamp(1, 100);
    let page: usize = req
        .param("page")
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
        .max(1);
    let total = items.len();
    let total_pages = total.div_ceil(per_page);
    if page > total_pages.max(1) {
        return Response::json(
            400,
            &json!({
                "code": overflow_code,
                "message": "The page number requested is larger than the number of pages available.",
                "data": {"status": 400}
            }),
        );
    }
    let start = (page - 1) * per_page;
    let slice: Vec<Value> = items.iter().skip(start).take(per_page).cloned().collect();
    Response::json(200, &Value::Array(slice))
        .with_header("X-WP-Total", total)
        .with_header("X-WP-TotalPages", total_pages)
}

/// A messages-style endpoint. `reply` maps the request JSON to the assistant
/// text; usage is reported as one token per four bytes.
pub fn messages(reply: impl Fn(&Value) -> String + Send + Sync + 'static) -> FixtureServer {
    FixtureServer::start(move |req| {
        let Some(body) = req.json() else {
            return Response::json(400, &json!({"type": "error"}));
        };
        let text = reply(&body);
        let prompt_bytes: usize = body["messages"]
            .as_array()
            .map(|m| {
                m.iter()
                    .map(|x| x["content"].as_str().map(str::len).unwrap_or(0))
                    .sum()
            })
            .unwrap_or(0);
        Response::json(
            200,
            &json!({
                "id": "msg_fixture",
                "type": "message",
                "role": "assistant",
                "model": body["model"],
                "content": [{"type": "text", "text": text}],
                "stop_reason": "end_turn",
                "usage": {
                    "input_tokens": prompt_bytes.div_ceil(4),
                    "output_tokens": text.len().div_ceil(4)
                }
            }),
        )
    })
}

/// Builds a WordPress post object.
pub fn wp_post(id: u64, date: &str, title: &str, content_html: &str, categories: &[u64]) -> Value {
    json!({
        "id": id,
        "date": date,
        "date_gmt": date,
        "link": format!("https://news.example/{id}/"),
        "title": {"rendered": title},
        "content": {"rendered": content_html, "protected": false},
        "categories": categories,
    })
}
