//! A minimal HTTP/1.1 server standing in for the model sidecar.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use parking_lot::Mutex;
use serde_json::Value;

use mosaic_core::backends::wire::{self, *};
use mosaic_core::backends::{ImageEncoding, MockBackend};
use mosaic_core::{
    Embedding, EmbeddingSource, ImageEmbedder, ImageEncoder, MaskGenerator, Stylizer, TextEncoder,
};
use mosaic_core::{HttpBackend, ImageRgb};

#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub body: Vec<u8>,
}

impl Recorded {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).expect("request body is JSON")
    }
}

pub type Handler = dyn Fn(&str, &str, &[u8]) -> (u16, String) + Send + Sync;

pub struct Stub {
    port: u16,
    requests: Arc<Mutex<Vec<Recorded>>>,
}

impl Stub {
    pub fn start(
        handler: impl Fn(&str, &str, &[u8]) -> (u16, String) + Send + Sync + 'static,
    ) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let log = requests.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let (handler, log) = (handler.clone(), log.clone());
                thread::spawn(move || serve(stream, &*handler, &log));
            }
        });
        Stub { port, requests }
    }

    /// Serves the same status and body for every request.
    pub fn fixed(status: u16, body: impl Into<String>) -> Stub {
        let body = body.into();
        Stub::start(move |_, _, _| (status, body.clone()))
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.requests.lock().clone()
    }

    pub fn count(&self, path: &str) -> usize {
        self.requests
            .lock()
            .iter()
            .filter(|r| r.path == path)
            .count()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<Recorded>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or_default().to_string();
        let path = parts.next().unwrap_or_default().to_string();
        let mut length = 0usize;
        let mut close = false;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            let (name, value) = h.split_once(':').unwrap_or((h, ""));
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap_or(0),
                "connection" => close = value.trim().eq_ignore_ascii_case("close"),
                _ => {}
            }
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        log.lock().push(Recorded {
            method: method.clone(),
            path: path.clone(),
            body: body.clone(),
        });
        let (status, resp) = handler(&method, &path, &body);
        let head = format!(
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n",
            resp.len()
        );
        if out
            .write_all(head.as_bytes())
            .and_then(|_| out.write_all(resp.as_bytes()))
            .is_err()
        {
            return;
        }
        if close {
            return;
        }
    }
}

fn reply<T: serde::Serialize>(r: Result<T, mosaic_core::BackendError>) -> (u16, String) {
    use mosaic_core::BackendError as E;
    match r {
        Ok(v) => (200, serde_json::to_string(&v).unwrap()),
        Err(e) => {
            let status = match e {
                E::InvalidInput(_) | E::ImageTooLarge { .. } => 400,
                E::UnknownEncoding(_) => 404,
                E::EmptyMask { .. } => 422,
                _ => 503,
            };
            (
                status,
                serde_json::to_string(&ErrorBody {
                    error: e.to_string(),
                })
                .unwrap(),
            )
        }
    }
}

/// Serves the mock backend over the wire protocol.
pub fn mock_sidecar() -> Stub {
    let mock = MockBackend::new();
    let issued: Mutex<HashMap<String, (u32, u32)>> = Mutex::new(HashMap::new());
    Stub::start(move |method, path, body| {
        let parse = |b: &[u8]| serde_json::from_slice::<serde_json::Value>(b);
        if parse(body).is_err() && method == "POST" {
            return (400, r#"{"error":"malformed body"}"#.into());
        }
        let emb = |v: Vec<f64>, s| Embedding::new(v, s);
        match path {
            wire::HEALTH => (200, r#"{"status":"ok","embedding_dim":512}"#.into()),
            wire::TEXT_ENCODE => {
                let req: TextEncodeRequest = serde_json::from_slice(body).unwrap();
                reply(mock.encode_text(&req.text).map(|e| EmbeddingResponse {
                    embedding: e.values().to_vec(),
                }))
            }
            wire::IMAGE_ENCODE => {
                let req: ImageRequest = serde_json::from_slice(body).unwrap();
                reply(decode_png_b64(&req.image_png_b64).and_then(|img| {
                    mock.encode_image(&img).map(|e| {
                        issued
                            .lock()
                            .insert(e.encoding_id.clone(), (e.width, e.height));
                        ImageEncodeResponse {
                            encoding_id: e.encoding_id,
                            width: e.width,
                            height: e.height,
                        }
                    })
                }))
            }
            wire::IMAGE_EMBED => {
                let req: ImageRequest = serde_json::from_slice(body).unwrap();
                reply(decode_png_b64(&req.image_png_b64).and_then(|img| {
                    mock.embed_image(&img).map(|e| EmbeddingResponse {
                        embedding: e.values().to_vec(),
                    })
                }))
            }
            wire::MASK => {
                let req: MaskRequest = serde_json::from_slice(body).unwrap();
                let Some((w, h)) = issued.lock().get(&req.encoding_id).copied() else {
                    return reply::<MaskResponse>(Err(mosaic_core::BackendError::UnknownEncoding(
                        req.encoding_id,
                    )));
                };
                let enc = ImageEncoding {
                    encoding_id: req.encoding_id.clone(),
                    width: w,
                    height: h,
                };
                reply(
                    emb(req.text_embedding, EmbeddingSource::Text)
                        .and_then(|e| mock.generate_mask(&enc, &req.object_text, &e))
                        .map(|m| MaskResponse {
                            width: w,
                            height: h,
                            mask_rle: m.to_rle(),
                        }),
                )
            }
            wire::STYLIZE => {
                let req: StylizeRequest = serde_json::from_slice(body).unwrap();
                reply(
                    decode_png_b64(&req.image_png_b64)
                        .and_then(|img| {
                            let e = emb(req.style_embedding, EmbeddingSource::Text)?;
                            mock.stylize(&img, &req.style_text, &e)
                        })
                        .and_then(|img| {
                            Ok(ImageRequest {
                                image_png_b64: encode_png_b64(&img)?,
                            })
                        }),
                )
            }
            _ => (404, r#"{"error":"no route"}"#.into()),
        }
    })
}

// Golden protocol bodies.

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(golden_dir().join(format!("{name}.json")))
        .unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

pub fn golden_image() -> ImageRgb {
    ImageRgb::new(
        4,
        3,
        (0..3u32)
            .flat_map(|y| (0..4u32).flat_map(move |x| [(x * 60) as u8, (y * 100) as u8, 7]))
            .collect(),
    )
    .unwrap()
}

pub fn placeholder(b64: &str) -> String {
    let img = decode_png_b64(b64).expect("valid png");
    format!(
        "<png {}x{} {:016x}>",
        img.width(),
        img.height(),
        img.pixel_hash()
    )
}

pub fn normalize(mut v: Value) -> String {
    if let Some(Value::String(s)) = v.get_mut("image_png_b64") {
        *s = placeholder(s);
    }
    canonicalize(&v)
}

pub fn canonical_golden(name: &str) -> String {
    canonicalize(&serde_json::from_str(&golden(name)).unwrap())
}

/// Serves `response` once, performs `call`, and checks the request body.
pub fn exchange<T>(
    path: &str,
    request: &str,
    response: &str,
    call: impl FnOnce(&HttpBackend) -> T,
) -> T {
    let stub = Stub::fixed(200, golden(response));
    let client = HttpBackend::new(&stub.url(), Duration::from_secs(5));
    let out = call(&client);
    let reqs = stub.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(
        (reqs[0].method.as_str(), reqs[0].path.as_str()),
        ("POST", path)
    );
    assert_eq!(
        normalize(reqs[0].json()),
        canonical_golden(request),
        "{request}"
    );
    out
}
