//! WebSocket transport for the control service.
//!
//! Each connection gets its own session. Clients ask for a role with the
//! query string (`ws://host:port/?role=observer`); the default is
//! controller, downgraded to observer when a controller is already
//! connected. The first frame from the server is the hello carrying the
//! granted role. Plain HTTP requests are answered from `--ui-dir`, if set.

use std::io::{ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use croc_core::control::{Role, Service};
use tungstenite::handshake::server::{Request, Response};
use tungstenite::{Error as WsError, Message as WsMessage};

use crate::setup::{self, Failure};
use crate::ServeArgs;

/// How long a connection thread blocks on the socket before checking the
/// session for outgoing frames.
const POLL: Duration = Duration::from_millis(5);

pub fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let mut soc = setup::platform(&args.platform)?;
    if !args.firmware.is_empty() {
        setup::load_firmware(&mut soc, &args.firmware)?;
    }
    let listener = TcpListener::bind((args.host.as_str(), args.port))
        .map_err(|e| setup::usage(format!("{}:{}: {e}", args.host, args.port)))?;
    let addr = listener.local_addr().map_err(setup::usage)?;
    println!("croc-ctl/1 listening on ws://{addr}");
    let _ = std::io::stdout().flush();

    let service = Arc::new(Service::start(soc));
    let ui_dir = args.ui_dir.clone();
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        let service = service.clone();
        let ui_dir = ui_dir.clone();
        std::thread::spawn(move || {
            if let Err(e) = connection(&service, stream, ui_dir.as_deref()) {
                eprintln!("connection closed: {e}");
            }
        });
    }
    Ok(())
}

/// Whether the buffered request head asks for a WebSocket upgrade.
fn is_upgrade(stream: &TcpStream) -> std::io::Result<bool> {
    let mut buf = [0u8; 4096];
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    loop {
        let n = stream.peek(&mut buf)?;
        let head = String::from_utf8_lossy(&buf[..n]).to_ascii_lowercase();
        if head.contains("\r\n\r\n") || n == buf.len() || n == 0 {
            return Ok(head
                .lines()
                .any(|l| l.starts_with("upgrade:") && l.contains("websocket")));
        }
        std::thread::sleep(Duration::from_millis(1));
    }
}

fn requested_role(req: &Request) -> Role {
    let query = req.uri().query().unwrap_or("");
    if query.split('&').any(|kv| kv == "role=observer") {
        Role::Observer
    } else {
        Role::Controller
    }
}

fn connection(service: &Service, stream: TcpStream, ui_dir: Option<&Path>) -> Result<(), String> {
    if !is_upgrade(&stream).map_err(|e| e.to_string())? {
        return static_file(stream, ui_dir).map_err(|e| e.to_string());
    }
    stream.set_read_timeout(None).map_err(|e| e.to_string())?;
    let mut role = Role::Controller;
    // the callback's error type is fixed by tungstenite
    #[allow(clippy::result_large_err)]
    let mut ws = tungstenite::accept_hdr(stream, |req: &Request, resp: Response| {
        role = requested_role(req);
        Ok(resp)
    })
    .map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(Some(POLL)).map_err(|e| e.to_string())?;
    let mut session = service.connect(role);

    loop {
        match ws.read() {
            Ok(WsMessage::Text(text)) => session.send_text(&text).map_err(|e| e.to_string())?,
            Ok(WsMessage::Binary(bytes)) => session
                .send_text(&String::from_utf8_lossy(&bytes))
                .map_err(|e| e.to_string())?,
            Ok(WsMessage::Close(_)) | Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => return Ok(()),
            Ok(_) => {}
            Err(WsError::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e.to_string()),
        }
        let mut wrote = false;
        while let Some(m) = session.try_recv() {
            ws.write(WsMessage::Text(m.to_json())).map_err(|e| e.to_string())?;
            wrote = true;
        }
        if wrote {
            ws.flush().map_err(|e| e.to_string())?;
        }
        if session.is_closed() {
            let _ = ws.close(None);
            return Ok(());
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

/// Map a request path onto `root`, refusing anything that climbs out of it.
fn resolve(root: &Path, url_path: &str) -> Option<PathBuf> {
    let rel = url_path.split(['?', '#']).next()?.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    rel.components()
        .all(|c| matches!(c, Component::Normal(_)))
        .then(|| root.join(rel))
}

fn static_file(mut stream: TcpStream, ui_dir: Option<&Path>) -> std::io::Result<()> {
    let mut buf = [0u8; 4096];
    let n = stream.read(&mut buf)?;
    let head = String::from_utf8_lossy(&buf[..n]);
    let mut parts = head.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
    let file = ui_dir
        .filter(|_| method == "GET")
        .and_then(|root| resolve(root, path))
        .and_then(|p| std::fs::read(&p).ok().map(|body| (p, body)));
    let (status, kind, body) = match file {
        Some((p, body)) => ("200 OK", content_type(&p), body),
        None => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {kind}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(&body)?;
    stream.flush()
}
