//! WebSocket transport: one JSON-RPC message per text frame, notifications
//! pushed on the same socket.

use std::future::Future;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::engine::Engine;
use crate::rpc::Connection;

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new().route("/", get(upgrade)).route("/rpc", get(upgrade)).with_state(engine)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    engine: Arc<Engine>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine)).with_graceful_shutdown(shutdown).await
}

async fn upgrade(ws: WebSocketUpgrade, State(engine): State<Arc<Engine>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, engine))
}

async fn connection(socket: WebSocket, engine: Arc<Engine>) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let conn = Connection::new(engine);
    let notify_tx = tx.clone();
    conn.subscribe(move |note| notify_tx.send(note.to_string()).is_ok());

    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        let c = conn.clone();
        match tokio::task::spawn_blocking(move || c.handle_text(&text)).await {
            Ok(Some(reply)) => {
                if tx.send(reply).is_err() {
                    break;
                }
            }
            Ok(None) => {}
            Err(e) => log::error!("request handler panicked: {e}"),
        }
    }
    drop(tx);
    writer.abort();
}
