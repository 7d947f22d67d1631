//! Test doubles: an in-process scorer sidecar, an OpenAI-style chat server,
//! the generator behind `fixtures/corpus.jsonl` and golden prompt texts.

pub mod chat;
pub mod fixtures;
pub mod golden;
pub mod sidecar;

use std::net::SocketAddr;

/// Serve `app` on an ephemeral localhost port from a background runtime.
pub fn serve(app: axum::Router) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("tokio runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
                .await
                .expect("bind");
            tx.send(listener.local_addr().expect("addr")).ok();
            axum::serve(listener, app).await.ok();
        });
    });
    rx.recv().expect("server start")
}

pub(crate) fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}
