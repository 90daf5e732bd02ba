//! HTTP/JSON front end for [`safe_evop::engine::EvopSession`].
//!
//! The service never evaluates a plant: a person (or a script) asks for the
//! next experiment, runs it and posts the measured values back. Sessions live
//! as JSON files in a state directory so a campaign survives restarts.

mod api;
mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, Ack, Created, SessionView, SuggestionResponse};
pub use error::{Result, ServiceError};
pub use store::{SessionEnvelope, SessionHandle, SessionStore};

/// Serves the API on `addr` until ctrl-c.
pub async fn serve(addr: SocketAddr, state_dir: PathBuf) -> Result<()> {
    let store = Arc::new(SessionStore::open(state_dir)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
