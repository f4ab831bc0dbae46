use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use kwglow_serve::{bind, run, SampleStore, Service};

use crate::fail::{runtime, CmdResult};

/// Resolves on Ctrl-C, or SIGTERM on Unix.
async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

pub fn serve(samples_dir: &Path, addr: SocketAddr, out: &Path, seed: u64) -> CmdResult {
    let store = SampleStore::load(samples_dir.join("samples.tsv"))?;
    let n_samples = store.len();
    let service = Arc::new(Service::open(store, out, seed)?);
    let runtime_ = tokio::runtime::Runtime::new().map_err(runtime)?;
    runtime_.block_on(async {
        let listener = bind(addr).await?;
        let local = listener.local_addr().map_err(runtime)?;
        println!("serving {n_samples} samples on http://{local}");
        let _ = std::io::stdout().flush();
        run(listener, service.clone(), shutdown_signal()).await.map_err(runtime)
    })?;
    println!("stopped; {} ratings in {}", service.ratings().len(), out.display());
    Ok(())
}
