//! `ftcp-serve`: runs the negotiation session API.

use std::net::SocketAddr;

use clap::Parser;

#[derive(Parser)]
#[command(name = "ftcp-serve", version, about = "HTTP sessions for negotiating a transfer window")]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "FTCP_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, ftcp_service::router()).await
}
