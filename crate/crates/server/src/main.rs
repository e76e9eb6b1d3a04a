use std::net::SocketAddr;

#[tokio::main]
async fn main() {
    let addr: SocketAddr = match std::env::args().nth(1) {
        Some(a) => match a.parse() {
            Ok(addr) => addr,
            Err(e) => {
                eprintln!("invalid listen address {a:?}: {e}");
                std::process::exit(2);
            }
        },
        None => SocketAddr::from(([127, 0, 0, 1], 8080)),
    };
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind {addr}: {e}");
            std::process::exit(1);
        }
    };
    eprintln!("listening on http://{addr}");
    if let Err(e) = axum::serve(listener, hyperslice_server::router()).await {
        eprintln!("server error: {e}");
        std::process::exit(1);
    }
}
