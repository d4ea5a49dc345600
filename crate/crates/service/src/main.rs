use clap::Parser;
use spatial_service::create_app;

#[derive(Parser)]
#[command(name = "spatial-service", about = "HTTP service for the spatial stego-packet protocol")]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:4780")]
    addr: String,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt().init();

    let args = Args::parse();
    let listener = match tokio::net::TcpListener::bind(&args.addr).await {
        Ok(listener) => listener,
        Err(e) => {
            eprintln!("failed to bind {}: {}", args.addr, e);
            std::process::exit(1);
        }
    };
    tracing::info!("listening on {}", args.addr);
    axum::serve(listener, create_app()).await.unwrap();
}
