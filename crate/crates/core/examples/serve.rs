//! Run the HTTP service.
//!
//! cargo run --release --example serve -- [ADDR]
//!
//! curl -s localhost:8080/api/corpus
//! curl -s -d '{"image":"bar"}' localhost:8080/api/segment

use curvseg::service::{serve, ServiceConfig};

fn main() -> curvseg::Result<()> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    serve(&addr, ServiceConfig::default())
}
