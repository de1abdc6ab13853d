use std::process::ExitCode;

use chrum_mock_oozie::MockOozie;

fn main() -> ExitCode {
    let addr = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:11000".to_owned());
    let server = match MockOozie::bind(&addr) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("mock oozie listening on http://{}", server.addr());
    println!("captured requests: http://{}/mock/requests", server.addr());
    server.wait();
    ExitCode::SUCCESS
}
