use std::io::Write;
use std::process::ExitCode;

use p2pmarket_cli::{configure_threads, exit_code, parse, run};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse(std::env::args_os()) {
        Ok(cli) => cli,
        Err((message, code)) => {
            if code == 0 {
                print!("{message}");
            } else {
                eprint!("{message}");
            }
            return ExitCode::from(code as u8);
        }
    };
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(outcome.summary.as_bytes());
            ExitCode::from(outcome.code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
