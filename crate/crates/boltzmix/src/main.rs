use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match boltzmix::parse_args(args.into_iter()) {
        Ok(parsed) => ExitCode::from(boltzmix::run(&parsed) as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(boltzmix::EXIT_CONFIG_ERROR as u8)
        }
    }
}
