use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (code, report) = twistframe::cli::run(std::env::args_os());
    match code {
        1 => {
            for v in &report.verdicts {
                eprintln!("{}", v.status);
            }
        }
        _ => match report.to_json() {
            Ok(s) => print!("{s}"),
            Err(e) => eprintln!("{e}"),
        },
    }
    ExitCode::from(code as u8)
}
