use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let pretty = args.iter().any(|a| a == "--pretty");
    let (value, code) = doubleteam_cli::run_args(args);
    let text = match value.get("help").and_then(|h| h.as_str()) {
        Some(help) if !pretty => help.trim_end().to_string(),
        _ => doubleteam_cli::render(&value, pretty),
    };
    // a closed pipe is not an error of the command
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    ExitCode::from(code as u8)
}
