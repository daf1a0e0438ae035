use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use slg_cli::{error_kind, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": first, "kind": "usage" }));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(Some(value)) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = error_kind(&err);
            eprintln!("{}", json!({ "error": format!("{err:#}"), "kind": kind }));
            ExitCode::from(if kind == "usage" { 2 } else { 1 })
        }
    }
}
