use std::process::ExitCode;

fn main() -> ExitCode {
    match epkit::cli::run(std::env::args().skip(1)) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("epkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
