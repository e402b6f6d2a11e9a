use std::io::{stderr, stdin, stdout};
use std::process::ExitCode;

fn main() -> ExitCode {
    let (mut out, mut err) = (stdout(), stderr());
    let mut input = stdin().lock();
    let mut io = modaudit::cli::Io { out: &mut out, err: &mut err, input: &mut input };
    ExitCode::from(modaudit::cli::run(std::env::args_os(), &mut io))
}
