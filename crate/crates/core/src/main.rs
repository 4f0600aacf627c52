use std::io::{self, Write};

fn main() {
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr();
    let code = avtable::cli::run(std::env::args_os(), &mut stdin.lock(), &mut stdout, &mut stderr);
    let _ = stdout.flush();
    std::process::exit(code);
}
