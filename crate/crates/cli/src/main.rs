use std::io;
use std::path::PathBuf;

fn main() {
    let config = std::env::var_os(biaslens_cli::CONFIG_ENV).map(PathBuf::from);
    let code = biaslens_cli::run(
        std::env::args_os(),
        config.as_deref(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
