fn main() {
    let code = stickyflow::cli::run_cli(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code.into());
}
