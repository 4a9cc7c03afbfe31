fn main() {
    std::process::exit(rdx_cli::run_cli(std::env::args_os()));
}
