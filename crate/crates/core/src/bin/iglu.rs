fn main() {
    std::process::exit(iglu::cli::run_cli(std::env::args_os()));
}
