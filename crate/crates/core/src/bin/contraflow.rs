fn main() {
    std::process::exit(contraflow::cli::run_cli(std::env::args_os()));
}
