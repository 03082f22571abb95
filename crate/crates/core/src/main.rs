fn main() {
    std::process::exit(bridgeirt::cli::run_from_args(std::env::args_os()));
}
