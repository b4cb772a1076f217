fn main() {
    std::process::exit(spectral_pursuit::cli::run_cli(std::env::args_os()));
}
