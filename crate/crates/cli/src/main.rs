fn main() {
    std::process::exit(tvstokes_cli::run_cli(std::env::args_os()));
}
