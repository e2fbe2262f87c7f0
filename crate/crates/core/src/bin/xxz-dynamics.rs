fn main() {
    std::process::exit(xxz_dynamics::cli::main_cli(std::env::args_os()));
}
