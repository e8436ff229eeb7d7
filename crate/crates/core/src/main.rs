fn main() {
    std::process::exit(oracle_sim::cli::cli_run(std::env::args_os()));
}
