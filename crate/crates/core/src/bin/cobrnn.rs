fn main() {
    std::process::exit(cobrnn::cli::run_subcommand(std::env::args_os()));
}
