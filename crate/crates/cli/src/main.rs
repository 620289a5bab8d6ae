fn main() {
    std::process::exit(marketmode_cli::run(std::env::args_os()));
}
