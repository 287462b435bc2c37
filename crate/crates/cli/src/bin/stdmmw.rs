fn main() {
    std::process::exit(stdmmw_cli::run(std::env::args_os()));
}
