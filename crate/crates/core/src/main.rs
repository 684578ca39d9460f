fn main() {
    std::process::exit(conefred::cli::run_from(std::env::args_os()));
}
