fn main() {
    std::process::exit(matchstat::cli::run(std::env::args_os()));
}
