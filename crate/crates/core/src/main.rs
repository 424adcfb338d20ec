fn main() {
    std::process::exit(bcbounds::cli::run(std::env::args_os()));
}
