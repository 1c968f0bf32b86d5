fn main() {
    std::process::exit(flslab::cli::run(std::env::args_os()));
}
