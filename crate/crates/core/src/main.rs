fn main() {
    std::process::exit(siattn::cli::run(std::env::args_os()));
}
