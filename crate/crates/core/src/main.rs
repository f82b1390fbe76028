fn main() {
    std::process::exit(freeboundary::cli::main_with(std::env::args_os()));
}
