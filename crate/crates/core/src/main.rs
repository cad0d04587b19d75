fn main() {
    std::process::exit(hierface::cli::main_with_args(std::env::args_os()));
}
