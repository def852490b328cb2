fn main() {
    std::process::exit(so3sr::cli::main_with(std::env::args_os()));
}
