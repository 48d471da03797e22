fn main() {
    std::process::exit(spinorbit::cli::main_with_args(std::env::args_os()));
}
