fn main() {
    std::process::exit(planartn::cli::main_with_args(std::env::args_os()));
}
