fn main() {
    std::process::exit(selforg::cli::main_with_args(std::env::args_os()));
}
