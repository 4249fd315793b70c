fn main() {
    std::process::exit(strucox::cli::main_with_args(std::env::args_os()));
}
