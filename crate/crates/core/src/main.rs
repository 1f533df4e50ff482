fn main() {
    std::process::exit(valuechange::cli::main_with_args(std::env::args_os()));
}
