fn main() {
    std::process::exit(wishart_lab::cli::main_with_args(std::env::args_os()));
}
