fn main() {
    std::process::exit(measerr::cli::main_with_args(std::env::args_os()));
}
