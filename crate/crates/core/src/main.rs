fn main() {
    std::process::exit(dronenet::cli::main_with_args(std::env::args_os()));
}
