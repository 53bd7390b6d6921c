fn main() {
    std::process::exit(thermolab::cli::main_with_args(std::env::args_os()));
}
