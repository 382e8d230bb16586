fn main() {
    std::process::exit(regcalc::cli::main_with_args(std::env::args_os()));
}
