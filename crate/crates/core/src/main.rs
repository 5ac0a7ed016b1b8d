fn main() {
    std::process::exit(armtraj::cli::main_with_args(std::env::args_os()));
}
