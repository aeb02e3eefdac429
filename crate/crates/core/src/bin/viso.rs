fn main() {
    std::process::exit(viso_pc::cli::main_with_args(std::env::args_os()));
}
