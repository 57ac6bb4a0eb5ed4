fn main() {
    std::process::exit(memn_tools::main_with_args(std::env::args_os()));
}
