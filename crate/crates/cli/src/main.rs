fn main() {
    std::process::exit(dyncli::app::main_with_args(std::env::args_os()));
}
