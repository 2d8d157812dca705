fn main() {
    std::process::exit(rmwave::main_with(std::env::args_os()));
}
