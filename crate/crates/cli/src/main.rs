fn main() {
    std::process::exit(wtap_cli::app::main_with_args(std::env::args_os()));
}
