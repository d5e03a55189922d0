fn main() {
    std::process::exit(qqspm_cli::app::main_with_args(std::env::args_os()));
}
