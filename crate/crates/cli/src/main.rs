fn main() {
    std::process::exit(lohe_lab::run_cli(std::env::args_os()));
}
