fn main() {
    std::process::exit(sllb_cli::run(std::env::args_os()));
}
