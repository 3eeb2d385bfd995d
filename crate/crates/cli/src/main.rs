fn main() {
    std::process::exit(aigc_cli::run(std::env::args_os()));
}
