fn main() {
    std::process::exit(sphereshrink_cli::run(std::env::args_os()));
}
