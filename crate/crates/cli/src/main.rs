fn main() {
    std::process::exit(rfblt_cli::run(std::env::args_os()));
}
