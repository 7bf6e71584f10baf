fn main() {
    std::process::exit(heat::cli::run(std::env::args_os()));
}
