fn main() {
    std::process::exit(rgbdkit::cli::run(std::env::args_os()));
}
