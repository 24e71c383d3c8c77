fn main() {
    std::process::exit(fracdisp::cli::run(std::env::args_os()));
}
