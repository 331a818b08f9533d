fn main() {
    std::process::exit(slvq::cli::run(std::env::args_os()));
}
