fn main() {
    std::process::exit(perfalign::cli::run(std::env::args_os()));
}
