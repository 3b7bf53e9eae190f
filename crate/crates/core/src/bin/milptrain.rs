fn main() {
    std::process::exit(milptrain::cli::run(std::env::args_os()));
}
