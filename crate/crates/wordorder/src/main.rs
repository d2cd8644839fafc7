fn main() {
    std::process::exit(wordorder::cli::run(std::env::args_os()));
}
