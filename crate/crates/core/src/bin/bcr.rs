fn main() {
    std::process::exit(bcr::cli::run(std::env::args_os()));
}
