fn main() {
    std::process::exit(scwls::cli::run(std::env::args_os()));
}
