fn main() {
    std::process::exit(rodeo_fusion::cli::run(std::env::args_os()));
}
