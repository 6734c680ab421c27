fn main() {
    std::process::exit(eam::cli::run(std::env::args_os()));
}
