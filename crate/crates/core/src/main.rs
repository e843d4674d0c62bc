fn main() {
    std::process::exit(cohglm::cli::run(std::env::args_os()));
}
