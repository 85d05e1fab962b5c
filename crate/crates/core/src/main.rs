fn main() {
    std::process::exit(bicombing_lab::cli::run(std::env::args_os()));
}
