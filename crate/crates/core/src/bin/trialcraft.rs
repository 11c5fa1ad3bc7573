fn main() {
    std::process::exit(trialcraft::cli::run(std::env::args_os()));
}
