fn main() {
    let code = semcov::harness::cli::run(std::env::args_os());
    std::process::exit(code);
}
