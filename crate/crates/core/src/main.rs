fn main() {
    let code = revul::harness::cli::run(std::env::args_os());
    std::process::exit(code);
}
