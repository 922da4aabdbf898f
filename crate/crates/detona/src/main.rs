fn main() {
    let env: Vec<(String, String)> = std::env::vars().collect();
    std::process::exit(detona::cli::run(std::env::args_os(), &env));
}
