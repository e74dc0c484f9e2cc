fn main() { std::process::exit(dron::cli::run(std::env::args_os())); }
