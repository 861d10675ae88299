fn main() {
    std::process::exit(aeroppc::cli::run(std::env::args_os()));
}
