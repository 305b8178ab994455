fn main() {
    std::process::exit(relmeas::cli::run(std::env::args_os()));
}
