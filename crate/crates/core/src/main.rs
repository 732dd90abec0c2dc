fn main() {
    std::process::exit(brachistochrone::cli::run(std::env::args_os()));
}
