fn main() {
    std::process::exit(fuchsian_walk::cli::run(std::env::args_os()));
}
