fn main() {
    std::process::exit(ricci_union::cli::run(std::env::args_os()));
}
