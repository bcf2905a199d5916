fn main() {
    std::process::exit(mvl::cli::run());
}
