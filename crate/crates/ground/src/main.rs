fn main() {
    std::process::exit(rvops_ground::cli::run(std::env::args_os()));
}
