fn main() {
    std::process::exit(gbafs_cli::run(std::env::args_os()));
}
