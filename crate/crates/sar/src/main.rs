fn main() {
    std::process::exit(sar::cli::run());
}
