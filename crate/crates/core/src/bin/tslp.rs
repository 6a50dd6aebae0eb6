fn main() {
    std::process::exit(tslp_core::cli::run());
}
