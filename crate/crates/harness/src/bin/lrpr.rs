fn main() {
    std::process::exit(lrpr_harness::cli::main(std::env::args_os()));
}
