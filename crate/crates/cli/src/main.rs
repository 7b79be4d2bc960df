fn main() {
    std::process::exit(relurec::harness::cli_dispatch(std::env::args_os()));
}
