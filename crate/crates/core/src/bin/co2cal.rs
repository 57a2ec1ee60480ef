fn main() {
    std::process::exit(co2cal::cli::main(std::env::args_os()));
}
