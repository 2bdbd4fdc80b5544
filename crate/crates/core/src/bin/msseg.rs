fn main() {
    std::process::exit(msseg::pipeline::cli::main());
}
