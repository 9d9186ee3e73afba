fn main() {
    std::process::exit(cloudplan::cli::main_entry());
}
