fn main() -> std::process::ExitCode {
    nhent::cli::main()
}
