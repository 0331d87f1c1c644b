fn main() -> std::process::ExitCode {
    fuseprf::cli::main()
}
