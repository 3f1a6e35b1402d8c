fn main() -> std::process::ExitCode {
    rgnn::cli::main()
}
