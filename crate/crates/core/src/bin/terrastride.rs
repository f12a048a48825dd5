fn main() -> std::process::ExitCode {
    terrastride::cli::main()
}
