fn main() -> std::process::ExitCode {
    iohd::cli::run()
}
