fn main() -> std::process::ExitCode {
    qhweak::cli::main_entry()
}
