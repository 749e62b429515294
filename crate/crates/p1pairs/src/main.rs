fn main() {
    // verification failures surface as panics inside the library; map them to
    // exit code 1 rather than an abort, keeping 2 reserved for bad input
    let result = std::panic::catch_unwind(p1pairs::cli::run);
    match result {
        Ok(code) => std::process::exit(code),
        Err(_) => std::process::exit(1),
    }
}
