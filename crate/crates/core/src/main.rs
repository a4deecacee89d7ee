use nhwork::cli;

fn main() {
    let code = match cli::parse(std::env::args_os()) {
        Ok(args) => cli::execute(&args),
        Err((text, code)) => {
            if code == 0 {
                print!("{text}");
            } else {
                eprint!("{text}");
            }
            code
        }
    };
    std::process::exit(code);
}
