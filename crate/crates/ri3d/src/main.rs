use clap::Parser;

fn main() {
    let cli = ri3d::Cli::parse();
    match ri3d::run(&cli) {
        Ok(stdout) => {
            print!("{stdout}");
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(ri3d::exit_code(&err));
        }
    }
}
