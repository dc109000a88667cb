use clap::Parser;
use dlfpca_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = run(cli).and_then(|out| {
        out.write()?;
        print!("{}", out.stdout);
        Ok(())
    });
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
