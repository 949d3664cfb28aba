use clap::Parser;

fn main() {
    let args = match plcbench::config::Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = plcbench::run(args) {
        eprintln!("plcbench: {e}");
        std::process::exit(e.exit_code());
    }
}
