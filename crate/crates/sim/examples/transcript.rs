use compshare_sim::{run_scenario, scenarios};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    let script = match which.as_str() {
        "disconnect" => scenarios::disconnect_during_install(),
        "document" => {
            println!("{}", scenarios::peter_john().to_document());
            return;
        }
        _ => scenarios::peter_john(),
    };
    match run_scenario(&script) {
        Ok(o) => print!("{}", o.transcript_text()),
        Err(e) => eprintln!("{e}"),
    }
}
