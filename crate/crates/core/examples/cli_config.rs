//! Runs the command-line pipeline from an in-memory configuration and prints
//! the files it writes.

use levy_lattice::cli::{execute, Command, RunConfig};
use levy_lattice::Result;

const CONFIG: &str = r#"
version = 1
h = [0.5, 0.25, 0.125]
t = 1.0
[model]
family = "variance_gamma"
scale = 1.0
[density]
window = [-2.0, 2.0]
"#;

fn main() -> Result<()> {
    let cfg = RunConfig::parse(CONFIG, std::path::Path::new("."))?;
    let out = std::env::temp_dir().join("levy-lattice-example");
    for command in [Command::Density, Command::Psi] {
        let outcome = execute(command, &cfg, CONFIG, &out)?;
        for line in &outcome.lines {
            println!("{line}");
        }
        for file in &outcome.files {
            println!("  wrote {}", file.display());
        }
    }
    Ok(())
}
