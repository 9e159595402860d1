//! Writes the demo inputs to a directory (default `demo/`).

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, text) in riskstab::demo::files()? {
        std::fs::write(dir.join(&name), text)?;
        println!("{}", dir.join(&name).display());
    }
    Ok(())
}
