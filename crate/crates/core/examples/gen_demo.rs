//! Regenerates data/demo.csv. Run from the workspace root:
//!
//! ```text
//! cargo run -p alphadesk --example gen_demo
//! ```

use alphadesk::synthetic::{demo_csv, SyntheticConfig};
use std::path::Path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SyntheticConfig::default();
    let csv = demo_csv(&config)?;
    let path = Path::new("data/demo.csv");
    std::fs::create_dir_all(path.parent().unwrap())?;
    std::fs::write(path, &csv)?;
    println!(
        "wrote {} ({} rows, seed {})",
        path.display(),
        csv.lines().count() - 1,
        config.seed
    );
    Ok(())
}
