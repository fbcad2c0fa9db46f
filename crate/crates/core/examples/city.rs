//! Writes the synthetic city shifts as instance files.
//!
//! ```text
//! cargo run --example city -- data/ 7
//! ```

use std::path::PathBuf;

use microroute::save_instance;
use microroute::synthetic::{city_shift, Shift, Site};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "city".into()));
    let seed: u64 = args
        .next()
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(1);
    std::fs::create_dir_all(&dir)?;
    for (site, tag) in [
        (Site::Current, "cs"),
        (Site::StationAtDepot, "ts1"),
        (Site::StationIndustrial, "ts2"),
    ] {
        for (shift, name) in [(Shift::Day, "day"), (Shift::Night, "night")] {
            let path = dir.join(format!("{tag}-{name}.json"));
            std::fs::write(&path, save_instance(&city_shift(shift, site, seed)))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
