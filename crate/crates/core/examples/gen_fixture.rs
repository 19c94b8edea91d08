//! Regenerates the bundled synthetic tables:
//! `cargo run -p aspire-core --example gen_fixture -- fixtures/synthetic`

use std::path::PathBuf;

use aspire_core::synthetic::{write_fixture, SyntheticSpec};

fn main() -> aspire_core::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "fixtures/synthetic".into());
    for p in write_fixture(&dir, &SyntheticSpec::default())? {
        println!("{}", p.display());
    }
    Ok(())
}
