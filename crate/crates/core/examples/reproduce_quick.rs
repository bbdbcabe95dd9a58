//! The end-to-end checks on the small profile. Decoding numbers here are
//! not expected to pass; use `hwdecode reproduce` for the full profile.

use hwdecode::reproduce::{self, Profile};
use hwdecode::Result;

fn main() -> Result<()> {
    let outcomes = reproduce::run_all(0, Profile::Quick)?;
    print!("{}", reproduce::to_table(&outcomes));
    Ok(())
}
