//! Analytic gradients against central finite differences.

use hwdecode::reproduce;
use hwdecode::Result;

fn main() -> Result<()> {
    let o = reproduce::gradient_check(0)?;
    println!("{}", o.line());
    Ok(())
}
