//! Declarative pipeline config: parse, validate, fingerprint.

use hwdecode::pipeline::PipelineConfig;
use hwdecode::Result;

const TOML: &str = r#"
[synth]
n_trials = 80
snr = 0.3

[train]
max_epochs = 50
augmentation = { kind = "random_shift", max_shift_samples = 5 }

[eval]
folds = 4
"#;

fn main() -> Result<()> {
    let cfg = PipelineConfig::from_toml(TOML)?;
    println!("fingerprint {}", cfg.fingerprint());
    println!("{}", cfg.to_toml());

    match PipelineConfig::from_toml("[train]\neppochs = 3\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("unknown keys are errors"),
    }
    Ok(())
}
