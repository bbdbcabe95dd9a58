use std::collections::HashSet;

use crate::error::{Error, Result};

/// Electrode names and schematic 2-D head positions.
///
/// Coordinates are on a unit head circle (nose at +y, right ear at +x) and
/// are schematic only. Nothing downstream of the montage reads them; the
/// decoding code works purely on channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    positions: Vec<(String, [f64; 2])>,
    reference: String,
}

/// 32 channels, dense over the central midline strip, Cz reference.
const STANDARD_32: [(&str, [f64; 2]); 32] = [
    ("Fp1", [-0.31, 0.95]),
    ("Fp2", [0.31, 0.95]),
    ("F3", [-0.40, 0.55]),
    ("Fz", [0.0, 0.50]),
    ("F4", [0.40, 0.55]),
    ("FC5", [-0.70, 0.30]),
    ("FC3", [-0.45, 0.27]),
    ("FC1", [-0.22, 0.25]),
    ("FCz", [0.0, 0.25]),
    ("FC2", [0.22, 0.25]),
    ("FC4", [0.45, 0.27]),
    ("FC6", [0.70, 0.30]),
    ("C5", [-0.70, 0.0]),
    ("C3", [-0.47, 0.0]),
    ("C1", [-0.23, 0.0]),
    ("C2", [0.23, 0.0]),
    ("C4", [0.47, 0.0]),
    ("C6", [0.70, 0.0]),
    ("CP5", [-0.70, -0.30]),
    ("CP3", [-0.45, -0.27]),
    ("CP1", [-0.22, -0.25]),
    ("CPz", [0.0, -0.25]),
    ("CP2", [0.22, -0.25]),
    ("CP4", [0.45, -0.27]),
    ("CP6", [0.70, -0.30]),
    ("P7", [-0.81, -0.59]),
    ("P3", [-0.40, -0.55]),
    ("Pz", [0.0, -0.50]),
    ("P4", [0.40, -0.55]),
    ("P8", [0.81, -0.59]),
    ("T8", [0.95, 0.0]),
    ("TP10", [0.98, -0.32]),
];

impl Montage {
    pub fn new(positions: Vec<(String, [f64; 2])>, reference: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (name, _) in &positions {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate channel `{name}` in montage")));
            }
        }
        Ok(Montage { positions, reference: reference.into() })
    }

    /// The 32-channel midline-dense montage referenced to Cz.
    pub fn standard_32() -> Self {
        Montage {
            positions: STANDARD_32.iter().map(|(n, p)| (n.to_string(), *p)).collect(),
            reference: "Cz".into(),
        }
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.positions.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<[f64; 2]> {
        self.positions.iter().find(|(n, _)| n == name).map(|(_, p)| *p)
    }

    pub fn positions(&self) -> &[(String, [f64; 2])] {
        &self.positions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_has_32_unique_channels_and_probe_members() {
        let m = Montage::standard_32();
        assert_eq!(m.len(), 32);
        assert_eq!(m.reference(), "Cz");
        let names = m.names();
        let unique: HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 32);
        for ch in ["Fp1", "Fp2", "T8", "TP10", "P8"] {
            assert!(names.iter().any(|n| n == ch), "{ch} missing");
        }
        assert!(m.position("Cz").is_none());
    }

    #[test]
    fn midline_is_denser_than_periphery() {
        let m = Montage::standard_32();
        let central = m.positions().iter().filter(|(_, p)| p[0].abs() < 0.5 && p[1].abs() < 0.35).count();
        let posterior = m.positions().iter().filter(|(_, p)| p[1] < -0.4).count();
        assert!(central > 2 * posterior);
    }

    #[test]
    fn duplicate_names_rejected() {
        let pos = vec![("A".to_string(), [0.0, 0.0]), ("A".to_string(), [1.0, 0.0])];
        assert!(Montage::new(pos, "Cz").is_err());
    }
}
