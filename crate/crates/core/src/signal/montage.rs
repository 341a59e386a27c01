use serde::{Deserialize, Serialize};

use super::{Recording, SignalError};

/// BioSemi 32-electrode layout.
pub const BIOSEMI32: [&str; 32] = [
    "Fp1", "AF3", "F7", "F3", "FC1", "FC5", "T7", "C3", "CP1", "CP5", "P7", "P3", "Pz", "PO3", "O1", "Oz", "O2",
    "PO4", "P4", "P8", "CP6", "CP2", "C4", "T8", "FC6", "FC2", "F4", "F8", "AF4", "Fp2", "Fz", "Cz",
];

/// The ordered channel set the network expects, and which of those may be
/// replaced by a flat zero trace when a recording lacks them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MontageSpec {
    pub name: String,
    pub canonical_labels: Vec<String>,
    #[serde(default)]
    pub zero_fill_labels: Vec<String>,
}

impl MontageSpec {
    pub const CHANNELS: usize = 32;

    pub fn new(
        name: impl Into<String>,
        canonical_labels: Vec<String>,
        zero_fill_labels: Vec<String>,
    ) -> Result<Self, SignalError> {
        let m = MontageSpec {
            name: name.into(),
            canonical_labels,
            zero_fill_labels,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.canonical_labels.len() != Self::CHANNELS {
            return Err(SignalError::Montage(format!(
                "montage `{}` has {} channels, expected {}",
                self.name,
                self.canonical_labels.len(),
                Self::CHANNELS
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.canonical_labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(SignalError::Montage(format!("montage `{}` repeats `{dup}`", self.name)));
        }
        if let Some(extra) = self.zero_fill_labels.iter().find(|l| !self.canonical_labels.contains(l)) {
            return Err(SignalError::Montage(format!(
                "zero-fill label `{extra}` is not part of montage `{}`",
                self.name
            )));
        }
        Ok(())
    }

    /// BioSemi 32 with Pz allowed to be missing.
    pub fn biosemi32() -> Self {
        MontageSpec {
            name: "biosemi32".into(),
            canonical_labels: BIOSEMI32.iter().map(|s| s.to_string()).collect(),
            zero_fill_labels: vec!["Pz".into()],
        }
    }

    /// BioSemi 32 with every channel required.
    pub fn biosemi32_strict() -> Self {
        MontageSpec {
            name: "biosemi32-strict".into(),
            zero_fill_labels: Vec::new(),
            ..Self::biosemi32()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "biosemi32" => Some(Self::biosemi32()),
            "biosemi32-strict" => Some(Self::biosemi32_strict()),
            _ => None,
        }
    }

    pub fn is_fillable(&self, label: &str) -> bool {
        self.zero_fill_labels.iter().any(|l| l == label)
    }
}

/// Keep the canonical channels in canonical order and drop the rest.
///
/// Absent zero-fillable channels are left out and recorded in `zero_filled`;
/// [`zero_fill_missing`] inserts their rows.
pub fn select_channels(rec: &Recording, montage: &MontageSpec) -> Result<Recording, SignalError> {
    montage.validate()?;
    let missing: Vec<String> = montage
        .canonical_labels
        .iter()
        .filter(|l| rec.channel(l).is_none() && !montage.is_fillable(l))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(SignalError::MissingChannels {
            subject: rec.subject_id.clone(),
            labels: missing,
        });
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    let mut pending = rec.zero_filled.clone();
    for l in &montage.canonical_labels {
        match rec.channel(l) {
            Some(row) => {
                labels.push(l.clone());
                rows.push(row.to_vec());
            }
            None if !pending.contains(l) => pending.push(l.clone()),
            None => {}
        }
    }
    let mut out = rec.with_samples(rec.fs_hz, rows);
    out.channel_labels = labels;
    out.zero_filled = pending;
    Ok(out)
}

/// Insert exact-zero rows for every canonical channel the recording lacks.
///
/// The output has exactly the montage's channels, in canonical order.
pub fn zero_fill_missing(rec: &Recording, montage: &MontageSpec) -> Result<Recording, SignalError> {
    montage.validate()?;
    let n = rec.n_samples();
    let mut rows = Vec::with_capacity(montage.canonical_labels.len());
    let mut filled = Vec::new();
    let mut not_fillable = Vec::new();
    for l in &montage.canonical_labels {
        match rec.channel(l) {
            Some(row) => rows.push(row.to_vec()),
            None if montage.is_fillable(l) => {
                rows.push(vec![0.0; n]);
                filled.push(l.clone());
            }
            None => not_fillable.push(l.clone()),
        }
    }
    if !not_fillable.is_empty() {
        return Err(SignalError::MissingChannels {
            subject: rec.subject_id.clone(),
            labels: not_fillable,
        });
    }
    let mut out = rec.with_samples(rec.fs_hz, rows);
    out.channel_labels = montage.canonical_labels.clone();
    // rows that were already zero-filled upstream stay listed
    for l in &rec.zero_filled {
        if !filled.contains(l) {
            filled.push(l.clone());
        }
    }
    filled.sort_by_key(|l| montage.canonical_labels.iter().position(|c| c == l));
    out.zero_filled = filled;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Diagnosis, Medication};

    fn rec(labels: &[&str], n: usize) -> Recording {
        Recording::new(
            "s1",
            Diagnosis::Healthy,
            Medication::NotApplicable,
            256.0,
            labels.iter().map(|s| s.to_string()).collect(),
            labels.iter().enumerate().map(|(i, _)| vec![i as f64 + 1.0; n]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn sixty_four_channels_reduce_to_canonical_order() {
        let m = MontageSpec::biosemi32();
        let mut labels: Vec<String> = (0..32).map(|i| format!("X{i}")).collect();
        // canonical labels interleaved in reverse order with extras
        for l in BIOSEMI32.iter().rev() {
            labels.push(l.to_string());
        }
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let r = rec(&refs, 10);
        let out = zero_fill_missing(&select_channels(&r, &m).unwrap(), &m).unwrap();
        assert_eq!(out.channel_labels, m.canonical_labels);
        assert!(out.zero_filled.is_empty());
        // Fp1 was the last input row
        assert_eq!(out.samples[0][0], 64.0);
    }

    #[test]
    fn canonical_input_is_identity() {
        let m = MontageSpec::biosemi32();
        let r = rec(&BIOSEMI32, 5);
        let out = zero_fill_missing(&select_channels(&r, &m).unwrap(), &m).unwrap();
        assert_eq!(out, r);
    }

    #[test]
    fn missing_required_channel_is_named() {
        let m = MontageSpec::biosemi32();
        let labels: Vec<&str> = BIOSEMI32.iter().copied().filter(|l| *l != "Cz" && *l != "O1").collect();
        let err = select_channels(&rec(&labels, 4), &m).unwrap_err();
        match err {
            SignalError::MissingChannels { labels, .. } => assert_eq!(labels, vec!["O1", "Cz"]),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn missing_pz_is_zero_filled_in_place() {
        let m = MontageSpec::biosemi32();
        let labels: Vec<&str> = BIOSEMI32.iter().copied().filter(|l| *l != "Pz").collect();
        let sel = select_channels(&rec(&labels, 8), &m).unwrap();
        assert_eq!(sel.n_channels(), 31);
        assert_eq!(sel.zero_filled, vec!["Pz"]);
        let out = zero_fill_missing(&sel, &m).unwrap();
        assert_eq!(out.channel_labels, m.canonical_labels);
        let pz = out.channel_labels.iter().position(|l| l == "Pz").unwrap();
        assert!(out.samples[pz].iter().all(|&v| v == 0.0));
        assert_eq!(out.zero_filled, vec!["Pz"]);
    }

    #[test]
    fn two_fillable_channels_both_zeroed() {
        let m = MontageSpec::new(
            "custom",
            BIOSEMI32.iter().map(|s| s.to_string()).collect(),
            vec!["Pz".into(), "Oz".into()],
        )
        .unwrap();
        let labels: Vec<&str> = BIOSEMI32.iter().copied().filter(|l| *l != "Pz" && *l != "Oz").collect();
        let out = zero_fill_missing(&rec(&labels, 3), &m).unwrap();
        for l in ["Pz", "Oz"] {
            assert!(out.channel(l).unwrap().iter().all(|&v| v == 0.0));
        }
        assert_eq!(out.zero_filled, vec!["Pz", "Oz"]);
    }

    #[test]
    fn montage_validation() {
        assert!(MontageSpec::new("short", vec!["A".into()], vec![]).is_err());
        let labels: Vec<String> = BIOSEMI32.iter().map(|s| s.to_string()).collect();
        assert!(MontageSpec::new("bad-fill", labels, vec!["Q9".into()]).is_err());
    }
}
