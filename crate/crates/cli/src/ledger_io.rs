//! Ledger file format: a JSON array of entries, each carrying a checksum
//! of its own canonical serialization so corruption is caught at load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracemark_core::{Ledger, LedgerEntry};

use crate::error::{CliError, CliResult};

#[derive(Serialize, Deserialize)]
struct LedgerRecord {
    #[serde(flatten)]
    entry: LedgerEntry,
    checksum: String,
}

fn entry_checksum(entry: &LedgerEntry) -> String {
    let canonical = serde_json::to_string(entry).expect("ledger entries serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    hex_encode(&digest)
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_ledger(ledger: &Ledger, path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
    }
    let records: Vec<LedgerRecord> = ledger
        .entries()
        .iter()
        .map(|entry| LedgerRecord {
            checksum: entry_checksum(entry),
            entry: entry.clone(),
        })
        .collect();
    let json = serde_json::to_string_pretty(&records).map_err(anyhow::Error::from)?;
    fs::write(path, json).map_err(anyhow::Error::from)?;
    Ok(())
}

pub fn load_ledger(path: &Path) -> CliResult<Ledger> {
    let data = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read ledger {}: {e}", path.display())))?;
    let records: Vec<LedgerRecord> = serde_json::from_str(&data)
        .map_err(|e| CliError::Input(format!("corrupt ledger {}: {e}", path.display())))?;
    let mut entries = Vec::with_capacity(records.len());
    for (i, record) in records.into_iter().enumerate() {
        let expected = entry_checksum(&record.entry);
        if expected != record.checksum {
            return Err(CliError::Input(format!(
                "ledger entry {i} fails its checksum (user {})",
                record.entry.user_id
            )));
        }
        entries.push(record.entry);
    }
    Ok(Ledger::from_entries(entries)?)
}

/// Appends one entry: loads the ledger (or starts fresh), refuses
/// duplicate user ids, writes back. Order is append-only and stable.
pub fn record_release(path: &Path, entry: LedgerEntry) -> CliResult<Ledger> {
    let mut ledger = if path.exists() {
        load_ledger(path)?
    } else {
        Ledger::new()
    };
    ledger.push(entry)?;
    save_ledger(&ledger, path)?;
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tracemark_core::tokens::{ActivationTokenSet, TokenKind};
    use tracemark_core::watermark::{DwtKey, WatermarkScheme};
    use tracemark_core::{InjectionReport, Seed};

    fn entry(user_id: u64, tokens: &[&str]) -> LedgerEntry {
        LedgerEntry {
            user_id,
            token_set: ActivationTokenSet::new(
                tokens.iter().map(|t| t.to_string()).collect(),
                TokenKind::Combination,
            )
            .unwrap(),
            scheme: WatermarkScheme::Dwt(DwtKey::new(Seed::new(user_id), 0.0, 10.0 / 255.0)),
            created: Some("2026-08-10T00:00:00Z".into()),
            report: InjectionReport::new(vec![2, 5], 10),
        }
    }

    #[test]
    fn round_trips_entries_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.json");
        record_release(&path, entry(1, &["angel", "church"])).unwrap();
        let ledger = record_release(&path, entry(2, &["tavern"])).unwrap();
        assert_eq!(ledger.len(), 2);

        let loaded = load_ledger(&path).unwrap();
        assert_eq!(loaded, ledger);
        assert_eq!(loaded.entries()[0].user_id, 1);
        assert_eq!(loaded.entries()[1].user_id, 2);
    }

    #[test]
    fn duplicate_user_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.json");
        record_release(&path, entry(7, &["angel"])).unwrap();
        let err = record_release(&path, entry(7, &["church"])).unwrap_err();
        assert_eq!(err.exit_code(), 5);
        assert_eq!(load_ledger(&path).unwrap().len(), 1);
    }

    #[test]
    fn tampering_breaks_the_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.json");
        record_release(&path, entry(1, &["angel"])).unwrap();
        let tampered = fs::read_to_string(&path)
            .unwrap()
            .replace("\"angel\"", "\"devil\"");
        fs::write(&path, tampered).unwrap();
        let err = load_ledger(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("checksum"));
    }

    #[test]
    fn ledger_wire_format_matches_documented_shape() {
        let json = serde_json::to_value(&LedgerRecord {
            checksum: entry_checksum(&entry(7, &["angel", "church"])),
            entry: entry(7, &["angel", "church"]),
        })
        .unwrap();
        assert_eq!(json["user_id"], 7);
        assert_eq!(json["tokens"][0], "angel");
        assert_eq!(json["scheme"]["kind"], "dwt");
        assert_eq!(json["scheme"]["amp"][1], 10.0 / 255.0);
        assert_eq!(json["report"]["M"], 2);
        assert_eq!(json["report"]["N"], 10);
    }
}
