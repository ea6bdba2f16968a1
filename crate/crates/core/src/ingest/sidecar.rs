use std::collections::BTreeMap;

use super::IngestError;

/// Parse a metadata sidecar of `key: value` (or `key = value`) lines.
/// Values are kept as opaque strings; `#` starts a comment line.
pub fn parse_sidecar(bytes: &[u8]) -> Result<BTreeMap<String, String>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let split = match (line.find(':'), line.find('=')) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => {
                return Err(IngestError::MalformedHeader {
                    line: idx + 1,
                    reason: "expected `key: value`".into(),
                })
            }
        };
        let key = line[..split].trim();
        if key.is_empty() {
            return Err(IngestError::MalformedHeader {
                line: idx + 1,
                reason: "empty key".into(),
            });
        }
        out.insert(key.to_string(), line[split + 1..].trim().to_string());
    }
    Ok(out)
}

/// Look up one trial's row in a BDSinfo-style table (first line holds the
/// column names, cells separated by tabs or commas).
///
/// The row is matched on the column named `Trial` or `id` when present,
/// otherwise on the first column. Returns `None` when no row matches.
pub fn parse_info_table(bytes: &[u8], trial_id: &str) -> Result<Option<BTreeMap<String, String>>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(None);
    };
    let delim = if header.contains('\t') { '\t' } else { ',' };
    let names: Vec<&str> = header.split(delim).map(str::trim).collect();
    let key_col = names
        .iter()
        .position(|n| n.eq_ignore_ascii_case("trial") || n.eq_ignore_ascii_case("id"))
        .unwrap_or(0);

    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(delim).map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(IngestError::RowArity {
                line: idx + 1,
                found: cells.len(),
                expected: names.len(),
            });
        }
        if cells[key_col] == trial_id {
            return Ok(Some(
                names
                    .iter()
                    .zip(cells)
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
            ));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_lines() {
        let m = parse_sidecar(b"# subject info\nAge: 33\nVision = Closed\nSurface: Foam: soft\n").unwrap();
        assert_eq!(m["Age"], "33");
        assert_eq!(m["Vision"], "Closed");
        assert_eq!(m["Surface"], "Foam: soft");
    }

    #[test]
    fn line_without_separator() {
        assert!(matches!(
            parse_sidecar(b"Age 33\n"),
            Err(IngestError::MalformedHeader { line: 1, .. })
        ));
    }

    #[test]
    fn table_lookup() {
        let table = b"Trial\tSubject\tVision\tSurface\tAge\nBDS00001\t1\tOpen\tFirm\t33\nBDS00002\t1\tClosed\tFirm\t33\n";
        let row = parse_info_table(table, "BDS00002").unwrap().unwrap();
        assert_eq!(row["Vision"], "Closed");
        assert_eq!(parse_info_table(table, "BDS09999").unwrap(), None);
    }

    #[test]
    fn table_ragged_row() {
        let table = b"id,age\nx,1,2\n";
        assert!(matches!(
            parse_info_table(table, "x"),
            Err(IngestError::RowArity { line: 2, .. })
        ));
    }
}
