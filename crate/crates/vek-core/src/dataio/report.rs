use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{DataError, Result};

/// Writes a result document as a single pretty-printed JSON file with
/// sorted keys and a trailing newline. Identical in-memory reports always
/// produce identical bytes.
pub fn write_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(report).map_err(|e| DataError::Schema {
        path: path.display().to_string(),
        line: 0,
        field: "<serialize>".into(),
        message: e.to_string(),
    })?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| DataError::Schema {
        path: path.display().to_string(),
        line: 0,
        field: "<serialize>".into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a report document back as a JSON value.
pub fn read_report(path: impl AsRef<Path>) -> Result<Value> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DataError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("vek-report-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn write_then_read_is_structurally_equal() {
        let report = json!({
            "tool_version": "0.1.0",
            "seed": 13,
            "config": {"d": 2, "mode": "puc"},
            "results": {"c_estimate": 0.5021, "prior": 0.498}
        });
        let path = tmp("report.json");
        write_report(&report, &path).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
    }

    #[test]
    fn same_report_twice_is_byte_identical() {
        let report = json!({"zeta": 1, "alpha": [1.5, 2.25], "mid": {"b": 2, "a": 1}});
        let p1 = tmp("det1.json");
        let p2 = tmp("det2.json");
        write_report(&report, &p1).unwrap();
        write_report(&report, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        // Keys come out sorted.
        let text = fs::read_to_string(&p1).unwrap();
        let alpha = text.find("alpha").unwrap();
        let mid = text.find("mid").unwrap();
        let zeta = text.find("zeta").unwrap();
        assert!(alpha < mid && mid < zeta);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let report = json!({"x": 1});
        let path = std::path::Path::new("/nonexistent-dir-vek/report.json");
        assert!(matches!(
            write_report(&report, path),
            Err(DataError::Io { .. })
        ));
    }
}
