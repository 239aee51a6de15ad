//! `--config FILE`: `key=value` lines turned into flags placed right after
//! the subcommand, so that anything on the real command line wins.

use std::ffi::OsString;
use std::path::Path;

use crate::Failure;

/// Flags that take no value; `key=true` enables them, `key=false` drops them.
const SWITCHES: &[&str] = &[
    "standardize",
    "calibrate",
    "calibrated",
    "greedy",
    "refine",
    "cross",
    "refinement",
    "runtime",
];

fn config_path(argv: &[OsString]) -> Result<Option<OsString>, Failure> {
    let mut iter = argv.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return match iter.next() {
                Some(v) => Ok(Some(v.clone())),
                None => Err(Failure::Usage("--config needs a file".into())),
            };
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Ok(Some(v.into()));
        }
    }
    Ok(None)
}

/// Parses `key=value` lines into flag tokens.
pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<OsString>, Failure> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "{}:{}: expected key=value, got {line:?}",
                origin.display(),
                i + 1
            )));
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key == "config" {
            return Err(Failure::Usage(format!(
                "{}:{}: config files cannot include other config files",
                origin.display(),
                i + 1
            )));
        }
        if SWITCHES.contains(&key) {
            match value {
                "true" | "1" | "yes" => out.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => {
                    return Err(Failure::Usage(format!(
                        "{}:{}: {key} expects true or false",
                        origin.display(),
                        i + 1
                    )))
                }
            }
        } else {
            out.push(format!("--{key}={value}").into());
        }
    }
    Ok(out)
}

/// Inserts the config file's flags after the subcommand name.
pub fn merge_config_file(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    let extra = parse_config(&text, path)?;
    // first token that is not a flag or a flag value: the subcommand
    let mut at = None;
    let mut skip_value = false;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if skip_value {
            skip_value = false;
            continue;
        }
        if s.starts_with('-') {
            skip_value = !s.contains('=') && matches!(&*s, "--config" | "--seed" | "--threads");
            continue;
        }
        at = Some(i + 1);
        break;
    }
    let Some(at) = at else {
        return Ok(argv);
    };
    let mut merged = argv[..at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[at..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn lines_become_flags() {
        let got = parse_config("# defaults\nN = 20\npsi-min=10  # small\ngreedy=true\nrefine=false\n", Path::new("c"))
            .unwrap();
        assert_eq!(got, os(&["--N=20", "--psi-min=10", "--greedy"]));
    }

    #[test]
    fn malformed_lines_are_usage_errors() {
        assert!(matches!(parse_config("N 20", Path::new("c")), Err(Failure::Usage(_))));
        assert!(matches!(parse_config("greedy=maybe", Path::new("c")), Err(Failure::Usage(_))));
    }

    #[test]
    fn config_flags_go_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "N=7\n").unwrap();
        let p = path.to_str().unwrap();
        let argv = merge_config_file(os(&["aida", "--seed", "3", "--config", p, "fit", "--N", "9"])).unwrap();
        assert_eq!(argv, os(&["aida", "--seed", "3", "--config", p, "fit", "--N=7", "--N", "9"]));
    }
}
