use std::collections::BTreeMap;

use crate::CliError;

/// Minimal flag parser: `--name value` pairs and boolean switches, with
/// strict rejection of anything unknown.
pub struct ArgSet {
    values: BTreeMap<String, Vec<String>>,
    switches: Vec<String>,
    order: Vec<String>,
}

impl ArgSet {
    /// Splits raw arguments into flags. `switch_names` lists the flags that
    /// take no value.
    pub fn parse(args: &[String], switch_names: &[&str]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut switches = Vec::new();
        let mut order = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            if !arg.starts_with("--") {
                return Err(CliError::Usage(format!(
                    "unexpected positional argument `{arg}`"
                )));
            }
            order.push(arg.clone());
            if switch_names.contains(&arg.as_str()) {
                switches.push(arg.clone());
                i += 1;
            } else {
                let value = args.get(i + 1).ok_or_else(|| {
                    CliError::Usage(format!("flag `{arg}` requires a value"))
                })?;
                if value.starts_with("--") && !switch_names.contains(&value.as_str()) {
                    // Allow negative numbers but not another flag.
                    if value.parse::<f64>().is_err() {
                        return Err(CliError::Usage(format!(
                            "flag `{arg}` requires a value"
                        )));
                    }
                }
                values.entry(arg.clone()).or_default().push(value.clone());
                i += 2;
            }
        }
        Ok(Self {
            values,
            switches,
            order,
        })
    }

    pub fn require(&mut self, name: &str) -> Result<String, CliError> {
        self.take(name)?
            .ok_or_else(|| CliError::Usage(format!("missing required flag `{name}`")))
    }

    pub fn take(&mut self, name: &str) -> Result<Option<String>, CliError> {
        match self.values.remove(name) {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(Some(v.remove(0))),
            Some(_) => Err(CliError::Usage(format!("flag `{name}` given more than once"))),
        }
    }

    pub fn take_all(&mut self, name: &str) -> Vec<String> {
        self.values.remove(name).unwrap_or_default()
    }

    pub fn switch(&mut self, name: &str) -> bool {
        let had = self.switches.iter().any(|s| s == name);
        self.switches.retain(|s| s != name);
        had
    }

    pub fn parsed<T: std::str::FromStr>(
        &mut self,
        name: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(name)? {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|e| {
                CliError::Usage(format!("invalid value for `{name}`: {e}"))
            }),
        }
    }

    /// Errors on any flag that no command consumed.
    pub fn finish(self) -> Result<(), CliError> {
        if let Some(name) = self.values.keys().next() {
            return Err(CliError::Usage(format!("unknown flag `{name}`")));
        }
        if let Some(name) = self.switches.first() {
            return Err(CliError::Usage(format!("unknown flag `{name}`")));
        }
        let _ = self.order;
        Ok(())
    }
}

/// Resolves the run seed: an explicit `--seed` wins, then the `VEK_SEED`
/// environment variable, then the default of 13.
pub fn resolve_seed(args: &mut ArgSet) -> Result<u64, CliError> {
    if let Some(raw) = args.take("--seed")? {
        return raw
            .parse()
            .map_err(|e| CliError::Usage(format!("invalid value for `--seed`: {e}")));
    }
    if let Ok(raw) = std::env::var("VEK_SEED") {
        return raw
            .parse()
            .map_err(|e| CliError::Usage(format!("invalid VEK_SEED: {e}")));
    }
    Ok(13)
}

/// Parses a threshold list such as `0,10,20` or `0,10,...,100`, where the
/// ellipsis continues the arithmetic progression of the two preceding
/// values up to the closing bound.
pub fn parse_thresholds(raw: &str) -> Result<Vec<u32>, CliError> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let mut out: Vec<u32> = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        if parts[i] == "..." {
            let bound: u32 = parts
                .get(i + 1)
                .ok_or_else(|| {
                    CliError::Usage("`...` in --thresholds needs a closing bound".into())
                })?
                .parse()
                .map_err(|e| CliError::Usage(format!("invalid value for `--thresholds`: {e}")))?;
            if out.len() < 2 {
                return Err(CliError::Usage(
                    "`...` in --thresholds needs two preceding values".into(),
                ));
            }
            let step = out[out.len() - 1] - out[out.len() - 2];
            if step == 0 {
                return Err(CliError::Usage(
                    "`...` in --thresholds needs an increasing prefix".into(),
                ));
            }
            let mut next = out[out.len() - 1] + step;
            while next <= bound {
                out.push(next);
                next += step;
            }
            i += 2;
        } else {
            out.push(parts[i].parse().map_err(|e| {
                CliError::Usage(format!("invalid value for `--thresholds`: {e}"))
            })?);
            i += 1;
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("--thresholds must not be empty".into()));
    }
    Ok(out)
}
