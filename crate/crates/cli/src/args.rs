//! Parsing of composite flag values.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use lipleak::setups::SilenceKind;
use lipleak::ArDetail;

/// Splits `name=value` at the first `=`.
pub fn name_value(text: &str) -> Result<(String, String)> {
    let (name, value) = text.split_once('=').ok_or_else(|| anyhow!("expected name=value, got {text:?}"))?;
    let name = name.trim();
    if name.is_empty() {
        bail!("empty name in {text:?}");
    }
    Ok((name.to_string(), value.to_string()))
}

pub fn name_values(items: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) = name_value(item)?;
        if out.insert(k.clone(), v).is_some() {
            bail!("{k:?} given twice");
        }
    }
    Ok(out)
}

/// Accepts `first_frame`, `multi_frame:3`, … with or without an `AR:` prefix.
pub fn ar_detail(text: &str) -> Result<ArDetail> {
    let text = text.strip_prefix("AR:").unwrap_or(text);
    let detail: ArDetail = text.parse().map_err(|e: String| anyhow!(e))?;
    if !detail.is_valid() {
        bail!("invalid alternative reference {text:?}");
    }
    Ok(detail)
}

/// `zero`, `noise:AMPLITUDE` or `noise:AMPLITUDE:SEED`.
pub fn silence(text: &str) -> Result<SilenceKind> {
    let mut parts = text.split(':');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("zero"), None, None, None) => Ok(SilenceKind::Zero),
        (Some("noise"), Some(amp), seed, None) => Ok(SilenceKind::NoiseFloor {
            amplitude: amp.parse().map_err(|_| anyhow!("bad noise amplitude {amp:?}"))?,
            seed: seed.map_or(Ok(0), str::parse).map_err(|_| anyhow!("bad noise seed in {text:?}"))?,
        }),
        _ => bail!("silence must be zero or noise:AMPLITUDE[:SEED], got {text:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses() {
        assert_eq!(name_value("m=gen {output_dir} --x=1").unwrap(), ("m".into(), "gen {output_dir} --x=1".into()));
        assert!(name_value("nothing").is_err());
        assert!(name_values(&["a=1".into(), "a=2".into()]).is_err());
        assert_eq!(ar_detail("AR:multi_frame:3").unwrap(), ArDetail::MultiFrame(3));
        assert_eq!(ar_detail("first_frame").unwrap(), ArDetail::FirstFrame);
        assert!(ar_detail("multi_frame:1").is_err());
        assert_eq!(silence("zero").unwrap(), SilenceKind::Zero);
        assert_eq!(silence("noise:4:9").unwrap(), SilenceKind::NoiseFloor { amplitude: 4, seed: 9 });
        assert!(silence("loud").is_err());
    }
}
