//! Adaptor architecture selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdaptorKind {
    /// Trainable copy of the backbone encoder fed through skip zero convs.
    ControlNetClone,
    /// Second pass through the frozen encoder blocks, wrapped by small
    /// head/tail/residual convolutions.
    Lilac,
    /// Wrapping layers inserted directly into the backbone's single forward
    /// pass; no separate branch, no skip zero convs.
    LilacInline,
}

/// Which architecture and, for the wrapped kinds, which of the three optional
/// per-block layers are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptorVariant {
    pub kind: AdaptorKind,
    pub head: bool,
    pub tail: bool,
    pub residual: bool,
}

impl AdaptorVariant {
    pub fn controlnet() -> Self {
        AdaptorVariant { kind: AdaptorKind::ControlNetClone, head: false, tail: false, residual: false }
    }

    pub fn lilac(head: bool, tail: bool, residual: bool) -> Result<Self> {
        let v = AdaptorVariant { kind: AdaptorKind::Lilac, head, tail, residual };
        v.validate()?;
        Ok(v)
    }

    pub fn h() -> Self {
        Self::lilac(true, false, false).expect("valid")
    }
    pub fn ht() -> Self {
        Self::lilac(true, true, false).expect("valid")
    }
    pub fn hr() -> Self {
        Self::lilac(true, false, true).expect("valid")
    }
    pub fn htr() -> Self {
        Self::lilac(true, true, true).expect("valid")
    }

    /// The inline variant carries all three layer kinds.
    pub fn lilac_star() -> Self {
        AdaptorVariant { kind: AdaptorKind::LilacInline, head: true, tail: true, residual: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AdaptorKind::Lilac && !self.head {
            return Err(Error::Config("wrapped-block variants require the head layer".into()));
        }
        Ok(())
    }

    /// CLI / report label.
    pub fn label(&self) -> String {
        match self.kind {
            AdaptorKind::ControlNetClone => "controlnet".to_string(),
            AdaptorKind::LilacInline => "lilac-star".to_string(),
            AdaptorKind::Lilac => {
                let mut s = String::new();
                if self.head {
                    s.push('h');
                }
                if self.tail {
                    s.push('t');
                }
                if self.residual {
                    s.push('r');
                }
                s
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "controlnet" => Ok(Self::controlnet()),
            "h" => Ok(Self::h()),
            "ht" => Ok(Self::ht()),
            "hr" => Ok(Self::hr()),
            "htr" => Ok(Self::htr()),
            "lilac-star" => Ok(Self::lilac_star()),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected controlnet|h|ht|hr|htr|lilac-star)"
            ))),
        }
    }

    /// All six evaluated variants in report order.
    pub fn all() -> Vec<Self> {
        vec![Self::controlnet(), Self::h(), Self::ht(), Self::hr(), Self::htr(), Self::lilac_star()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lilac_requires_head() {
        assert!(AdaptorVariant::lilac(false, true, true).is_err());
        assert!(AdaptorVariant::lilac(true, false, false).is_ok());
    }

    #[test]
    fn labels_round_trip() {
        for v in AdaptorVariant::all() {
            let parsed = AdaptorVariant::parse(&v.label()).unwrap();
            assert_eq!(parsed, v);
        }
        assert!(AdaptorVariant::parse("nope").is_err());
    }
}
