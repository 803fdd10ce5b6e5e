//! Hierarchical names and name manipulation.
//!
//! Names are ordered lists of byte-string components, rendered as
//! `/c1/c2/.../cn`. Component bytes outside printable ASCII (plus `/` and
//! `%` themselves) are percent-encoded in the string form, so rendering
//! round-trips through [`Name::parse`].

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Prefix marking the digest component appended by [`Name::append_digest`].
pub const DIGEST_COMPONENT_PREFIX: &str = "sha256digest=";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NameError {
    #[error("name has no components")]
    EmptyName,
    #[error("invalid percent-encoding in component: {0}")]
    BadEscape(String),
}

/// An ordered, non-empty (when placed in a packet) list of byte-string
/// components.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

impl Name {
    pub fn new(components: Vec<Vec<u8>>) -> Self {
        Name { components }
    }

    /// Builds a name from UTF-8 component strings.
    pub fn from_components<I, S>(parts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Name {
            components: parts
                .into_iter()
                .map(|s| s.as_ref().as_bytes().to_vec())
                .collect(),
        }
    }

    /// Parses a slash-delimited rendering, undoing percent-encoding.
    pub fn parse(s: &str) -> Result<Self, NameError> {
        let trimmed = s.strip_prefix('/').ok_or(NameError::EmptyName)?;
        if trimmed.is_empty() {
            return Err(NameError::EmptyName);
        }
        let mut components = Vec::new();
        for part in trimmed.split('/') {
            components.push(decode_component(part)?);
        }
        Ok(Name { components })
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Slash-delimited string rendering.
    pub fn render(&self) -> Result<String, NameError> {
        if self.components.is_empty() {
            return Err(NameError::EmptyName);
        }
        let mut out = String::new();
        for comp in &self.components {
            out.push('/');
            encode_component(comp, &mut out);
        }
        Ok(out)
    }

    /// True iff every component of `self` equals the corresponding leading
    /// component of `other`.
    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.components.len() <= other.components.len()
            && self
                .components
                .iter()
                .zip(other.components.iter())
                .all(|(a, b)| a == b)
    }

    /// Returns this name with a final `sha256digest=<64 hex chars>`
    /// component over `content`.
    pub fn append_digest(&self, content: &[u8]) -> Name {
        let digest = sha256_hex(content);
        let mut components = self.components.clone();
        components.push(format!("{DIGEST_COMPONENT_PREFIX}{digest}").into_bytes());
        Name { components }
    }

    /// Appends one UTF-8 component.
    pub fn child(&self, component: &str) -> Name {
        let mut components = self.components.clone();
        components.push(component.as_bytes().to_vec());
        Name { components }
    }

    /// True when the final component is a digest component.
    pub fn has_digest(&self) -> bool {
        self.digest_hex().is_some()
    }

    /// The hex digest carried in a trailing digest component, if any.
    pub fn digest_hex(&self) -> Option<&str> {
        let last = self.components.last()?;
        let s = std::str::from_utf8(last).ok()?;
        s.strip_prefix(DIGEST_COMPONENT_PREFIX)
    }

    /// The name without a trailing digest component (identity if absent).
    pub fn strip_digest(&self) -> Name {
        if self.has_digest() {
            Name {
                components: self.components[..self.components.len() - 1].to_vec(),
            }
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render() {
            Ok(s) => f.write_str(&s),
            Err(_) => f.write_str("/"),
        }
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Lowercase hex SHA-256 of `content`.
pub fn sha256_hex(content: &[u8]) -> String {
    let digest = Sha256::digest(content);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Raw SHA-256 of `content`.
pub fn sha256_bytes(content: &[u8]) -> [u8; 32] {
    Sha256::digest(content).into()
}

fn is_plain(b: u8) -> bool {
    // printable ASCII minus the two characters with structural meaning
    (0x20..=0x7e).contains(&b) && b != b'/' && b != b'%'
}

fn encode_component(comp: &[u8], out: &mut String) {
    for &b in comp {
        if is_plain(b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
}

fn decode_component(part: &str) -> Result<Vec<u8>, NameError> {
    let bytes = part.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if i + 3 > bytes.len() {
                return Err(NameError::BadEscape(part.to_string()));
            }
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3])
                .map_err(|_| NameError::BadEscape(part.to_string()))?;
            let v = u8::from_str_radix(hex, 16)
                .map_err(|_| NameError::BadEscape(part.to_string()))?;
            out.push(v);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_joins_components() {
        let n = Name::from_components(["NTORRENT", "demo", "torrent-file", "seg=0"]);
        assert_eq!(n.render().unwrap(), "/NTORRENT/demo/torrent-file/seg=0");
    }

    #[test]
    fn render_single_component() {
        assert_eq!(Name::from_components(["a"]).render().unwrap(), "/a");
    }

    #[test]
    fn render_empty_name_is_error() {
        let n = Name::new(vec![]);
        assert_eq!(n.render(), Err(NameError::EmptyName));
    }

    #[test]
    fn parse_round_trips_non_ascii() {
        let n = Name::new(vec![vec![0x00, 0xff, b'/', b'%', b'a']]);
        let rendered = n.render().unwrap();
        assert_eq!(Name::parse(&rendered).unwrap(), n);
    }

    #[test]
    fn prefix_matching() {
        let p = Name::parse("/NTORRENT/demo").unwrap();
        let n = Name::parse("/NTORRENT/demo/file0/data/pkt=3").unwrap();
        let other = Name::parse("/NTORRENT/other").unwrap();
        assert!(p.is_prefix_of(&n));
        assert!(!p.is_prefix_of(&other));
        assert!(n.is_prefix_of(&n));
    }

    #[test]
    fn append_digest_of_empty_content() {
        let n = Name::from_components(["x"]).append_digest(b"");
        assert_eq!(
            n.render().unwrap(),
            "/x/sha256digest=e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn append_digest_matches_external_sha256() {
        // frozen from an independent SHA-256 implementation (python hashlib)
        let n = Name::from_components(["x"]).append_digest(&[b'A'; 64]);
        assert_eq!(
            n.digest_hex().unwrap(),
            "d53eda7a637c99cc7fb566d96e9fa109bf15c478410a3f5eb4d4c4e26cd081f6"
        );
    }

    #[test]
    fn double_digest_strips_one_layer() {
        let base = Name::from_components(["x"]);
        let once = base.append_digest(b"c");
        let twice = once.append_digest(b"c");
        assert_eq!(twice.len(), 3);
        assert_eq!(twice.strip_digest(), once);
        assert_eq!(once.strip_digest(), base);
    }
}
