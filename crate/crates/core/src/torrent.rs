//! The hierarchical torrent data model: torrent-file segments, file
//! manifests and data packets, with next-pointers and catalogs.
//!
//! Naming grammar:
//!   `/NTORRENT/<torrent>/torrent-file/seg=<k>`      torrent-file segment
//!   `/NTORRENT/<torrent>/file<i>/manifest/seg=<m>`  file manifest
//!   `/NTORRENT/<torrent>/file<i>/data/pkt=<p>`      data packet
//!
//! Catalog entries and next-pointers carry full names with a trailing
//! digest component over the referenced object's encoded content, so
//! objects are built back to front (a pointer's digest depends on the
//! pointee's bytes).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::name::Name;
use crate::packet::Data;

pub const NAME_ROOT: &str = "NTORRENT";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TorrentError {
    #[error("invalid torrent parameters: {0}")]
    InvalidParams(String),
    #[error("malformed object encoding: {0}")]
    DecodeError(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorrentParams {
    pub torrent_name: String,
    pub file_count: u32,
    pub file_size_bytes: u32,
    pub packet_size_bytes: u32,
    pub names_per_manifest: u32,
    pub names_per_segment: u32,
}

impl Default for TorrentParams {
    /// The desk-scale default: a 1 KB torrent split across 2 files.
    fn default() -> Self {
        TorrentParams {
            torrent_name: "demo".to_string(),
            file_count: 2,
            file_size_bytes: 512,
            packet_size_bytes: 64,
            names_per_manifest: 4,
            names_per_segment: 2,
        }
    }
}

impl TorrentParams {
    pub fn validate(&self) -> Result<(), TorrentError> {
        if self.torrent_name.is_empty() {
            return Err(TorrentError::InvalidParams("empty torrent name".into()));
        }
        for (label, v) in [
            ("file_count", self.file_count),
            ("file_size_bytes", self.file_size_bytes),
            ("packet_size_bytes", self.packet_size_bytes),
            ("names_per_manifest", self.names_per_manifest),
            ("names_per_segment", self.names_per_segment),
        ] {
            if v == 0 {
                return Err(TorrentError::InvalidParams(format!("{label} must be >= 1")));
            }
        }
        if self.packet_size_bytes > self.file_size_bytes {
            return Err(TorrentError::InvalidParams(
                "packet_size_bytes exceeds file_size_bytes".into(),
            ));
        }
        Ok(())
    }

    pub fn prefix(&self) -> Name {
        Name::from_components([NAME_ROOT, &self.torrent_name])
    }

    pub fn packets_per_file(&self) -> u32 {
        self.file_size_bytes.div_ceil(self.packet_size_bytes)
    }

    pub fn packet_count(&self) -> u32 {
        self.packets_per_file() * self.file_count
    }

    pub fn manifests_per_file(&self) -> u32 {
        self.packets_per_file().div_ceil(self.names_per_manifest)
    }

    pub fn manifest_count(&self) -> u32 {
        self.manifests_per_file() * self.file_count
    }

    pub fn segment_count(&self) -> u32 {
        self.manifest_count().div_ceil(self.names_per_segment)
    }

    fn signature(&self) -> Vec<u8> {
        format!("SIG:{}", self.torrent_name).into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorrentSegment {
    pub name: Name,
    /// Full manifest names with digest components.
    pub manifest_catalog: Vec<Name>,
    pub next_segment: Option<Name>,
    pub publisher_signature: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileManifest {
    pub name: Name,
    /// Full data-packet names with digest components.
    pub packet_catalog: Vec<Name>,
    pub next_manifest: Option<Name>,
    pub publisher_signature: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorrentBundle {
    pub params: TorrentParams,
    pub segments: Vec<TorrentSegment>,
    pub manifests: Vec<FileManifest>,
    pub packets: Vec<Data>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameClass {
    TorrentSegment,
    FileManifest,
    DataPacket,
    Unknown,
}

/// Classifies a name by the component grammar, ignoring any trailing
/// digest component. Total: unrecognized shapes map to `Unknown`.
pub fn classify_name(name: &Name) -> NameClass {
    let base = name.strip_digest();
    let comps: Vec<&str> = base
        .components()
        .iter()
        .map(|c| std::str::from_utf8(c).unwrap_or(""))
        .collect();
    if comps.first() != Some(&NAME_ROOT) {
        return NameClass::Unknown;
    }
    match comps.as_slice() {
        [_, _, "torrent-file", seg] if seg.starts_with("seg=") => NameClass::TorrentSegment,
        [_, _, file, "manifest", seg] if file.starts_with("file") && seg.starts_with("seg=") => {
            NameClass::FileManifest
        }
        [_, _, file, "data", pkt] if file.starts_with("file") && pkt.starts_with("pkt=") => {
            NameClass::DataPacket
        }
        _ => NameClass::Unknown,
    }
}

fn packet_name(params: &TorrentParams, file: u32, pkt: u32) -> Name {
    params
        .prefix()
        .child(&format!("file{file}"))
        .child("data")
        .child(&format!("pkt={pkt}"))
}

fn manifest_name(params: &TorrentParams, file: u32, seg: u32) -> Name {
    params
        .prefix()
        .child(&format!("file{file}"))
        .child("manifest")
        .child(&format!("seg={seg}"))
}

fn segment_name(params: &TorrentParams, seg: u32) -> Name {
    params
        .prefix()
        .child("torrent-file")
        .child(&format!("seg={seg}"))
}

/// Builds the full torrent: data packets with synthetic 'A' content, file
/// manifests grouping the packets, and torrent-file segments grouping the
/// manifests. Deterministic, so peers regenerate an identical torrent
/// locally to learn the first segment's name and digest.
pub fn build_torrent(params: &TorrentParams) -> Result<TorrentBundle, TorrentError> {
    params.validate()?;
    let sig = params.signature();

    let mut packets = Vec::new();
    for file in 0..params.file_count {
        let mut remaining = params.file_size_bytes;
        for pkt in 0..params.packets_per_file() {
            let size = remaining.min(params.packet_size_bytes);
            remaining -= size;
            packets.push(Data::new(
                packet_name(params, file, pkt),
                vec![b'A'; size as usize],
                sig.clone(),
            ));
        }
    }

    // Manifests are chained back to front within each file so the
    // next-pointer can carry the successor's content digest.
    let mut manifests = Vec::new();
    let mut manifest_full_names = Vec::new();
    for file in 0..params.file_count {
        let mut file_manifests: Vec<FileManifest> = Vec::new();
        let per_file = params.manifests_per_file();
        for seg in (0..per_file).rev() {
            let first_pkt = seg * params.names_per_manifest;
            let last_pkt = (first_pkt + params.names_per_manifest).min(params.packets_per_file());
            let packet_catalog = (first_pkt..last_pkt)
                .map(|p| {
                    let data = &packets[(file * params.packets_per_file() + p) as usize];
                    data.name.append_digest(&data.content)
                })
                .collect();
            let next_manifest = file_manifests
                .last()
                .map(|next: &FileManifest| next.name.append_digest(&encode_manifest(next)));
            file_manifests.push(FileManifest {
                name: manifest_name(params, file, seg),
                packet_catalog,
                next_manifest,
                publisher_signature: sig.clone(),
            });
        }
        file_manifests.reverse();
        for m in &file_manifests {
            manifest_full_names.push(m.name.append_digest(&encode_manifest(m)));
        }
        manifests.extend(file_manifests);
    }

    let mut segments: Vec<TorrentSegment> = Vec::new();
    for seg in (0..params.segment_count()).rev() {
        let first = seg * params.names_per_segment;
        let last = (first + params.names_per_segment).min(params.manifest_count());
        let manifest_catalog = manifest_full_names[first as usize..last as usize].to_vec();
        let next_segment = segments
            .last()
            .map(|next: &TorrentSegment| next.name.append_digest(&encode_segment(next)));
        segments.push(TorrentSegment {
            name: segment_name(params, seg),
            manifest_catalog,
            next_segment,
            publisher_signature: sig.clone(),
        });
    }
    segments.reverse();

    Ok(TorrentBundle {
        params: params.clone(),
        segments,
        manifests,
        packets,
    })
}

impl TorrentBundle {
    /// Every object of the bundle as a network-ready data packet, base
    /// name (no digest component) and encoded content.
    pub fn all_objects(&self) -> Vec<Data> {
        let sig = self.params.signature();
        let mut out = Vec::new();
        for s in &self.segments {
            out.push(Data::new(s.name.clone(), encode_segment(s), sig.clone()));
        }
        for m in &self.manifests {
            out.push(Data::new(m.name.clone(), encode_manifest(m), sig.clone()));
        }
        out.extend(self.packets.iter().cloned());
        out
    }

    pub fn object_count(&self) -> usize {
        self.segments.len() + self.manifests.len() + self.packets.len()
    }

    /// Name of the first torrent-file segment, digest included.
    pub fn first_segment_name(&self) -> Name {
        let s = &self.segments[0];
        s.name.append_digest(&encode_segment(s))
    }
}

// --- object encoding ------------------------------------------------------
//
// Length-prefixed record layout (all integers little-endian):
//   tag: u8 (1 = torrent segment, 2 = file manifest)
//   name: u16 component count, then per component u16 length + bytes
//   catalog: u32 entry count, then each entry as a name
//   next-pointer: u8 present flag, then a name when present
//   signature: u32 length + bytes

const TAG_SEGMENT: u8 = 1;
const TAG_MANIFEST: u8 = 2;

fn put_name(out: &mut Vec<u8>, name: &Name) {
    out.extend_from_slice(&(name.components().len() as u16).to_le_bytes());
    for comp in name.components() {
        out.extend_from_slice(&(comp.len() as u16).to_le_bytes());
        out.extend_from_slice(comp);
    }
}

fn encode_record(tag: u8, name: &Name, catalog: &[Name], next: &Option<Name>, sig: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(tag);
    put_name(&mut out, name);
    out.extend_from_slice(&(catalog.len() as u32).to_le_bytes());
    for entry in catalog {
        put_name(&mut out, entry);
    }
    match next {
        Some(n) => {
            out.push(1);
            put_name(&mut out, n);
        }
        None => out.push(0),
    }
    out.extend_from_slice(&(sig.len() as u32).to_le_bytes());
    out.extend_from_slice(sig);
    out
}

pub fn encode_segment(s: &TorrentSegment) -> Vec<u8> {
    encode_record(
        TAG_SEGMENT,
        &s.name,
        &s.manifest_catalog,
        &s.next_segment,
        &s.publisher_signature,
    )
}

pub fn encode_manifest(m: &FileManifest) -> Vec<u8> {
    encode_record(
        TAG_MANIFEST,
        &m.name,
        &m.packet_catalog,
        &m.next_manifest,
        &m.publisher_signature,
    )
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TorrentError> {
        if self.pos + n > self.buf.len() {
            return Err(TorrentError::DecodeError("truncated".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, TorrentError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, TorrentError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, TorrentError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<Name, TorrentError> {
        let count = self.u16()?;
        let mut comps = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = self.u16()? as usize;
            comps.push(self.take(len)?.to_vec());
        }
        Ok(Name::new(comps))
    }
}

/// (tag, object name, catalog, next pointer, signature)
type RawRecord = (u8, Name, Vec<Name>, Option<Name>, Vec<u8>);

fn decode_record(bytes: &[u8]) -> Result<RawRecord, TorrentError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let tag = r.u8()?;
    let name = r.name()?;
    let count = r.u32()?;
    let mut catalog = Vec::with_capacity(count as usize);
    for _ in 0..count {
        catalog.push(r.name()?);
    }
    let next = match r.u8()? {
        0 => None,
        1 => Some(r.name()?),
        flag => {
            return Err(TorrentError::DecodeError(format!(
                "bad next-pointer flag {flag}"
            )))
        }
    };
    let sig_len = r.u32()? as usize;
    let sig = r.take(sig_len)?.to_vec();
    if r.pos != bytes.len() {
        return Err(TorrentError::DecodeError("trailing bytes".into()));
    }
    Ok((tag, name, catalog, next, sig))
}

pub fn decode_segment(bytes: &[u8]) -> Result<TorrentSegment, TorrentError> {
    let (tag, name, catalog, next, sig) = decode_record(bytes)?;
    if tag != TAG_SEGMENT {
        return Err(TorrentError::DecodeError(format!("expected segment, tag {tag}")));
    }
    Ok(TorrentSegment {
        name,
        manifest_catalog: catalog,
        next_segment: next,
        publisher_signature: sig,
    })
}

pub fn decode_manifest(bytes: &[u8]) -> Result<FileManifest, TorrentError> {
    let (tag, name, catalog, next, sig) = decode_record(bytes)?;
    if tag != TAG_MANIFEST {
        return Err(TorrentError::DecodeError(format!("expected manifest, tag {tag}")));
    }
    Ok(FileManifest {
        name,
        packet_catalog: catalog,
        next_manifest: next,
        publisher_signature: sig,
    })
}
