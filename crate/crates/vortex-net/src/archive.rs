//! On-disk session archive: everything a finished session emits for the
//! feedback engine. One directory per session:
//!
//! ```text
//! <dir>/roster.json          anonymized roster
//! <dir>/session.json         clock, scenario, final version, completeness
//! <dir>/events.json          versioned event log (session-relative times)
//! <dir>/streams/<Role>.jsonl per-client records, one canonical JSON per line
//! <dir>/rtt.json             per-client round-trip statistics
//! ```
//!
//! All stream timestamps are already session-relative: the server applies
//! each client's estimated clock offset before writing.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vortex_core::json::to_canonical_vec;
use vortex_core::{Role, SessionClock, SessionRoster};
use vortex_sim::{EventActor, SimEventKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionArchive {
    pub session_id: u64,
    pub scenario: String,
    pub clock: SessionClock,
    pub roster: SessionRoster,
    pub event_log: Vec<VersionedEvent>,
    pub streams: BTreeMap<Role, ClientStream>,
    pub rtt_stats: BTreeMap<Role, RttStats>,
    /// Roles whose stream upload never arrived; their entries in `streams`
    /// are empty and the archive is marked incomplete.
    pub incomplete: Vec<Role>,
    pub final_version: u64,
}

/// One entry of the server's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionedEvent {
    pub version: u64,
    pub t: f64,
    pub kind: SimEventKind,
    pub actor: EventActor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Per-client recorded streams, session-relative seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientStream {
    pub utterances: Vec<StreamUtterance>,
    pub actions: Vec<StreamAction>,
    pub gaze: Vec<StreamGaze>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamUtterance {
    pub t: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamAction {
    pub t: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamGaze {
    pub t: f64,
    pub direction: [f32; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RttStats {
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub samples: usize,
}

impl RttStats {
    pub fn from_samples_us(samples: &[i64]) -> Option<RttStats> {
        if samples.is_empty() {
            return None;
        }
        let ms: Vec<f64> = samples.iter().map(|us| *us as f64 / 1000.0).collect();
        let sum: f64 = ms.iter().sum();
        Some(RttStats {
            mean_ms: sum / ms.len() as f64,
            min_ms: ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            samples: ms.len(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("archive I/O failed at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("archive file {path} malformed: {detail}")]
    Malformed { path: String, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io { path: path.display().to_string(), source }
}

/// Tagged line format used inside `streams/<Role>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StreamLine {
    Utterance(StreamUtterance),
    Action(StreamAction),
    Gaze(StreamGaze),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionMeta {
    session_id: u64,
    scenario: String,
    clock: SessionClock,
    final_version: u64,
    incomplete: Vec<Role>,
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), ArchiveError> {
    let path = dir.join(name);
    let mut bytes = to_canonical_vec(value).map_err(|e| ArchiveError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(io_err(&path))
}

pub fn write_archive(dir: &Path, archive: &SessionArchive) -> Result<(), ArchiveError> {
    let streams_dir = dir.join("streams");
    fs::create_dir_all(&streams_dir).map_err(io_err(&streams_dir))?;

    write_json(dir, "roster.json", &archive.roster)?;
    write_json(
        dir,
        "session.json",
        &SessionMeta {
            session_id: archive.session_id,
            scenario: archive.scenario.clone(),
            clock: archive.clock,
            final_version: archive.final_version,
            incomplete: archive.incomplete.clone(),
        },
    )?;
    write_json(dir, "events.json", &archive.event_log)?;
    write_json(dir, "rtt.json", &archive.rtt_stats)?;

    for (role, stream) in &archive.streams {
        let path = streams_dir.join(format!("{role}.jsonl"));
        let mut file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut lines: Vec<(f64, StreamLine)> = Vec::new();
        lines.extend(stream.utterances.iter().map(|u| (u.t, StreamLine::Utterance(u.clone()))));
        lines.extend(stream.actions.iter().map(|a| (a.t, StreamLine::Action(a.clone()))));
        lines.extend(stream.gaze.iter().map(|g| (g.t, StreamLine::Gaze(g.clone()))));
        lines.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, line) in lines {
            let bytes = to_canonical_vec(&line).map_err(|e| ArchiveError::Malformed {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            file.write_all(&bytes).map_err(io_err(&path))?;
            file.write_all(b"\n").map_err(io_err(&path))?;
        }
    }
    Ok(())
}

pub fn load_archive(dir: &Path) -> Result<SessionArchive, ArchiveError> {
    fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ArchiveError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        serde_json::from_slice(&bytes).map_err(|e| ArchiveError::Malformed {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    let roster: SessionRoster = read_json(&dir.join("roster.json"))?;
    let meta: SessionMeta = read_json(&dir.join("session.json"))?;
    let event_log: Vec<VersionedEvent> = read_json(&dir.join("events.json"))?;
    let rtt_stats: BTreeMap<Role, RttStats> = read_json(&dir.join("rtt.json"))?;

    let mut streams = BTreeMap::new();
    for entry in roster.entries() {
        let path = dir.join("streams").join(format!("{}.jsonl", entry.role));
        if !path.exists() {
            streams.insert(entry.role, ClientStream::default());
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut stream = ClientStream::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: StreamLine =
                serde_json::from_str(line).map_err(|e| ArchiveError::Malformed {
                    path: format!("{}:{}", path.display(), lineno + 1),
                    detail: e.to_string(),
                })?;
            match parsed {
                StreamLine::Utterance(u) => stream.utterances.push(u),
                StreamLine::Action(a) => stream.actions.push(a),
                StreamLine::Gaze(g) => stream.gaze.push(g),
            }
        }
        streams.insert(entry.role, stream);
    }

    Ok(SessionArchive {
        session_id: meta.session_id,
        scenario: meta.scenario,
        clock: meta.clock,
        roster,
        event_log,
        streams,
        rtt_stats,
        incomplete: meta.incomplete,
        final_version: meta.final_version,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_archive() -> SessionArchive {
        let mut roster = SessionRoster::new();
        roster.add(1, Role::Surgeon).unwrap();
        roster.add(2, Role::Anesthesiologist).unwrap();
        roster.add(3, Role::Nurse).unwrap();
        let mut streams = BTreeMap::new();
        streams.insert(
            Role::Surgeon,
            ClientStream {
                utterances: vec![StreamUtterance {
                    t: 10.0,
                    text: "starting the timeout".into(),
                    asr_confidence: Some(0.97),
                }],
                actions: vec![StreamAction { t: 12.5, description: "picked up grasper".into() }],
                gaze: vec![StreamGaze { t: 1.0, direction: [0.0, 0.0, -1.0] }],
            },
        );
        streams.insert(Role::Anesthesiologist, ClientStream::default());
        streams.insert(Role::Nurse, ClientStream::default());
        let mut rtt = BTreeMap::new();
        rtt.insert(
            Role::Surgeon,
            RttStats { mean_ms: 42.0, min_ms: 20.0, max_ms: 80.0, samples: 12 },
        );
        SessionArchive {
            session_id: 7,
            scenario: "bleeding".into(),
            clock: SessionClock::new(1_000_000, 600.0).unwrap(),
            roster,
            event_log: vec![VersionedEvent {
                version: 3,
                t: 60.0,
                kind: SimEventKind::HemorrhageStage(1),
                actor: EventActor::System,
                detail: None,
            }],
            streams,
            rtt_stats: rtt,
            incomplete: vec![Role::Nurse],
            final_version: 99,
        }
    }

    #[test]
    fn archive_round_trips_through_the_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let archive = sample_archive();
        write_archive(dir.path(), &archive).unwrap();

        for required in ["roster.json", "session.json", "events.json", "rtt.json"] {
            assert!(dir.path().join(required).exists(), "{required} missing");
        }
        assert!(dir.path().join("streams/Surgeon.jsonl").exists());

        let loaded = load_archive(dir.path()).unwrap();
        assert_eq!(loaded, archive);
    }

    #[test]
    fn rtt_stats_summarize_microsecond_samples() {
        let stats = RttStats::from_samples_us(&[20_000, 40_000, 60_000]).unwrap();
        assert_eq!(stats.mean_ms, 40.0);
        assert_eq!(stats.min_ms, 20.0);
        assert_eq!(stats.max_ms, 60.0);
        assert_eq!(stats.samples, 3);
        assert!(RttStats::from_samples_us(&[]).is_none());
    }
}
