//! JSON run manifest listing frames and their input files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Deserialize;

use crate::config::Settings;
use crate::usage;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub frames: Vec<FrameSpec>,
    #[serde(default)]
    pub config: Settings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub frame_id: usize,
    pub cell_image: PathBuf,
    #[serde(default)]
    pub cell_mask: Option<PathBuf>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub name: String,
    pub image: PathBuf,
    #[serde(default)]
    pub cluster_mask: Option<PathBuf>,
}

impl RunManifest {
    /// Reads and validates a manifest. Relative paths are taken relative to
    /// the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m: RunManifest =
            serde_json::from_str(&text).map_err(|e| usage(format!("invalid manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        m.resolve(base);
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for f in &mut self.frames {
            fix(&mut f.cell_image);
            if let Some(p) = f.cell_mask.as_mut() {
                fix(p);
            }
            for ch in &mut f.channels {
                fix(&mut ch.image);
                if let Some(p) = ch.cluster_mask.as_mut() {
                    fix(p);
                }
            }
        }
    }

    /// Unique frame ids, one channel list shared by all frames, and every
    /// referenced file present.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        let names = self.channel_names();
        for f in &self.frames {
            if !ids.insert(f.frame_id) {
                return Err(usage(format!("duplicate frame_id {}", f.frame_id)));
            }
            let these: Vec<&str> = f.channels.iter().map(|c| c.name.as_str()).collect();
            if these != names.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(usage(format!(
                    "frame {}: channels {these:?} differ from the first frame's {names:?}",
                    f.frame_id
                )));
            }
            let mut paths = vec![&f.cell_image];
            paths.extend(f.cell_mask.as_ref());
            for ch in &f.channels {
                paths.push(&ch.image);
                paths.extend(ch.cluster_mask.as_ref());
            }
            for p in paths {
                if !p.is_file() {
                    return Err(usage(format!("frame {}: missing input {}", f.frame_id, p.display())));
                }
            }
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(usage(format!(
                    "channel name {n:?} must be non-empty ASCII letters, digits, '_' or '-'"
                )));
            }
            if !seen.insert(n) {
                return Err(usage(format!("channel {n} is listed twice")));
            }
        }
        Ok(())
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.frames
            .first()
            .map(|f| f.channels.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), b"").unwrap();
        std::fs::write(
            dir.path().join("m.json"),
            r#"{"frames": [{"frame_id": 3, "cell_image": "a.png"}], "config": {"seed": 5}}"#,
        )
        .unwrap();
        let m = RunManifest::load(&dir.path().join("m.json")).unwrap();
        assert_eq!(m.frames[0].cell_image, dir.path().join("a.png"));
        assert_eq!(m.config.seed, Some(5));
    }

    #[test]
    fn rejects_duplicates_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), b"").unwrap();
        let write = |body: &str| {
            std::fs::write(dir.path().join("m.json"), body).unwrap();
            RunManifest::load(&dir.path().join("m.json"))
        };
        let dup =
            write(r#"{"frames": [{"frame_id": 1, "cell_image": "a.png"}, {"frame_id": 1, "cell_image": "a.png"}]}"#);
        assert!(dup.unwrap_err().to_string().contains("duplicate"));
        let missing = write(r#"{"frames": [{"frame_id": 1, "cell_image": "nope.png"}]}"#);
        assert!(missing.unwrap_err().to_string().contains("nope.png"));
        let mismatch = write(
            r#"{"frames": [{"frame_id": 1, "cell_image": "a.png", "channels": [{"name": "gfp", "image": "a.png"}]},
                           {"frame_id": 2, "cell_image": "a.png"}]}"#,
        );
        assert!(mismatch.is_err());
        assert!(write(r#"{}"#).unwrap().frames.is_empty());
    }
}
