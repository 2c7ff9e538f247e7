//! Per-site enhancement selections, persisted to a single JSON file.
//!
//! A profile holds at most one selection per (site, pattern); saving a new
//! choice replaces the old one. Every write goes to a temporary file in the
//! same directory which is then renamed over the store, so readers see either
//! the previous or the new state and never a torn file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;

pub const PROFILE_ENV: &str = "PITA_PROFILE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub site: String,
    pub pattern_id: String,
    pub enhancement_id: String,
    pub updated_at: DateTime<Utc>,
}

impl Selection {
    pub fn new(site: &str, pattern_id: &str, enhancement_id: &str) -> Self {
        Selection {
            site: site.into(),
            pattern_id: pattern_id.into(),
            enhancement_id: enhancement_id.into(),
            updated_at: Utc::now(),
        }
    }

    fn key(&self) -> (&str, &str) {
        (&self.site, &self.pattern_id)
    }
}

/// Selections ordered by (site, pattern id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub catalog_version: String,
    pub selections: Vec<Selection>,
}

impl Profile {
    pub fn empty(catalog_version: &str) -> Self {
        Profile { catalog_version: catalog_version.into(), selections: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    pub fn get(&self, site: &str, pattern_id: &str) -> Option<&Selection> {
        self.position(site, pattern_id).ok().map(|i| &self.selections[i])
    }

    /// `(pattern_id, enhancement_id)` pairs for one site, ready for
    /// `apply_profile`.
    pub fn selections_for_site(&self, site: &str) -> Vec<(String, String)> {
        self.selections
            .iter()
            .filter(|s| s.site == site)
            .map(|s| (s.pattern_id.clone(), s.enhancement_id.clone()))
            .collect()
    }

    fn position(&self, site: &str, pattern_id: &str) -> Result<usize, usize> {
        self.selections.binary_search_by(|s| s.key().cmp(&(site, pattern_id)))
    }

    fn upsert(&mut self, s: Selection) {
        match self.position(&s.site, &s.pattern_id) {
            Ok(i) => self.selections[i] = s,
            Err(i) => self.selections.insert(i, s),
        }
    }

    fn remove(&mut self, site: &str, pattern_id: &str) -> bool {
        match self.position(site, pattern_id) {
            Ok(i) => {
                self.selections.remove(i);
                true
            }
            Err(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot select {enhancement_id:?} for {pattern_id:?} on {site:?}: {reason}")]
    Validation { site: String, pattern_id: String, enhancement_id: String, reason: String },
    #[error("profile store I/O error: {0}")]
    Io(#[from] io::Error),
    /// The store exists but cannot be decoded. When `recovered_empty` is set
    /// the caller may carry on with an empty profile; the file is left as is.
    #[error("profile store {} is corrupt: {message}", path.display())]
    Corrupt { path: PathBuf, message: String, recovered_empty: bool },
}

/// A stored selection dropped during load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileWarning {
    pub site: String,
    pub pattern_id: String,
    pub enhancement_id: String,
    pub message: String,
}

/// Checks that `s` is a pairing the catalog offers on that site.
pub fn validate_selection(s: &Selection, c: &Catalog) -> Result<(), String> {
    let Some(pattern) = c.pattern(&s.pattern_id) else {
        return Err(format!("unknown pattern in catalog {}", c.version()));
    };
    if pattern.site != s.site {
        return Err(format!("pattern belongs to site {:?}", pattern.site));
    }
    if !c.offers(&s.pattern_id, &s.enhancement_id) {
        return Err("enhancement is not offered for this pattern".into());
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ProfileStore {
    path: PathBuf,
}

impl ProfileStore {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        ProfileStore { path: path.into() }
    }

    /// Store named by `PITA_PROFILE`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(PROFILE_ENV).filter(|v| !v.is_empty()).map(|p| Self::open(PathBuf::from(p)))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Last durably saved profile, revalidated against `c`. Selections the
    /// catalog no longer offers are dropped and reported.
    pub fn load(&self, c: &Catalog) -> Result<(Profile, Vec<ProfileWarning>), ProfileError> {
        let bytes = match fs::read(&self.path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Profile::empty(c.version()), Vec::new())),
            Err(e) => return Err(e.into()),
        };
        let stored: Profile = serde_json::from_slice(&bytes).map_err(|e| ProfileError::Corrupt {
            path: self.path.clone(),
            message: e.to_string(),
            recovered_empty: true,
        })?;
        let mut profile = Profile::empty(c.version());
        let mut warnings = Vec::new();
        let warn = |s: &Selection, message: String| ProfileWarning {
            site: s.site.clone(),
            pattern_id: s.pattern_id.clone(),
            enhancement_id: s.enhancement_id.clone(),
            message,
        };
        for s in stored.selections {
            if let Err(message) = validate_selection(&s, c) {
                warnings.push(warn(&s, message));
                continue;
            }
            if profile.get(&s.site, &s.pattern_id).is_some() {
                warnings.push(warn(&s, "duplicate entry; keeping the later one".into()));
            }
            profile.upsert(s);
        }
        Ok((profile, warnings))
    }

    /// Like [`load`](Self::load), falling back to an empty profile when the
    /// store is corrupt. The error, if any, is returned alongside.
    pub fn load_or_recover(&self, c: &Catalog) -> Result<(Profile, Vec<ProfileWarning>, Option<ProfileError>), ProfileError> {
        match self.load(c) {
            Ok((p, w)) => Ok((p, w, None)),
            Err(e @ ProfileError::Corrupt { recovered_empty: true, .. }) => Ok((Profile::empty(c.version()), Vec::new(), Some(e))),
            Err(e) => Err(e),
        }
    }

    /// Validates `s`, replaces any selection for the same (site, pattern) and
    /// persists the result before returning it.
    pub fn save_selection(&self, p: &Profile, s: Selection, c: &Catalog) -> Result<Profile, ProfileError> {
        validate_selection(&s, c).map_err(|reason| ProfileError::Validation {
            site: s.site.clone(),
            pattern_id: s.pattern_id.clone(),
            enhancement_id: s.enhancement_id.clone(),
            reason,
        })?;
        let mut next = p.clone();
        next.catalog_version = c.version().to_string();
        next.upsert(s);
        self.write(&next)?;
        Ok(next)
    }

    /// Removes the (site, pattern) selection if present. Absent pairs leave
    /// the store untouched.
    pub fn clear_selection(&self, p: &Profile, site: &str, pattern_id: &str) -> Result<Profile, ProfileError> {
        let mut next = p.clone();
        if next.remove(site, pattern_id) {
            self.write(&next)?;
        }
        Ok(next)
    }

    fn write(&self, p: &Profile) -> io::Result<()> {
        let dir = match self.path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, p)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.path).map_err(|e| e.error)?;
        if let Ok(d) = fs::File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, ProfileStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::open(dir.path().join("profile.json"));
        (dir, store)
    }

    #[test]
    fn fresh_store_is_empty() {
        let (_dir, s) = store();
        let c = Catalog::seed();
        let (p, w) = s.load(&c).unwrap();
        assert!(p.is_empty() && w.is_empty());
        assert_eq!(p.catalog_version, c.version());
    }

    #[test]
    fn replacement_keeps_one_selection() {
        let (_dir, s) = store();
        let c = Catalog::seed();
        let p = Profile::empty(c.version());
        let p = s.save_selection(&p, Selection::new("amazon", "prominent-buy-now", "fairness-amazon-buy-now"), &c).unwrap();
        assert_eq!(p.selections.len(), 1);
        let p = s.save_selection(&p, Selection::new("amazon", "prominent-buy-now", "hiding-amazon-buy-now"), &c).unwrap();
        assert_eq!(p.selections.len(), 1);
        assert_eq!(p.get("amazon", "prominent-buy-now").unwrap().enhancement_id, "hiding-amazon-buy-now");
        assert_eq!(s.load(&c).unwrap().0, p);
    }

    #[test]
    fn cross_pattern_pair_is_rejected() {
        let (_dir, s) = store();
        let c = Catalog::seed();
        let p = Profile::empty(c.version());
        let err = s.save_selection(&p, Selection::new("amazon", "prominent-buy-now", "reflection-netflix-time"), &c);
        assert!(matches!(err, Err(ProfileError::Validation { .. })));
        let err = s.save_selection(&p, Selection::new("youtube", "prominent-buy-now", "fairness-amazon-buy-now"), &c);
        assert!(matches!(err, Err(ProfileError::Validation { .. })));
        assert!(!s.path().exists(), "nothing written on validation failure");
    }

    #[test]
    fn clearing() {
        let (_dir, s) = store();
        let c = Catalog::seed();
        let p = s
            .save_selection(&Profile::empty(c.version()), Selection::new("netflix", "automatic-preview", "disabling-netflix-preview"), &c)
            .unwrap();
        let same = s.clear_selection(&p, "netflix", "hiding-total-episode-time").unwrap();
        assert_eq!(same, p);
        let cleared = s.clear_selection(&p, "netflix", "automatic-preview").unwrap();
        assert!(cleared.is_empty());
        assert!(s.load(&c).unwrap().0.is_empty());
    }

    #[test]
    fn unknown_selections_are_dropped_on_load() {
        let (_dir, s) = store();
        let c = Catalog::seed();
        let json = r#"{"catalog_version":"9.9","selections":[
            {"site":"amazon","pattern_id":"future-pattern","enhancement_id":"hiding-amazon-future","updated_at":"2026-01-01T00:00:00Z"},
            {"site":"amazon","pattern_id":"prominent-buy-now","enhancement_id":"fairness-amazon-buy-now","updated_at":"2026-01-01T00:00:00Z"}]}"#;
        fs::write(s.path(), json).unwrap();
        let (p, w) = s.load(&c).unwrap();
        assert_eq!(p.selections.len(), 1);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].pattern_id, "future-pattern");
        assert_eq!(p.catalog_version, c.version());
    }

    #[test]
    fn corrupt_store() {
        let (_dir, s) = store();
        fs::write(s.path(), "{not json").unwrap();
        let c = Catalog::seed();
        assert!(matches!(s.load(&c), Err(ProfileError::Corrupt { recovered_empty: true, .. })));
        let (p, _, err) = s.load_or_recover(&c).unwrap();
        assert!(p.is_empty() && err.is_some());
    }
}
