use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::session::ExamSession;
use super::ExamError;

/// Stages of an atomic save, for fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// Temp file written and synced; target untouched.
    TempWritten,
    /// Temp file renamed over the target.
    Renamed,
}

/// One JSON document per session under a data directory.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn storage(path: &Path) -> impl FnOnce(io::Error) -> ExamError + '_ {
    move |source| ExamError::Storage { path: path.display().to_string(), source }
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ExamError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(storage(&dir))?;
        Ok(SessionStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, ExamError> {
        if !valid_id(id) {
            return Err(ExamError::InvalidPayload(format!("bad session id {id:?}")));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).is_ok_and(|p| p.is_file())
    }

    pub fn save(&self, session: &ExamSession) -> Result<(), ExamError> {
        self.save_with(session, |_| Ok(()))
    }

    /// Write to a temp file, fsync, then rename over the target. `hook`
    /// runs at each stage; an error from it aborts the save there.
    pub fn save_with<F>(&self, session: &ExamSession, mut hook: F) -> Result<(), ExamError>
    where
        F: FnMut(FaultPoint) -> io::Result<()>,
    {
        let target = self.path(&session.id)?;
        let tmp = self.dir.join(format!(".{}.json.tmp", session.id));
        let bytes = serde_json::to_vec_pretty(session).expect("session serializes");
        let err = storage(&tmp);
        let mut f = File::create(&tmp).map_err(storage(&tmp))?;
        f.write_all(&bytes).and_then(|_| f.sync_all()).map_err(err)?;
        drop(f);
        hook(FaultPoint::TempWritten).map_err(storage(&tmp))?;
        fs::rename(&tmp, &target).map_err(storage(&target))?;
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        hook(FaultPoint::Renamed).map_err(storage(&target))?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<ExamSession, ExamError> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(ExamError::UnknownSession(id.to_string())),
            Err(e) => return Err(storage(&path)(e)),
        };
        serde_json::from_str(&text).map_err(|e| ExamError::Storage {
            path: path.display().to_string(),
            source: io::Error::new(io::ErrorKind::InvalidData, e),
        })
    }

    /// Ids of stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<String>, ExamError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)
            .map_err(storage(&self.dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".json").map(str::to_string))
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }
}
