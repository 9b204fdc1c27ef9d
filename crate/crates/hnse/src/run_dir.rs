use std::io;
use std::path::{Path, PathBuf};

/// Creates a fresh `run-<UTC timestamp>` directory under `base`, adding a
/// numeric suffix when the name is taken.
pub fn create_run_dir(base: &Path) -> io::Result<PathBuf> {
    std::fs::create_dir_all(base)?;
    let stamp = chrono::Utc::now().format("run-%Y%m%dT%H%M%S%.3fZ").to_string();
    for n in 0.. {
        let name = if n == 0 { stamp.clone() } else { format!("{stamp}-{n}") };
        let dir = base.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}
