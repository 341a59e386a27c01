use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::DataError;

/// Write `bytes` to `path` while holding an exclusive advisory lock.
pub(crate) fn write_locked(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    }
    let mut f = File::options()
        .create(true)
        .write(true)
        .truncate(false)
        .open(path)
        .map_err(|e| DataError::io(path, e))?;
    f.lock().map_err(|e| DataError::io(path, e))?;
    f.set_len(0).map_err(|e| DataError::io(path, e))?;
    f.write_all(bytes).map_err(|e| DataError::io(path, e))?;
    f.flush().map_err(|e| DataError::io(path, e))?;
    f.unlock().map_err(|e| DataError::io(path, e))
}

pub(crate) fn read_all(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|e| DataError::io(path, e))
}
