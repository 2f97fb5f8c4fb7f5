//! Saved relay credentials, kept next to the store.

use std::path::{Path, PathBuf};

use compshare_core::codec;
use compshare_core::model::UserId;
use compshare_core::store::Store;
use serde::{Deserialize, Serialize};

use crate::Failure;

const FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub relay: String,
    pub user: UserId,
    pub token: String,
}

impl Config {
    pub fn load(home: &Path) -> Result<Option<Config>, Failure> {
        let path = home.join(FILE);
        match std::fs::read(&path) {
            Ok(bytes) => codec::from_lenient(&bytes)
                .map(Some)
                .map_err(|e| Failure { code: crate::EXIT_CORRUPT, message: format!("{}: {e}", path.display()) }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Failure::usage(format!("{}: {e}", path.display()))),
        }
    }

    pub fn save(&self, home: &Path) -> Result<(), Failure> {
        let doc = codec::to_canonical(self).map_err(|e| Failure::usage(e.to_string()))?;
        std::fs::create_dir_all(home).and_then(|_| std::fs::write(home.join(FILE), doc.as_bytes()))
            .map_err(|e| Failure::usage(format!("{}: {e}", home.display())))
    }
}

pub fn home(flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
    flag.or_else(Store::default_root).ok_or_else(|| Failure::usage("no home directory; pass --home"))
}
