//! EALT tensor files on disk.

use std::fs;
use std::io::Write;
use std::path::Path;

use edgeal_core::tensor::Tensor;
use edgeal_core::Grid;

use crate::{Error, Result};

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes).map_err(|cause| Error::Tensor {
        path: path.to_path_buf(),
        cause,
    })
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial tensor.
pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(tmp)?;
        f.write_all(&tensor.to_bytes())?;
        f.sync_all()?;
        fs::rename(tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Grid<f32>> {
    let path = path.as_ref();
    read_tensor(path)?
        .to_image()
        .map_err(|e| Error::file(path, e))
}

pub fn read_class_map(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    let path = path.as_ref();
    read_tensor(path)?
        .to_class_map()
        .map_err(|e| Error::file(path, e))
}

pub fn write_image(path: impl AsRef<Path>, image: &Grid<f32>) -> Result<()> {
    write_tensor(path, &Tensor::from_grid_f32(image))
}

pub fn write_class_map(path: impl AsRef<Path>, map: &Grid<u8>) -> Result<()> {
    write_tensor(path, &Tensor::from_grid_u8(map))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
