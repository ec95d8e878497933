//! On-disk dataset layout.
//!
//! ```text
//! <root>/<split>/images/<id>.ppm
//! <root>/<split>/gt/<id>/<annotator>.pgm
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use contour_core::bench::GroundTruth;
use contour_core::pnm::{self, Maxval};
use contour_core::synth::SynthScene;
use contour_core::ImagePlane;
use rayon::prelude::*;

use crate::error::{CliError, Result};

pub fn images_dir(root: &Path, split: &str) -> PathBuf {
    root.join(split).join("images")
}

pub fn gt_dir(root: &Path, split: &str, id: &str) -> PathBuf {
    root.join(split).join("gt").join(id)
}

fn with_path<T>(path: &Path, r: contour_core::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_image(path: &Path) -> Result<ImagePlane> {
    with_path(path, pnm::read_image(path))
}

fn is_pnm(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("ppm" | "pgm" | "pnm")
    )
}

/// PNM files directly inside `dir`, sorted by name.
pub fn pnm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::File {
            path: dir.to_path_buf(),
            source: e.into(),
        })?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && is_pnm(p));
    files.sort();
    Ok(files)
}

pub fn file_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Expands directories into their PNM files; plain files pass through.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(pnm_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn read_ground_truth(root: &Path, split: &str, id: &str) -> Result<GroundTruth> {
    let dir = gt_dir(root, split, id);
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "missing ground truth for {id}: {} is not a directory",
            dir.display()
        )));
    }
    let planes = pnm_files(&dir)?
        .iter()
        .map(|p| read_image(p))
        .collect::<Result<Vec<_>>>()?;
    if planes.is_empty() {
        return Err(CliError::Usage(format!(
            "no annotator maps in {}",
            dir.display()
        )));
    }
    with_path(&dir, GroundTruth::from_planes(&planes))
}

/// One image of a split with its annotations.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub image: ImagePlane,
    pub gt: GroundTruth,
}

pub fn split_ids(root: &Path, split: &str) -> Result<Vec<String>> {
    Ok(pnm_files(&images_dir(root, split))?
        .iter()
        .map(|p| file_id(p))
        .collect())
}

/// Loads every image of a split together with its ground truth, in id order.
pub fn load_split(root: &Path, split: &str) -> Result<Vec<Example>> {
    let files = pnm_files(&images_dir(root, split))?;
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no images in {}",
            images_dir(root, split).display()
        )));
    }
    files
        .par_iter()
        .map(|path| {
            let id = file_id(path);
            let image = read_image(path)?;
            let gt = read_ground_truth(root, split, &id)?;
            if gt.dims() != (image.height(), image.width()) {
                return Err(CliError::Core(contour_core::Error::Shape(format!(
                    "ground truth of {id} is {:?}, image is {}x{}",
                    gt.dims(),
                    image.height(),
                    image.width()
                ))));
            }
            Ok(Example { id, image, gt })
        })
        .collect()
}

pub fn write_scene(root: &Path, split: &str, id: &str, scene: &SynthScene) -> Result<()> {
    let img_dir = images_dir(root, split);
    fs::create_dir_all(&img_dir)?;
    let path = img_dir.join(format!("{id}.ppm"));
    with_path(&path, pnm::write_image(&scene.image, &path, Maxval::Eight))?;
    let gdir = gt_dir(root, split, id);
    fs::create_dir_all(&gdir)?;
    for (k, a) in scene.ground_truth.annotators().iter().enumerate() {
        let path = gdir.join(format!("{k}.pgm"));
        with_path(&path, pnm::write_image(&a.to_plane(), &path, Maxval::Eight))?;
    }
    Ok(())
}
