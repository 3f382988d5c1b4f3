//! JSON file formats.
//!
//! * scene: `{intrinsics, gt_pose, points: [{gt, pred, px, outlier}], seed}`
//! * pose: `{R: [9, row-major], t: [3], convention: "w2c" | "c2w"}`
//! * pose list: `{poses: [{frame, R, t, convention}]}`
//! * weights: `{activation: "tanh-relu", theta: [..]}`
//! * image pair: two gray images, their poses, per-pixel source coordinates
//!   and the target frame's landmark observations.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::adapt::AdaptPair;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::simulator::{GrayImage, Observation, SyntheticImagePair, SyntheticScene};
use crate::weight_fit::WeightParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJson {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub convention: String,
}

impl PoseJson {
    pub fn from_pose(pose: &Pose) -> Self {
        let r = pose.rotation();
        Self {
            r: std::array::from_fn(|k| r[(k / 3, k % 3)]),
            t: [pose.translation().x, pose.translation().y, pose.translation().z],
            convention: "w2c".into(),
        }
    }

    pub fn to_pose(&self) -> Result<Pose> {
        let pose = Pose::new(Matrix3::from_row_slice(&self.r), Vector3::from(self.t))?;
        match self.convention.as_str() {
            "w2c" => Ok(pose),
            "c2w" => Ok(Pose::from_camera_to_world(&pose)),
            other => Err(Error::Parse {
                context: "pose".into(),
                message: format!("field `convention`: expected \"w2c\" or \"c2w\", got {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointJson {
    gt: [f64; 3],
    pred: [f64; 3],
    px: [f64; 2],
    outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneJson {
    intrinsics: CameraIntrinsics,
    gt_pose: PoseJson,
    points: Vec<PointJson>,
    seed: u64,
}

fn vec3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn vec2(v: &Vector2<f64>) -> [f64; 2] {
    [v.x, v.y]
}

fn parse_json<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn scene_to_json(scene: &SyntheticScene) -> String {
    let points = (0..scene.len())
        .map(|i| PointJson {
            gt: vec3(&scene.gt_points[i]),
            pred: vec3(&scene.predicted_coords[i]),
            px: vec2(&scene.pixel_obs[i]),
            outlier: scene.outlier_mask[i],
        })
        .collect();
    to_json(&SceneJson {
        intrinsics: scene.intrinsics,
        gt_pose: PoseJson::from_pose(&scene.gt_pose),
        points,
        seed: scene.seed,
    })
}

/// Parses and validates a scene; fewer than seven points is an error.
pub fn scene_from_json(text: &str, context: &str) -> Result<SyntheticScene> {
    let raw: SceneJson = parse_json(text, context)?;
    raw.intrinsics.validate()?;
    let scene = SyntheticScene {
        gt_points: raw.points.iter().map(|p| Vector3::from(p.gt)).collect(),
        gt_pose: raw.gt_pose.to_pose()?,
        intrinsics: raw.intrinsics,
        predicted_coords: raw.points.iter().map(|p| Vector3::from(p.pred)).collect(),
        pixel_obs: raw.points.iter().map(|p| Vector2::from(p.px)).collect(),
        outlier_mask: raw.points.iter().map(|p| p.outlier).collect(),
        seed: raw.seed,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn read_scene(path: &Path) -> Result<SyntheticScene> {
    scene_from_json(&read(path)?, &path.display().to_string())
}

pub fn pose_to_json(pose: &Pose) -> String {
    to_json(&PoseJson::from_pose(pose))
}

pub fn pose_from_json(text: &str, context: &str) -> Result<Pose> {
    parse_json::<PoseJson>(text, context)?.to_pose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePoseJson {
    pub frame: String,
    #[serde(flatten)]
    pub pose: PoseJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseListJson {
    poses: Vec<FramePoseJson>,
}

pub fn pose_list_to_json(poses: &[(String, Pose)]) -> String {
    to_json(&PoseListJson {
        poses: poses
            .iter()
            .map(|(frame, pose)| FramePoseJson {
                frame: frame.clone(),
                pose: PoseJson::from_pose(pose),
            })
            .collect(),
    })
}

/// Reads either a single pose (frame name = file stem) or a pose list.
pub fn read_poses(path: &Path) -> Result<Vec<(String, Pose)>> {
    let text = read(path)?;
    let context = path.display().to_string();
    let value: serde_json::Value = parse_json(&text, &context)?;
    if value.get("poses").is_some() {
        let list: PoseListJson = parse_json(&text, &context)?;
        list.poses.into_iter().map(|p| Ok((p.frame, p.pose.to_pose()?))).collect()
    } else {
        Ok(vec![(file_stem(path), pose_from_json(&text, &context)?)])
    }
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaJson {
    activation: String,
    theta: Vec<f64>,
}

pub const ACTIVATION_NAME: &str = "tanh-relu";

pub fn theta_to_json(params: &WeightParams) -> String {
    to_json(&ThetaJson {
        activation: ACTIVATION_NAME.into(),
        theta: params.theta.clone(),
    })
}

pub fn theta_from_json(text: &str, context: &str) -> Result<WeightParams> {
    let raw: ThetaJson = parse_json(text, context)?;
    if raw.activation != ACTIVATION_NAME {
        return Err(Error::Parse {
            context: context.into(),
            message: format!("field `activation`: expected {ACTIVATION_NAME:?}, got {:?}", raw.activation),
        });
    }
    WeightParams::new(raw.theta)
}

pub fn read_theta(path: &Path) -> Result<WeightParams> {
    theta_from_json(&read(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageJson {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageJson {
    fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObsJson {
    pred: [f64; 3],
    px: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairJson {
    intrinsics: CameraIntrinsics,
    source_pose: PoseJson,
    target_pose: PoseJson,
    source_image: ImageJson,
    target_image: ImageJson,
    source_coords: Vec<[f64; 3]>,
    obs_intrinsics: CameraIntrinsics,
    target_obs: Vec<ObsJson>,
}

pub fn pair_to_json(pair: &AdaptPair) -> String {
    let im = &pair.images;
    to_json(&PairJson {
        intrinsics: im.intrinsics,
        source_pose: PoseJson::from_pose(&im.source_pose),
        target_pose: PoseJson::from_pose(&im.target_pose),
        source_image: ImageJson::from_image(&im.source_image),
        target_image: ImageJson::from_image(&im.target_image),
        source_coords: im.source_coords.iter().map(vec3).collect(),
        obs_intrinsics: pair.obs_intrinsics,
        target_obs: pair
            .target_obs
            .iter()
            .map(|o| ObsJson {
                pred: vec3(&o.coord),
                px: vec2(&o.pixel),
            })
            .collect(),
    })
}

pub fn pair_from_json(text: &str, context: &str) -> Result<AdaptPair> {
    let raw: PairJson = parse_json(text, context)?;
    raw.intrinsics.validate()?;
    raw.obs_intrinsics.validate()?;
    let source_image = GrayImage::new(raw.source_image.width, raw.source_image.height, raw.source_image.data)?;
    let target_image = GrayImage::new(raw.target_image.width, raw.target_image.height, raw.target_image.data)?;
    let expected = raw.intrinsics.width * raw.intrinsics.height;
    for (name, got) in [
        ("source_image", source_image.data.len()),
        ("target_image", target_image.data.len()),
        ("source_coords", raw.source_coords.len()),
    ] {
        if got != expected {
            return Err(Error::Parse {
                context: context.into(),
                message: format!("field `{name}`: expected {expected} entries for the image size, got {got}"),
            });
        }
    }
    Ok(AdaptPair {
        images: SyntheticImagePair {
            source_image,
            target_image,
            source_pose: raw.source_pose.to_pose()?,
            target_pose: raw.target_pose.to_pose()?,
            source_coords: raw.source_coords.into_iter().map(Vector3::from).collect(),
            intrinsics: raw.intrinsics,
        },
        target_obs: raw
            .target_obs
            .into_iter()
            .map(|o| Observation {
                coord: Vector3::from(o.pred),
                pixel: Vector2::from(o.px),
            })
            .collect(),
        obs_intrinsics: raw.obs_intrinsics,
    })
}

/// `*.json` files of a directory in name order, or the path itself when it
/// is a file.
pub fn json_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_pairs(dir: &Path) -> Result<Vec<AdaptPair>> {
    let files = json_files(dir)?;
    if files.is_empty() {
        return Err(Error::Empty("pair files"));
    }
    files
        .iter()
        .map(|p| pair_from_json(&read(p)?, &p.display().to_string()))
        .collect()
}

/// Serializes any report type as pretty JSON with a trailing newline.
pub fn report_to_json<T: Serialize>(value: &T) -> String {
    to_json(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_scene, SceneParams};

    #[test]
    fn scene_round_trip_is_exact() {
        let sc = generate_scene(&SceneParams::default(), 9).unwrap();
        let text = scene_to_json(&sc);
        let back = scene_from_json(&text, "test").unwrap();
        assert_eq!(back.predicted_coords, sc.predicted_coords);
        assert_eq!(back.pixel_obs, sc.pixel_obs);
        assert_eq!(back.outlier_mask, sc.outlier_mask);
        assert_eq!(scene_to_json(&back), text);
    }

    #[test]
    fn parse_errors_name_line_and_field() {
        let sc = generate_scene(&SceneParams::default(), 9).unwrap();
        let text = scene_to_json(&sc).replacen("\"outlier\"", "\"outlyer\"", 1);
        let msg = scene_from_json(&text, "scene.json").unwrap_err().to_string();
        assert!(msg.contains("line") && msg.contains("outlyer"), "{msg}");
    }

    #[test]
    fn small_scene_rejected() {
        let mut sc = generate_scene(&SceneParams::default(), 9).unwrap();
        for v in [&mut sc.gt_points, &mut sc.predicted_coords] {
            v.truncate(5);
        }
        sc.pixel_obs.truncate(5);
        sc.outlier_mask.truncate(5);
        let err = scene_from_json(&scene_to_json(&sc), "s").unwrap_err();
        assert!(matches!(err, Error::TooFewCorrespondences(5)), "{err}");
    }

    #[test]
    fn pose_conventions() {
        let p = Pose::from_axis_angle(Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, 0.0, 2.0));
        assert_eq!(pose_from_json(&pose_to_json(&p), "p").unwrap(), p);
        let mut c2w = PoseJson::from_pose(&p.camera_to_world());
        c2w.convention = "c2w".into();
        let back = c2w.to_pose().unwrap();
        assert!((back.matrix4() - p.matrix4()).amax() < 1e-12);
        c2w.convention = "xyz".into();
        assert!(c2w.to_pose().is_err());
    }

    #[test]
    fn theta_round_trip() {
        let p = WeightParams::new(vec![1.5, -0.2, 0.0]).unwrap();
        assert_eq!(theta_from_json(&theta_to_json(&p), "t").unwrap(), p);
        assert!(theta_from_json("{\"activation\":\"sigmoid\",\"theta\":[1]}", "t").is_err());
    }
}
